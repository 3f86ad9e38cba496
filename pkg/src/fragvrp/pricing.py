"""Column pricing by forward labeling over incomplete fragments.

A fragment's reduced cost decomposes into three parts: arc costs net of
the assignment and flow prices (with capacity-cut prices folded into the
arcs they cross), a start-side credit for the vehicle and flow rows, and
a completion charge collecting every price whose row coefficient depends
on the finished schedule summary (es, ls, dur) or on the demand.  Labels
extend one task at a time through the same (es, ls, dur) recursion as
the fragment calculus, so a priced column and the column the master
builds for the same sequence agree to the last unit.

Elementarity is relaxed to ng form: a label remembers a visited task
only while it stays inside the neighborhood of the tasks appended after
it.  Neighborhoods never contain dependent tasks; a cycle through one
cannot occur inside a fragment anyway, so nothing is lost.  Dominance
keeps, per (start, end) bucket, the labels not beaten on every resource.
A label beaten everywhere but on reduced cost is still discarded when
its advantage cannot survive any completion, see completion_bound.
"""

from __future__ import annotations

import dataclasses
import heapq
from typing import Dict, Iterable, List, Tuple

import numpy as np

from .cuts import FrccCut, RccCut
from .fragments import (Fragment, Infeasible, ScheduleBounds, assemble,
                        extend_bounds, initial_bounds)
from .instance import Instance, SolverConfig
from .master import DualValues


@dataclasses.dataclass(frozen=True)
class Label:
    """A fragment under construction, plus its accumulated reduced cost.

    `mem` is the ng-projected visited set and holds dependency-free
    interior tasks only; `load` is the demand of tasks[:-1], so for a
    complete label it equals the fragment demand.
    """

    tasks: tuple
    mem: frozenset
    load: int
    bounds: ScheduleBounds
    rcost: float

    @property
    def start(self):
        return self.tasks[0]

    @property
    def end(self):
        return self.tasks[-1]

    @property
    def es(self):
        return self.bounds.es

    @property
    def ls(self):
        return self.bounds.ls

    @property
    def dur(self):
        return self.bounds.dur

    @property
    def demand(self):
        return self.load

    def __len__(self):
        return len(self.tasks)


def is_complete(lab: Label, inst: Instance) -> bool:
    return len(lab.tasks) >= 2 and (lab.end == 0 or lab.end in inst.vd)


def interior_tasks(inst: Instance) -> list:
    return [v for v in range(1, inst.n + 1) if v not in inst.vd]


def ng_neighborhoods(inst: Instance, ng_size: int) -> dict:
    """Per dependency-free task, the ng_size nearest such tasks by travel
    cost (ties by index).  Dependent tasks are excluded throughout."""
    pool = interior_tasks(inst)
    hoods = {}
    for u in pool:
        ranked = sorted((int(inst.c[u, w]), w) for w in pool if w != u)
        hoods[u] = frozenset(w for _, w in ranked[: max(0, int(ng_size))])
    return hoods


def exact_memory(inst: Instance) -> dict:
    """Neighborhoods so wide the memory never forgets: elementary labeling."""
    full = frozenset(interior_tasks(inst))
    return {u: full for u in full}


class CostEnv:
    """Dual prices rearranged for labeling.

    cbar[i, j] is the reduced arc cost: travel cost minus the assignment
    price of i and the flow price of a dependent j, minus the price of
    every capacity cut whose set the arc enters.  Completion charges and
    the start-side credit are evaluated on demand.

    Fragment-capacity rows have no arc or completion form; a price on one
    rejects the environment, such masters are priced column-wise instead.
    """

    def __init__(self, duals: DualValues, inst: Instance):
        self.inst = inst
        self.duals = duals
        cbar = inst.c.astype(float)
        cbar[1:, :] -= np.asarray(duals.mu, dtype=float)[1:, None]
        for v, ev in duals.eta.items():
            cbar[:, v] -= ev
        self.completion_duals = []
        for cut, y in duals.cut_duals:
            if y == 0.0:
                continue
            if isinstance(cut, FrccCut):
                raise ValueError("a fragment-capacity row cannot be priced "
                                 "by labeling; evaluate columns directly")
            if isinstance(cut, RccCut):
                inside = np.zeros(inst.n + 1, dtype=bool)
                inside[list(cut.S)] = True
                cbar[np.ix_(~inside, inside)] -= y
            else:
                self.completion_duals.append((cut, y))
        self.cbar = cbar

    def init_cost(self, v: int) -> float:
        if v == 0:
            return -self.duals.gamma
        return self.duals.eta.get(v, 0.0)

    def completion_charge(self, start, end, es, ls, dur, load) -> float:
        inst, d = self.inst, self.duals
        th = 0.0
        if start in inst.vd:
            th += load * d.kap_ub.get(start, 0.0)
            th -= ls * d.tau_ub.get(start, 0.0)
        if end in inst.vd:
            th += es * d.tau_lb.get(end, 0.0)
            th += load * d.kap_lb.get(end, 0.0)
            if start in inst.vd:
                key = (start, end)
                th -= (dur + int(inst.beta[start]) - int(inst.alpha[end])) \
                    * d.rho.get(key, 0.0)
                th -= (inst.Q - int(inst.dem[start]) + load) \
                    * d.lam.get(key, 0.0)
        for cut, y in self.completion_duals:
            th -= y * cut.completion_coeff(start, end, es, ls)
        return th


def completion_cost(f, duals: DualValues, inst: Instance, env=None) -> float:
    """Schedule- and load-dependent part of a finished fragment's reduced
    cost.  Accepts a Fragment or a complete Label."""
    if len(f.tasks) < 2 or (f.end != 0 and f.end not in inst.vd):
        raise ValueError("completion cost is defined for complete fragments")
    if env is None:
        env = CostEnv(duals, inst)
    return env.completion_charge(f.start, f.end, f.es, f.ls, f.dur, f.demand)


def extend_label(lab: Label, u: int, duals: DualValues, ng: dict,
                 inst: Instance, env=None):
    """One forward extension of an incomplete label.

    Check order: structural rules (start revisit, empty depot loop, ng
    memory), capacity, the (es, ls, dur) recursion with its dependent
    duration clamp, then the explicit window system: ls within the start
    window, es within the end window, ls + dur and es - dur inside the
    span.  The last two hold by construction and are enforced anyway.
    Appending a dependent task or the depot completes the label and adds
    the completion charge; the start-side credit is part of the initial
    label.
    """
    if is_complete(lab, inst):
        raise ValueError("complete labels are not extended")
    if u == lab.start and not (u == 0 and len(lab.tasks) >= 2):
        return Infeasible("start task revisited")
    closing = u == 0 or u in inst.vd
    if not closing and u in lab.mem:
        return Infeasible("task held in the ng memory")
    load = lab.load + int(inst.dem[lab.end])
    if load + int(inst.dem[u]) > inst.Q:
        return Infeasible("capacity exceeded")
    b = extend_bounds(lab.bounds, lab.end, u, inst, lab.start)
    if isinstance(b, Infeasible):
        return b
    a_s = int(inst.alpha[lab.start])
    b_s = int(inst.beta[lab.start])
    a_u = int(inst.alpha[u])
    b_u = int(inst.beta[u])
    if not (a_s <= b.ls <= b_s and a_u <= b.es <= b_u):
        return Infeasible("schedule summary left the endpoint windows")
    if b.ls + b.dur > b_u or b.es - b.dur < a_s:
        return Infeasible("duration incompatible with the endpoint windows")
    if env is None:
        env = CostEnv(duals, inst)
    rc = lab.rcost + float(env.cbar[lab.end, u])
    if closing:
        rc += env.completion_charge(lab.start, u, b.es, b.ls, b.dur, load)
        mem = lab.mem
    else:
        mem = (lab.mem & ng.get(u, frozenset())) | frozenset((u,))
    return Label(lab.tasks + (u,), mem, load, b, rc)


def fragment_reduced_cost(f: Fragment, duals: DualValues, inst: Instance,
                          env=None) -> float:
    """Reduced cost of a finished fragment: start credit, arc walk,
    completion charge.  Agrees with the master's column evaluation."""
    if env is None:
        env = CostEnv(duals, inst)
    rc = env.init_cost(f.start)
    for a, b in zip(f.tasks, f.tasks[1:]):
        rc += float(env.cbar[a, b])
    rc += env.completion_charge(f.start, f.end, f.es, f.ls, f.dur, f.demand)
    return rc


# --- dominance -----------------------------------------------------------

def _implied_latest_start(g: Label, inst: Instance) -> int:
    """Smallest latest start any dependent completion can force on g.

    Ranges over the dependency partners of g's start that g could still
    reach: the order not forbidden, the partner's window reachable from
    es and from the start window under the pair's minimum offset, the
    duration cap respected, capacity kept.  Each such partner u caps the
    start at beta_u minus the pair's minimum offset."""
    s, e = g.start, g.end
    best = int(inst.beta[s])
    d_e = int(inst.dur[e])
    for u in inst.dep_adj.get(s, ()):
        if inst.order_forbidden(s, u):
            continue
        b_u = int(inst.beta[u])
        travel = int(inst.t[e, u])
        if g.es + d_e + travel > b_u:
            continue
        dmin = inst.dmin(s, u)
        if int(inst.alpha[s]) + dmin > b_u:
            continue
        if max(g.dur + d_e + travel, int(inst.alpha[u]) - g.ls) \
                > inst.dmax(s, u):
            continue
        if g.load + int(inst.dem[u]) > inst.Q:
            continue
        best = min(best, b_u - dmin)
    return best


def _phi(f: Label, g: Label, duals: DualValues, inst: Instance) -> float:
    s = f.start
    tau = duals.tau_ub.get(s, 0.0)
    kap = duals.kap_ub.get(s, 0.0)
    if tau == 0.0 and kap == 0.0:
        return 0.0
    lam_min = _implied_latest_start(g, inst)
    ls_term = min(f.ls, g.ls + g.dur - f.dur, max(g.ls, lam_min)) - g.ls
    return ls_term * tau + (g.load - f.load) * kap


def completion_bound(f: Label, g: Label, duals: DualValues,
                     inst: Instance) -> float:
    """Lower bound on the completion-charge gap between g and f when f
    beats g on every resource but reduced cost.

    The ls term anticipates the worst clamp a dependent completion could
    still apply to g's latest start; the load term is exact.  Charges of
    the infeasible-interval cut families only widen the gap (their
    coefficients grow along the dominance order while their row prices
    are nonpositive), so they contribute zero here.
    """
    if f.start != g.start or f.end != g.end:
        raise ValueError("labels must share both endpoints")
    if not (f.mem <= g.mem and f.load <= g.load and f.es <= g.es
            and f.ls >= g.ls and f.dur <= g.dur):
        raise ValueError("resource dominance does not hold in favor of f")
    return _phi(f, g, duals, inst)


def _dominates(f: Label, g: Label, duals: DualValues, inst: Instance) -> bool:
    """Every completion of g is matched by f at no larger reduced cost."""
    if f.dur > g.dur or f.ls < g.ls or f.es > g.es or f.load > g.load:
        return False
    if not f.mem <= g.mem:
        return False
    if f.rcost <= g.rcost:
        return True
    return f.rcost <= g.rcost + _phi(f, g, duals, inst)


# --- the labeling loop ---------------------------------------------------

def _heap_key(lab: Label):
    # non-decreasing dur keeps dominators ahead of the labels they beat
    return (lab.dur, lab.rcost, len(lab.tasks), lab.tasks)


def _insert(buckets, heap, lab, duals, inst) -> None:
    bucket = buckets.setdefault(lab.end, {})
    for kept in bucket.values():
        if _dominates(kept, lab, duals, inst):
            return
    doomed = [seq for seq, kept in bucket.items()
              if _dominates(lab, kept, duals, inst)]
    for seq in doomed:
        del bucket[seq]
    bucket[lab.tasks] = lab
    heapq.heappush(heap, _heap_key(lab) + (lab,))


def labels_from(start: int, env: CostEnv, ng: dict, inst: Instance,
                duals: DualValues) -> List[Label]:
    """All complete labels grown from one start task, dominance pruned.

    Deterministic: the queue pops in (dur, rcost, length, sequence)
    order and candidate tasks are scanned by index."""
    if int(inst.alpha[start]) > int(inst.beta[start]):
        return []
    init = Label((start,), frozenset(), 0, initial_bounds(start, inst),
                 env.init_cost(start))
    heap: list = []
    buckets: Dict[int, Dict[tuple, Label]] = {}
    done: List[Label] = []
    _insert(buckets, heap, init, duals, inst)
    while heap:
        entry = heapq.heappop(heap)
        lab = entry[-1]
        bucket = buckets.get(lab.end)
        if bucket is None or bucket.get(lab.tasks) is not lab:
            continue
        for u in range(inst.n + 1):
            child = extend_label(lab, u, duals, ng, inst, env=env)
            if isinstance(child, Infeasible):
                continue
            if is_complete(child, inst):
                done.append(child)
            else:
                _insert(buckets, heap, child, duals, inst)
    return done


def _output_order(lab: Label):
    return (lab.rcost, len(lab.tasks), lab.tasks)


def solve_pricing(duals: DualValues, inst: Instance,
                  cfg: SolverConfig, ng=None) -> List[Fragment]:
    """Fragments with strictly negative reduced cost under the current
    prices: at most cfg.cols_per_iter, always containing a cheapest one
    for every start task that has any.  An empty result certifies that
    no ng-relaxed fragment prices negative, so the master value is a
    valid relaxation bound."""
    env = CostEnv(duals, inst)
    if ng is None:
        ng = ng_neighborhoods(inst, cfg.ng_size)
    tol = cfg.lp_tolerance
    negatives: List[Label] = []
    for s in [0] + sorted(inst.vd):
        for lab in labels_from(s, env, ng, inst, duals):
            if lab.rcost < -tol:
                negatives.append(lab)
    negatives.sort(key=_output_order)
    lead: List[Label] = []
    rest: List[Label] = []
    seen = set()
    for lab in negatives:
        if lab.start in seen:
            rest.append(lab)
        else:
            seen.add(lab.start)
            lead.append(lab)
    chosen = (lead + rest)[: max(0, int(cfg.cols_per_iter))]
    chosen.sort(key=_output_order)
    return [assemble(lab.tasks, inst, lab.bounds) for lab in chosen]
