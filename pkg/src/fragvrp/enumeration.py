"""Exhaustive fragment enumeration within a reduced-cost budget.

After column generation settles, every fragment whose reduced cost stays
within the gap between the candidate upper bound and the relaxation value
might still appear in an improving solution, so all of them are listed.
Unlike pricing, the search must be complete: elementarity is exact (no ng
forgetting) and no label is discarded on cost grounds.  The only pruning
is an admissible completion bound: a branch dies when its accumulated
reduced cost plus a provable lower bound on the cheapest way to finish
already exceeds the budget, which no completion of the branch can undo.

Two reduction passes follow.  The route bound removes fragments that no
schedulable predecessor/successor pair can embed in a route within the
budget, iterated to a fixed point.  The re-solve pass rebuilds the master
over the surviving set (capacity cuts lifted to their fragment form),
prices every column against the fresh duals, and drops those above the
new, usually tighter, budget.
"""

from __future__ import annotations

import struct
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .fragments import Fragment, Infeasible, assemble, initial_bounds
from .instance import Instance, SolverConfig
from .master import DualValues, MasterError, MasterModel
from .pricing import CostEnv, Label, exact_memory, extend_label, is_complete


class LimitExceeded(Exception):
    """Raised when the enumeration would keep more than f_max fragments."""

    def __init__(self, count: int):
        super().__init__("fragment limit reached at %d" % count)
        self.count = count


class _CompletionLB:
    """Admissible lower bounds on the cost still to come for a partial
    label: one reduced arc per departure the suffix can still make, the
    start-side charge terms evaluated at their best reachable values, a
    per-start minimum over all possible end-side charges, and the worst
    the cut charges can contribute (zero unless a row price has the
    wrong sign).

    Sound for any dual signs; with correctly signed prices the end-side
    and cut terms collapse to zero or small negatives.
    """

    def __init__(self, env: CostEnv, inst: Instance):
        self.env = env
        self.inst = inst
        d = env.duals
        n = inst.n
        cbar = env.cbar
        off = cbar + np.where(np.eye(n + 1, dtype=bool), np.inf, 0.0)
        self.neg_out = np.minimum(off.min(axis=1), 0.0)
        self.interior = [v for v in range(1, n + 1) if v not in inst.vd]
        self.total_interior = float(sum(self.neg_out[v] for v in self.interior))
        self.cut_pen = -2.0 * sum(max(0.0, y)
                                  for _, y in env.completion_duals)
        ends = [0] + sorted(inst.vd)
        self.end_lb: Dict[int, float] = {}
        for s in [0] + sorted(inst.vd):
            best = 0.0
            for v in ends:
                if v == s and v != 0:
                    continue
                term = 0.0
                if v in inst.vd:
                    tlb = d.tau_lb.get(v, 0.0)
                    term += int(inst.alpha[v]) * tlb if tlb >= 0 \
                        else int(inst.beta[v]) * tlb
                    klb = d.kap_lb.get(v, 0.0)
                    term += min(0.0, inst.Q * klb)
                    if s in inst.vd:
                        rho = d.rho.get((s, v), 0.0)
                        if rho > 0:
                            term -= (inst.tmax + int(inst.beta[s])
                                     - int(inst.alpha[v])) * rho
                        lam = d.lam.get((s, v), 0.0)
                        if lam > 0:
                            term -= 2 * inst.Q * lam
                best = min(best, term)
            self.end_lb[s] = best

    def start_terms(self, lab: Label) -> float:
        d = self.env.duals
        s = lab.start
        out = 0.0
        kap = d.kap_ub.get(s, 0.0)
        out += lab.load * kap if kap >= 0 else self.inst.Q * kap
        tau = d.tau_ub.get(s, 0.0)
        out += -lab.ls * tau if tau >= 0 else -int(self.inst.alpha[s]) * tau
        return out

    def remaining(self, lab: Label) -> float:
        arcs = float(self.neg_out[lab.end]) + self.total_interior \
            - float(sum(self.neg_out[v] for v in lab.mem))
        return arcs + self.start_terms(lab) + self.end_lb[lab.start] \
            + self.cut_pen


def enumerate_fragments(duals: DualValues, gap: float, inst: Instance,
                        cfg: SolverConfig) -> List[Fragment]:
    """Every elementary fragment whose reduced cost is at most gap.

    Complete by construction: the depth-first search discards a branch
    only on the admissible bound above, and a finished label only by its
    own reduced cost.  Raises LimitExceeded past cfg.f_max kept
    fragments.  Output sorted by task sequence.
    """
    if gap < 0:
        raise ValueError("the enumeration budget must be nonnegative")
    env = CostEnv(duals, inst)
    ng = exact_memory(inst)
    bound = _CompletionLB(env, inst)
    tol = cfg.lp_tolerance
    kept: List[Tuple[tuple, Label]] = []
    stack: List[Label] = []
    for s in sorted((0,) if not inst.vd else (0, *sorted(inst.vd)),
                    reverse=True):
        if int(inst.alpha[s]) > int(inst.beta[s]):
            continue
        lab = Label((s,), frozenset(), 0, initial_bounds(s, inst),
                    env.init_cost(s))
        if lab.rcost + bound.remaining(lab) <= gap + tol:
            stack.append(lab)
    while stack:
        lab = stack.pop()
        for u in range(inst.n, -1, -1):
            child = extend_label(lab, u, duals, ng, inst, env=env)
            if isinstance(child, Infeasible):
                continue
            if is_complete(child, inst):
                if child.rcost <= gap + tol:
                    kept.append((child.tasks, child))
                    if len(kept) > cfg.f_max:
                        raise LimitExceeded(len(kept))
            elif child.rcost + bound.remaining(child) <= gap + tol:
                stack.append(child)
    kept.sort(key=lambda p: p[0])
    return [assemble(seq, inst, lab.bounds) for seq, lab in kept]


def reduce_by_route_bound(frags: Sequence[Fragment], duals: DualValues,
                          gap: float, inst: Instance,
                          tol: float = 1e-6) -> List[Fragment]:
    """Keeps fragments embeddable in a route within the budget.

    A route through F = (u, ..., v) pays at least the cheapest fragment
    ending at u that can be scheduled before F (earliest start at u not
    after F's latest start) and the cheapest one starting at v schedulable
    after it; depot ends need no neighbor.  Removing a fragment can only
    raise the neighbors' bounds, so the pass iterates to a fixed point.
    """
    env = CostEnv(duals, inst)
    alive: Dict[tuple, Fragment] = {f.tasks: f for f in frags}
    rc = {f.tasks: float(env.init_cost(f.start)
                         + sum(float(env.cbar[a, b])
                               for a, b in zip(f.tasks, f.tasks[1:]))
                         + env.completion_charge(f.start, f.end, f.es, f.ls,
                                                 f.dur, f.demand))
          for f in frags}
    while True:
        by_end: Dict[int, List[Fragment]] = {}
        by_start: Dict[int, List[Fragment]] = {}
        for f in alive.values():
            by_end.setdefault(f.end, []).append(f)
            by_start.setdefault(f.start, []).append(f)
        doomed = []
        for f in alive.values():
            pred = 0.0
            if f.start != 0:
                pred = min((rc[g.tasks] for g in by_end.get(f.start, ())
                            if g.es <= f.ls), default=float("inf"))
            succ = 0.0
            if f.end != 0:
                succ = min((rc[g.tasks] for g in by_start.get(f.end, ())
                            if g.ls >= f.es), default=float("inf"))
            if rc[f.tasks] + pred + succ > gap + tol:
                doomed.append(f.tasks)
        if not doomed:
            break
        for seq in doomed:
            del alive[seq]
    return [alive[seq] for seq in sorted(alive)]


def reduce_by_resolve(frags: Sequence[Fragment], master: MasterModel,
                      ub_cand: float, keep: Iterable[tuple] = ()):
    """Re-solves the master holding frags (plus whatever it already has)
    and filters by the refreshed reduced costs.

    Returns (kept fragments, duals, objective).  The budget becomes
    ub_cand minus the new objective; fragments listed in `keep` survive
    regardless, incumbent solutions must stay representable.
    """
    master.add_fragments(frags)
    sol = master.solve_relaxation()
    if sol.status != "optimal":
        raise MasterError("re-solve after enumeration: %s" % sol.status)
    lb = sol.objective
    budget = ub_cand - lb
    tol = master.cfg.lp_tolerance
    protect = set(keep)
    out = [f for f in frags
           if f.tasks in protect
           or master.reduced_cost_of(f, sol.duals) <= budget + tol]
    return out, sol.duals, lb


# --- debugging aid --------------------------------------------------------

def dump_fragments(frags: Sequence[Fragment], path: str) -> None:
    """Count-prefixed task sequences, little-endian int32."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<i", len(frags)))
        for f in frags:
            fh.write(struct.pack("<i", len(f.tasks)))
            fh.write(struct.pack("<%di" % len(f.tasks), *f.tasks))


def read_fragment_sequences(path: str) -> List[tuple]:
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<i", fh.read(4))
        out = []
        for _ in range(count):
            (ln,) = struct.unpack("<i", fh.read(4))
            out.append(struct.unpack("<%di" % ln, fh.read(4 * ln)))
        return out
