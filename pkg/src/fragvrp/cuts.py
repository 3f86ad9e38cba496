"""Valid inequalities for the fragment formulation.

Five cut families strengthen the master relaxation:

* FSEC: subtour elimination over sets of dependent tasks, with a
  minimum-vehicle right-hand side computed by route enumeration.
* TIFI: time infeasible fragment inequalities at a single task.
* TDIFI: temporal dependency infeasible fragment inequalities at a
  dependent pair, in four variants (min/max difference per order).
* RCC: rounded capacity constraints counting S-entering arcs.
* FRCC: fragment-based lifting of an RCC (coefficient 1 per entering
  fragment, regardless of how often it enters).

Every cut knows its row coefficient for an arbitrary fragment, so the
master can rebuild rows from fragment data alone.  Separators are pure
functions of the current LP weights and return deterministically ordered
lists of new cuts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .fragments import Fragment
from .instance import Instance
from .scheduling import schedule_routes

EPS = 1e-9

TDIFI_VARIANTS = ("uv-min", "uv-max", "vu-min", "vu-max")


@dataclass(frozen=True)
class FsecCut:
    """sum of fragments with both endpoints in S  <=  |S| - vmin."""

    S: FrozenSet[int]
    vmin: int

    kind = "FSEC"
    sense = "L"
    p_pair: Optional[Tuple[int, int]] = None
    p_coeff: float = 0.0

    @property
    def rhs(self) -> float:
        return float(len(self.S) - self.vmin)

    def key(self):
        return ("FSEC", tuple(sorted(self.S)))

    def completion_coeff(self, start: int, end: int, es: int, ls: int) -> int:
        return 1 if (start in self.S and end in self.S) else 0

    def fragment_coeff(self, f: Fragment) -> int:
        return self.completion_coeff(f.start, f.end, f.es, f.ls)


@dataclass(frozen=True)
class TifiCut:
    """Fragments into v finishing at or after t plus fragments out of v
    that must start before t: at most one of them fits."""

    v: int
    t: int

    kind = "TIFI"
    sense = "L"
    rhs: float = 1.0
    p_pair: Optional[Tuple[int, int]] = None
    p_coeff: float = 0.0

    def key(self):
        return ("TIFI", self.v, self.t)

    def completion_coeff(self, start: int, end: int, es: int, ls: int) -> int:
        c = 0
        if end == self.v and es >= self.t:
            c += 1
        if start == self.v and ls < self.t:
            c += 1
        return c

    def fragment_coeff(self, f: Fragment) -> int:
        return self.completion_coeff(f.start, f.end, f.es, f.ls)


@dataclass(frozen=True)
class TdifiCut:
    """One of the four order-dependent incompatibility rows for a
    dependent pair (u, v), u < v.

    in_task/es_min select ingoing fragments finishing late, out_task and
    ls_max select outgoing fragments forced to start early; strict
    comparisons are folded into the inclusive integer thresholds.
    """

    u: int
    v: int
    variant: str
    t: int
    in_task: int
    es_min: int
    out_task: int
    ls_max: int
    p_coeff: float
    rhs: float

    kind = "TDIFI"
    sense = "L"

    @property
    def p_pair(self) -> Tuple[int, int]:
        return (self.u, self.v)

    def key(self):
        return ("TDIFI", self.u, self.v, self.variant, self.t)

    def completion_coeff(self, start: int, end: int, es: int, ls: int) -> int:
        c = 0
        if end == self.in_task and es >= self.es_min:
            c += 1
        if start == self.out_task and ls <= self.ls_max:
            c += 1
        return c

    def fragment_coeff(self, f: Fragment) -> int:
        return self.completion_coeff(f.start, f.end, f.es, f.ls)


def make_tdifi(u: int, v: int, variant: str, t: int, inst: Instance) -> TdifiCut:
    """Instantiate a TDIFI row; (u, v) must be the canonical pair order."""
    if u > v:
        raise ValueError("pair must be in canonical order")
    if variant == "uv-min":
        # u starting at or after t and v before t + dmin forbids u-first.
        return TdifiCut(u, v, variant, t, in_task=u, es_min=t,
                        out_task=v, ls_max=t + inst.dmin(u, v) - 1,
                        p_coeff=1.0, rhs=2.0)
    if variant == "uv-max":
        # u no later than t and v after t + dmax: incompatible outright.
        return TdifiCut(u, v, variant, t, in_task=v,
                        es_min=t + inst.dmax(u, v) + 1,
                        out_task=u, ls_max=t, p_coeff=0.0, rhs=1.0)
    if variant == "vu-min":
        return TdifiCut(u, v, variant, t, in_task=v, es_min=t,
                        out_task=u, ls_max=t + inst.dmin(v, u) - 1,
                        p_coeff=-1.0, rhs=1.0)
    if variant == "vu-max":
        return TdifiCut(u, v, variant, t, in_task=u,
                        es_min=t + inst.dmax(v, u) + 1,
                        out_task=v, ls_max=t, p_coeff=0.0, rhs=1.0)
    raise ValueError("unknown variant %r" % (variant,))


@dataclass(frozen=True)
class RccCut:
    """Entering-arc rounded capacity constraint: the number of arcs that
    cross into S, weighted by fragment use, is at least ceil(q(S)/Q)."""

    S: FrozenSet[int]
    rhs: float

    kind = "RCC"
    sense = "G"
    p_pair: Optional[Tuple[int, int]] = None
    p_coeff: float = 0.0

    def key(self):
        return ("RCC", tuple(sorted(self.S)))

    def fragment_coeff(self, f: Fragment) -> int:
        S = self.S
        return sum(1 for a, b in zip(f.tasks, f.tasks[1:])
                   if a not in S and b in S)


@dataclass(frozen=True)
class FrccCut:
    """Fragment-based rounded capacity constraint: fragments starting
    outside S and visiting it count once each."""

    S: FrozenSet[int]
    rhs: float

    kind = "FRCC"
    sense = "G"
    p_pair: Optional[Tuple[int, int]] = None
    p_coeff: float = 0.0

    def key(self):
        return ("FRCC", tuple(sorted(self.S)))

    def fragment_coeff(self, f: Fragment) -> int:
        if f.start in self.S:
            return 0
        return 1 if any(task in self.S for task in f.tasks) else 0


def lift_rcc_to_frcc(cut: RccCut) -> FrccCut:
    """Replace arc-entry counting by fragment-entry counting; same set,
    same right-hand side, never weaker."""
    return FrccCut(S=cut.S, rhs=cut.rhs)


def rcc_rhs(S: Iterable[int], inst: Instance) -> int:
    total = sum(int(inst.dem[v]) for v in S)
    return -(-total // inst.Q)


# ---------------------------------------------------------------------------
# Minimum-vehicle computation for FSECs


def _partitions_exact(items: Sequence[int], k: int):
    """All partitions of items into exactly k non-empty blocks."""
    items = list(items)
    if k <= 0 or k > len(items):
        return
    if k == 1:
        yield [list(items)]
        return
    first, rest = items[0], items[1:]
    # Either first sits in its own block or joins a block of a smaller split.
    for part in _partitions_exact(rest, k - 1):
        yield [[first]] + part
    for part in _partitions_exact(rest, k):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


class VminCalculator:
    """Minimum number of vehicles needed to serve a set of tasks.

    Increases k from 1 upward and enumerates all combinations of k routes
    over the set, checking each combination jointly against windows,
    capacity, horizon, and the dependencies restricted to the set.  Returns
    |S| + 1 when no vehicle count suffices.  Results and per-block feasible
    permutations are memoized, so repeated separation rounds stay cheap.
    """

    def __init__(self, inst: Instance):
        self.inst = inst
        self._vmin: Dict[FrozenSet[int], int] = {}
        self._perms: Dict[Tuple[int, ...], List[Tuple[int, ...]]] = {}

    def feasible_perms(self, block: Tuple[int, ...]) -> List[Tuple[int, ...]]:
        key = tuple(sorted(block))
        cached = self._perms.get(key)
        if cached is None:
            if sum(int(self.inst.dem[v]) for v in key) > self.inst.Q:
                cached = []
            else:
                cached = [p for p in itertools.permutations(key)
                          if schedule_routes([list(p)], self.inst)[0]]
            self._perms[key] = cached
        return cached

    def vmin(self, S: Iterable[int]) -> int:
        key = frozenset(S)
        cached = self._vmin.get(key)
        if cached is not None:
            return cached
        tasks = sorted(key)
        result = len(tasks) + 1
        for k in range(1, len(tasks) + 1):
            if self._feasible_with(tasks, k):
                result = k
                break
        self._vmin[key] = result
        return result

    def _feasible_with(self, tasks: List[int], k: int) -> bool:
        for part in _partitions_exact(tasks, k):
            options = [self.feasible_perms(tuple(b)) for b in part]
            if any(not opts for opts in options):
                continue
            for combo in itertools.product(*options):
                ok, _, _ = schedule_routes([list(p) for p in combo], self.inst)
                if ok:
                    return True
        return False


# ---------------------------------------------------------------------------
# Separation routines
#
# Each takes the support of the current LP solution as (fragment, weight)
# pairs with positive weight and returns new violated cuts, skipping keys
# already present in the model.  Output order is deterministic.


def separate_fsec(support: Sequence[Tuple[Fragment, float]], inst: Instance,
                  k_max: int, vmin_calc: VminCalculator, viol_tol: float,
                  existing: Iterable = ()) -> List[FsecCut]:
    """Enumerate S within the dependent tasks up to k_max; a set is worth
    the vmin computation only when its internal fragment weight exceeds 1."""
    existing = set(existing)
    vd = sorted(inst.vd)
    weight: Dict[Tuple[int, int], float] = {}
    for f, x in support:
        if f.start in inst.vd and f.end in inst.vd:
            key = (f.start, f.end)
            weight[key] = weight.get(key, 0.0) + x
    out: List[FsecCut] = []
    for size in range(2, min(k_max, len(vd)) + 1):
        for S in itertools.combinations(vd, size):
            inside = sum(w for (a, b), w in weight.items()
                         if a in S and b in S)
            if inside <= 1.0 + EPS:
                continue
            cut = FsecCut(S=frozenset(S), vmin=vmin_calc.vmin(S))
            if cut.key() in existing:
                continue
            if inside > cut.rhs + viol_tol:
                out.append(cut)
    out.sort(key=lambda c: c.key())
    return out


def separate_tifi(support: Sequence[Tuple[Fragment, float]], inst: Instance,
                  viol_tol: float, existing: Iterable = ()) -> List[TifiCut]:
    """At most one cut per dependent task, the most violated over the
    candidate time points (earliest completions of ingoing fragments)."""
    existing = set(existing)
    incoming: Dict[int, List[Tuple[Fragment, float]]] = {}
    outgoing: Dict[int, List[Tuple[Fragment, float]]] = {}
    for f, x in support:
        if f.end in inst.vd:
            incoming.setdefault(f.end, []).append((f, x))
        if f.start in inst.vd:
            outgoing.setdefault(f.start, []).append((f, x))
    out: List[TifiCut] = []
    for v in sorted(inst.vd):
        cands = sorted({f.es for f, _ in incoming.get(v, ())})
        best = None
        for t in cands:
            lhs = sum(x for f, x in incoming.get(v, ()) if f.es >= t)
            lhs += sum(x for f, x in outgoing.get(v, ()) if f.ls < t)
            viol = lhs - 1.0
            if viol > viol_tol and (best is None or viol > best[0] + EPS):
                cut = TifiCut(v=v, t=int(t))
                if cut.key() not in existing:
                    best = (viol, cut)
        if best is not None:
            out.append(best[1])
    return out


def separate_tdifi(support: Sequence[Tuple[Fragment, float]],
                   p_vals: Dict[Tuple[int, int], float], inst: Instance,
                   viol_tol: float, existing: Iterable = ()) -> List[TdifiCut]:
    """At most one cut per dependent pair: the most violated among the
    four variants over their respective candidate time points."""
    existing = set(existing)
    incoming: Dict[int, List[Tuple[Fragment, float]]] = {}
    outgoing: Dict[int, List[Tuple[Fragment, float]]] = {}
    for f, x in support:
        if f.end in inst.vd:
            incoming.setdefault(f.end, []).append((f, x))
        if f.start in inst.vd:
            outgoing.setdefault(f.start, []).append((f, x))
    out: List[TdifiCut] = []
    for dep in inst.deps:
        u, v = dep.u, dep.v
        pv = p_vals.get((u, v), 0.0)
        cand = {
            "uv-min": sorted({f.es for f, _ in incoming.get(u, ())}),
            "uv-max": sorted({f.ls for f, _ in outgoing.get(u, ())}),
            "vu-min": sorted({f.es for f, _ in incoming.get(v, ())}),
            "vu-max": sorted({f.ls for f, _ in outgoing.get(v, ())}),
        }
        best = None
        for variant in TDIFI_VARIANTS:
            for t in cand[variant]:
                cut = make_tdifi(u, v, variant, int(t), inst)
                lhs = cut.p_coeff * pv
                lhs += sum(x for f, x in incoming.get(cut.in_task, ())
                           if f.es >= cut.es_min)
                lhs += sum(x for f, x in outgoing.get(cut.out_task, ())
                           if f.ls <= cut.ls_max)
                viol = lhs - cut.rhs
                if viol > viol_tol and (best is None or viol > best[0] + EPS):
                    if cut.key() not in existing:
                        best = (viol, cut)
        if best is not None:
            out.append(best[1])
    return out


def _entering_weight(support, S) -> float:
    lhs = 0.0
    for f, x in support:
        cnt = sum(1 for a, b in zip(f.tasks, f.tasks[1:])
                  if a not in S and b in S)
        if cnt:
            lhs += cnt * x
    return lhs


def separate_rcc(support: Sequence[Tuple[Fragment, float]], inst: Instance,
                 viol_tol: float, existing: Iterable = (),
                 max_new: Optional[int] = None) -> List[RccCut]:
    """Heuristic separation: seed candidate sets from the connected
    components of the undirected support graph over tasks, then improve
    each by single-task exchanges while the violation grows."""
    existing = set(existing)
    if max_new is not None and max_new <= 0:
        return []
    adj: Dict[int, set] = {v: set() for v in range(1, inst.n + 1)}
    for f, x in support:
        for a, b in zip(f.tasks, f.tasks[1:]):
            if a != 0 and b != 0:
                adj[a].add(b)
                adj[b].add(a)

    def violation(S: set) -> float:
        return rcc_rhs(S, inst) - _entering_weight(support, S)

    seen: set = set()
    seeds: List[Tuple[int, ...]] = []
    for root in range(1, inst.n + 1):
        if root in seen:
            continue
        comp = {root}
        stack = [root]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in comp:
                    comp.add(nxt)
                    stack.append(nxt)
        seen |= comp
        seeds.append(tuple(sorted(comp)))

    out: List[RccCut] = []
    emitted = set()
    for seed in seeds:
        S = set(seed)
        viol = violation(S)
        # Single-task exchanges, best-improvement, bounded walk.
        for _ in range(2 * inst.n):
            best = None
            for j in sorted(set(range(1, inst.n + 1)) - S):
                cand = violation(S | {j})
                if cand > viol + EPS and (best is None or cand > best[0] + EPS):
                    best = (cand, j, True)
            if len(S) > 1:
                for j in sorted(S):
                    cand = violation(S - {j})
                    if cand > viol + EPS and (best is None or cand > best[0] + EPS):
                        best = (cand, j, False)
            if best is None:
                break
            viol = best[0]
            if best[2]:
                S.add(best[1])
            else:
                S.discard(best[1])
        if viol > viol_tol:
            cut = RccCut(S=frozenset(S), rhs=float(rcc_rhs(S, inst)))
            if cut.key() not in existing and cut.key() not in emitted:
                emitted.add(cut.key())
                out.append(cut)
    out.sort(key=lambda c: c.key())
    if max_new is not None:
        out = out[:max_new]
    return out
