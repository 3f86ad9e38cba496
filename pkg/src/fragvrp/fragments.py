"""Fragment calculus.

A fragment is an ordered task sequence whose first and last entries lie in
V_D + {0} and whose interior tasks carry no temporal dependency.  Its
scheduling freedom is summarized by three numbers: the earliest start of the
end task over all feasible schedules (es), the latest start of the first
task (ls), and the minimum attainable duration between those two starts
(dur).  The recursion below maintains all three along a sequence in O(1)
per extension and is exact for compact schedules, which are sufficient.
"""

from __future__ import annotations

import dataclasses


@dataclasses.dataclass(frozen=True)
class Infeasible:
    reason: str

    def __bool__(self):
        return False


@dataclasses.dataclass(frozen=True)
class ScheduleBounds:
    es: int
    ls: int
    dur: int


@dataclasses.dataclass(frozen=True)
class Fragment:
    tasks: tuple
    cost: int
    demand: int
    bounds: ScheduleBounds

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

    def __len__(self):
        return len(self.tasks)


def initial_bounds(v, inst):
    return ScheduleBounds(int(inst.alpha[v]), int(inst.beta[v]), 0)


def extend_bounds(b, frm, to, inst, start):
    """One step of the (es, ls, dur) recursion, from `frm` to `to`.

    `start` is the first task of the sequence; when {start, to} is a
    dependent pair, `to` closes the fragment and the duration window
    [dmin, dmax] of that pair applies.
    """
    if isinstance(b, Infeasible):
        return b
    t = int(inst.t[frm, to])
    d = int(inst.dur[frm])
    a_to = int(inst.alpha[to])
    b_to = int(inst.beta[to])
    es = max(b.es + d + t, a_to)
    ls = min(b.ls, b_to - t - d - b.dur)
    dur = max(b.dur + d + t, a_to - b.ls)
    if inst.has_dep(start, to):
        if inst.order_forbidden(start, to):
            return Infeasible("dependency forbids %d before %d" % (start, to))
        dmin = inst.dmin(start, to)
        dmax = inst.dmax(start, to)
        if dur < dmin:
            es = max(es, int(inst.alpha[start]) + dmin)
            ls = min(ls, b_to - dmin)
            dur = dmin
        if dur > dmax:
            return Infeasible("minimum duration %d above dependency maximum %d"
                              % (dur, dmax))
    if es > b_to:
        return Infeasible("earliest completion %d after window close %d"
                          % (es, b_to))
    if ls < int(inst.alpha[start]):
        return Infeasible("latest start %d before window open %d"
                          % (ls, int(inst.alpha[start])))
    return ScheduleBounds(es, ls, dur)


def duration_at(f: Fragment, t: int, inst) -> int:
    """Minimum duration of f when its first task starts exactly at t.

    The feasible start domain is [max(alpha_start, es - dmax), ls], the
    dmax term applying only to dependent endpoint pairs.  (The constant-
    then-linear shape: starts in [es - dur, ls] keep the minimum duration,
    earlier starts wait for the end task's release.)
    """
    lo = int(inst.alpha[f.start])
    if inst.has_dep(f.start, f.end):
        lo = max(lo, f.es - inst.dmax(f.start, f.end))
    if t < lo or t > f.ls:
        raise ValueError("start %d outside feasible domain [%d, %d]"
                         % (t, lo, f.ls))
    if t >= f.es - f.dur:
        return f.dur
    return f.es - t


def assemble(seq, inst, bounds) -> Fragment:
    """Fragment record from a sequence with already-computed bounds."""
    cost = 0
    for a, b in zip(seq, seq[1:]):
        cost += int(inst.c[a, b])
    demand = sum(int(inst.dem[v]) for v in seq[:-1])
    return Fragment(tuple(seq), cost, demand, bounds)


def build_fragment(seq, inst):
    """Validates the structural conditions and runs the recursion."""
    seq = tuple(seq)
    if len(seq) < 2:
        return Infeasible("a fragment has at least two nodes")
    endpoints = inst.vd | {0}
    if seq[0] not in endpoints or seq[-1] not in endpoints:
        return Infeasible("fragment endpoints must be dependent tasks or the depot")
    if seq == (0, 0):
        return Infeasible("the empty depot loop is not a fragment")
    nondepot = [v for v in seq if v != 0]
    if len(set(nondepot)) != len(nondepot):
        return Infeasible("repeated task")
    for v in seq[1:-1]:
        if v == 0:
            return Infeasible("depot inside the sequence")
        if v in inst.vd:
            return Infeasible("dependent task %d inside the sequence" % v)
    if sum(int(inst.dem[v]) for v in seq) > inst.Q:
        return Infeasible("total demand above vehicle capacity")
    if inst.alpha[seq[0]] > inst.beta[seq[0]]:
        return Infeasible("start task window is empty")
    b = initial_bounds(seq[0], inst)
    for frm, to in zip(seq, seq[1:]):
        b = extend_bounds(b, frm, to, inst, seq[0])
        if isinstance(b, Infeasible):
            return b
    return assemble(seq, inst, b)
