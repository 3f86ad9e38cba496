"""Shared brute-force oracles and generators for the test suite.

Everything here recomputes quantities from first principles (integer
enumeration over small horizons) so the package code can be checked against
independent ground truth.
"""

from __future__ import annotations

import itertools

import numpy as np

from fragvrp.instance import (Instance, Task, TemporalDependency,
                              dependency_from_type, instance_from_dict)

SIX_KINDS = ("synchronization", "min-diff", "max-diff", "minmax-diff",
             "overlap", "non-overlap")


# --- fragment schedule oracle -------------------------------------------

def enumerate_schedules(seq, inst):
    """All integer start vectors of `seq` satisfying windows, chaining and
    the endpoint dependency window.  Exponential; keep horizons tiny."""
    seq = list(seq)
    n = len(seq)
    out = []
    s, e = seq[0], seq[-1]
    dep = inst.has_dep(s, e)
    if dep and inst.order_forbidden(s, e):
        return out

    def rec(i, prefix):
        if i == n:
            if dep:
                diff = prefix[-1] - prefix[0]
                if not (inst.dmin(s, e) <= diff <= inst.dmax(s, e)):
                    return
            out.append(tuple(prefix))
            return
        v = seq[i]
        lo = int(inst.alpha[v])
        if i:
            p = seq[i - 1]
            lo = max(lo, prefix[-1] + int(inst.dur[p]) + int(inst.t[p, v]))
        for b in range(lo, int(inst.beta[v]) + 1):
            prefix.append(b)
            rec(i + 1, prefix)
            prefix.pop()

    rec(0, [])
    return out


def schedule_summary(seq, inst):
    """(es, ls, dur) recomputed by exhaustive schedule enumeration, or None
    when no schedule exists."""
    scheds = enumerate_schedules(seq, inst)
    if not scheds:
        return None
    es = min(sc[-1] for sc in scheds)
    ls = max(sc[0] for sc in scheds)
    dur = min(sc[-1] - sc[0] for sc in scheds)
    return es, ls, dur


def duration_at_oracle(seq, inst, t):
    """Minimum duration over all schedules starting exactly at t, or None."""
    durs = [sc[-1] - sc[0] for sc in enumerate_schedules(seq, inst)
            if sc[0] == t]
    return min(durs) if durs else None


def _forward_earliest(seq, inst, t):
    """Earliest start per position when seq[0] starts at t; None if the
    chain leaves some window."""
    if not (inst.alpha[seq[0]] <= t <= inst.beta[seq[0]]):
        return None
    out = [t]
    b = t
    for p, v in zip(seq, seq[1:]):
        b = max(b + int(inst.dur[p]) + int(inst.t[p, v]), int(inst.alpha[v]))
        if b > inst.beta[v]:
            return None
        out.append(b)
    return out


def _end_range(seq, inst, t):
    """Feasible end-start values for a fixed first start t, or None.

    Interior tasks start as early as possible; only the end task is ever
    delayed, which is sufficient because every constraint on it is a lower
    bound except its own window and the dependency maximum.
    """
    s, e = seq[0], seq[-1]
    dep = inst.has_dep(s, e)
    if dep and inst.order_forbidden(s, e):
        return None
    ear = _forward_earliest(seq, inst, t)
    if ear is None:
        return None
    lo = ear[-1]
    hi = int(inst.beta[e])
    if dep:
        lo = max(lo, t + inst.dmin(s, e))
        hi = min(hi, t + inst.dmax(s, e))
    return (lo, hi) if lo <= hi else None


def discretized_summary(seq, inst):
    """(es, ls, dur) by looping the first start over its whole window."""
    s = seq[0]
    es = ls = dur = None
    for t in range(int(inst.alpha[s]), int(inst.beta[s]) + 1):
        rng = _end_range(seq, inst, t)
        if rng is None:
            continue
        es = rng[0] if es is None else min(es, rng[0])
        ls = t
        d = rng[0] - t
        dur = d if dur is None else min(dur, d)
    return None if es is None else (es, ls, dur)


def discretized_duration_at(seq, inst, t):
    rng = _end_range(seq, inst, t)
    return None if rng is None else rng[0] - t


# --- random instance generation -----------------------------------------

def random_instance(rng, n_tasks=None, n_deps=None, kinds=SIX_KINDS,
                    horizon=None, grid=12):
    """Small random instance with euclidean (rounded up) travel."""
    n = int(n_tasks if n_tasks is not None else rng.integers(4, 9))
    T = int(horizon if horizon is not None else rng.integers(40, 80))
    Q = int(rng.integers(15, 40))
    K = int(rng.integers(2, 4))
    coords = rng.integers(0, grid, size=(n + 1, 2))
    tasks = [{"id": 0, "x": int(coords[0][0]), "y": int(coords[0][1]),
              "alpha": 0, "beta": T, "duration": 0, "demand": 0}]
    for v in range(1, n + 1):
        a = int(rng.integers(0, (2 * T) // 3))
        width = int(rng.integers(T // 6, T // 2))
        # durations >= 1 keep dependent same-route tasks strictly ordered
        tasks.append({"id": v, "x": int(coords[v][0]), "y": int(coords[v][1]),
                      "alpha": a, "beta": min(a + width, T),
                      "duration": int(rng.integers(1, 5)),
                      "demand": int(rng.integers(0, max(2, Q // 3)))})
    data = {"horizon": T, "capacity": Q, "vehicle_count": K, "tasks": tasks,
            "dependencies": []}
    inst = instance_from_dict(data)
    m = int(n_deps if n_deps is not None else rng.integers(1, 4))
    deps = []
    used = set()
    guard = 0
    while len(deps) < m and guard < 200:
        guard += 1
        u, v = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        u, v = int(u), int(v)
        if frozenset((u, v)) in used:
            continue
        kind = kinds[int(rng.integers(0, len(kinds)))]
        dmax = int(rng.integers(0, max(1, T // 2)))
        dmin = int(rng.integers(0, dmax + 1))
        try:
            dep = dependency_from_type(kind, u, v, inst,
                                       delta_min=dmin, delta_max=dmax)
        except ValueError:
            continue
        deps.append(dep)
        used.add(frozenset((u, v)))
    return inst.replace(dependencies=deps)


def random_fragment_case(rng, max_len=6, horizon=50):
    """Instance plus a structurally valid sequence for recursion checks.

    The sequence starts and ends at the depot or at one of two dependent
    tasks and has dependency-free interior tasks.
    """
    n = int(rng.integers(2, 7))
    T = int(horizon)
    tasks = [Task(0, 0, T, 0, 0)]
    for v in range(1, n + 1):
        a = int(rng.integers(0, T - 5))
        tasks.append(Task(v, a, int(rng.integers(a, T)),
                          int(rng.integers(0, 4)), int(rng.integers(0, 5))))
    t = rng.integers(0, 6, size=(n + 1, n + 1))
    t = np.minimum(t, t.T)  # symmetric keeps the triangle fix convergent
    np.fill_diagonal(t, 0)
    # floyd-warshall style fix to restore the triangle inequality
    for k in range(n + 1):
        t = np.minimum(t, t[:, [k]] + t[[k], :])
    deps = []
    if n >= 2 and rng.random() < 0.8:
        u, v = 1, 2
        dmax = int(rng.integers(0, T // 2))
        dmin = int(rng.integers(0, dmax + 1))
        if rng.random() < 0.25:
            dmin, dmax = dmin, T  # open-ended upper side
        deps.append(TemporalDependency(u, v, dmin, dmax,
                                       int(rng.integers(0, 10)), T))
    cap = int(rng.integers(8, 20))
    inst = Instance(tasks, t, t.copy(), 3, cap, T, deps)
    endpoints = sorted(inst.vd | {0})
    interior = [v for v in range(1, n + 1) if v not in inst.vd]
    start = endpoints[int(rng.integers(0, len(endpoints)))]
    end = endpoints[int(rng.integers(0, len(endpoints)))]
    k = int(rng.integers(0, min(len(interior), max_len - 2) + 1))
    mid = list(rng.permutation(interior)[:k])
    seq = [start] + [int(x) for x in mid] + [end]
    if seq[0] == seq[-1] and (seq[0] != 0 or len(seq) == 2):
        return None
    return inst, tuple(seq)


# --- exhaustive structures ----------------------------------------------

def exhaustive_fragments(inst, build):
    """Every sequence accepted by `build` (endpoints in V_D + depot,
    distinct dependency-free interiors)."""
    endpoints = sorted(inst.vd | {0})
    interior = [v for v in range(1, inst.n + 1) if v not in inst.vd]
    frags = []
    for s in endpoints:
        for e in endpoints:
            if s == e and s != 0:
                continue
            for r in range(len(interior) + 1):
                for mid in itertools.permutations(interior, r):
                    seq = (s,) + mid + (e,)
                    if seq == (0, 0):
                        continue
                    f = build(seq, inst)
                    if f:
                        frags.append(f)
    return frags


def set_partitions(items, max_blocks):
    """All partitions of `items` into at most max_blocks nonempty blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest, max_blocks):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        if len(part) < max_blocks:
            yield [[first]] + part


def _route_feasible_alone(route, inst):
    """Window-chain and capacity check of a single route, deps ignored."""
    if sum(int(inst.dem[v]) for v in route) > inst.Q:
        return False
    b = max(int(inst.alpha[route[0]]), int(inst.t[0, route[0]]))
    if b > inst.beta[route[0]]:
        return False
    for a, c in zip(route, route[1:]):
        b = max(b + int(inst.dur[a]) + int(inst.t[a, c]), int(inst.alpha[c]))
        if b > inst.beta[c]:
            return False
    last = route[-1]
    return b + int(inst.dur[last]) + int(inst.t[last, 0]) <= inst.tmax


def all_feasible_solutions(inst, schedule_routes):
    """Every (routes, starts, orders) triple that is feasible, enumerating
    route partitions, per-route orders and dependency starting orders."""
    tasks = list(range(1, inst.n + 1))
    perm_cache = {}

    def feasible_perms(block):
        key = frozenset(block)
        if key not in perm_cache:
            perm_cache[key] = [p for p in itertools.permutations(sorted(block))
                               if _route_feasible_alone(p, inst)]
        return perm_cache[key]

    pairs = [(d.u, d.v) for d in inst.deps]
    sols = []
    for part in set_partitions(tasks, inst.K):
        options = [feasible_perms(b) for b in part]
        if any(not o for o in options):
            continue
        for combo in itertools.product(*options):
            for bits in itertools.product((1, 0), repeat=len(pairs)):
                forced = dict(zip(pairs, bits))
                ok, starts, orders = schedule_routes(combo, inst, forced)
                if ok:
                    sols.append(([list(r) for r in combo], starts, orders))
    return sols


def route_cost(route, inst):
    cost = int(inst.c[0, route[0]]) + int(inst.c[route[-1], 0])
    for a, b in zip(route, route[1:]):
        cost += int(inst.c[a, b])
    return cost


def solution_cost(routes, inst):
    return sum(route_cost(r, inst) for r in routes if r)


def routes_to_fragments(routes, inst):
    """Fragment decomposition of depot-to-depot routes: boundaries at the
    depot and at every dependent task."""
    frags = []
    for r in routes:
        seq = [0] + list(r) + [0]
        cur = [seq[0]]
        for v in seq[1:]:
            cur.append(v)
            if v == 0 or v in inst.vd:
                frags.append(tuple(cur))
                cur = [v]
    return frags


def line_instance(n=4, deps=(), horizon=60, capacity=20, vehicles=3,
                  demands=None, durations=None, windows=None):
    """Tasks on a line at coordinates 1..n, depot at 0, travel = distance.

    Window / duration / demand overrides are per task (index v-1).
    """
    tasks = [Task(0, 0, horizon, 0, 0)]
    for v in range(1, n + 1):
        a, b = (0, horizon) if windows is None else windows[v - 1]
        tasks.append(Task(v, a, b,
                          1 if durations is None else durations[v - 1],
                          2 if demands is None else demands[v - 1]))
    mat = np.array([[abs(i - j) for j in range(n + 1)]
                    for i in range(n + 1)], dtype=np.int64)
    return Instance(tasks=tasks, travel_time=mat, travel_cost=mat,
                    vehicle_count=vehicles, capacity=capacity,
                    horizon=horizon, dependencies=list(deps))
