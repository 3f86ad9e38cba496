"""Joint start-time propagation for fixed route sets.

Given a set of routes (ordered task sequences, depot legs implicit) the
entry point computes integer start times consistent with task windows, route
chaining, the horizon, and every temporal dependency whose endpoints are
both scheduled.  Starting orders of dependent pairs are branched when not
forced.  At the propagation fixed point the lower-bound vector is itself a
feasible schedule, so the feasibility verdict is exact, not heuristic.
"""

from __future__ import annotations


def _propagate(lo, hi, chain, dep_rules):
    """Round-robin bound tightening until a fixed point; False on conflict.

    chain: (a, b, w) meaning b_b >= b_a + w.
    dep_rules: (u, v, m, M) meaning b_v - b_u in [m, M].
    """
    changed = True
    while changed:
        changed = False
        for a, b, w in chain:
            if lo[a] + w > lo[b]:
                lo[b] = lo[a] + w
                changed = True
            if hi[b] - w < hi[a]:
                hi[a] = hi[b] - w
                changed = True
        for u, v, m, M in dep_rules:
            if lo[u] + m > lo[v]:
                lo[v] = lo[u] + m
                changed = True
            if lo[v] - M > lo[u]:
                lo[u] = lo[v] - M
                changed = True
            if hi[u] + M < hi[v]:
                hi[v] = hi[u] + M
                changed = True
            if hi[v] - m < hi[u]:
                hi[u] = hi[v] - m
                changed = True
        for v in lo:
            if lo[v] > hi[v]:
                return False
    return True


def schedule_routes(routes, inst, forced_orders=None):
    """Searches for feasible integer start times of the given routes.

    routes: iterable of task-id sequences (no depot entries).
    forced_orders: optional {(u, v) canonical u < v: 0/1} fixing who starts
    first (1 means u).  Dependencies with an endpoint outside the routes are
    ignored.

    Returns (ok, starts, orders); starts maps task -> start time and orders
    maps each decided canonical pair -> 0/1.
    """
    routes = [list(r) for r in routes if r]
    present = set()
    for r in routes:
        present.update(r)

    chain = []
    base_lo = {}
    base_hi = {}
    for r in routes:
        for v in r:
            base_lo[v] = int(inst.alpha[v])
            base_hi[v] = int(inst.beta[v])
        first, last = r[0], r[-1]
        # vehicle leaves the depot no earlier than time 0
        base_lo[first] = max(base_lo[first], int(inst.t[0, first]))
        # and must be back before the end of the horizon
        base_hi[last] = min(base_hi[last],
                            inst.tmax - int(inst.dur[last]) - int(inst.t[last, 0]))
        for a, b in zip(r, r[1:]):
            chain.append((a, b, int(inst.dur[a]) + int(inst.t[a, b])))

    fixed = []     # (u, v, m, M) rules decided up front
    free = []      # canonical pairs still to branch
    orders = {}
    for d in inst.deps:
        if d.u not in present or d.v not in present:
            continue
        pair = (d.u, d.v)
        u_first_ok = not inst.order_forbidden(d.u, d.v)
        v_first_ok = not inst.order_forbidden(d.v, d.u)
        want = None if forced_orders is None else forced_orders.get(pair)
        if want == 1:
            v_first_ok = False
        elif want == 0:
            u_first_ok = False
        if not u_first_ok and not v_first_ok:
            return False, {}, {}
        if u_first_ok and v_first_ok:
            free.append(d)
        elif u_first_ok:
            fixed.append((d.u, d.v, d.dmin_uv, d.dmax_uv))
            orders[pair] = 1
        else:
            fixed.append((d.v, d.u, d.dmin_vu, d.dmax_vu))
            orders[pair] = 0

    def attempt(i, rules, chosen):
        if i == len(free):
            lo = dict(base_lo)
            hi = dict(base_hi)
            if _propagate(lo, hi, chain, rules):
                return lo, chosen
            return None
        d = free[i]
        out = attempt(i + 1, rules + [(d.u, d.v, d.dmin_uv, d.dmax_uv)],
                      chosen + [((d.u, d.v), 1)])
        if out is not None:
            return out
        return attempt(i + 1, rules + [(d.v, d.u, d.dmin_vu, d.dmax_vu)],
                       chosen + [((d.u, d.v), 0)])

    out = attempt(0, fixed, [])
    if out is None:
        return False, {}, {}
    lo, chosen = out
    orders.update(dict(chosen))
    return True, lo, orders
