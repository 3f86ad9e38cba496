"""Instance tightening.

Three strengthen-only transformations run before the solver proper:
clipping task windows by depot travel, transitive closure of temporal
dependencies (every pair connected through a chain of dependencies receives
an explicit, possibly strengthened quadruple), and window tightening from
dependency parameters.  Each preserves the set of feasible solutions.
"""

from __future__ import annotations

import dataclasses

from .instance import Instance, Task, TemporalDependency


@dataclasses.dataclass
class PreprocessResult:
    instance: Instance
    feasible: bool
    reason: str = ""


def _with_windows(inst, alpha, beta):
    tasks = [Task(t.id, int(alpha[t.id]), int(beta[t.id]), t.duration, t.demand)
             for t in inst.tasks]
    return inst.replace(tasks=tasks)


def tighten_depot_windows(inst: Instance) -> PreprocessResult:
    """Clips every window to what depot departure and return allow."""
    alpha = inst.alpha.copy()
    beta = inst.beta.copy()
    for v in range(1, inst.n + 1):
        alpha[v] = max(alpha[v], inst.t[0, v])
        beta[v] = min(beta[v], inst.tmax - inst.t[v, 0] - inst.dur[v])
        if alpha[v] > beta[v]:
            return PreprocessResult(
                _with_windows(inst, alpha, beta), False,
                "task %d has no start time compatible with depot travel" % v)
    return PreprocessResult(_with_windows(inst, alpha, beta), True)


# --- transitive closure of dependencies ---------------------------------

def _order_intervals(quad, tmax):
    """Allowed values of b_second - b_first per starting order.

    quad is (m_uv, M_uv, m_vu, M_vu) for the oriented pair (u, v); returns
    (uv_interval, vu_interval) where uv_interval bounds b_v - b_u when u
    starts first and vu_interval bounds b_u - b_v when v starts first, each
    None when that order is forbidden.
    """
    m_uv, M_uv, m_vu, M_vu = quad
    uv = None if (m_uv == tmax and M_uv == tmax) else (m_uv, M_uv)
    vu = None if (m_vu == tmax and M_vu == tmax) else (m_vu, M_vu)
    return uv, vu


def _diff_ranges(quad, tmax):
    """Feasible ranges of b_v - b_u over both orders (list of intervals)."""
    uv, vu = _order_intervals(quad, tmax)
    out = []
    if uv is not None:
        out.append(uv)
    if vu is not None:
        out.append((-vu[1], -vu[0]))
    return out


def _compose(quad_uv, quad_vw, tmax):
    """Implied quadruple on (u, w) from dependencies on (u,v) and (v,w).

    Case analysis over the starting orders of both known pairs: summing the
    two difference ranges bounds b_w - b_u, and each sum interval feeds the
    order of {u, w} it is compatible with.  Per target order the least lower
    and greatest upper bound over feasible combinations are kept.
    """
    lo_uw = hi_uw = None   # bounds on b_w - b_u >= 0 (u starts first)
    lo_wu = hi_wu = None   # bounds on b_u - b_w >= 0 (w starts first)
    for a_lo, a_hi in _diff_ranges(quad_uv, tmax):
        for b_lo, b_hi in _diff_ranges(quad_vw, tmax):
            m = a_lo + b_lo
            M = a_hi + b_hi
            # u first: b_w - b_u in [max(0, m), min(M, tmax)]
            if M >= 0 and max(0, m) <= min(M, tmax):
                lo, hi = max(0, m), min(M, tmax)
                lo_uw = lo if lo_uw is None else min(lo_uw, lo)
                hi_uw = hi if hi_uw is None else max(hi_uw, hi)
            # w first: b_u - b_w in [max(0, -M), min(-m, tmax)]
            if m <= 0 and max(0, -M) <= min(-m, tmax):
                lo, hi = max(0, -M), min(-m, tmax)
                lo_wu = lo if lo_wu is None else min(lo_wu, lo)
                hi_wu = hi if hi_wu is None else max(hi_wu, hi)
    uw = (tmax, tmax) if lo_uw is None else (lo_uw, hi_uw)
    wu = (tmax, tmax) if lo_wu is None else (lo_wu, hi_wu)
    return uw + wu


def _merge(old, new, tmax):
    """Strengthen-only merge of two quadruples on the same oriented pair."""
    out = []
    for i in (0, 2):
        m = max(old[i], new[i])
        M = min(old[i + 1], new[i + 1])
        if m > M:
            m = M = tmax
        out.extend((m, M))
    return tuple(out)


def _oriented(dep: TemporalDependency, u, v):
    if dep.u == u and dep.v == v:
        return (dep.dmin_uv, dep.dmax_uv, dep.dmin_vu, dep.dmax_vu)
    return (dep.dmin_vu, dep.dmax_vu, dep.dmin_uv, dep.dmax_uv)


def close_dependencies(inst: Instance) -> PreprocessResult:
    tmax = inst.tmax
    quads = {}
    for d in inst.deps:
        quads[(d.u, d.v)] = (d.dmin_uv, d.dmax_uv, d.dmin_vu, d.dmax_vu)

    def get(u, v):
        if (u, v) in quads:
            return quads[(u, v)]
        q = quads.get((v, u))
        return None if q is None else (q[2], q[3], q[0], q[1])

    def put(u, v, quad):
        if (v, u) in quads:
            u, v = v, u
            quad = (quad[2], quad[3], quad[0], quad[1])
        quads[(u, v)] = quad

    changed = True
    while changed:
        changed = False
        adj = {}
        for (u, v) in list(quads):
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        for v in sorted(adj):
            around = sorted(adj[v])
            for u in around:
                for w in around:
                    if u >= w:
                        continue
                    implied = _compose(get(u, v), get(v, w), tmax)
                    old = get(u, w)
                    merged = implied if old is None else _merge(old, implied, tmax)
                    if merged[0] == merged[1] == tmax and \
                            merged[2] == merged[3] == tmax:
                        return PreprocessResult(
                            inst, False,
                            "dependency chain through %d forbids both "
                            "starting orders of (%d, %d)" % (v, u, w))
                    if old != merged:
                        put(u, w, merged)
                        changed = True

    deps = [TemporalDependency(u, v, *q) for (u, v), q in quads.items()]
    return PreprocessResult(inst.replace(dependencies=deps), True)


def tighten_td_windows(inst: Instance) -> PreprocessResult:
    """Window tightening from dependency parameters, run to a fixed point."""
    alpha = [int(a) for a in inst.alpha]
    beta = [int(b) for b in inst.beta]
    tmax = inst.tmax
    changed = True
    while changed:
        changed = False
        for d in inst.deps:
            u, v = d.u, d.v
            uv, vu = _order_intervals(
                (d.dmin_uv, d.dmax_uv, d.dmin_vu, d.dmax_vu), tmax)
            if uv is None and vu is None:
                return PreprocessResult(inst, False,
                                        "both starting orders of (%d, %d) "
                                        "are forbidden" % (u, v))
            if uv is not None and vu is not None:
                cand = (
                    (u, max(alpha[u], alpha[v] - d.dmax_uv),
                     min(beta[u], beta[v] + d.dmax_vu)),
                    (v, max(alpha[v], alpha[u] - d.dmax_vu),
                     min(beta[v], beta[u] + d.dmax_uv)),
                )
            elif uv is not None:
                # u must start first: b_v - b_u in [dmin_uv, dmax_uv]
                cand = (
                    (u, max(alpha[u], alpha[v] - d.dmax_uv),
                     min(beta[u], beta[v] - d.dmin_uv)),
                    (v, max(alpha[v], alpha[u] + d.dmin_uv),
                     min(beta[v], beta[u] + d.dmax_uv)),
                )
            else:
                cand = (
                    (v, max(alpha[v], alpha[u] - d.dmax_vu),
                     min(beta[v], beta[u] - d.dmin_vu)),
                    (u, max(alpha[u], alpha[v] + d.dmin_vu),
                     min(beta[u], beta[v] + d.dmax_vu)),
                )
            for w, a, b in cand:
                if a > alpha[w]:
                    alpha[w] = a
                    changed = True
                if b < beta[w]:
                    beta[w] = b
                    changed = True
                if alpha[w] > beta[w]:
                    return PreprocessResult(
                        _with_windows(inst, alpha, beta), False,
                        "dependency (%d, %d) empties the window of task %d"
                        % (u, v, w))
    return PreprocessResult(_with_windows(inst, alpha, beta), True)


def preprocess(inst: Instance) -> PreprocessResult:
    """Runs all three tightenings; stops at the first infeasibility."""
    res = tighten_depot_windows(inst)
    if not res.feasible:
        return res
    res2 = close_dependencies(res.instance)
    if not res2.feasible:
        return res2
    return tighten_td_windows(res2.instance)
