"""Price-cut-and-enumerate driver.

The solve proceeds in six steps: tighten the instance, settle the LP
relaxation by column-and-row generation, guess an upper bound from a
restricted integer solve, enumerate every fragment priced within the
candidate gap, reduce the enumerated pool, and close the bracket with
a final integer solve.  The candidate bound grows by gap_step rounds
until the upper bound is certified optimal or a limit binds.
"""

import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from . import cuts as cutlib
from .enumeration import (LimitExceeded, enumerate_fragments,
                          reduce_by_resolve, reduce_by_route_bound)
from .fragments import build_fragment
from .instance import Instance, SolverConfig
from .master import MasterError, MasterModel, build_initial
from .pricing import solve_pricing
from .preprocess import preprocess
from .scheduling import schedule_routes


@dataclass(frozen=True)
class Incumbent:
    """A concrete solution: routes without depot entries, integer start
    times per task, an order bit per dependency pair, and the fragment
    sequences the master chose."""

    routes: Tuple[Tuple[int, ...], ...]
    start_times: Dict[int, int]
    orders: Dict[Tuple[int, int], int]
    fragments: Tuple[Tuple[int, ...], ...]
    cost: float


@dataclass
class BoundsState:
    lb_sol: float
    ub_sol: float
    ub_cand: float
    incumbent: Optional[Incumbent]
    iteration: int
    status: str
    stats: dict = field(default_factory=dict)


class _Clock:
    def __init__(self, budget):
        self.t0 = time.monotonic()
        self.budget = float(budget)

    def elapsed(self):
        return time.monotonic() - self.t0

    def remaining(self):
        return self.budget - self.elapsed()

    def expired(self):
        return self.remaining() <= 0


def check_solution(incumbent, inst: Instance) -> bool:
    """First-principles feasibility: partition, capacity, windows,
    horizon, fleet size, and the four order-conditional dependency
    rows under the incumbent's order bits.

    Works purely from the instance data; no scheduling or master code
    is consulted.  A missing order bit is derived from the start times
    (ties read as the lower-id task starting first).
    """
    routes = [list(r) for r in incumbent.routes if r]
    seen = set()
    for r in routes:
        for v in r:
            if not (1 <= v <= inst.n) or v in seen:
                return False
            seen.add(v)
    if seen != set(range(1, inst.n + 1)):
        return False
    if len(routes) > inst.K:
        return False
    b = incumbent.start_times
    for r in routes:
        if sum(int(inst.dem[v]) for v in r) > inst.Q:
            return False
        for v in r:
            if v not in b:
                return False
            if not (inst.alpha[v] <= b[v] <= inst.beta[v]):
                return False
        if b[r[0]] < inst.t[0, r[0]]:
            return False
        for u, v in zip(r, r[1:]):
            if b[v] < b[u] + inst.dur[u] + inst.t[u, v]:
                return False
        last = r[-1]
        if b[last] + inst.dur[last] + inst.t[last, 0] > inst.tmax:
            return False
    for d in inst.deps:
        bu, bv = b[d.u], b[d.v]
        p = incumbent.orders.get((d.u, d.v))
        if p is None:
            p = 1 if bu <= bv else 0
        # the all-sentinel quadruple forbids the order outright
        if p == 1 and inst.order_forbidden(d.u, d.v):
            return False
        if p == 0 and inst.order_forbidden(d.v, d.u):
            return False
        m_uv = max(0, int(inst.beta[d.u]) - int(inst.alpha[d.v]))
        m_vu = max(0, int(inst.beta[d.v]) - int(inst.alpha[d.u]))
        if bv - bu > d.dmax_uv * p:
            return False
        if bu - bv > d.dmax_vu * (1 - p):
            return False
        if bv - bu < d.dmin_uv * p - m_uv * (1 - p):
            return False
        if bu - bv < d.dmin_vu * (1 - p) - m_vu * p:
            return False
    return True


# -- Step 2: column-and-row generation --------------------------------


@dataclass
class LowerBound:
    lb: float
    columns: tuple
    duals: object
    cuts: tuple
    status: str
    pricing_iterations: int = 0

    def __iter__(self):
        return iter((self.lb, self.columns, self.duals, self.cuts))


def compute_lower_bound(inst, cfg, clock=None, vmin_calc=None) -> LowerBound:
    """Alternates pricing with row separation until neither produces
    anything; rows are only separated once pricing comes up empty."""
    clock = clock or _Clock(cfg.time_limit)
    m = build_initial(inst, cfg, vmin_calc)
    calc = vmin_calc or cutlib.VminCalculator(inst)
    sol = m.solve_relaxation()
    if sol.status != "optimal":
        return LowerBound(float("inf"), (), None, (), "infeasible")
    tol = cfg.lp_tolerance
    rcc_left = cfg.rcc_total_limit
    iters = 0
    status = "optimal"
    # value of the last fully priced relaxation; a restricted master that
    # is still missing columns only bounds from above, so mid-loop
    # objectives must never escape as certified bounds
    cert = 0.0 if inst.c.size == 0 or int(inst.c.min()) >= 0 else float("-inf")
    while True:
        if clock.expired():
            status = "time-limit"
            break
        iters += 1
        added = m.add_fragments(solve_pricing(sol.duals, inst, cfg))
        if not added:
            cert = max(cert, sol.objective)
            sup = m.support(sol.x)
            new = []
            if "FSEC" in cfg.enabled_cuts:
                new += cutlib.separate_fsec(sup, inst, cfg.k_max, calc,
                                            tol, m.cut_keys())
            if "TIFI" in cfg.enabled_cuts:
                new += cutlib.separate_tifi(sup, inst, tol, m.cut_keys())
            if "TDIFI" in cfg.enabled_cuts:
                new += cutlib.separate_tdifi(sup, sol.p, inst, tol,
                                             m.cut_keys())
            if "RCC" in cfg.enabled_cuts and rcc_left > 0:
                rccs = cutlib.separate_rcc(sup, inst, tol, m.cut_keys(),
                                           max_new=rcc_left)
                rcc_left -= len(rccs)
                new += rccs
            if not m.add_cuts(new):
                break
        sol = m.solve_relaxation()
        if sol.status != "optimal":
            return LowerBound(float("inf"), (), None, (), "infeasible")
    if status == "time-limit":
        # pricing may not have converged and an artificial-free resolve
        # of a column-starved master proves nothing, so skip the
        # infeasibility confirmation and report the snapshot bound
        return LowerBound(cert, tuple(m.fragments), sol.duals,
                          tuple(m.cuts), status, iters)
    if sol.artificial > 1e-7:
        # the LP leans on the artificial column: confirm that no real
        # solution exists before declaring the instance infeasible
        strict = m.solve_relaxation(forbid_artificial=True)
        if strict.status != "optimal":
            return LowerBound(float("inf"), (), None, (), "infeasible")
    return LowerBound(sol.objective, tuple(m.fragments), sol.duals,
                      tuple(m.cuts), status, iters)


# -- Steps 3 and 5: restricted integer solves -------------------------


def _lift_cut(cut, inst, cfg):
    cap = math.ceil(cfg.frcc_size_cap_fraction * inst.n)
    if isinstance(cut, cutlib.RccCut) and len(cut.S) <= cap:
        return cutlib.lift_rcc_to_frcc(cut)
    return cut


def _root_cut_loop(m, inst, cfg, clock, counts):
    """Cutting planes at the relaxation before the integer solve: TIFI,
    TDIFI, then RCC, each kind only when the earlier ones found nothing
    and its violation threshold and count limit permit."""
    t_tifi, t_tdifi, t_rcc = cfg.cut_violation_thresholds
    while not clock.expired():
        sol = m.solve_relaxation()
        if sol.status != "optimal":
            return
        sup = m.support(sol.x)
        new = []
        if "TIFI" in cfg.enabled_cuts and counts["TIFI"] < cfg.cut_count_limit:
            new = cutlib.separate_tifi(sup, inst, t_tifi, m.cut_keys())
            new = new[:cfg.cut_count_limit - counts["TIFI"]]
            kind = "TIFI"
        if not new and "TDIFI" in cfg.enabled_cuts \
                and counts["TDIFI"] < cfg.cut_count_limit:
            new = cutlib.separate_tdifi(sup, sol.p, inst, t_tdifi,
                                        m.cut_keys())
            new = new[:cfg.cut_count_limit - counts["TDIFI"]]
            kind = "TDIFI"
        if not new and "RCC" in cfg.enabled_cuts \
                and counts["RCC"] < cfg.cut_count_limit:
            new = cutlib.separate_rcc(sup, inst, t_rcc, m.cut_keys(),
                                      max_new=cfg.cut_count_limit
                                      - counts["RCC"])
            kind = "RCC"
        if not new:
            return
        counts[kind] += m.add_cuts(new)


def _decode(m, sol, inst):
    """Chained routes from an integral master solution, or None when the
    chosen fragments do not decompose into depot-rooted walks (possible
    only through zero-elapsed-time cycles).  Also returns the leftover
    dependent vertices of an undecodable remainder for the repair cut."""
    chosen = [f for f, x in m.support(sol.x, eps=0.5)]
    by_start = {}
    for f in chosen:
        by_start.setdefault(f.start, []).append(f)
    for v, fs in by_start.items():
        if v != 0 and len(fs) > 1:
            return None, {u for f in fs for u in (f.start, f.end) if u != 0}
    used = set()
    routes = []
    for f0 in by_start.get(0, []):
        walk = [f0]
        used.add(id(f0))
        cur = f0
        while cur.end != 0:
            nxt = by_start.get(cur.end, [None])[0]
            if nxt is None or id(nxt) in used:
                return None, {u for u in (cur.end,) if u != 0}
            walk.append(nxt)
            used.add(id(nxt))
            cur = nxt
        tasks = [v for f in walk for v in f.tasks if v != 0]
        dedup = [v for i, v in enumerate(tasks)
                 if i == 0 or v != tasks[i - 1]]
        routes.append(tuple(dedup))
    left = [f for f in chosen if id(f) not in used]
    if left:
        return None, {u for f in left for u in (f.start, f.end) if u != 0}
    forced = {k: int(round(v)) for k, v in sol.p.items()}
    ok, starts, orders = schedule_routes(routes, inst, forced)
    if not ok:
        ok, starts, orders = schedule_routes(routes, inst)
    if not ok:
        return None, set()
    frag_seqs = tuple(sorted(f.tasks for f in chosen))
    inc = Incumbent(tuple(routes), starts, orders, frag_seqs,
                    float(round(sol.objective)))
    return inc, set()


def _solve_restricted(m, inst, cfg, clock, counts, time_cap=None):
    """Root cutting loop plus integer solve; decodes and verifies the
    incumbent, adding a repair subtour row in the degenerate case of a
    depot-free cycle that the big-M timing rows cannot exclude."""
    for _ in range(1 + len(inst.vd)):
        _root_cut_loop(m, inst, cfg, clock, counts)
        limit = clock.remaining()
        if time_cap is not None:
            limit = min(limit, time_cap)
        if limit <= 0:
            return float("inf"), None, False
        isol = m.solve_integer(time_limit=limit)
        if isol.status == "infeasible":
            return float("inf"), None, True
        if isol.status == "no_solution":
            return float("inf"), None, False
        proven = isol.status == "optimal"
        inc, stuck = _decode(m, isol, inst)
        if inc is not None and check_solution(inc, inst):
            return float(round(isol.objective)), inc, proven
        if not stuck:
            raise MasterError("integer master produced an unusable solution")
        q = sum(int(inst.dem[v]) for v in stuck)
        vmin = max(1, -(-q // inst.Q))
        if not m.add_cut(cutlib.FsecCut(S=frozenset(stuck), vmin=vmin)):
            raise MasterError("repair row already present; giving up")
        counts["FSEC"] = counts.get("FSEC", 0) + 1
    return float("inf"), None, False


def initial_upper_bound(columns, cuts, inst, cfg, clock=None,
                        vmin_calc=None, counts=None):
    """Integer solve over the generated columns with capacity rows
    lifted to their fragment form; capped at t_guess."""
    clock = clock or _Clock(cfg.time_limit)
    counts = counts if counts is not None else {}
    for k in ("TIFI", "TDIFI", "RCC"):
        counts.setdefault(k, 0)
    m = build_initial(inst, cfg, vmin_calc)
    m.add_fragments(columns)
    for cut in cuts:
        m.add_cut(_lift_cut(cut, inst, cfg))
    ub, inc, _ = _solve_restricted(m, inst, cfg, clock, counts,
                                   time_cap=cfg.t_guess)
    return ub, inc


# -- Step 1..6 state machine -------------------------------------------


def _int_floor_bound(lb, tol=1e-6):
    """Smallest integer a solution value could take given bound lb."""
    return math.ceil(lb - tol)


def run(inst: Instance, cfg: SolverConfig = None) -> BoundsState:
    cfg = cfg or SolverConfig()
    clock = _Clock(cfg.time_limit)
    stats = {
        "iterations": 0,
        "fragments_enumerated": 0,
        "cuts_by_kind": {"FSEC": 0, "TIFI": 0, "TDIFI": 0, "RCC": 0},
        "wall_times": {},
        "lb_certified": 0.0,
    }
    counts = stats["cuts_by_kind"]

    def mark(step, t0):
        stats["wall_times"][step] = stats["wall_times"].get(step, 0.0) \
            + (time.monotonic() - t0)

    t0 = time.monotonic()
    pre = preprocess(inst)
    mark("preprocess", t0)
    if not pre.feasible:
        stats["infeasibility"] = pre.reason
        return BoundsState(float("inf"), float("inf"), float("inf"),
                           None, 0, "infeasible", stats)
    pinst = pre.instance
    calc = cutlib.VminCalculator(pinst)

    t0 = time.monotonic()
    lbres = compute_lower_bound(pinst, cfg, clock, calc)
    mark("lower_bound", t0)
    counts["FSEC"] += sum(1 for c in lbres.cuts
                          if isinstance(c, cutlib.FsecCut))
    counts["TIFI"] += sum(1 for c in lbres.cuts
                          if isinstance(c, cutlib.TifiCut))
    counts["TDIFI"] += sum(1 for c in lbres.cuts
                           if isinstance(c, cutlib.TdifiCut))
    counts["RCC"] += sum(1 for c in lbres.cuts
                         if isinstance(c, cutlib.RccCut))
    if lbres.status == "infeasible":
        return BoundsState(float("inf"), float("inf"), float("inf"),
                           None, 0, "infeasible", stats)
    lb_cert = lbres.lb
    stats["lb_certified"] = lb_cert
    stats["pricing_iterations"] = lbres.pricing_iterations
    if lbres.status == "time-limit":
        return BoundsState(lb_cert, float("inf"), float("inf"),
                           None, 0, "time-limit", stats)

    t0 = time.monotonic()
    ub_sol, incumbent = initial_upper_bound(lbres.columns, lbres.cuts,
                                            pinst, cfg, clock, calc, counts)
    mark("initial_ub", t0)
    ub_cand = min(ub_sol, (1.0 + cfg.gap_init) * lb_cert)
    lb_sol = lb_cert
    if ub_sol <= _int_floor_bound(lb_cert):
        return BoundsState(ub_sol, ub_sol, ub_sol, incumbent, 0,
                           "optimal", stats)

    # any feasible solution costs less than the artificial column, so a
    # candidate bound beyond it turns "nothing found" into "infeasible"
    c_art = 1.0 + float(sum(
        pinst.c[i][j] for i in range(pinst.n + 1)
        for j in range(pinst.n + 1) if i != j))

    status = "gap-limit"
    iteration = 0
    while iteration < 64:
        iteration += 1
        stats["iterations"] = iteration
        if clock.expired():
            status = "time-limit"
            break
        gap = max(0.0, ub_cand - lb_cert)

        t0 = time.monotonic()
        try:
            pool = enumerate_fragments(lbres.duals, gap, pinst, cfg)
        except LimitExceeded:
            mark("enumerate", t0)
            status = "fragment-limit"
            break
        mark("enumerate", t0)
        stats["fragments_enumerated"] += len(pool)

        t0 = time.monotonic()
        pool = reduce_by_route_bound(pool, lbres.duals, gap, pinst)
        sol_seqs = set(incumbent.fragments) if incumbent else set()
        sol_frags = [build_fragment(s, pinst) for s in sorted(sol_seqs)]
        merged = {f.tasks: f for f in pool}
        for f in sol_frags:
            merged.setdefault(f.tasks, f)
        m_red = build_initial(pinst, cfg, calc)
        for cut in lbres.cuts:
            m_red.add_cut(_lift_cut(cut, pinst, cfg))
        kept, _, _ = reduce_by_resolve(sorted(merged.values(),
                                              key=lambda f: f.tasks),
                                       m_red, ub_cand, keep=sol_seqs)
        mark("reduce", t0)

        t0 = time.monotonic()
        m_fin = build_initial(pinst, cfg, calc)
        for cut in lbres.cuts:
            m_fin.add_cut(_lift_cut(cut, pinst, cfg))
        m_fin.add_fragments(kept)
        val, inc, proven = _solve_restricted(m_fin, pinst, cfg, clock,
                                             counts)
        mark("final_milp", t0)
        if val < ub_sol:
            ub_sol, incumbent = val, inc
        if not proven:
            status = "time-limit"
            break

        lb_sol = max(lb_sol, min(ub_cand, ub_sol))
        if ub_sol <= _int_floor_bound(lb_sol):
            # values are integral, so the rounded bound meets the ub
            lb_sol = float(ub_sol)
            ub_cand = float(ub_sol)
            status = "optimal"
            break
        if math.isinf(ub_sol) and ub_cand >= c_art:
            status = "infeasible"
            break
        grown = ub_cand + cfg.gap_step * lb_cert
        if grown <= ub_cand + 1e-9:
            grown = max(grown, 2.0 * ub_cand, ub_cand + 1.0)
        ub_cand = min(grown, ub_sol)

    if status == "infeasible":
        return BoundsState(float("inf"), float("inf"), float("inf"),
                           None, iteration, status, stats)
    return BoundsState(lb_sol, ub_sol, ub_cand, incumbent, iteration,
                       status, stats)


def solve(inst: Instance, cfg: SolverConfig = None) -> BoundsState:
    return run(inst, cfg)


# -- solution file ------------------------------------------------------


def _num(x):
    return x if math.isfinite(x) else None


def solution_to_json(state: BoundsState) -> str:
    inc = state.incumbent
    doc = {
        "status": state.status,
        "lb": _num(state.lb_sol),
        "ub": _num(state.ub_sol),
        "routes": [list(r) for r in inc.routes] if inc else [],
        "start_times": {str(k): int(v)
                        for k, v in inc.start_times.items()} if inc else {},
        "order_vars": {"%d,%d" % k: int(v)
                       for k, v in inc.orders.items()} if inc else {},
        "stats": state.stats,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def incumbent_from_json(doc: dict) -> Incumbent:
    routes = tuple(tuple(int(v) for v in r) for r in doc.get("routes", []))
    starts = {int(k): int(v)
              for k, v in doc.get("start_times", {}).items()}
    orders = {}
    for k, v in doc.get("order_vars", {}).items():
        u, w = k.split(",")
        orders[(int(u), int(w))] = int(v)
    ub = doc.get("ub")
    return Incumbent(routes, starts, orders, (),
                     float("inf") if ub is None else float(ub))
