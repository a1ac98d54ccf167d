"""Acceptance suite: every shipping criterion as one callable check.

Each criterion returns a result with a pass flag and a one-line detail;
the CLI ``accept`` command prints one line per criterion and the test
suite asserts each one.  Oracles here are deliberately independent of the
library paths they validate: Monte-Carlo integration, a locally written
shoelace, brute-force nearest-center grids, and central finite differences.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np
from scipy.spatial import ConvexHull

from .coverage import (
    centroid_jacobian,
    conventional_gradient,
    coverage_gradient,
    fd_gradient_oracle,
    make_cost_h,
    make_cost_v,
    off_loc_gradient,
    ControlParams,
)
from .dynamics import (
    AgentState,
    sample_interior_configuration,
    simulate,
    step_csur,
    virtual_center,
)
from .geometry import ConvexPolygon, ConvexRegion, DensityField, polygon_moments
from .scenarios import load_scenario
from .voronoi import Configuration, cell_moments, compute_partition

ROOM_4X28 = ((0.0, 0.0), (4.0, 0.0), (4.0, 2.8), (0.0, 2.8))


@dataclasses.dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _result(name, t0, passed, detail) -> CriterionResult:
    return CriterionResult(name=name, passed=bool(passed), detail=detail,
                           seconds=time.time() - t0)


def _random_convex_polygon(rng) -> ConvexPolygon:
    n = rng.integers(5, 13)
    pts = rng.random((n, 2)) * rng.uniform(1.0, 10.0, 2) + rng.uniform(-5.0, 5.0, 2)
    hull = ConvexHull(pts)
    return ConvexPolygon.from_vertices(pts[hull.vertices])


def _shoelace_reference(v: np.ndarray):
    """Independent shoelace area/centroid, written apart from the library."""
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def check_geometry_oracle(n_polygons: int = 50, n_samples: int = 1_000_000) -> CriterionResult:
    """Uniform-density moments vs Monte-Carlo (rel 1e-2) and shoelace (1e-12)."""
    t0 = time.time()
    rng = np.random.default_rng(2024)
    phi = DensityField.uniform()
    worst_mc = 0.0
    worst_exact = 0.0
    for _ in range(n_polygons):
        poly = _random_convex_polygon(rng)
        mass, centroid = polygon_moments(poly, phi)
        area_ref, cent_ref = _shoelace_reference(poly.vertices)
        worst_exact = max(worst_exact, abs(mass - area_ref) / area_ref,
                          float(np.abs(centroid - cent_ref).max()) / poly.diameter)
        lo = poly.vertices.min(axis=0)
        hi = poly.vertices.max(axis=0)
        pts = lo + rng.random((n_samples, 2)) * (hi - lo)
        nxt = np.roll(poly.vertices, -1, axis=0)
        inside = np.ones(n_samples, dtype=bool)
        for (vx, vy), (wx, wy) in zip(poly.vertices, nxt):
            inside &= (wx - vx) * (pts[:, 1] - vy) - (wy - vy) * (pts[:, 0] - vx) >= 0.0
        frac = inside.mean()
        mass_mc = float(np.prod(hi - lo)) * frac
        cent_mc = pts[inside].mean(axis=0)
        worst_mc = max(worst_mc, abs(mass - mass_mc) / mass,
                       float(np.hypot(*(centroid - cent_mc))) / poly.diameter)
    passed = worst_mc <= 1e-2 and worst_exact <= 1e-12
    return _result("geometry-oracle", t0, passed,
                   f"{n_polygons} polygons: MC rel err {worst_mc:.2e} (<=1e-2), "
                   f"shoelace err {worst_exact:.2e} (<=1e-12)")


def check_voronoi_oracle(n_configs: int = 20) -> CriterionResult:
    """Grid nearest-center oracle and exact tiling on random 6-agent configs."""
    t0 = time.time()
    region = ConvexRegion.from_vertices(ROOM_4X28)
    rng = np.random.default_rng(7)
    tol = 1e-9 * region.diameter
    gx = (np.arange(200) + 0.5) * 4.0 / 200 - region.origin_shift[0]
    gy = (np.arange(140) + 0.5) * 2.8 / 140 - region.origin_shift[1]
    grid = np.array(np.meshgrid(gx, gy)).reshape(2, -1).T
    mismatches = 0
    checked = 0
    worst_area = 0.0
    for _ in range(n_configs):
        cfg = sample_interior_configuration(region, 6, rng)
        partition = compute_partition(region, cfg)
        d2 = ((grid[:, None, :] - cfg.centers[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1)
        best = order[:, 0]
        gap = np.sqrt(d2[np.arange(len(grid)), order[:, 1]]) - np.sqrt(
            d2[np.arange(len(grid)), best])
        keep = gap > tol
        checked += int(keep.sum())
        for k in range(6):
            sel = keep & (best == k)
            if not sel.any():
                continue
            cell = partition.cells[k]
            nxt = np.roll(cell.vertices, -1, axis=0)
            pts = grid[sel]
            inside = np.ones(len(pts), dtype=bool)
            for (vx, vy), (wx, wy) in zip(cell.vertices, nxt):
                inside &= (wx - vx) * (pts[:, 1] - vy) - (wy - vy) * (pts[:, 0] - vx) >= -tol
            mismatches += int((~inside).sum())
        total_area = sum(c.area for c in partition.cells)
        worst_area = max(worst_area, abs(total_area - region.area) / region.area)
    passed = mismatches == 0 and worst_area <= 1e-9
    return _result("voronoi-oracle", t0, passed,
                   f"{n_configs} configs, {checked} grid points: {mismatches} ownership "
                   f"mismatches, tiling rel err {worst_area:.2e} (<=1e-9)")


def check_gradient_correctness(n_configs: int = 20) -> CriterionResult:
    """Analytic gradients vs central differences; structural sparsity."""
    t0 = time.time()
    region = ConvexRegion.from_vertices(ROOM_4X28)
    phi = DensityField.uniform()
    rng = np.random.default_rng(11)
    params = ControlParams.homogeneous(6)
    cost_h = make_cost_h(region, phi)
    cost_v = make_cost_v(region, phi, params)
    worst = 0.0
    sparsity_ok = True
    for _ in range(n_configs):
        cfg = sample_interior_configuration(region, 6, rng)
        partition = compute_partition(region, cfg)
        moments = cell_moments(partition, phi)
        for k in range(6):
            an_h = conventional_gradient(k, cfg, moments)
            fd_h = fd_gradient_oracle(cost_h, cfg, k, 1e-6)
            worst = max(worst, float(np.linalg.norm(an_h - fd_h))
                        / max(float(np.linalg.norm(fd_h)), 1e-9))
            an_v = coverage_gradient(k, cfg, region, partition, moments, params, phi)
            fd_v = fd_gradient_oracle(cost_v, cfg, k, 1e-6)
            worst = max(worst, float(np.linalg.norm(an_v - fd_v))
                        / max(float(np.linalg.norm(fd_v)), 1e-9))
            for i in range(6):
                if i != k and i not in partition.adjacency[k]:
                    jac = centroid_jacobian(region, cfg, partition, moments, phi, k, i)
                    grad_w = off_loc_gradient(k, i, cfg, moments, {(k, i): jac}, params)
                    if jac.any() or grad_w.any():
                        sparsity_ok = False
    passed = worst <= 1e-4 and sparsity_ok
    return _result("gradient-correctness", t0, passed,
                   f"{n_configs} configs: worst FD rel err {worst:.2e} (<=1e-4), "
                   f"non-adjacent blocks exactly zero: {sparsity_ok}")


def _run_case(name_or_scenario, horizon=None):
    sc = load_scenario(name_or_scenario) if isinstance(name_or_scenario, str) else name_or_scenario
    if horizon is not None:
        sc = sc.with_overrides(horizon=horizon)
    region = sc.build_region()
    trace = simulate(region, sc.density, sc.control_params(), sc.initial_states(region),
                     controller=sc.controller, mode=sc.mode, dt=sc.dt, horizon=sc.horizon,
                     loc_tol=sc.loc_tol, loc_dwell=sc.loc_dwell, seed=sc.seed)
    return sc, region, trace


def _case_invariants(sc, region, trace):
    """(b) containment, (c) strict saturation, (d) monotone descent."""
    z = trace.column("z")
    min_h = min(float(region.min_h(region.to_frame(step_z)).min()) for step_z in z)
    u = trace.column("u")
    omegas = np.array([a.omega for a in sc.agents])
    gammas = sc.control_params().gamma
    ratio = float((np.abs(u - omegas) / (gammas * np.abs(omegas))).max())
    v = trace.column("cost_v")
    dv = np.diff(v)
    mono = int((dv > 1e-6 * np.maximum(1.0, v[:-1])).sum())
    return min_h, ratio, mono


def check_tabulated_cases() -> CriterionResult:
    """The three tabulated six-robot studies: cost decay and all runtime invariants."""
    t0 = time.time()
    details = []
    passed = True
    for name in ("case1", "case2", "case3"):
        sc, region, trace = _run_case(name)
        t = trace.column("t")
        v = trace.column("cost_v")
        i100 = int(np.searchsorted(t, 100.0))
        decay = v[min(i100, len(t) - 1)] / v[0]
        min_h, ratio, mono = _case_invariants(sc, region, trace)
        ok = decay <= 1e-2 and min_h > 0.0 and ratio < 1.0 and mono == 0
        passed &= ok
        details.append(f"{name}: V(100)/V(0)={decay:.1e} min_h={min_h:.3f} "
                       f"sat={ratio:.3f} mono={mono}")
    return _result("tabulated-case-reproduction", t0, passed, "; ".join(details))


def _time_to_threshold(trace) -> float:
    t = trace.column("t")
    v = trace.column("cost_v")
    hits = np.nonzero(v <= 1e-2 * v[0])[0]
    return float(t[hits[0]]) if len(hits) else float("inf")


def check_sweep_ordering() -> CriterionResult:
    """Parameter influence on the second six-robot study."""
    t0 = time.time()
    base = load_scenario("case2")
    rows = {
        "baseline": base,
        "gamma10": base.scaled_params(gamma=10.0),
        "delta10": base.scaled_params(delta=10.0),
        "qscale10": base.scaled_params(q_scale=10.0),
    }
    times = {}
    chatter = {}
    sat_ok = True
    for label, sc in rows.items():
        sc2, region, trace = _run_case(sc)
        times[label] = _time_to_threshold(trace)
        u = trace.column("u")
        chatter[label] = float(np.abs(np.diff(u, axis=0)).max())
        omegas = np.array([a.omega for a in sc2.agents])
        gammas = sc2.control_params().gamma
        if float((np.abs(u - omegas) / (gammas * np.abs(omegas))).max()) >= 1.0:
            sat_ok = False
    order_ok = times["qscale10"] < times["baseline"] < times["delta10"]
    chat_ok = chatter["gamma10"] == max(chatter.values())
    passed = order_ok and chat_ok and sat_ok
    detail = (f"t_thresh: Q10={times['qscale10']:.1f} base={times['baseline']:.1f} "
              f"d10={times['delta10']:.1f}; chatter gamma10={chatter['gamma10']:.3f} "
              f"max_others={max(v for k, v in chatter.items() if k != 'gamma10'):.3f}; "
              f"saturation all rows={sat_ok}")
    return _result("sweep-ordering", t0, passed, detail)


def check_infeasibility_comparison() -> CriterionResult:
    """Conventional loop exits the region; the saturated loop never does."""
    t0 = time.time()
    sc = load_scenario("compare")
    _, region, conv = _run_case(sc.with_overrides(controller="conventional"))
    conv_ok = conv.infeasible and not conv.converged and conv.first_exit_time is not None
    _, region, prop = _run_case(sc)
    z = prop.column("z")
    min_h = min(float(region.min_h(region.to_frame(step_z)).min()) for step_z in z)
    v = prop.column("cost_v")
    decay = v[-1] / v[0]
    dv = np.diff(v)
    mono = int((dv > 1e-6 * np.maximum(1.0, v[:-1])).sum())
    prop_ok = (not prop.infeasible) and (not prop.aborted) and min_h > 0.0 \
        and decay <= 0.1 and mono == 0
    passed = conv_ok and prop_ok
    detail = (f"conventional exit at t={conv.first_exit_time} (agent {conv.first_exit_agent}); "
              f"proposed min_h={min_h:.2f}, V(300)/V(0)={decay:.2e} (<=0.1), mono={mono}")
    return _result("infeasibility-comparison", t0, passed, detail)


def check_distributed_equivalence() -> CriterionResult:
    """Message-passing execution reproduces the centralized cost trace."""
    t0 = time.time()
    worst = 0.0
    passed = True
    for name in ("case1", "case2", "case3"):
        sc = load_scenario(name)
        _, _, central = _run_case(sc)
        _, _, dist = _run_case(sc.with_overrides(mode="distributed"))
        vc = central.column("cost_v")
        vd = dist.column("cost_v")
        if len(vc) != len(vd):
            passed = False
            continue
        worst = max(worst, float(np.max(np.abs(vc - vd) / np.maximum(np.abs(vc), 1e-300))))
    locality_ok, locality_detail = _locality_probe()
    passed = passed and worst <= 1e-10 and locality_ok
    return _result("distributed-equivalence", t0, passed,
                   f"V-trace rel diff {worst:.2e} (<=1e-10); {locality_detail}")


def _locality_probe():
    """Perturb a far non-neighbor; the first agent's command must not move."""
    from .distributed import NodeState, run_phases

    region = ConvexRegion.from_vertices(ROOM_4X28)
    phi = DensityField.uniform()
    params = ControlParams.homogeneous(6)
    xs = [0.35, 1.0, 1.7, 2.4, 3.05, 3.7]

    def command_for_agent0(x_last):
        states = [AgentState(zeta=region.to_frame((x, 1.4)), theta=0.4 + 0.3 * k,
                             v=0.16, omega=0.8)
                  for k, x in enumerate(xs[:-1] + [x_last])]
        centers = np.array([virtual_center(s) for s in states])
        cfg = Configuration(centers=centers)
        partition = compute_partition(region, cfg)
        moments = cell_moments(partition, phi)
        nodes = [NodeState(agent_id=k, state=states[k], region=region, phi=phi,
                           params=params) for k in range(6)]
        adjacency = partition.adjacency
        u, _, _ = run_phases(nodes, partition, moments)
        return u[0], adjacency[0], adjacency

    u_base, adj0, adj_a = command_for_agent0(xs[-1])
    u_pert, adj0_p, adj_b = command_for_agent0(xs[-1] + 0.07)
    chain_ok = adj_a == adj_b and 5 not in adj0
    identical = u_base == u_pert
    return (chain_ok and identical,
            f"non-neighbor perturbation: u_0 bitwise unchanged={identical}")


def check_scale25() -> CriterionResult:
    """25-robot study reaches the stop rule with every invariant intact."""
    t0 = time.time()
    sc, region, trace = _run_case("scale25")
    min_h, ratio, mono = _case_invariants(sc, region, trace)
    ok = trace.converged and trace.converged_time is not None \
        and trace.converged_time <= 150.0 and min_h > 0.0 and ratio < 1.0 and mono == 0
    return _result("scale-25", t0, ok,
                   f"converged={trace.converged} at t={trace.converged_time}; "
                   f"min_h={min_h:.3f} sat={ratio:.3f} mono={mono}")


def check_scale100() -> CriterionResult:
    """100-robot field study: invariants plus loose cost convergence by 120 s."""
    t0 = time.time()
    sc, region, trace = _run_case("scale100", horizon=125.0)
    min_h, ratio, mono = _case_invariants(sc, region, trace)
    t = trace.column("t")
    v = trace.column("cost_v")
    i120 = min(int(np.searchsorted(t, 120.0)), len(t) - 1)
    decay = v[i120] / v[0]
    ok = min_h > 0.0 and ratio < 1.0 and mono == 0 and decay <= 2e-2
    return _result("scale-100", t0, ok,
                   f"V(120)/V(0)={decay:.2e} (<=2e-2) min_h={min_h:.2f} "
                   f"sat={ratio:.3f} mono={mono}")


def check_orbit_property() -> CriterionResult:
    """Under the nominal angular rate, each robot traces its orbit circle."""
    t0 = time.time()
    worst = 0.0
    for v, omega, theta0 in ((0.16, 0.8, 0.0), (0.16, 0.8, 2.1), (10.0, 2.0, 1.0),
                             (40.0, -0.8, 4.2)):
        state = AgentState(zeta=(1.0, 0.5), theta=theta0, v=v, omega=omega)
        z0 = virtual_center(state)
        radius = v / abs(omega)
        steps = int(round(2.0 * np.pi / (abs(omega) * 0.05)))
        dev = 0.0
        s = state
        for _ in range(steps):
            s = step_csur(s, omega, 0.05)
            dev = max(dev, abs(float(np.hypot(*(s.zeta - z0))) - radius))
        worst = max(worst, dev / (1e-3 * radius))
    return _result("orbit-property", t0, worst <= 1.0,
                   f"worst circle deviation {worst:.2e} of the 1e-3*(v/|omega|) budget")


DEFAULT_CRITERIA = (
    check_geometry_oracle,
    check_voronoi_oracle,
    check_gradient_correctness,
    check_tabulated_cases,
    check_sweep_ordering,
    check_infeasibility_comparison,
    check_distributed_equivalence,
    check_scale25,
    check_orbit_property,
)

LARGE_CRITERIA = (check_scale100,)


def run_all(large: bool = False):
    results = [fn() for fn in DEFAULT_CRITERIA]
    if large:
        results.extend(fn() for fn in LARGE_CRITERIA)
    return results
