"""Constant-speed unicycle kinematics and the closed-loop simulation driver.

Robots move at a fixed linear speed and are steered only through their
angular rate.  Steering each robot's *virtual center* (the center of the
circle it traces under its nominal angular rate) reduces coverage control
to point placement.  The proposed controller biases the angular rate by a
saturated projection of the barrier-cost gradient onto the heading; the
conventional comparison loop moves virtual centers straight down the
quadratic-cost gradient.

States advance with the exact constant-input arc update sampled at ``dt``:
under the nominal angular rate the virtual center is a fixed point of the
discrete system, so orbit and stationarity checks hold to round-off rather
than to an integrator-error floor.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import GradientConsistencyError, InvalidSpeedError, ParameterError
from .coverage import (
    ControlParams,
    conventional_gradient,
    coverage_cost_h,
    coverage_cost_v,
    coverage_gradient,
    fd_gradient_oracle,
    make_cost_v,
    verify_gradients,
)
from .geometry import ConvexRegion, DensityField
from .voronoi import CellMoments, Configuration, cell_moments, compute_partition

PROPOSED = "proposed"
CONVENTIONAL = "conventional"
CENTRALIZED = "centralized"
DISTRIBUTED = "distributed"


@dataclasses.dataclass(frozen=True)
class AgentState:
    """Pose and speed constants of one robot."""

    zeta: np.ndarray  # (2,) position
    theta: float      # heading, radians, unwrapped
    v: float          # linear speed > 0
    omega: float      # nominal angular rate != 0

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float).reshape(2)
        z.setflags(write=False)
        object.__setattr__(self, "zeta", z)
        if not self.v > 0.0:
            raise InvalidSpeedError("linear speed must be positive")
        if self.omega == 0.0:
            raise InvalidSpeedError("nominal angular rate must be nonzero")

    @property
    def orbit_radius(self) -> float:
        return self.v / abs(self.omega)


def heading(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def virtual_center(state: AgentState) -> np.ndarray:
    """Center of the circle traced under the nominal angular rate."""
    scale = state.v / state.omega
    return np.array([state.zeta[0] - scale * math.sin(state.theta),
                     state.zeta[1] + scale * math.cos(state.theta)])


def sigmoid(x: float, delta: float) -> float:
    """Odd saturation ``x / (|x| + delta)`` with open range (-1, 1)."""
    if delta <= 0.0:
        raise ParameterError("sigmoid boundary layer must be positive")
    return x / (abs(x) + delta)


def control_input(theta: float, grad_v_k, gamma: float, delta: float, omega: float) -> float:
    """Saturated angular-rate command around the nominal rate."""
    g = np.asarray(grad_v_k, dtype=float)
    s = math.cos(theta) * g[0] + math.sin(theta) * g[1]
    return omega + gamma * omega * sigmoid(s, delta)


def step_csur(state: AgentState, u: float, dt: float) -> AgentState:
    """Advance one robot by ``dt`` with the angular rate held at ``u``.

    Exact solution of the unicycle kinematics for a constant input: a
    circular arc, degenerating to a straight segment as ``u -> 0``.
    """
    if dt <= 0.0:
        raise ParameterError("time step must be positive")
    th = state.theta
    phase = u * dt
    if abs(phase) < 1e-12:
        dx = state.v * dt * math.cos(th)
        dy = state.v * dt * math.sin(th)
    else:
        r = state.v / u
        dx = r * (math.sin(th + phase) - math.sin(th))
        dy = r * (math.cos(th) - math.cos(th + phase))
    return AgentState(zeta=(state.zeta[0] + dx, state.zeta[1] + dy),
                      theta=th + phase, v=state.v, omega=state.omega)


def step_conventional(z, grad_h_k, gamma: float, dt: float) -> np.ndarray:
    """Euler step of the conventional virtual-center law ``dz = -gamma grad``."""
    if dt <= 0.0:
        raise ParameterError("time step must be positive")
    return np.asarray(z, dtype=float) - dt * gamma * np.asarray(grad_h_k, dtype=float)


@dataclasses.dataclass(frozen=True)
class StepRecord:
    """One sampled instant of a run; positions are in input coordinates."""

    t: float
    zeta: np.ndarray   # (N, 2)
    theta: np.ndarray  # (N,)
    z: np.ndarray      # (N, 2) virtual centers
    c: np.ndarray      # (N, 2) cell centroids
    u: np.ndarray      # (N,)
    sigma: np.ndarray  # (N,)
    cost_v: float
    cost_h: float


@dataclasses.dataclass
class SimTrace:
    """Recorded run plus its outcome flags."""

    records: list
    dt: float
    controller: str
    mode: str
    converged: bool = False
    converged_time: float | None = None
    infeasible: bool = False
    first_exit_time: float | None = None
    first_exit_agent: int | None = None
    aborted: bool = False
    abort_reason: str | None = None
    message_count: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.records[0].theta) if self.records else 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])


def sample_interior_configuration(region: ConvexRegion, n: int, rng,
                                  margin_frac: float = 0.06,
                                  sep_frac: float = 0.05) -> Configuration:
    """Rejection-sample ``n`` well-separated strictly interior centers."""
    lo = region.vertices.min(axis=0)
    hi = region.vertices.max(axis=0)
    diam = region.diameter
    margin = margin_frac * diam
    sep = sep_frac * diam
    pts: list[np.ndarray] = []
    for _ in range(20000):
        p = lo + rng.random(2) * (hi - lo)
        if region.min_h(p) <= margin:
            continue
        if pts and min(float(np.hypot(*(p - q))) for q in pts) <= sep:
            continue
        pts.append(p)
        if len(pts) == n:
            return Configuration(centers=np.array(pts))
    raise ParameterError("could not sample an interior configuration")


def _startup_gradient_check(region, phi, params, n, seed):
    rng = np.random.default_rng(seed)
    m = min(n, 6)
    cfg = sample_interior_configuration(region, m, rng)
    sub = ControlParams(gamma=params.gamma[:m], delta=params.delta[:m], q=params.q[:m])
    worst = verify_gradients(region, phi, cfg, sub)
    if worst > 1e-3:
        raise GradientConsistencyError(
            f"analytic gradient deviates from finite differences by {worst:.3e}")


def simulate(region: ConvexRegion, phi: DensityField, params: ControlParams,
             states: list, *, controller: str = PROPOSED, mode: str = CENTRALIZED,
             dt: float = 0.05, horizon: float = 150.0, loc_tol: float = 1e-3,
             loc_dwell: float = 2.0, seed: int = 0,
             reference_gradients: bool = False, message_sink=None,
             startup_check: bool = True) -> SimTrace:
    """Run the synchronous closed loop and record every sampled step.

    The proposed controller aborts (with the trace flagged) if a virtual
    center ever leaves the region; the conventional comparison records the
    first exit and stops there.
    """
    if controller not in (PROPOSED, CONVENTIONAL):
        raise ParameterError(f"unknown controller {controller!r}")
    if mode not in (CENTRALIZED, DISTRIBUTED):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode == DISTRIBUTED and controller != PROPOSED:
        raise ParameterError("distributed mode applies to the proposed controller only")
    if reference_gradients and mode == DISTRIBUTED:
        raise ParameterError("reference gradient mode is centralized only")
    params.check_input_bound([s.omega for s in states])

    n = len(states)
    trace = SimTrace(records=[], dt=dt, controller=controller, mode=mode)
    if controller == PROPOSED and not reference_gradients and startup_check:
        _startup_gradient_check(region, phi, params, n, seed)

    nodes = None
    if mode == DISTRIBUTED:
        from . import distributed as dist
        nodes = [dist.NodeState(agent_id=k, state=states[k], region=region,
                                phi=phi, params=params) for k in range(n)]

    v_speeds = np.array([s.v for s in states])
    omegas = np.array([s.omega for s in states])
    thetas0 = np.array([s.theta for s in states])
    conv_z = None
    if controller == CONVENTIONAL:
        conv_z = np.array([virtual_center(s) for s in states])

    n_steps = int(round(horizon / dt))
    dwell_steps = int(math.ceil(loc_dwell / dt)) + 1
    streak = 0
    ref_cost = make_cost_v(region, phi, params) if reference_gradients else None

    for m in range(n_steps + 1):
        t = m * dt
        if controller == CONVENTIONAL:
            z = conv_z
            theta = thetas0 + omegas * t
            scale = v_speeds / omegas
            zeta = z - np.column_stack((-scale * np.sin(theta), scale * np.cos(theta)))
        else:
            cur_states = [nd.state for nd in nodes] if nodes else states
            z = np.array([virtual_center(s) for s in cur_states])
            theta = np.array([s.theta for s in cur_states])
            zeta = np.array([s.zeta for s in cur_states])

        h_min = region.min_h(z)
        if np.any(h_min <= 0.0):
            worst = int(np.argmin(h_min))
            if controller == CONVENTIONAL:
                trace.infeasible = True
                trace.first_exit_time = t
                trace.first_exit_agent = worst
            else:
                trace.aborted = True
                trace.abort_reason = f"agent {worst} left the region at t={t:g}"
            break

        cfg = Configuration(centers=z)
        partition = compute_partition(region, cfg)
        moments = cell_moments(partition, phi)
        cost_v = coverage_cost_v(cfg, region, moments, params)
        cost_h = coverage_cost_h(cfg, partition, phi)

        if controller == PROPOSED:
            if nodes is not None:
                from . import distributed as dist
                u, sigma, msg_count = dist.run_phases(nodes, partition, moments,
                                                      message_sink=message_sink)
                trace.message_count += msg_count
            else:
                u = np.empty(n)
                sigma = np.empty(n)
                for k in range(n):
                    if reference_gradients:
                        grad = fd_gradient_oracle(ref_cost, cfg, k, 1e-6)
                    else:
                        grad = coverage_gradient(k, cfg, region, partition, moments, params, phi)
                    sigma[k] = math.cos(theta[k]) * grad[0] + math.sin(theta[k]) * grad[1]
                    u[k] = control_input(theta[k], grad, params.gamma[k],
                                         params.delta[k], omegas[k])
        else:
            u = omegas.copy()
            sigma = np.zeros(n)

        trace.records.append(StepRecord(
            t=t,
            zeta=region.to_world(zeta), theta=theta.copy(),
            z=region.to_world(z), c=region.to_world(moments.centroid),
            u=u.copy(), sigma=sigma.copy(), cost_v=cost_v, cost_h=cost_h))

        gap = np.hypot(*(z - moments.centroid).T)
        if gap.max() <= loc_tol:
            streak += 1
            if streak >= dwell_steps:
                trace.converged = True
                trace.converged_time = t - (streak - 1) * dt
                break
        else:
            streak = 0

        if m == n_steps:
            break
        if controller == CONVENTIONAL:
            grads = np.array([conventional_gradient(k, cfg, moments) for k in range(n)])
            conv_z = conv_z - dt * params.gamma[:, None] * grads
        elif nodes is not None:
            from . import distributed as dist
            dist.advance(nodes, u, dt)
        else:
            states = [step_csur(states[k], u[k], dt) for k in range(n)]

    return trace
