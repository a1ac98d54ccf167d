"""Scenario files: JSON schema, validation, and the bundled study configs.

A scenario pins everything a run needs: region vertices, density, per-agent
initial poses and speed constants, controller parameters, controller and
execution mode, sampling time, horizon, and the stop rule.  Validation
reports the offending field by name.  Region coordinates may place the
frame origin anywhere; the region normalizes itself internally and all
emitted output stays in the input coordinates.
"""

from __future__ import annotations

import dataclasses
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import NonConvexError, ScenarioError
from .coverage import ControlParams
from .dynamics import CENTRALIZED, CONVENTIONAL, DISTRIBUTED, PROPOSED, AgentState, virtual_center
from .geometry import REL_TOL, ConvexRegion, DensityField


@dataclasses.dataclass(frozen=True)
class AgentSpec:
    """Initial pose and speed constants of one robot (input coordinates)."""

    zeta: tuple
    theta: float
    v: float
    omega: float


@dataclasses.dataclass(frozen=True)
class ParamSpec:
    """Controller parameters of one robot."""

    gamma: float
    delta: float
    q: tuple  # ((q11, q12), (q21, q22))
    u_bar: float | None = None


@dataclasses.dataclass(frozen=True)
class Scenario:
    name: str
    region: tuple            # CCW vertex list
    density: DensityField
    agents: tuple            # AgentSpec per robot
    params: tuple            # ParamSpec per robot
    controller: str = PROPOSED
    mode: str = CENTRALIZED
    dt: float = 0.05
    horizon: float = 150.0
    loc_tol: float = 1e-3
    loc_dwell: float = 2.0
    seed: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def build_region(self) -> ConvexRegion:
        return ConvexRegion.from_vertices(self.region)

    def control_params(self) -> ControlParams:
        gamma = np.array([p.gamma for p in self.params])
        delta = np.array([p.delta for p in self.params])
        q = np.array([p.q for p in self.params], dtype=float)
        bars = [p.u_bar for p in self.params]
        u_bar = None if all(b is None for b in bars) else np.array(
            [np.inf if b is None else b for b in bars])
        return ControlParams(gamma=gamma, delta=delta, q=q, u_bar=u_bar)

    def initial_states(self, region: ConvexRegion) -> list:
        """Agent states in the region frame (input poses shifted)."""
        return [AgentState(zeta=region.to_frame(np.asarray(a.zeta, dtype=float)),
                           theta=a.theta, v=a.v, omega=a.omega)
                for a in self.agents]

    def with_overrides(self, **kwargs) -> "Scenario":
        return dataclasses.replace(self, **kwargs)

    def scaled_params(self, gamma=None, delta=None, q_scale=None, u_bar=None) -> "Scenario":
        """Copy with scalar parameter overrides applied to every agent."""
        new = []
        for p in self.params:
            qm = tuple(tuple(v * (q_scale or 1.0) for v in row) for row in p.q)
            new.append(ParamSpec(gamma=gamma if gamma is not None else p.gamma,
                                 delta=delta if delta is not None else p.delta,
                                 q=qm,
                                 u_bar=u_bar if u_bar is not None else p.u_bar))
        return dataclasses.replace(self, params=tuple(new))


def _require(obj, key, kind, field):
    if key not in obj:
        raise ScenarioError(f"missing field {field!r}", field=field)
    val = obj[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if not isinstance(val, kind):
        raise ScenarioError(f"field {field!r} has the wrong type", field=field)
    return val


def _parse_density(obj) -> DensityField:
    kind = obj.get("kind", "uniform")
    if kind == "uniform":
        return DensityField.uniform()
    if kind == "gaussian-bump":
        return DensityField.gaussian_bump(center=obj["center"], width=obj["width"],
                                          floor=obj.get("floor", 0.1))
    raise ScenarioError(f"unknown density kind {kind!r}", field="density.kind")


def _parse_param(obj, idx) -> ParamSpec:
    field = f"params[{idx}]"
    gamma = _require(obj, "gamma", float, f"{field}.gamma")
    delta = _require(obj, "delta", float, f"{field}.delta")
    q = _require(obj, "q", list, f"{field}.q")
    try:
        qm = ((float(q[0][0]), float(q[0][1])), (float(q[1][0]), float(q[1][1])))
    except (IndexError, TypeError, ValueError) as exc:
        raise ScenarioError(f"field {field}.q must be a 2x2 matrix", field=f"{field}.q") from exc
    if gamma <= 0:
        raise ScenarioError(f"field {field}.gamma must be positive", field=f"{field}.gamma")
    if delta <= 0:
        raise ScenarioError(f"field {field}.delta must be positive", field=f"{field}.delta")
    u_bar = obj.get("u_bar")
    if u_bar is not None:
        u_bar = float(u_bar)
    return ParamSpec(gamma=gamma, delta=delta, q=qm, u_bar=u_bar)


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    """Validate a parsed JSON document into a Scenario."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object", field="<root>")
    region_raw = _require(doc, "region", list, "region")
    if len(region_raw) < 3:
        raise ScenarioError("field 'region' needs at least 3 vertices", field="region")
    try:
        region_pts = tuple((float(p[0]), float(p[1])) for p in region_raw)
    except (IndexError, TypeError, ValueError) as exc:
        raise ScenarioError("field 'region' must list [x, y] pairs", field="region") from exc
    try:
        region = ConvexRegion.from_vertices(region_pts)
    except NonConvexError as exc:
        raise ScenarioError(f"field 'region' is not convex: {exc}",
                            field=f"region[{exc.vertex_index}]") from exc

    agents_raw = _require(doc, "agents", list, "agents")
    if len(agents_raw) < 1:
        raise ScenarioError("field 'agents' must list at least one agent", field="agents")
    agents = []
    for idx, a in enumerate(agents_raw):
        field = f"agents[{idx}]"
        zeta = _require(a, "zeta", list, f"{field}.zeta")
        theta = _require(a, "theta", float, f"{field}.theta")
        v = _require(a, "v", float, f"{field}.v")
        omega = _require(a, "omega", float, f"{field}.omega")
        if v <= 0:
            raise ScenarioError(f"field {field}.v must be positive", field=f"{field}.v")
        if omega == 0:
            raise ScenarioError(f"field {field}.omega must be nonzero", field=f"{field}.omega")
        agents.append(AgentSpec(zeta=(float(zeta[0]), float(zeta[1])),
                                theta=theta, v=v, omega=omega))

    params_raw = doc.get("params", {"gamma": 1.0, "delta": 2.0, "q": [[1.0, 0.0], [0.0, 1.0]]})
    if isinstance(params_raw, dict):
        params = tuple(_parse_param(params_raw, idx) for idx in range(len(agents)))
    elif isinstance(params_raw, list):
        if len(params_raw) != len(agents):
            raise ScenarioError("field 'params' list length must match agent count",
                                field="params")
        params = tuple(_parse_param(p, idx) for idx, p in enumerate(params_raw))
    else:
        raise ScenarioError("field 'params' must be an object or a list", field="params")

    controller = doc.get("controller", PROPOSED)
    if controller not in (PROPOSED, CONVENTIONAL):
        raise ScenarioError(f"unknown controller {controller!r}", field="controller")
    mode = doc.get("mode", CENTRALIZED)
    if mode not in (CENTRALIZED, DISTRIBUTED):
        raise ScenarioError(f"unknown mode {mode!r}", field="mode")
    dt = float(doc.get("dt", 0.05))
    horizon = float(doc.get("horizon", 150.0))
    if dt <= 0:
        raise ScenarioError("field 'dt' must be positive", field="dt")
    if horizon <= dt:
        raise ScenarioError("field 'horizon' must exceed dt", field="horizon")

    scenario = Scenario(
        name=str(doc.get("name", name)),
        region=region_pts,
        density=_parse_density(doc.get("density", {"kind": "uniform"})),
        agents=tuple(agents),
        params=params,
        controller=controller,
        mode=mode,
        dt=dt,
        horizon=horizon,
        loc_tol=float(doc.get("loc_tol", 1e-3)),
        loc_dwell=float(doc.get("loc_dwell", 2.0)),
        seed=int(doc.get("seed", 0)),
    )
    _validate_initial_centers(scenario, region)
    return scenario


def _validate_initial_centers(scenario: Scenario, region: ConvexRegion) -> None:
    states = scenario.initial_states(region)
    centers = np.array([virtual_center(s) for s in states])
    inside = region.min_h(centers)
    for k, h in enumerate(inside):
        if h <= 0.0:
            raise ScenarioError(
                f"agents[{k}]: initial virtual center lies outside the region",
                field=f"agents[{k}]")
    if len(centers) > 1:
        diff = centers[:, None, :] - centers[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        tol = REL_TOL * region.diameter
        if d2.min() <= tol * tol:
            i, k = np.unravel_index(int(d2.argmin()), d2.shape)
            raise ScenarioError(
                f"agents[{i}] and agents[{k}] have coincident initial virtual centers",
                field=f"agents[{k}]")


def scenario_to_dict(scenario: Scenario) -> dict:
    doc = {
        "name": scenario.name,
        "region": [list(p) for p in scenario.region],
        "density": {"kind": scenario.density.kind},
        "agents": [{"zeta": list(a.zeta), "theta": a.theta, "v": a.v, "omega": a.omega}
                   for a in scenario.agents],
        "params": [{"gamma": p.gamma, "delta": p.delta, "q": [list(p.q[0]), list(p.q[1])],
                    **({"u_bar": p.u_bar} if p.u_bar is not None else {})}
                   for p in scenario.params],
        "controller": scenario.controller,
        "mode": scenario.mode,
        "dt": scenario.dt,
        "horizon": scenario.horizon,
        "loc_tol": scenario.loc_tol,
        "loc_dwell": scenario.loc_dwell,
        "seed": scenario.seed,
    }
    if not scenario.density.is_uniform:
        doc["density"].update({"center": list(scenario.density.center),
                               "width": scenario.density.width,
                               "floor": scenario.density.floor})
    return doc


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


BUNDLED = ("case1", "case2", "case3", "compare", "scale25", "scale100")


def load_scenario(source) -> Scenario:
    """Load a scenario from a path or from a bundled name like ``case1``."""
    name = str(source)
    if name in BUNDLED:
        text = resources.files("orbitcover.data").joinpath(f"{name}.json").read_text()
        return scenario_from_dict(json.loads(text), name=name)
    path = Path(source)
    if not path.exists():
        raise ScenarioError(f"scenario file {name!r} does not exist", field="<path>")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {name!r} is not valid JSON: {exc}",
                            field="<file>") from exc
    return scenario_from_dict(doc, name=path.stem)
