"""SVG renderings of a run: trajectories, cost decay, and steering inputs.

Output is byte-deterministic: a fixed hash salt pins element ids and the
date metadata is stripped, so re-rendering the same trace reproduces the
same file.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .dynamics import CONVENTIONAL, SimTrace  # noqa: E402
from .scenarios import Scenario  # noqa: E402

plt.rcParams["svg.hashsalt"] = "orbitcover"
plt.rcParams["svg.fonttype"] = "none"

_CYCLE = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_trajectories(trace: SimTrace, scenario: Scenario, path) -> None:
    """Robot paths (thin solid), virtual centers (dotted), centroids (dashed);
    trajectories start at 'x' markers and end at 'o' markers."""
    fig, ax = plt.subplots(figsize=(7, 6))
    ring = list(scenario.region) + [scenario.region[0]]
    ax.plot([p[0] for p in ring], [p[1] for p in ring], color="black", lw=1.2)
    zeta = trace.column("zeta")
    z = trace.column("z")
    c = trace.column("c")
    for k in range(trace.n_agents):
        color = _CYCLE[k % len(_CYCLE)]
        ax.plot(zeta[:, k, 0], zeta[:, k, 1], color=color, lw=0.6, alpha=0.7)
        ax.plot(z[:, k, 0], z[:, k, 1], color=color, lw=1.8, ls=":")
        ax.plot(c[:, k, 0], c[:, k, 1], color=color, lw=1.4, ls="--", alpha=0.8)
        ax.plot([z[0, k, 0]], [z[0, k, 1]], marker="x", color=color, ms=8)
        ax.plot([z[-1, k, 0]], [z[-1, k, 1]], marker="o", mfc="none", color=color, ms=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.set_title(f"{scenario.name}: trajectories")
    _save(fig, Path(path))


def render_cost(trace: SimTrace, scenario: Scenario, path) -> None:
    """Cost decay over time: barrier cost for the proposed controller,
    quadratic cost for the conventional one."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = trace.column("t")
    if trace.controller == CONVENTIONAL:
        ax.plot(t, trace.column("cost_h"), color=_CYCLE[0])
        ax.set_ylabel("H")
    else:
        ax.plot(t, trace.column("cost_v"), color=_CYCLE[0])
        ax.set_ylabel("V")
    ax.set_xlabel("t [s]")
    ax.set_title(f"{scenario.name}: coverage cost")
    _save(fig, Path(path))


def render_inputs(trace: SimTrace, scenario: Scenario, path) -> None:
    """Steering offsets u - omega per agent over time."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = trace.column("t")
    u = trace.column("u")
    for k in range(trace.n_agents):
        omega = scenario.agents[k].omega
        ax.plot(t, u[:, k] - omega, color=_CYCLE[k % len(_CYCLE)], lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("u - omega [rad/s]")
    ax.set_title(f"{scenario.name}: steering inputs")
    _save(fig, Path(path))


def render_all(trace: SimTrace, scenario: Scenario, out_dir) -> list:
    out = Path(out_dir)
    paths = [out / "trajectories.svg", out / "cost.svg", out / "inputs.svg"]
    render_trajectories(trace, scenario, paths[0])
    render_cost(trace, scenario, paths[1])
    render_inputs(trace, scenario, paths[2])
    return paths
