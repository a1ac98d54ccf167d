"""Coverage costs and gradients.

Provides the quadratic nearest-agent cost ``H`` and its per-agent gradient,
the off-centroid quadratic cost ``W``, centroid Jacobians assembled from
bisector-edge kernels, the barrier-weighted cost ``V`` whose reciprocal
boundary terms blow up at the region edges, the gradient of ``V`` in the
per-agent form used by the controller, and a central finite-difference
oracle for validating all analytic derivatives.

Jacobian layout: ``centroid_jacobian`` returns the 2x2 matrix ``G`` such
that a first-order move of agent ``k`` changes the cell-``i`` centroid by
``C(z_k + d) ~ C + G^T d``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import BoundaryViolationError, ParameterError
from .geometry import ConvexRegion, DensityField, edge_kernel, polygon_second_moment, REL_TOL
from .voronoi import (
    CellMoments,
    Configuration,
    VoronoiPartition,
    cell_moments,
    compute_partition,
    shared_edge_of_cell,
)

_I2 = np.eye(2)


@dataclasses.dataclass(frozen=True)
class ControlParams:
    """Per-agent controller parameters.

    ``gamma`` scales the steering correction, ``delta`` is the saturation
    boundary layer, ``q`` weights the off-centroid cost, and ``u_bar`` is an
    optional hard bound on the angular-rate input.
    """

    gamma: np.ndarray   # (N,)
    delta: np.ndarray   # (N,)
    q: np.ndarray       # (N, 2, 2)
    u_bar: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        d = np.asarray(self.delta, dtype=float).reshape(-1)
        q = np.asarray(self.q, dtype=float).reshape(-1, 2, 2)
        if not (len(g) == len(d) == len(q)):
            raise ParameterError("parameter arrays disagree on agent count")
        if np.any(g <= 0.0):
            raise ParameterError("gamma must be positive")
        if np.any(d <= 0.0):
            raise ParameterError("delta must be positive")
        if np.any(np.abs(q[:, 0, 1] - q[:, 1, 0]) > 1e-12):
            raise ParameterError("q must be symmetric")
        det = q[:, 0, 0] * q[:, 1, 1] - q[:, 0, 1] * q[:, 1, 0]
        if np.any(det <= 0.0) or np.any(q[:, 0, 0] <= 0.0):
            raise ParameterError("q must be positive-definite")
        u = self.u_bar
        if u is not None:
            u = np.asarray(u, dtype=float).reshape(-1)
            if len(u) != len(g):
                raise ParameterError("u_bar length disagrees with agent count")
            u.setflags(write=False)
        for name, arr in (("gamma", g), ("delta", d), ("q", q)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "u_bar", u)

    @classmethod
    def homogeneous(cls, n, gamma=1.0, delta=2.0, q=None, u_bar=None) -> "ControlParams":
        q = _I2 if q is None else np.asarray(q, dtype=float)
        ub = None if u_bar is None else np.full(n, float(u_bar))
        return cls(gamma=np.full(n, float(gamma)), delta=np.full(n, float(delta)),
                   q=np.broadcast_to(q, (n, 2, 2)).copy(), u_bar=ub)

    @property
    def n(self) -> int:
        return len(self.gamma)

    def check_input_bound(self, omega) -> None:
        """Require ``(1 + gamma)|omega| <= u_bar`` wherever a bound is set."""
        if self.u_bar is None:
            return
        omega = np.asarray(omega, dtype=float)
        limit = (1.0 + self.gamma) * np.abs(omega)
        bad = np.nonzero(limit > self.u_bar)[0]
        if len(bad):
            raise ParameterError(
                f"agent {bad[0]}: (1+gamma)*|omega| = {limit[bad[0]]:.6g} "
                f"exceeds input bound {self.u_bar[bad[0]]:.6g}")


@dataclasses.dataclass(frozen=True)
class GradientBundle:
    """Per-agent gradient of the barrier cost plus the pairwise pieces."""

    grad_v: np.ndarray  # (N, 2)
    jac_c: dict         # (k, i) -> 2x2, pairs with i in closed neighborhood of k
    grad_w: dict        # (k, i) -> 2-vector, same key set


def coverage_cost_h(cfg: Configuration, partition: VoronoiPartition, phi: DensityField) -> float:
    """Quadratic nearest-agent cost: half the density-weighted second moment
    of every cell about its own agent center."""
    total = 0.0
    for k, cell in enumerate(partition.cells):
        total += 0.5 * polygon_second_moment(cell, phi, cfg.centers[k])
    return total


def conventional_gradient(k: int, cfg: Configuration, moments: CellMoments) -> np.ndarray:
    """Per-agent gradient of the quadratic cost: ``M_k (z_k - C_k)``."""
    return moments.mass[k] * (cfg.centers[k] - moments.centroid[k])


def off_loc_cost(z_k, c_k, q_k) -> float:
    """Quadratic displacement of a center from its cell centroid."""
    gap = np.asarray(z_k, dtype=float) - np.asarray(c_k, dtype=float)
    return 0.5 * float(gap @ np.asarray(q_k) @ gap)


def _own_jacobian(region, cfg, partition, moments, phi, k) -> np.ndarray:
    tol = REL_TOL * region.diameter
    z_k = cfg.centers[k]
    jac = np.zeros((2, 2))
    for r in sorted(partition.adjacency[k]):
        seg = shared_edge_of_cell(partition.cells[k].vertices, z_k, cfg.centers[r], tol)
        if seg is None:
            continue
        ker = edge_kernel(seg, z_k, cfg.centers[r], phi)
        jac += ker.D - np.outer(ker.P, moments.centroid[k])
    return jac / moments.mass[k]


def _cross_jacobian(region, cfg, partition, moments, phi, k, i) -> np.ndarray:
    tol = REL_TOL * region.diameter
    seg = shared_edge_of_cell(partition.cells[k].vertices, cfg.centers[k], cfg.centers[i], tol)
    if seg is None:
        return np.zeros((2, 2))
    ker = edge_kernel(seg, cfg.centers[k], cfg.centers[i], phi)
    return (np.outer(ker.P, moments.centroid[i]) - ker.D) / moments.mass[i]


def centroid_jacobian(region: ConvexRegion, cfg: Configuration, partition: VoronoiPartition,
                      moments: CellMoments, phi: DensityField, k: int, i: int) -> np.ndarray:
    """Derivative of the cell-``i`` centroid with respect to agent ``k``.

    Exactly zero when ``i`` is neither ``k`` nor one of its neighbors: only
    the shared boundary segments move when ``z_k`` moves.
    """
    if i == k:
        return _own_jacobian(region, cfg, partition, moments, phi, k)
    if i not in partition.adjacency[k]:
        return np.zeros((2, 2))
    return _cross_jacobian(region, cfg, partition, moments, phi, k, i)


def off_loc_gradient(k: int, i: int, cfg: Configuration, moments: CellMoments,
                     jacobians: dict, params: ControlParams) -> np.ndarray:
    """Derivative of the cell-``i`` off-centroid cost with respect to ``z_k``."""
    jac = jacobians.get((k, i))
    if jac is None:
        return np.zeros(2)
    qzc = params.q[i] @ (cfg.centers[i] - moments.centroid[i])
    if i == k:
        return (_I2 - jac) @ qzc
    return -jac @ qzc


def coverage_cost_v(cfg: Configuration, region: ConvexRegion, moments: CellMoments,
                    params: ControlParams) -> float:
    """Barrier-weighted sum of off-centroid costs over all boundary edges."""
    h = region.h_values(cfg.centers)
    if np.any(h <= 0.0):
        k = int(np.argmin(h.min(axis=1)))
        raise BoundaryViolationError(f"agent {k} touches or crosses the boundary")
    gap = cfg.centers - moments.centroid
    w = 0.5 * np.einsum("na,nab,nb->n", gap, params.q, gap)
    return float(np.sum(w * (1.0 / h).sum(axis=1)))


def _assemble_gradient(region, z_k, q_k, c_k, own_jac, neighbor_terms) -> np.ndarray:
    """Shared per-agent assembly of the barrier-cost gradient.

    ``neighbor_terms`` is an ordered list of ``(s1_i, jac_ki, qzc_i)`` for the
    open neighborhood; ordering must be fixed by the caller so that
    centralized and message-passing evaluations produce identical floats.
    """
    h_k = region.h_values(z_k)
    s1 = float((1.0 / h_k).sum())
    s2 = (region.normals / (h_k * h_k)[:, None]).sum(axis=0)
    gap = z_k - c_k
    qzc = q_k @ gap
    w_k = 0.5 * float(gap @ qzc)
    grad = s1 * ((_I2 - own_jac) @ qzc) + w_k * s2
    for s1_i, jac, qzc_i in neighbor_terms:
        grad = grad - s1_i * (jac @ qzc_i)
    return grad


def agent_gradient(region: ConvexRegion, phi: DensityField, z_k, q_k,
                   mass_k: float, centroid_k, cell_vertices: np.ndarray,
                   neighbors) -> np.ndarray:
    """Barrier-cost gradient for one agent from its own cell data plus
    neighbor tuples ``(i, z_i, q_i, mass_i, centroid_i)`` sorted by id.

    Every bisector segment is reconstructed from the agent's own cell, so a
    message-passing node evaluates exactly the same floats as a centralized
    pass over the full partition.
    """
    tol = REL_TOL * region.diameter
    z_k = np.asarray(z_k, dtype=float)
    own_jac = np.zeros((2, 2))
    neighbor_terms = []
    kernels = []
    for (i, z_i, q_i, mass_i, centroid_i) in neighbors:
        seg = shared_edge_of_cell(cell_vertices, z_k, z_i, tol)
        if seg is None:
            kernels.append(None)
            continue
        ker = edge_kernel(seg, z_k, z_i, phi)
        kernels.append(ker)
        own_jac += ker.D - np.outer(ker.P, centroid_k)
    own_jac /= mass_k
    for (i, z_i, q_i, mass_i, centroid_i), ker in zip(neighbors, kernels):
        if ker is None:
            continue
        jac = (np.outer(ker.P, centroid_i) - ker.D) / mass_i
        s1_i = float((1.0 / region.h_values(z_i)).sum())
        qzc_i = q_i @ (np.asarray(z_i) - np.asarray(centroid_i))
        neighbor_terms.append((s1_i, jac, qzc_i))
    return _assemble_gradient(region, z_k, q_k, centroid_k, own_jac, neighbor_terms)


def coverage_gradient(k: int, cfg: Configuration, region: ConvexRegion,
                      partition: VoronoiPartition, moments: CellMoments,
                      params: ControlParams, phi: DensityField) -> np.ndarray:
    """Barrier-cost gradient for agent ``k`` over the full partition."""
    neighbors = [(i, cfg.centers[i], params.q[i], moments.mass[i], moments.centroid[i])
                 for i in sorted(partition.adjacency[k])]
    return agent_gradient(region, phi, cfg.centers[k], params.q[k],
                          moments.mass[k], moments.centroid[k],
                          partition.cells[k].vertices, neighbors)


def gradient_bundle(region: ConvexRegion, cfg: Configuration, partition: VoronoiPartition,
                    moments: CellMoments, params: ControlParams, phi: DensityField) -> GradientBundle:
    """All per-agent gradients plus the pairwise Jacobian/cost-gradient maps."""
    n = cfg.n
    grad_v = np.empty((n, 2))
    jac_c = {}
    grad_w = {}
    for k in range(n):
        grad_v[k] = coverage_gradient(k, cfg, region, partition, moments, params, phi)
        for i in sorted(partition.adjacency[k] | {k}):
            jac_c[(k, i)] = centroid_jacobian(region, cfg, partition, moments, phi, k, i)
            grad_w[(k, i)] = off_loc_gradient(k, i, cfg, moments, jac_c, params)
    return GradientBundle(grad_v=grad_v, jac_c=jac_c, grad_w=grad_w)


def fd_gradient_oracle(cost, cfg: Configuration, k: int, step: float) -> np.ndarray:
    """Central-difference gradient of ``cost`` with respect to center ``k``.

    ``cost`` is any callable of a Configuration; it is re-evaluated from
    scratch at each perturbed configuration.
    """
    grad = np.zeros(2)
    for d in range(2):
        offset = np.zeros(2)
        offset[d] = step
        plus = cost(cfg.replace(k, cfg.centers[k] + offset))
        minus = cost(cfg.replace(k, cfg.centers[k] - offset))
        grad[d] = (plus - minus) / (2.0 * step)
    return grad


def make_cost_h(region: ConvexRegion, phi: DensityField):
    """Callable Configuration -> quadratic coverage cost, for the FD oracle."""
    def cost(cfg: Configuration) -> float:
        partition = compute_partition(region, cfg)
        return coverage_cost_h(cfg, partition, phi)
    return cost


def make_cost_v(region: ConvexRegion, phi: DensityField, params: ControlParams):
    """Callable Configuration -> barrier coverage cost, for the FD oracle."""
    def cost(cfg: Configuration) -> float:
        partition = compute_partition(region, cfg)
        moments = cell_moments(partition, phi)
        return coverage_cost_v(cfg, region, moments, params)
    return cost


def fd_centroid_jacobian(region: ConvexRegion, phi: DensityField, cfg: Configuration,
                         k: int, i: int, step: float) -> np.ndarray:
    """Finite-difference version of ``centroid_jacobian`` (same layout)."""
    jac_t = np.zeros((2, 2))
    for d in range(2):
        offset = np.zeros(2)
        offset[d] = step
        for sign in (1.0, -1.0):
            perturbed = cfg.replace(k, cfg.centers[k] + sign * offset)
            moments = cell_moments(compute_partition(region, perturbed), phi)
            jac_t[:, d] += sign * moments.centroid[i] / (2.0 * step)
    return jac_t.T


def verify_gradients(region: ConvexRegion, phi: DensityField, cfg: Configuration,
                     params: ControlParams, step: float = 1e-6) -> float:
    """Cross-check the analytic barrier gradient against central differences.

    Returns the worst relative error; raises nothing so callers decide how
    to treat a failure.
    """
    partition = compute_partition(region, cfg)
    moments = cell_moments(partition, phi)
    cost = make_cost_v(region, phi, params)
    worst = 0.0
    for k in range(cfg.n):
        analytic = coverage_gradient(k, cfg, region, partition, moments, params, phi)
        numeric = fd_gradient_oracle(cost, cfg, k, step)
        denom = max(float(np.linalg.norm(numeric)), 1e-9)
        worst = max(worst, float(np.linalg.norm(analytic - numeric)) / denom)
    return worst
