"""Synchronous message-passing realization of the coverage controller.

Each agent runs as an isolated node that sees only the region geometry,
the static parameter table, its own cell data for the current round, and
one message per neighbor.  A geometry service computes the partition each
round and hands every node exactly its own cell, standing in for the
distributed partition-characterization algorithms this layer treats as an
external building block.  Node arithmetic reuses the same per-agent kernel
as the centralized path, so both modes produce identical floats.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import IncompleteRoundError, ProtocolError, StaleMomentsError
from .coverage import ControlParams, agent_gradient
from .dynamics import AgentState, control_input, heading, step_csur, virtual_center
from .geometry import ConvexRegion, DensityField
from .voronoi import CellMoments, Configuration, VoronoiPartition, cell_moments, compute_partition


@dataclasses.dataclass(frozen=True)
class AgentMessage:
    """Wire tuple a node shares with its neighbors: position, adjacency,
    and its own cell mass and centroid.  Size is independent of team size."""

    sender: int
    z: np.ndarray          # (2,)
    adjacency: frozenset
    mass: float
    centroid: np.ndarray   # (2,)
    round_index: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).reshape(2)
        c = np.asarray(self.centroid, dtype=float).reshape(2)
        z.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "centroid", c)
        if not self.mass > 0.0:
            raise ProtocolError("message mass must be positive")
        if self.sender in self.adjacency:
            raise ProtocolError("sender may not list itself as a neighbor")


@dataclasses.dataclass
class NodeState:
    """Mutable per-agent node: own dynamics plus per-round cell data and inbox."""

    agent_id: int
    state: AgentState
    region: ConvexRegion
    phi: DensityField
    params: ControlParams  # static table, distributed at start-up
    round_index: int = 0
    geometry_round: int = -1
    cell_vertices: np.ndarray | None = None
    adjacency: frozenset = frozenset()
    mass: float = float("nan")
    centroid: np.ndarray | None = None
    inbox: dict = dataclasses.field(default_factory=dict)

    def assign_geometry(self, round_index: int, cell_vertices, adjacency,
                        mass: float, centroid) -> None:
        self.geometry_round = round_index
        self.cell_vertices = cell_vertices
        self.adjacency = frozenset(adjacency)
        self.mass = float(mass)
        self.centroid = np.asarray(centroid, dtype=float)
        self.inbox = {}


def publish_state(node: NodeState) -> AgentMessage:
    """Build the message a node broadcasts to its neighbors this round."""
    if node.geometry_round != node.round_index:
        raise StaleMomentsError(
            f"node {node.agent_id} has cell data for round {node.geometry_round}, "
            f"not {node.round_index}")
    msg = AgentMessage(sender=node.agent_id, z=virtual_center(node.state),
                       adjacency=node.adjacency, mass=node.mass,
                       centroid=node.centroid, round_index=node.round_index)
    if not node.region.contains(msg.centroid):
        raise ProtocolError(f"node {node.agent_id} centroid left the region")
    return msg


def deliver(node: NodeState, msg: AgentMessage) -> None:
    """Place a neighbor message in the node inbox, one per sender per round."""
    if msg.round_index != node.round_index:
        raise ProtocolError(
            f"message round {msg.round_index} does not match node round {node.round_index}")
    if msg.sender in node.inbox:
        raise ProtocolError(f"duplicate message from {msg.sender}")
    node.inbox[msg.sender] = msg


def local_gradient(node: NodeState) -> np.ndarray:
    """Barrier-cost gradient of one agent from own data plus neighbor messages.

    Messages from non-neighbors are ignored; a missing neighbor message is
    an error.  Uses the same per-agent kernel as the centralized evaluation.
    """
    if node.geometry_round != node.round_index:
        raise StaleMomentsError(f"node {node.agent_id} cell data is stale")
    neighbors = []
    for i in sorted(node.adjacency):
        msg = node.inbox.get(i)
        if msg is None or msg.round_index != node.round_index:
            raise IncompleteRoundError(
                f"node {node.agent_id} is missing a round-{node.round_index} "
                f"message from neighbor {i}")
        neighbors.append((i, msg.z, node.params.q[i], msg.mass, msg.centroid))
    return agent_gradient(node.region, node.phi, virtual_center(node.state),
                          node.params.q[node.agent_id], node.mass, node.centroid,
                          node.cell_vertices, neighbors)


def node_command(node: NodeState):
    """Angular-rate command and heading-gradient projection for one node."""
    grad = local_gradient(node)
    k = node.agent_id
    sigma = float(heading(node.state.theta) @ grad)
    u = control_input(node.state.theta, grad, node.params.gamma[k],
                      node.params.delta[k], node.state.omega)
    return u, sigma


def run_phases(nodes, partition: VoronoiPartition, moments: CellMoments,
               message_sink=None):
    """Publish/deliver/compute phases of one round, given served geometry.

    Returns per-node commands and the number of delivered messages (one per
    directed adjacency edge).
    """
    rounds = {node.round_index for node in nodes}
    if len(rounds) != 1:
        raise ProtocolError(f"nodes disagree on the round counter: {sorted(rounds)}")
    round_index = rounds.pop()
    for node in nodes:
        k = node.agent_id
        node.assign_geometry(round_index, partition.cells[k].vertices,
                             partition.adjacency[k], moments.mass[k],
                             moments.centroid[k])
    messages = [publish_state(node) for node in nodes]
    if message_sink is not None:
        message_sink(round_index, messages)
    delivered = 0
    for msg in messages:
        for receiver in sorted(msg.adjacency):
            deliver(nodes[receiver], msg)
            delivered += 1
    n = len(nodes)
    u = np.empty(n)
    sigma = np.empty(n)
    for node in nodes:
        u[node.agent_id], sigma[node.agent_id] = node_command(node)
    return u, sigma, delivered


def advance(nodes, u, dt: float) -> None:
    """Step every node's own dynamics and advance the round counter."""
    for node in nodes:
        node.state = step_csur(node.state, float(u[node.agent_id]), dt)
        node.round_index += 1


@dataclasses.dataclass(frozen=True)
class RoundResult:
    """Pre-step snapshot of one completed synchronous round."""

    round_index: int
    configuration: Configuration
    partition: VoronoiPartition
    moments: CellMoments
    u: np.ndarray
    sigma: np.ndarray
    messages_delivered: int


def synchronous_round(nodes, dt: float, message_sink=None) -> RoundResult:
    """One full round: serve geometry, publish, deliver, compute, step.

    The partition is recomputed from the current virtual centers before the
    phases run, so adjacency always matches the configuration being acted on.
    """
    round_index = nodes[0].round_index
    cfg = Configuration(centers=np.array([virtual_center(n.state) for n in nodes]))
    partition = compute_partition(nodes[0].region, cfg)
    moments = cell_moments(partition, nodes[0].phi)
    u, sigma, delivered = run_phases(nodes, partition, moments, message_sink=message_sink)
    advance(nodes, u, dt)
    return RoundResult(round_index=round_index, configuration=cfg, partition=partition,
                       moments=moments, u=u, sigma=sigma, messages_delivered=delivered)
