import dataclasses
import math

import numpy as np
import pytest

from orbitcover.errors import IncompleteRoundError, ProtocolError, StaleMomentsError
from orbitcover.coverage import ControlParams, coverage_gradient
from orbitcover.distributed import (
    AgentMessage,
    NodeState,
    advance,
    deliver,
    local_gradient,
    publish_state,
    run_phases,
    synchronous_round,
)
from orbitcover.dynamics import (
    AgentState,
    control_input,
    sample_interior_configuration,
    step_csur,
    virtual_center,
)
from orbitcover.voronoi import Configuration, cell_moments, compute_partition


def make_nodes(region, phi, params, states):
    return [NodeState(agent_id=k, state=s, region=region, phi=phi, params=params)
            for k, s in enumerate(states)]


def states_with_centers(region, world_centers, rng=None, v=0.16, omega=0.8):
    out = []
    for k, c in enumerate(world_centers):
        theta = 0.4 + 0.37 * k
        zeta = region.to_frame(c) - (v / omega) * np.array([-math.sin(theta),
                                                            math.cos(theta)])
        out.append(AgentState(zeta=zeta, theta=theta, v=v, omega=omega))
    return out


def serve_geometry(nodes, region, phi):
    cfg = Configuration(centers=np.array([virtual_center(n.state) for n in nodes]))
    partition = compute_partition(region, cfg)
    moments = cell_moments(partition, phi)
    for node in nodes:
        k = node.agent_id
        node.assign_geometry(node.round_index, partition.cells[k].vertices,
                             partition.adjacency[k], moments.mass[k],
                             moments.centroid[k])
    return cfg, partition, moments


class TestPublishState:
    def test_single_agent_message(self, room, uniform):
        params = ControlParams.homogeneous(1)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.3, 0.9)]))
        serve_geometry(nodes, room, uniform)
        msg = publish_state(nodes[0])
        assert msg.adjacency == frozenset()
        assert msg.mass == pytest.approx(11.2, rel=1e-12)
        assert np.allclose(room.to_world(msg.centroid), (2.0, 1.4), atol=1e-12)

    def test_symmetric_pair_messages(self, room, uniform):
        params = ControlParams.homogeneous(2)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0), (3.0, 1.0)]))
        serve_geometry(nodes, room, uniform)
        msgs = [publish_state(n) for n in nodes]
        assert all(m.mass == pytest.approx(5.6, rel=1e-12) for m in msgs)
        worlds = [room.to_world(m.centroid) for m in msgs]
        assert np.allclose(worlds, [(1.0, 1.4), (3.0, 1.4)], atol=1e-12)

    def test_message_schema_constant_in_team_size(self):
        names = {f.name for f in dataclasses.fields(AgentMessage)}
        assert names == {"sender", "z", "adjacency", "mass", "centroid", "round_index"}

    def test_stale_geometry_rejected(self, room, uniform):
        params = ControlParams.homogeneous(1)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.3, 0.9)]))
        serve_geometry(nodes, room, uniform)
        nodes[0].round_index += 1
        with pytest.raises(StaleMomentsError):
            publish_state(nodes[0])


class TestLocalGradient:
    def test_matches_centralized_bitwise(self, room, uniform, rng):
        params = ControlParams.homogeneous(6)
        for _ in range(5):
            cfg0 = sample_interior_configuration(room, 6, rng)
            states = states_with_centers(
                room, room.to_world(cfg0.centers))
            nodes = make_nodes(room, uniform, params, states)
            cfg, partition, moments = serve_geometry(nodes, room, uniform)
            msgs = [publish_state(n) for n in nodes]
            for msg in msgs:
                for receiver in sorted(msg.adjacency):
                    deliver(nodes[receiver], msg)
            for node in nodes:
                local = local_gradient(node)
                central = coverage_gradient(node.agent_id, cfg, room,
                                            partition, moments, params, uniform)
                assert np.array_equal(local, central)

    def test_single_agent_closed_form(self, room, uniform):
        params = ControlParams.homogeneous(1)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0)]))
        serve_geometry(nodes, room, uniform)
        grad = local_gradient(nodes[0])
        assert np.allclose(grad, (-3.404444444444444, -1.5565432098765432), rtol=1e-12)

    def test_non_neighbor_message_irrelevant(self, room, uniform):
        xs = [0.35, 1.0, 1.7, 2.4, 3.05, 3.7]
        params = ControlParams.homogeneous(6)
        states = states_with_centers(room, [(x, 1.4) for x in xs])
        nodes = make_nodes(room, uniform, params, states)
        serve_geometry(nodes, room, uniform)
        msgs = {m.sender: m for m in (publish_state(n) for n in nodes)}
        assert nodes[0].adjacency == frozenset({1})
        deliver(nodes[0], msgs[1])
        baseline = local_gradient(nodes[0])
        # Stuff a far agent's message into the inbox; it must change nothing.
        nodes[0].inbox[5] = msgs[5]
        assert np.array_equal(local_gradient(nodes[0]), baseline)

    def test_missing_neighbor_message_raises(self, room, uniform):
        params = ControlParams.homogeneous(2)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0), (3.0, 1.0)]))
        serve_geometry(nodes, room, uniform)
        with pytest.raises(IncompleteRoundError):
            local_gradient(nodes[0])


class TestProtocol:
    def test_round_mismatch_rejected(self, room, uniform):
        params = ControlParams.homogeneous(2)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0), (3.0, 1.0)]))
        cfg, partition, moments = serve_geometry(nodes, room, uniform)
        nodes[1].round_index += 1
        with pytest.raises(ProtocolError):
            run_phases(nodes, partition, moments)

    def test_duplicate_delivery_rejected(self, room, uniform):
        params = ControlParams.homogeneous(2)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0), (3.0, 1.0)]))
        serve_geometry(nodes, room, uniform)
        msg = publish_state(nodes[1])
        deliver(nodes[0], msg)
        with pytest.raises(ProtocolError):
            deliver(nodes[0], msg)

    def test_stale_message_round_rejected(self, room, uniform):
        params = ControlParams.homogeneous(2)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0), (3.0, 1.0)]))
        serve_geometry(nodes, room, uniform)
        msg = publish_state(nodes[1])
        stale = dataclasses.replace(msg, round_index=5)
        with pytest.raises(ProtocolError):
            deliver(nodes[0], stale)


class TestSynchronousRound:
    def test_one_round_matches_centralized_step(self, room, uniform, rng):
        params = ControlParams.homogeneous(6)
        cfg0 = sample_interior_configuration(room, 6, rng)
        centers = room.to_world(cfg0.centers)
        states = states_with_centers(room, centers)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, centers))
        result = synchronous_round(nodes, dt=0.05)

        cfg = Configuration(centers=np.array([virtual_center(s) for s in states]))
        partition = compute_partition(room, cfg)
        moments = cell_moments(partition, uniform)
        for k, state in enumerate(states):
            grad = coverage_gradient(k, cfg, room, partition, moments,
                                     params, uniform)
            u = control_input(state.theta, grad, params.gamma[k], params.delta[k],
                              state.omega)
            assert result.u[k] == u
            stepped = step_csur(state, u, 0.05)
            assert np.array_equal(nodes[k].state.zeta, stepped.zeta)
            assert nodes[k].state.theta == stepped.theta
        assert all(n.round_index == 1 for n in nodes)

    def test_message_count_is_directed_edges(self, room, uniform, rng):
        params = ControlParams.homogeneous(6)
        cfg0 = sample_interior_configuration(room, 6, rng)
        states = states_with_centers(room, room.to_world(cfg0.centers))
        nodes = make_nodes(room, uniform, params, states)
        cfg, partition, moments = serve_geometry(nodes, room, uniform)
        _, _, delivered = run_phases(nodes, partition, moments)
        assert delivered == sum(len(adj) for adj in partition.adjacency)

    def test_message_exchange_symmetric(self, room, uniform, rng):
        params = ControlParams.homogeneous(6)
        cfg0 = sample_interior_configuration(room, 6, rng)
        states = states_with_centers(room, room.to_world(cfg0.centers))
        nodes = make_nodes(room, uniform, params, states)
        serve_geometry(nodes, room, uniform)
        msgs = [publish_state(n) for n in nodes]
        for msg in msgs:
            for receiver in sorted(msg.adjacency):
                deliver(nodes[receiver], msg)
        for node in nodes:
            for sender in node.inbox:
                assert node.agent_id in nodes[sender].inbox

    def test_advance_increments_round(self, room, uniform):
        params = ControlParams.homogeneous(2)
        nodes = make_nodes(room, uniform, params,
                           states_with_centers(room, [(1.0, 1.0), (3.0, 1.0)]))
        cfg, partition, moments = serve_geometry(nodes, room, uniform)
        u, sigma, _ = run_phases(nodes, partition, moments)
        advance(nodes, u, 0.05)
        assert all(n.round_index == 1 for n in nodes)
        assert all(not n.inbox or True for n in nodes)
