import numpy as np
import pytest
from hypothesis import given

from dbsi.errors import TopologyError
from dbsi.topology import Topology, _normalize, build_complete, build_custom, build_ring
from dbsi.weights import (
    averaging_weights,
    best_constant_weights,
    convergence_factor,
    metropolis_weights,
)

from test_topology import connected_edge_lists

CONSTRUCTORS = [best_constant_weights, metropolis_weights]


def check_contract(wm):
    W, topo = wm.W, wm.topology
    assert np.all(W[topo.adjacency == 0] == 0)
    assert np.max(np.abs(W.sum(axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(W.sum(axis=0) - 1)) <= 1e-12
    assert np.array_equal(W, W.T)
    if topo.M > 1:
        assert wm.convergence_factor < 1


def cycle_factor_oracle(M, weight_of_eig):
    # circulant spectrum of the cycle Laplacian: 2 - 2 cos(2 pi k / M)
    lap = [2 - 2 * np.cos(2 * np.pi * k / M) for k in range(1, M)]
    return max(abs(weight_of_eig(l)) for l in lap)


def test_best_constant_five_cycle():
    wm = best_constant_weights(build_ring(5, 1))
    assert wm.W[0, 0] == pytest.approx(0.2, abs=1e-12)
    assert wm.W[0, 1] == pytest.approx(0.4, abs=1e-12)
    lap = [2 - 2 * np.cos(2 * np.pi * k / 5) for k in range(1, 5)]
    alpha = 2 / (min(lap) + max(lap))
    oracle = cycle_factor_oracle(5, lambda l: 1 - alpha * l)
    assert oracle == pytest.approx(0.4472135955, abs=1e-9)
    assert wm.convergence_factor == pytest.approx(oracle, abs=1e-12)


def test_metropolis_five_cycle():
    wm = metropolis_weights(build_ring(5, 1))
    assert np.allclose(wm.W[wm.topology.adjacency == 1], 1 / 3)
    oracle = cycle_factor_oracle(5, lambda l: 1 - l / 3)
    assert oracle == pytest.approx(0.539, abs=1e-3)
    assert wm.convergence_factor == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("M", [2, 3, 5, 8])
def test_best_constant_complete_graph_is_exact_average(M):
    wm = best_constant_weights(build_complete(M))
    assert np.allclose(wm.W, 1 / M, atol=1e-15)
    assert wm.convergence_factor == pytest.approx(0, abs=1e-12)


def test_single_node():
    topo = build_custom(1, [])
    for ctor in CONSTRUCTORS:
        wm = ctor(topo)
        assert wm.W.tolist() == [[1.0]]
        assert wm.convergence_factor == 0


def test_metropolis_small_graphs():
    assert np.allclose(metropolis_weights(build_ring(2, 1)).W, 0.5)
    assert np.allclose(metropolis_weights(build_complete(3)).W, 1 / 3)


def test_convergence_factor_identity_and_average():
    assert convergence_factor(np.full((4, 4), 0.25)) == pytest.approx(0, abs=1e-15)
    assert convergence_factor(np.eye(4)) == pytest.approx(1.0)


@pytest.mark.parametrize("ctor", CONSTRUCTORS)
def test_disconnected_rejected(ctor):
    with pytest.raises(TopologyError):
        ctor(Topology(4, _normalize(4, [(0, 1), (2, 3)])))


@given(connected_edge_lists())
def test_contract_on_random_graphs(case):
    topo = build_custom(*case)
    for ctor in CONSTRUCTORS:
        check_contract(ctor(topo))


@given(connected_edge_lists(max_nodes=9))
def test_averaging_contraction_bound(case):
    topo = build_custom(*case)
    rng = np.random.default_rng(len(case[1]))
    for ctor in CONSTRUCTORS:
        wm = ctor(topo)
        phi = rng.standard_normal(topo.M)
        avg = phi.mean()
        e0 = np.linalg.norm(phi - avg)
        for k in range(1, 30):
            new = wm.W @ phi
            assert abs(new.sum() - phi.sum()) <= 1e-12 * max(1, np.abs(phi).sum())
            phi = new
            assert np.linalg.norm(phi - avg) <= wm.convergence_factor**k * e0 + 1e-12


def test_fallback_to_metropolis_on_negative_self_weight():
    # star graph: best-constant gives the hub a negative self weight
    star = build_custom(5, [(0, j) for j in range(1, 5)])
    assert not best_constant_weights(star).nonnegative
    wm, fell_back = averaging_weights(star, "best_constant")
    assert fell_back and wm.kind == "metropolis" and wm.nonnegative
    wm, fell_back = averaging_weights(build_ring(5, 1), "best_constant")
    assert not fell_back and wm.kind == "best_constant"
