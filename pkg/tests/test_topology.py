import numpy as np
import pytest

from diffrl.topology import (
    Topology,
    build_topology,
    combine,
    combine_one,
    contraction_factor,
    disagreement_norm,
    hastings_weights,
    load_matrix_text,
    realised_weights,
    sample_link_failures,
    save_matrix_text,
    validate_connectivity,
)


def test_ring_neighbourhood_size():
    t = build_topology("ring", 5)
    assert list(t.degrees()) == [3, 3, 3, 3, 3]


def test_complete_adjacency():
    t = build_topology("complete", 4)
    assert t.adjacency.all()


def test_random_connected_average_degree():
    t = build_topology("random_connected", 25, target_avg_degree=4.2, seed=123)
    assert 3.8 <= t.average_degree() <= 4.6


def test_random_connected_infeasible_degree_rejected():
    with pytest.raises(ValueError):
        build_topology("random_connected", 10, target_avg_degree=25.0, seed=0)
    with pytest.raises(ValueError):
        build_topology("random_connected", 10, target_avg_degree=1.2, seed=0)


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(np.array([[True, True], [False, True]]))  # asymmetric
    with pytest.raises(ValueError):
        Topology(np.array([[True, False], [False, True]]))  # disconnected
    with pytest.raises(ValueError):
        Topology(np.array([[False, True], [True, False]]))  # missing self-loops


def test_hastings_complete_graph_uniform():
    for n in (3, 4, 7):
        c = hastings_weights(build_topology("complete", n))
        np.testing.assert_allclose(c, 1.0 / n, atol=1e-15)


def test_hastings_ring3_equals_complete():
    c = hastings_weights(build_topology("ring", 3))
    np.testing.assert_allclose(c, 1.0 / 3.0, atol=1e-15)


def test_hastings_random_graph_invariants():
    t = build_topology("random_connected", 25, target_avg_degree=4.2, seed=9)
    c = hastings_weights(t)
    validate_connectivity(c, t.adjacency)
    np.testing.assert_allclose(c.sum(axis=0), 1.0, atol=1e-12, rtol=0)
    np.testing.assert_allclose(c.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert np.trace(c) > 0
    # primitivity: some power is strictly positive
    power = np.eye(25)
    positive = False
    for _ in range(25):
        power = power @ c
        if (power > 0).all():
            positive = True
            break
    assert positive


def test_combine_identity():
    xs = [np.arange(4.0) + k for k in range(3)]
    out = combine(xs, np.eye(3))
    for a, b in zip(out, xs):
        np.testing.assert_array_equal(a, b)


def test_combine_complete_graph_is_mean():
    rng = np.random.default_rng(5)
    xs = [rng.normal(size=6) for _ in range(4)]
    c = hastings_weights(build_topology("complete", 4))
    out = combine(xs, c)
    mean = np.mean(xs, axis=0)
    for o in out:
        np.testing.assert_allclose(o, mean, atol=1e-12)


def test_combine_consensus_fixed_point():
    x = np.random.default_rng(6).normal(size=8)
    c = hastings_weights(build_topology("ring", 5))
    out = combine([x.copy() for _ in range(5)], c)
    for o in out:
        # fixed point up to one rounding step of the weighted dot product
        np.testing.assert_allclose(o, x, rtol=5e-16, atol=1e-15)


def test_combine_mass_conservation():
    rng = np.random.default_rng(7)
    xs = [rng.normal(size=10) for _ in range(6)]
    c = hastings_weights(build_topology("random_connected", 6, 3.0, seed=3))
    out = combine(xs, c)
    np.testing.assert_allclose(np.sum(out, axis=0), np.sum(xs, axis=0), atol=1e-10)


def test_combine_rejects_layout_mismatch():
    with pytest.raises(ValueError):
        combine([np.zeros(3), np.zeros(4)], np.eye(2))


def test_failures_renormalisation_row_stochastic():
    rng = np.random.default_rng(8)
    t = build_topology("ring", 7)
    c = hastings_weights(t)
    for _ in range(50):
        alive = sample_link_failures(t, 0.6, rng)
        assert np.array_equal(alive, alive.T)
        assert alive.diagonal().all()
        w = realised_weights(c, alive)
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12, rtol=0)
        # no weight on dead links
        assert not np.any((w > 0) & ~alive.T)


def test_combine_one_matches_barrier_form():
    rng = np.random.default_rng(9)
    t = build_topology("random_connected", 5, 3.0, seed=4)
    c = hastings_weights(t)
    xs = [rng.normal(size=6) for _ in range(5)]
    alive = sample_link_failures(t, 0.4, rng)
    barrier = combine(xs, c, alive)
    snapshots = dict(enumerate(xs))
    for k in range(5):
        per_agent = combine_one(k, snapshots, c, alive[:, k])
        np.testing.assert_allclose(per_agent, barrier[k], atol=1e-12)


def test_disagreement_identical_zero():
    assert disagreement_norm([np.ones(5)] * 3) == 0.0


def test_disagreement_antisymmetric_pair():
    x = np.array([1.0, -2.0, 3.0])
    got = disagreement_norm([x, -x])
    np.testing.assert_allclose(got, np.sqrt(2) * np.linalg.norm(x), atol=1e-12)


def test_disagreement_matches_projector_oracle():
    rng = np.random.default_rng(10)
    n, m = 4, 7
    xs = [rng.normal(size=m) for _ in range(n)]
    stacked = np.concatenate(xs)
    projector = np.eye(n * m) - np.kron(np.ones((n, n)) / n, np.eye(m))
    np.testing.assert_allclose(
        disagreement_norm(xs), np.linalg.norm(projector @ stacked), atol=1e-12
    )


def test_contraction_complete_graph_zero():
    c = hastings_weights(build_topology("complete", 6))
    assert contraction_factor(c) < 1e-10


def test_contraction_identity_is_one():
    np.testing.assert_allclose(contraction_factor(np.eye(5)), 1.0, atol=1e-9)


def test_contraction_ring25_strictly_inside_unit():
    c = hastings_weights(build_topology("ring", 25))
    f = contraction_factor(c)
    assert 0.0 < f < 1.0 - 1e-6
    np.testing.assert_allclose(f, np.linalg.norm(c - 1.0 / 25.0, ord=2), atol=1e-8)


def test_contraction_matches_svd_random():
    rng = np.random.default_rng(11)
    for seed in range(10):
        n = int(rng.integers(3, 12))
        t = build_topology("random_connected", n, min(3.0, n), seed=seed)
        c = hastings_weights(t)
        np.testing.assert_allclose(
            contraction_factor(c), np.linalg.norm(c - 1.0 / n, ord=2), atol=1e-8
        )


def test_lemma_contraction_property_200_random_graphs():
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(3, 31))
        max_deg = min(float(n), 6.0)
        target = float(rng.uniform(2 * (n - 1) / n + 1, max_deg))
        t = build_topology("random_connected", n, target, seed=int(rng.integers(1 << 31)))
        assert contraction_factor(hastings_weights(t)) < 1.0


def test_repeated_combine_reaches_consensus_in_predicted_rounds():
    rng = np.random.default_rng(13)
    for seed in (0, 1, 2):
        n = 10
        t = build_topology("random_connected", n, 3.5, seed=seed)
        c = hastings_weights(t)
        xs = [rng.normal(size=5) for _ in range(n)]
        d0 = disagreement_norm(xs)
        factor = contraction_factor(c)
        predicted = int(np.ceil(np.log(1e-8 / d0) / np.log(factor))) + 5
        for _ in range(predicted):
            xs = combine(xs, c)
            if disagreement_norm(xs) < 1e-8:
                break
        assert disagreement_norm(xs) < 1e-8


def test_matrix_text_round_trip(tmp_path):
    c = hastings_weights(build_topology("ring", 5))
    path = tmp_path / "c.txt"
    save_matrix_text(c, path, header="mixing weights")
    np.testing.assert_array_equal(load_matrix_text(path), c)
