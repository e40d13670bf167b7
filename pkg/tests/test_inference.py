import numpy as np
import pytest

import randspn as rs
from randspn.errors import InvalidInput
from randspn.inference import weighted_logsumexp
from randspn.oracle import enumerate_assignments
from conftest import quadrature_mass_2d, random_circuit, randomize_params


def test_weighted_sum_matches_linear_arithmetic():
    # one sum, weights (0.5, 0.5), children ln 0.2 and ln 0.4 -> ln 0.3
    values = np.log(np.array([[0.2, 0.4]]))
    log_w = np.log(np.array([[0.5, 0.5]]))
    out = weighted_logsumexp(values, log_w)
    assert out[0, 0] == pytest.approx(np.log(0.3), abs=1e-12)


def test_weighted_logsumexp_handles_all_neg_inf():
    values = np.full((2, 3), -np.inf)
    log_w = np.log(np.full((1, 3), 1 / 3))
    out = weighted_logsumexp(values, log_w)
    assert np.all(np.isneginf(out))
    assert not np.isnan(out).any()


def test_product_blocks_add_log_values(rng):
    graph = rs.random_region_graph(2, 1, 1, seed=0)
    circuit = rs.construct_circuit(graph, 1, 1, 1)
    params = rs.init_parameters(circuit, seed=0)
    x = rng.normal(size=(3, 2))
    _, tables = rs.forward_log(circuit, params, x, return_tables=True)
    leaf_tables = [tables[b.index] for b in circuit.leaf_blocks()]
    product = next(b for b in circuit.blocks if b.kind == "product")
    np.testing.assert_allclose(
        tables[product.index][:, 0], leaf_tables[0][:, 0] + leaf_tables[1][:, 0],
        atol=0,
    )


def test_all_missing_roots_are_zero(rng):
    circuit, params = random_circuit(rng)
    randomize_params(params, rng)
    batch = rng.normal(size=(4, circuit.num_vars))
    roots = rs.forward_log(circuit, params, batch, missing=np.ones_like(batch, bool))
    np.testing.assert_array_equal(roots, np.zeros_like(roots))


def test_shape_mismatch_rejected(rng):
    circuit, params = random_circuit(rng, num_vars=5)
    with pytest.raises(InvalidInput):
        rs.forward_log(circuit, params, np.zeros((2, 4)))
    with pytest.raises(InvalidInput):
        rs.forward_log(circuit, params, np.zeros((2, 5)), missing=np.zeros((3, 5), bool))


def test_log_joint_and_priors(rng):
    circuit, params = random_circuit(rng, num_vars=4, max_dims={"classes": 2})
    while circuit.classes_C != 2:
        circuit, params = random_circuit(rng, num_vars=4, max_dims={"classes": 2})
    batch = rng.normal(size=(3, 4))
    roots = rs.forward_log(circuit, params, batch)

    uniform = rs.uniform_log_prior(2)
    joint = rs.log_joint(circuit, params, batch, uniform)
    np.testing.assert_allclose(joint, roots - np.log(2), atol=1e-12)

    with np.errstate(divide="ignore"):
        degenerate = np.log(np.array([1.0, 0.0]))
    joint = rs.log_joint(circuit, params, batch, degenerate)
    assert np.all(np.isneginf(joint[:, 1]))

    skew = np.log(np.array([0.9, 0.1]))
    joint = rs.log_joint(circuit, params, batch, skew)
    np.testing.assert_allclose(joint, roots + skew[None, :], atol=1e-12)

    with pytest.raises(InvalidInput):
        rs.log_joint(circuit, params, batch, np.log(np.array([0.8, 0.1])))


def test_classify_tie_break_and_argmax(rng):
    circuit, params = random_circuit(rng, num_vars=3, max_dims={"classes": 3})
    batch = rng.normal(size=(5, 3))
    roots = rs.forward_log(circuit, params, batch)
    predicted = rs.classify(circuit, params, batch)
    np.testing.assert_array_equal(predicted, np.argmax(roots, axis=1) + 1)

    # all-missing sample: every root is 0, tie resolves to class 1
    missing = np.ones((1, 3), bool)
    assert rs.classify(circuit, params, batch[:1], missing=missing)[0] == 1


def test_log_marginal_input(rng):
    circuit, params = random_circuit(rng, num_vars=4, max_dims={"classes": 2})
    while circuit.classes_C != 2:
        circuit, params = random_circuit(rng, num_vars=4, max_dims={"classes": 2})
    batch = rng.normal(size=(2, 4))
    roots = rs.forward_log(circuit, params, batch)

    # symmetric case: equal roots collapse to the shared value
    fake = np.full((3, 2), -1.234)
    mix = weighted_logsumexp(fake, rs.uniform_log_prior(2)[None, :])[:, 0]
    np.testing.assert_allclose(mix, -1.234, atol=1e-12)

    got = rs.log_marginal_input(circuit, params, batch)
    expected = np.log(0.5 * np.exp(roots[:, 0]) + 0.5 * np.exp(roots[:, 1]))
    np.testing.assert_allclose(got, expected, atol=1e-10)

    # total mass: all features missing -> log 1
    all_missing = rs.log_marginal_input(
        circuit, params, batch, missing=np.ones_like(batch, bool)
    )
    np.testing.assert_allclose(all_missing, 0.0, atol=1e-12)


def test_conditional_log(rng):
    circuit, params = random_circuit(rng, num_vars=4)
    randomize_params(params, rng, 0.5)
    batch = rng.normal(size=(3, 4))
    query = np.zeros((3, 4), bool)
    query[:, :2] = True
    evidence = np.zeros((3, 4), bool)

    # empty evidence: conditional equals the marginal over the query block
    got = rs.conditional_log(circuit, params, batch, query, evidence)
    expected = rs.log_marginal_input(circuit, params, batch, missing=~query)
    np.testing.assert_allclose(got, expected, atol=1e-12)

    # empty query: log p(nothing | evidence) = 0
    evidence[:, 2] = True
    empty = rs.conditional_log(circuit, params, batch, np.zeros((3, 4), bool), evidence)
    np.testing.assert_allclose(empty, 0.0, atol=1e-12)

    with pytest.raises(InvalidInput):
        rs.conditional_log(circuit, params, batch, evidence, evidence)


def test_conditional_on_independent_factors_equals_marginal(rng):
    # single product of two singleton leaf regions: variables independent
    graph = rs.random_region_graph(2, 1, 1, seed=3)
    circuit = rs.construct_circuit(graph, 1, 1, 1)
    params = randomize_params(rs.init_parameters(circuit, seed=1), rng)
    batch = rng.normal(size=(4, 2))
    query = np.tile([True, False], (4, 1))
    evidence = ~query
    conditional = rs.conditional_log(circuit, params, batch, query, evidence)
    marginal = rs.log_marginal_input(circuit, params, batch, missing=~query)
    np.testing.assert_allclose(conditional, marginal, atol=1e-10)


def test_discrete_normalization_brute_force(rng):
    for _ in range(5):
        circuit, params = random_circuit(
            rng, num_vars=int(rng.integers(2, 7)), leaf_family="bernoulli"
        )
        randomize_params(params, rng)
        X = np.array(enumerate_assignments(circuit.num_vars), dtype=float)
        roots = rs.forward_log(circuit, params, X)
        np.testing.assert_allclose(np.exp(roots).sum(axis=0), 1.0, atol=1e-9)


def test_continuous_normalization_quadrature(rng):
    for _ in range(3):
        circuit, params = random_circuit(rng, num_vars=2)
        randomize_params(params, rng, 0.8)
        masses = quadrature_mass_2d(circuit, params)
        np.testing.assert_allclose(masses, 1.0, atol=1e-4)


def test_marginal_consistency_against_enumeration(rng):
    for _ in range(5):
        circuit, params = random_circuit(
            rng, num_vars=int(rng.integers(2, 7)), leaf_family="bernoulli"
        )
        randomize_params(params, rng)
        n = circuit.num_vars
        X = np.array(enumerate_assignments(n), dtype=float)
        roots = np.exp(rs.forward_log(circuit, params, X))

        assignment = rng.integers(0, 2, n).astype(float)
        missing_vars = rng.permutation(n)[: int(rng.integers(1, n + 1))]
        mask = np.zeros((1, n), bool)
        mask[0, missing_vars] = True

        keep = np.ones(len(X), bool)
        for v in range(n):
            if not mask[0, v]:
                keep &= X[:, v] == assignment[v]
        expected = np.log(roots[keep].sum(axis=0))
        got = rs.forward_log(circuit, params, assignment[None, :], missing=mask)[0]
        np.testing.assert_allclose(got, expected, atol=1e-9)


def test_scale_stability_leaf_shift(rng):
    # singleton leaves everywhere: shifting every leaf table of one variable
    # by k shifts every root by exactly k
    graph = rs.random_region_graph(4, 2, 2, seed=21)
    circuit = rs.construct_circuit(graph, 2, 2, 2)
    params = randomize_params(rs.init_parameters(circuit, seed=2), rng)
    batch = rng.normal(size=(3, 4))
    _, tables = rs.forward_log(circuit, params, batch, return_tables=True)

    from randspn.inference import log_softmax, sum_block_inputs, weighted_logsumexp

    def forward_with_shift(k, var):
        shifted = {}
        for block in circuit.blocks:
            if block.kind == "leaf":
                t = tables[block.index].copy()
                if set(block.scope) == {var}:
                    t += k
                shifted[block.index] = t
        for layer in circuit.layer_order:
            for block in layer:
                if block.kind == "product":
                    left, right = block.inputs
                    t = shifted[left.index][:, :, None] + shifted[right.index][:, None, :]
                    shifted[block.index] = t.reshape(len(batch), block.width)
                elif block.kind == "sum":
                    x = sum_block_inputs(shifted, block)
                    shifted[block.index] = weighted_logsumexp(
                        x, log_softmax(params.sum_logits[block.index])
                    )
        return shifted[circuit.root_block.index]

    base = forward_with_shift(0.0, 1)
    moved = forward_with_shift(2.5, 1)
    np.testing.assert_allclose(moved - base, 2.5, atol=1e-12)


def test_no_nan_under_stress(rng):
    circuit, params = random_circuit(rng, num_vars=6)
    randomize_params(params, rng, 3.0)
    batch = rng.normal(0, 50, size=(8, 6))
    missing = rng.random((8, 6)) < 0.3
    masks = rs.sample_sum_dropout_mask(circuit, 0.4, 8, rng)
    roots = rs.forward_log(circuit, params, batch, missing=missing, sum_dropout=masks)
    assert not np.isnan(roots).any()


def test_streaming_matches_table_mode(rng):
    circuit, params = random_circuit(rng, num_vars=6)
    batch = rng.normal(size=(4, 6))
    lean = rs.forward_log(circuit, params, batch)
    full, tables = rs.forward_log(circuit, params, batch, return_tables=True)
    np.testing.assert_array_equal(lean, full)
    assert len(tables) == len(circuit.blocks)
