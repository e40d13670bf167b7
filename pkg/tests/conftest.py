import numpy as np
import pytest

import randspn as rs


def random_circuit(rng, num_vars=None, leaf_family="gaussian", max_dims=None):
    """Draw a small random circuit plus randomized parameters."""
    dims = max_dims or {}
    num_vars = num_vars or int(rng.integers(2, dims.get("num_vars", 8) + 1))
    depth = int(rng.integers(1, dims.get("depth", 3) + 1))
    repetitions = int(rng.integers(1, dims.get("repetitions", 3) + 1))
    sums = int(rng.integers(1, dims.get("sums", 3) + 1))
    leaves = int(rng.integers(1, dims.get("leaves", 3) + 1))
    classes = int(rng.integers(1, dims.get("classes", 3) + 1))
    graph = rs.random_region_graph(num_vars, depth, repetitions, int(rng.integers(2**31)))
    circuit = rs.construct_circuit(graph, classes, sums, leaves, leaf_family)
    params = rs.init_parameters(circuit, seed=int(rng.integers(2**31)))
    return circuit, params


def randomize_params(params, rng, spread=1.0):
    for _, arr in params.named_arrays():
        arr += rng.normal(0.0, spread, arr.shape)
    return params


def quadrature_mass_2d(circuit, params, lo=-10.0, hi=10.0, points=401):
    """Trapezoid integral of exp(root) over a 2-variable Gaussian circuit."""
    axis = np.linspace(lo, hi, points)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    batch = np.column_stack([xx.ravel(), yy.ravel()])
    roots = rs.forward_log(circuit, params, batch)
    masses = []
    for c in range(roots.shape[1]):
        density = np.exp(roots[:, c]).reshape(points, points)
        masses.append(np.trapezoid(np.trapezoid(density, axis, axis=1), axis))
    return np.asarray(masses)


@pytest.fixture
def rng():
    return np.random.default_rng(20252025)
