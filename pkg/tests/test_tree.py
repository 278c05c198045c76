import math

import numpy as np
import pytest

from bethe_lab.disorder import PotentialSample
from bethe_lab.errors import ConfigurationError, SizeError
from bethe_lab.oracle import assemble, resolvent_column
from bethe_lab.tree import (
    SpectralPoint,
    build_topology,
    forward_recursion,
    free_forward_green,
    free_lattice_green,
    free_lyapunov,
    homogeneous_vertex_green,
    level_green,
    path_green_magnitude,
    spectrum_edges,
    weak_disorder_threshold,
)


def test_topology_indexing():
    t = build_topology(3, 2)
    assert t.node_count == 1 + 3 + 9
    assert list(t.children(1)) == [4, 5, 6]
    assert t.parent(5) == 1 and t.parent(0) is None
    assert t.depth_of(12) == 2
    assert t.path(12) == [0, 3, 12]
    assert t.level_slice(1) == slice(1, 4)


def test_topology_limits():
    with pytest.raises(ConfigurationError):
        build_topology(1, 3)
    with pytest.raises(SizeError):
        build_topology(2, 70)


def test_free_forward_green_closed_forms():
    assert free_forward_green(2, 0.0) == pytest.approx(1j / math.sqrt(2))
    assert free_forward_green(2, -3.0) == pytest.approx(0.5)
    assert free_forward_green(2, 3.0) == pytest.approx(-0.5)
    assert free_forward_green(4, 4.5) == pytest.approx((-4.5 + math.sqrt(4.25)) / 8)


@pytest.mark.parametrize("K", [2, 3, 5])
@pytest.mark.parametrize("z", [0.3 + 1e-3j, -4 + 0.5j, 2.9 + 1e-9j, -1.1j + 3])
def test_free_forward_green_root_and_sign(K, z):
    g = free_forward_green(K, z)
    assert abs(K * g * g + z * g + 1) < 1e-12
    if z.imag > 0:
        assert g.imag > 0


def test_free_lattice_green():
    assert free_lattice_green(2, -3.0) == pytest.approx(2 / 3)
    assert free_lattice_green(2, 0.0) == pytest.approx(1j * math.sqrt(2) / 3)


def test_free_lyapunov():
    assert free_lyapunov(2, 1.0) == pytest.approx(math.log(math.sqrt(2)))
    assert free_lyapunov(4, 4.5) == pytest.approx(math.log((4.5 + math.sqrt(4.25)) / 2))
    for K in (2, 3, 4):
        assert free_lyapunov(K, K + 1.0) == math.log(K)


def test_spectrum_and_threshold():
    assert spectrum_edges(2, 0.5) == pytest.approx((-3.328427, 3.328427), abs=1e-6)
    assert weak_disorder_threshold(2) == pytest.approx(0.0857864, abs=1e-7)


def test_zero_disorder_tree_with_free_leaves_is_homogeneous():
    t = build_topology(2, 6)
    point = SpectralPoint(0.7, 1e-3, 0.0)
    g0 = free_forward_green(2, point.z)
    state = forward_recursion(t, PotentialSample(np.zeros(t.node_count), 0.0), point, g0)
    assert np.allclose(state.gamma, g0)


def test_level_green_matches_dense_resolvent():
    rng = np.random.default_rng(1)
    t = build_topology(2, 4)
    sample = PotentialSample(rng.uniform(-1, 1, t.node_count), 0.7)
    point = SpectralPoint(0.4, 0.01, 0.7)
    state = forward_recursion(t, sample, point)
    col = resolvent_column(assemble(t, sample), point.z, 0)
    for d in range(5):
        assert np.allclose(level_green(state, d), col[t.level_slice(d)], rtol=1e-10)
    assert path_green_magnitude(state, 20) == pytest.approx(abs(col[20]), rel=1e-10)


def test_herglotz():
    rng = np.random.default_rng(2)
    t = build_topology(3, 3)
    sample = PotentialSample(rng.uniform(-1, 1, t.node_count), 1.0)
    state = forward_recursion(t, sample, SpectralPoint(-0.2, 1e-4, 1.0))
    assert np.all(state.gamma.imag > 0)


def test_homogeneous_vertex_green_free():
    point = SpectralPoint(-3.0, 0.0, 0.0)
    g0 = free_forward_green(2, point.z)
    assert homogeneous_vertex_green(2, 0.0, point, [g0] * 3, 0.0) == pytest.approx(2 / 3)
    with pytest.raises(ConfigurationError):
        homogeneous_vertex_green(2, 0.0, point, [g0] * 2, 0.0)


def test_lambda_mismatch_rejected():
    t = build_topology(2, 2)
    with pytest.raises(ConfigurationError):
        forward_recursion(t, PotentialSample(np.zeros(t.node_count), 0.1), SpectralPoint(0, 1, 0.2))
