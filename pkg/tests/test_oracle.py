import math

import numpy as np
import pytest

from bethe_lab.disorder import DisorderSpec, PotentialSample
from bethe_lab.errors import SizeError
from bethe_lab.oracle import (
    assemble,
    edge_probability,
    resolvent_column,
    smallest_eigenvalue,
    wilson_interval,
)
from bethe_lab.tree import build_topology


def _h(K, R, lam, seed):
    t = build_topology(K, R)
    return t, assemble(t, PotentialSample(np.random.default_rng(seed).uniform(-1, 1, t.node_count), lam))


def test_assemble_structure():
    t, h = _h(2, 2, 0.5, 0)
    a = h.dense()
    assert np.allclose(a, a.T)
    assert np.count_nonzero(np.triu(a, 1)) == t.node_count - 1
    assert np.all(np.abs(np.diag(a)) <= 0.5)


def test_resolvent_column_matches_inverse():
    _, h = _h(3, 2, 1.0, 1)
    z = 0.3 + 0.2j
    inv = np.linalg.inv(h.dense() - z * np.eye(h.dimension))
    assert np.allclose(resolvent_column(h, z, 2), inv[:, 2], rtol=1e-12)


@pytest.mark.parametrize("R", [1, 3, 6, 9])
def test_free_tree_ground_state(R):
    # the free rooted tree reduces to a path with hopping sqrt(K)
    t = build_topology(2, R)
    h = assemble(t, PotentialSample(np.zeros(t.node_count), 0.0))
    assert smallest_eigenvalue(h) == pytest.approx(-2 * math.sqrt(2) * math.cos(math.pi / (R + 2)), abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_smallest_eigenvalue_matches_dense(seed):
    _, h = _h(2 + seed % 2, 4, 0.8, seed)
    assert smallest_eigenvalue(h) == pytest.approx(np.linalg.eigvalsh(h.dense())[0], abs=1e-8)


def test_oracle_size_cap():
    t = build_topology(2, 12)
    with pytest.raises(SizeError):
        smallest_eigenvalue(assemble(t, PotentialSample(np.zeros(t.node_count), 0.0)))


def test_wilson_interval():
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.0552, abs=1e-4) and hi == pytest.approx(0.1744, abs=1e-4)
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0


def test_edge_probability_nested():
    probs = edge_probability(2, 3, 1.0, [0.5, 1.0, 2.0, 10.0], 60, DisorderSpec(), 2)
    est = [p.estimate for p in probs]
    assert est == sorted(est)
    assert est[-1] == 1.0
    assert all(p.low <= p.estimate <= p.high for p in probs)
