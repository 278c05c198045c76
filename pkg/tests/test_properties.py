"""Randomized property checks."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from bethe_lab.disorder import DisorderSpec, PotentialSample
from bethe_lab.lyapunov import estimate_finite_depth
from bethe_lab.oracle import assemble, resolvent_column
from bethe_lab.scatter import reflection_magnitude
from bethe_lab.tree import SpectralPoint, build_topology, forward_recursion, free_forward_green

branching = st.integers(2, 3)
depth = st.integers(0, 4)
lam = st.floats(0, 2)
energy = st.floats(-5, 5)
eta = st.floats(1e-3, 2)


@settings(max_examples=60, deadline=None)
@given(branching, depth, lam, energy, eta, st.integers(0, 2**32))
def test_forward_recursion_matches_oracle(K, R, lam, E, eta, seed):
    t = build_topology(K, R)
    sample = PotentialSample(np.random.default_rng(seed).uniform(-1, 1, t.node_count), lam)
    point = SpectralPoint(E, eta, lam)
    state = forward_recursion(t, sample, point)
    ref = resolvent_column(assemble(t, sample), point.z, 0)[0]
    assert abs(state.root - ref) <= 1e-10 * abs(ref)
    assert np.all(state.gamma.imag > 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), energy, st.floats(0, 5))
def test_free_root_solves_quadratic(K, E, eta):
    z = complex(E, eta)
    g = free_forward_green(K, z)
    assert abs(K * g * g + z * g + 1) <= 1e-10 * max(1.0, abs(z))
    assert g.imag >= 0
    assert math.sqrt(K) * abs(g) <= 1 + 1e-9


@settings(max_examples=500, deadline=None)
@given(st.floats(-20, 20), st.one_of(st.just(0.0), st.floats(1e-6, 20)), st.floats(1e-3, math.pi - 1e-3))
def test_subunitary_iff_positive_imaginary_part(re, im, k):
    assert (reflection_magnitude(complex(re, im), k) < 1) == (im > 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 1), energy, st.integers(0, 1000))
def test_estimates_are_deterministic(lam, E, seed):
    args = (2, lam, E, 1e-2, 6, 8, DisorderSpec(), seed)
    assert estimate_finite_depth(*args, threads=1) == estimate_finite_depth(*args, threads=2)
