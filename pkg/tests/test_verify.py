import math

import numpy as np
import pytest

from bethe_lab.disorder import DisorderSpec, PotentialSample
from bethe_lab.errors import ConfigurationError
from bethe_lab.phase import EstimatorConfig
from bethe_lab.tree import build_topology, spectrum_edges
from bethe_lab import verify

SPEC = DisorderSpec()


def test_monotone_pair_equality_at_top_potential():
    # V = +1 everywhere shifts the whole spectrum by lam: the two sides coincide
    n = build_topology(2, 6).node_count
    left, right = verify.monotone_bound_pair(2, 0.05, 6, np.ones(n))
    assert left == pytest.approx(right, rel=1e-12)
    left, right = verify.monotone_bound_pair(2, 0.05, 6, -np.ones(n))
    assert left > right


def test_monotone_bound_report():
    report = verify.check_monotone_bound(2, 0.05, 8, 200, SPEC, 1)
    assert report.passed and report.violations == 0
    d = report.to_dict()
    assert set(d) == {"check", "params", "n", "violations", "fitted_constants", "pass"}


def test_monotone_bound_needs_unit_support():
    with pytest.raises(ConfigurationError):
        verify.check_monotone_bound(2, 0.05, 6, 10, DisorderSpec("gaussian"), 0)


def test_truncation_identity_single_sample():
    n = build_topology(2, 10).node_count
    sample = PotentialSample(np.random.default_rng(0).uniform(-1, 1, n), 0.3)
    rep = verify.truncation_error(2, 0.3, -2.5, 5, 5, sample, 1e-4)
    assert rep.identity_residual < 1e-12
    assert abs(rep.full_value - rep.truncated_value) <= rep.boundary_sum * (1 + 1e-12)


def test_truncation_check_passes():
    report = verify.check_truncation(2, 0.05, spectrum_edges(2, 0.05)[0] + 0.02, 6, 4, 1e-4,
                                     50, SPEC, 2)
    assert report.passed
    assert report.fitted_constants["max_identity_residual"] < 1e-10


def test_gap_check():
    cfg = EstimatorConfig(method="finite-depth", eta=0.0, R=12, n=60)
    report = verify.check_lyapunov_gap(2, 0.05, cfg, 3, sweep=[0.02])
    assert report.passed
    assert len(report.fitted_constants["rows"]) == 2


def test_boundary_decay_zero_disorder_outside_band():
    bd = verify.boundary_decay(2, 0.0, -3.0, [4, 6, 8, 10], 5, SPEC, 0)
    # open tree below the band: decays faster than K^(-1/2)
    assert bd.rate > 0.5 * math.log(2)


def test_boundary_check_fails_without_extra_decay():
    report = verify.check_boundary_decay(2, 0.0, 0.0, [4, 6, 8], 5, SPEC, 0)
    assert not report.passed


def test_fractional_moment_check():
    report = verify.check_fractional_moments(2, 0.0, -2.0, 0.0, 0.5, [2, 4, 6], 5, SPEC, 0)
    assert report.passed
    assert report.fitted_constants["slope"] == pytest.approx(-0.25 * math.log(2), abs=1e-9)


def test_edge_gate_report():
    report = verify.check_edge_gate(2, 3, 1.0, [0.5, 1.0, 2.0], 60, SPEC, 1)
    est = report.fitted_constants["estimates"]
    assert report.passed and est == sorted(est)
    assert report.check == "lifshitz"


def test_main_term_bound():
    report = verify.main_term_bound(2, 0.05, spectrum_edges(2, 0.05)[0] + 0.02, 6, 4, 40, SPEC, 5,
                                    gate_samples=20)
    assert report.passed
    assert report.check == "main"
