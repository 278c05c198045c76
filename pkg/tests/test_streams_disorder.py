import math

import numpy as np
import pytest

from bethe_lab.disorder import (
    DisorderSpec,
    PotentialSample,
    lambda_from_anderson,
    minimal_function,
    regularity_constant,
    sample,
)
from bethe_lab.errors import ConfigurationError
from bethe_lab.streams import mean_and_stderr, parallel_map, resolve_threads, stream_rng


def test_streams_are_keyed_and_reproducible():
    a = stream_rng(5, 3).random(4)
    assert np.array_equal(a, stream_rng(5, 3).random(4))
    assert np.array_equal(a, stream_rng((5, 1), 2).random(4))
    assert not np.array_equal(a, stream_rng(5, 4).random(4))
    assert not np.array_equal(a, stream_rng(6, 3).random(4))


def test_parallel_map_preserves_order():
    assert parallel_map(lambda i: i * i, 20, threads=4) == [i * i for i in range(20)]


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("BETHE_LAB_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_mean_and_stderr():
    m, s = mean_and_stderr([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert s == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


def test_uniform_density_and_support():
    spec = DisorderSpec()
    assert spec.support == (-1.0, 1.0)
    assert spec.bounded
    assert spec.density(0.3) == 0.5
    assert spec.density(1.5) == 0.0
    assert spec.cdf(0.0) == pytest.approx(0.5)


def test_cauchy_and_gaussian_densities():
    assert DisorderSpec("cauchy").density(0.0) == pytest.approx(1 / math.pi)
    assert DisorderSpec("gaussian").density(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert not DisorderSpec("cauchy").bounded


def test_piecewise_is_normalized():
    spec = DisorderSpec("piecewise-density", {"breakpoints": [-1, 0, 1], "values": [1, 3]})
    assert spec.cdf(1.0) == pytest.approx(1.0)
    assert spec.density(0.5) == pytest.approx(0.75)  # mass 1 + 3 = 4
    draws = spec.draw(stream_rng(0), 20000)
    assert np.mean(draws > 0) == pytest.approx(0.75, abs=0.02)


@pytest.mark.parametrize("params", [
    {"breakpoints": [0, 1], "values": [1, 2]},
    {"breakpoints": [1, 0], "values": [1]},
    {"breakpoints": [0, 1], "values": [-1]},
    {"breakpoints": [0, 1], "values": [0]},
])
def test_piecewise_rejects_bad_input(params):
    with pytest.raises(ConfigurationError):
        DisorderSpec("piecewise-density", params)


def test_spec_validation_and_round_trip():
    with pytest.raises(ConfigurationError):
        DisorderSpec("laplace")
    with pytest.raises(ConfigurationError):
        DisorderSpec("gaussian", {"scale": -1.0})
    spec = DisorderSpec("gaussian", {"scale": 0.7})
    assert DisorderSpec.from_json(spec.to_json()) == spec
    with pytest.raises(ConfigurationError):
        DisorderSpec.from_json("{not json")


def test_sampling_is_seeded():
    spec = DisorderSpec()
    assert np.array_equal(sample(spec, 3, 10), sample(spec, 3, 10))
    v = sample(spec, 3, 10000)
    assert v.min() >= -1 and v.max() <= 1


def test_potential_sample():
    s = PotentialSample(np.array([1.0, -0.5]), 0.2)
    assert np.allclose(s.diagonal, [0.2, -0.1])
    with pytest.raises(ConfigurationError):
        PotentialSample(np.zeros(2), -1.0)
    assert lambda_from_anderson(4.0, 2.0) == pytest.approx(1.0)


def test_minimal_function_uniform():
    spec = DisorderSpec()
    # inside: every window averages 1/2; at the edge: half the window is empty
    assert minimal_function(spec, 0.0) == pytest.approx(0.5, abs=1e-6)
    assert minimal_function(spec, 1.0) == pytest.approx(0.25, abs=1e-6)
    assert minimal_function(spec, 3.0) == 0.0


def test_regularity_constant():
    assert regularity_constant(DisorderSpec(), np.linspace(-1, 1, 21)) == pytest.approx(2.0, rel=1e-6)
    spike = DisorderSpec("piecewise-density", {"breakpoints": [-1, 0, 1e-9, 1],
                                               "values": [1, 1e9, 1]})
    assert math.isinf(regularity_constant(spike, np.linspace(-1, 1, 11)))
