"""Lyapunov-exponent estimators, the delocalization criterion, ac density.

Two independent estimators of the disorder average of ``-log |G(0,0; E+i0)|``
(forward value at the root of a rooted tree) are provided:

* :func:`estimate_finite_depth` averages over explicit finite trees;
* :func:`population_dynamics` samples the stationary law of the forward
  recursion with a pool.

They share nothing beyond the disorder spec, so disagreement between them
exposes method bias.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .disorder import DisorderSpec, PotentialSample
from .errors import ConfigurationError, DiagnosticsError
from .streams import StreamId, mean_and_stderr, parallel_map, stream_rng
from .tree import (
    SpectralPoint,
    build_topology,
    forward_recursion,
    free_forward_green,
    homogeneous_vertex_green,
)

BOUNDARIES = ("open", "free")


@dataclass(frozen=True)
class LyapunovEstimate:
    mean: float
    stderr: float
    n_samples: int
    method: str
    eta: float
    depth_or_pool: int
    resonances: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.stderr < 0 or not math.isfinite(self.mean) or self.n_samples < 1:
            raise DiagnosticsError(f"invalid estimate {self}")

    def to_dict(self, **context) -> dict:
        out = {"method": self.method, **context, "eta": self.eta, "mean": self.mean,
               "stderr": self.stderr, "n": self.n_samples, "depth_or_pool": self.depth_or_pool}
        if self.resonances:
            out["resonances"] = self.resonances
        if self.flags:
            out["flags"] = list(self.flags)
        return out


@dataclass
class PopulationPool:
    gammas: np.ndarray
    point: SpectralPoint
    sweep_count: int = 0

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.gammas[rng.integers(0, self.gammas.size, size)]


class Criterion(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNDECIDED = "undecided"


def _boundary_value(K, boundary, point):
    if boundary == "open":
        return None
    if boundary == "free":
        return free_forward_green(K, point.z)
    raise ConfigurationError(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}")


def _homogeneous_root(K, R, z, bvalue):
    # lam = 0: every node of a level carries the same forward value
    g = 1.0 / (-z - (0.0 if bvalue is None else K * bvalue))
    for _ in range(R):
        g = 1.0 / (-z - K * g)
    return g


def estimate_finite_depth(K: int, lam: float, E: float, eta: float, R: int, n: int,
                          spec: DisorderSpec, seed: StreamId, boundary: str = "free",
                          threads: int | None = None) -> LyapunovEstimate:
    """Average of ``-log |gamma_root|`` over ``n`` random depth-``R`` trees.

    ``boundary="free"`` continues every leaf with the free tree, which
    removes the in-band boundary oscillation of the open tree; ``"open"``
    is the plain finite tree.  At ``lam = 0`` the tree is homogeneous and
    the recursion runs on one value per level.
    """
    if R < 1 or n < 2:
        raise ConfigurationError("need R >= 1 and n >= 2")
    point = SpectralPoint(E, eta, lam)
    bvalue = _boundary_value(K, boundary, point)
    if lam == 0.0:
        g = _homogeneous_root(K, R, point.z, bvalue)
        return LyapunovEstimate(-math.log(abs(g)), 0.0, n, "finite-depth", eta, R)
    topo = build_topology(K, R)

    def one(i):
        values = spec.draw(stream_rng(seed, i), topo.node_count)
        state = forward_recursion(topo, PotentialSample(values, lam, (seed, i)), point, bvalue)
        return -math.log(abs(state.root)), state.resonances

    results = parallel_map(one, n, threads)
    mean, err = mean_and_stderr([r[0] for r in results])
    resonances = sum(r[1] for r in results)
    flags = ("resonance",) if resonances else ()
    return LyapunovEstimate(mean, err, n, "finite-depth", eta, R, resonances, flags)


@numba.njit(cache=True)
def _pool_sweep(pool, picks, potentials, targets, lam, z, K):
    total = 0.0
    for u in range(targets.size):
        s = 0j
        for j in range(K):
            s += pool[picks[u, j]]
        den = lam * potentials[u] - z - s
        if abs(den) < 1e-300:
            den = 1e-300
        g = 1.0 / den
        pool[targets[u]] = g
        total -= math.log(abs(g))
    return total / targets.size


def population_dynamics(K: int, lam: float, E: float, eta: float, pool_size: int,
                        burn_in: int, sweeps: int, spec: DisorderSpec, seed: StreamId):
    """Pool sampler for the stationary forward value.

    Each update draws ``K`` pool members and one potential value, forms
    ``1/(lam V - z - sum)`` and overwrites a uniformly chosen member.  The
    estimate averages ``-log |new value|`` over the measurement sweeps; its
    error bar comes from the scatter of per-sweep means.
    """
    if pool_size < 1000:
        raise ConfigurationError("pool_size must be >= 1000")
    if sweeps < 2 or burn_in < 0:
        raise ConfigurationError("need sweeps >= 2 and burn_in >= 0")
    point = SpectralPoint(E, eta, lam)
    z = point.z
    pool = np.full(pool_size, free_forward_green(K, z), dtype=complex)
    rng = stream_rng(seed)
    sweep_means = []
    for sweep in range(burn_in + sweeps):
        picks = rng.integers(0, pool_size, (pool_size, K))
        potentials = spec.draw(rng, pool_size)
        targets = rng.integers(0, pool_size, pool_size)
        m = _pool_sweep(pool, picks, potentials, targets, lam, z, K)
        if sweep >= burn_in:
            sweep_means.append(m)
    if not np.all(np.isfinite(pool)):
        raise DiagnosticsError("pool contains non-finite values")
    # at lam = 0 the pool sits at the free fixed point by construction
    if lam > 0 and np.ptp(pool.real) < 1e-14 and np.ptp(pool.imag) < 1e-14:
        raise DiagnosticsError("pool collapsed to a single value")
    mean, err = mean_and_stderr(sweep_means)
    est = LyapunovEstimate(mean, err, sweeps * pool_size, "population-dynamics", eta, pool_size)
    return PopulationPool(pool, point, burn_in + sweeps), est


def extrapolate_eta(estimates) -> LyapunovEstimate:
    """Weighted linear fit of the mean against eta; returns the intercept.

    ``estimates`` is a sequence of ``(eta, LyapunovEstimate)`` with at least
    three distinct, decreasing eta.  If the fit is inconsistent with the
    error bars (reduced chi-square above 9) the largest eta is dropped and
    the fit repeated while at least three points remain.
    """
    pairs = [(float(eta), est) for eta, est in estimates]
    etas = [p[0] for p in pairs]
    if len(set(etas)) < 3:
        raise ConfigurationError("need at least 3 distinct eta values")
    if any(b >= a for a, b in zip(etas, etas[1:])):
        raise ConfigurationError("eta values must be strictly decreasing")
    flags: list[str] = []
    while True:
        x = np.array([p[0] for p in pairs])
        y = np.array([p[1].mean for p in pairs])
        s = np.array([p[1].stderr for p in pairs])
        weighted = bool(np.all(s > 0))
        w = 1.0 / s**2 if weighted else np.ones_like(x)
        a = np.column_stack((np.ones_like(x), x))
        aw = a * w[:, None]
        cov = np.linalg.inv(a.T @ aw)
        coef = cov @ (aw.T @ y)
        resid = y - a @ coef
        chi2 = float(np.sum(w * resid**2))
        dof = len(x) - 2
        if weighted:
            err = math.sqrt(cov[0, 0])
            bad = chi2 / dof > 9.0
        else:
            err = math.sqrt(chi2 / dof * cov[0, 0]) if dof > 0 else 0.0
            bad = False
        if bad and len(pairs) > 3:
            flags.append(f"dropped eta={pairs[0][0]:g}")
            pairs = pairs[1:]
            continue
        if bad:
            flags.append("unstable fit")
        break
    first = pairs[-1][1]
    n = sum(p[1].n_samples for p in pairs)
    return LyapunovEstimate(float(coef[0]), err, n, first.method + "+eta-extrapolated", 0.0,
                            first.depth_or_pool, sum(p[1].resonances for p in pairs), tuple(flags))


def delocalization_criterion(est: LyapunovEstimate, K: int) -> Criterion:
    """Three-way decision of ``L < log K`` with a two-sigma buffer."""
    bound = math.log(K)
    if est.mean + 2 * est.stderr < bound:
        return Criterion.HOLDS
    if est.mean - 2 * est.stderr >= bound:
        return Criterion.FAILS
    return Criterion.UNDECIDED


@dataclass(frozen=True)
class PoolConfig:
    pool_size: int = 2000
    burn_in: int = 20
    sweeps: int = 20


def stationary_pool(K, lam, E, eta, spec, seed, config: PoolConfig = PoolConfig()) -> PopulationPool:
    pool, _ = population_dynamics(K, lam, E, eta, config.pool_size, config.burn_in,
                                  config.sweeps, spec, seed)
    return pool


def vertex_green_samples(K: int, lam: float, E: float, eta: float, n: int, spec: DisorderSpec,
                         seed: StreamId, method: str = "population", R: int = 12,
                         pool_config: PoolConfig = PoolConfig(), threads: int | None = None) -> np.ndarray:
    """``n`` samples of ``G(x, x; E + i eta)`` at a vertex of the regular tree.

    With ``method="population"`` the ``K + 1`` branch values come from a
    stationary pool; with ``"finite-depth"`` they are roots of independent
    depth-``R`` trees continued by the free tree.
    """
    point = SpectralPoint(E, eta, lam)
    if method == "population":
        # the pool uses stream 0, sample i uses stream i + 1
        pool = stationary_pool(K, lam, E, eta, spec, seed, pool_config)

        def one(i):
            rng = stream_rng(seed, i + 1)
            return homogeneous_vertex_green(K, lam, point, pool.draw(rng, K + 1), spec.draw(rng, 1)[0])
    elif method == "finite-depth":
        topo = build_topology(K, R)
        bvalue = free_forward_green(K, point.z)

        def one(i):
            rng = stream_rng(seed, i)
            branches = []
            for _ in range(K + 1):
                values = spec.draw(rng, topo.node_count)
                branches.append(forward_recursion(topo, PotentialSample(values, lam), point, bvalue).root)
            return homogeneous_vertex_green(K, lam, point, branches, spec.draw(rng, 1)[0])
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    return np.array(parallel_map(one, n, threads), dtype=complex)


def ac_density(K: int, lam: float, E: float, eta: float, n: int, spec: DisorderSpec,
               seed: StreamId, method: str = "population", R: int = 12,
               pool_config: PoolConfig = PoolConfig(), threads: int | None = None) -> tuple[float, float]:
    """(mean of Im G / pi, fraction of samples with Im G > 10 eta)."""
    if eta <= 0:
        raise ConfigurationError("ac_density needs eta > 0")
    g = vertex_green_samples(K, lam, E, eta, n, spec, seed, method, R, pool_config, threads)
    density = math.fsum(g.imag.tolist()) / (n * math.pi)
    frac = float(np.count_nonzero(g.imag > 10 * eta)) / n
    return max(density, 0.0), frac


@dataclass(frozen=True)
class MomentFit:
    depths: tuple[int, ...]
    log_moments: tuple[float, ...]
    slope: float
    slope_stderr: float
    intercept: float


def fractional_moment(K: int, lam: float, E: float, eta: float, s: float, depths, n: int,
                      spec: DisorderSpec, seed: StreamId, boundary: str = "free",
                      buffer: int = 4, threads: int | None = None) -> MomentFit:
    """Decay rate of ``E |G(0, x)|^s`` along the leftmost path.

    Each sample is a tree of depth ``max(depths) + buffer``; ``|G(0, x)|``
    at the leftmost node of each requested depth is the product of forward
    magnitudes on the path.  The slope of ``log E|G|^s`` against depth is
    fitted by weighted least squares.
    """
    if not 0 < s < 1:
        raise ConfigurationError("s must lie in (0, 1)")
    depths = tuple(sorted(int(d) for d in depths))
    if len(depths) < 2 or depths[0] < 0:
        raise ConfigurationError("need at least two nonnegative depths")
    point = SpectralPoint(E, eta, lam)
    bvalue = _boundary_value(K, boundary, point)
    topo = build_topology(K, depths[-1] + buffer)

    def one(i):
        values = spec.draw(stream_rng(seed, i), topo.node_count)
        state = forward_recursion(topo, PotentialSample(values, lam, (seed, i)), point, bvalue)
        mags = np.abs(state.gamma[[0] + [topo.level_start(d) for d in range(1, depths[-1] + 1)]])
        logs = np.cumsum(np.log(mags))
        return np.exp(s * logs[list(depths)])

    if lam == 0.0:
        samples = np.array([one(0)])
    else:
        samples = np.array(parallel_map(one, n, threads))
    moments = samples.mean(axis=0)
    y = np.log(moments)
    x = np.asarray(depths, dtype=float)
    if samples.shape[0] > 1:
        sigma = samples.std(axis=0, ddof=1) / (math.sqrt(samples.shape[0]) * moments)
    else:
        sigma = np.zeros_like(y)
    if np.all(sigma > 0):
        coef, cov = np.polyfit(x, y, 1, w=1.0 / sigma, cov="unscaled")
        slope_err = math.sqrt(cov[0, 0])
    else:
        coef = np.polyfit(x, y, 1)
        slope_err = 0.0
    return MomentFit(depths, tuple(float(v) for v in y), float(coef[0]), slope_err, float(coef[1]))


__all__ = [
    "Criterion", "LyapunovEstimate", "MomentFit", "PoolConfig", "PopulationPool",
    "ac_density", "delocalization_criterion", "estimate_finite_depth", "extrapolate_eta",
    "fractional_moment", "population_dynamics", "stationary_pool", "vertex_green_samples",
]
