"""Single-site potential distributions, reproducible sampling, M-regularity.

A :class:`DisorderSpec` describes the law of the iid potential values
``V_x``.  The operator studied everywhere is ``T + lam * V``, so ``lam``
is not part of the distribution and lives on :class:`PotentialSample`.

JSON form::

    {"kind": "uniform-symmetric", "params": {"half_width": 1.0}}
    {"kind": "gaussian", "params": {"scale": 1.0}}
    {"kind": "cauchy", "params": {"scale": 1.0}}
    {"kind": "piecewise-density",
     "params": {"breakpoints": [-1, 0, 1], "values": [0.25, 0.75]}}

Piecewise densities are constant between consecutive breakpoints and are
normalized on construction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize, special

from .errors import ConfigurationError
from .streams import StreamId, stream_rng

KINDS = ("uniform-symmetric", "gaussian", "cauchy", "piecewise-density")

_DEFAULT_PARAMS = {
    "uniform-symmetric": {"half_width": 1.0},
    "gaussian": {"scale": 1.0},
    "cauchy": {"scale": 1.0},
}

# geometric window grid 1, 1/2, ..., 2**-20
_NU_GRID = 2.0 ** -np.arange(21)


@dataclass(frozen=True)
class DisorderSpec:
    kind: str = "uniform-symmetric"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown disorder kind {self.kind!r}")
        params = dict(_DEFAULT_PARAMS.get(self.kind, {}))
        params.update(self.params)
        if self.kind == "piecewise-density":
            params = _normalize_piecewise(params)
        else:
            key = "half_width" if self.kind == "uniform-symmetric" else "scale"
            extra = set(params) - {key}
            if extra:
                raise ConfigurationError(f"unexpected parameters {sorted(extra)} for {self.kind}")
            width = float(params[key])
            if not (width > 0 and math.isfinite(width)):
                raise ConfigurationError(f"{key} must be positive and finite")
            params[key] = width
        object.__setattr__(self, "params", params)

    # -- descriptors ---------------------------------------------------
    @property
    def support(self) -> tuple[float, float]:
        """Closed support interval; ``(-inf, inf)`` for unbounded kinds."""
        if self.kind == "uniform-symmetric":
            h = self.params["half_width"]
            return (-h, h)
        if self.kind == "piecewise-density":
            b = self.params["breakpoints"]
            return (b[0], b[-1])
        return (-math.inf, math.inf)

    @property
    def bounded(self) -> bool:
        lo, hi = self.support
        return math.isfinite(lo) and math.isfinite(hi)

    @property
    def sup_density(self) -> float:
        if self.kind == "uniform-symmetric":
            return 0.5 / self.params["half_width"]
        if self.kind == "gaussian":
            return 1.0 / (self.params["scale"] * math.sqrt(2 * math.pi))
        if self.kind == "cauchy":
            return 1.0 / (math.pi * self.params["scale"])
        return max(self.params["values"])

    def density(self, v):
        """Vectorized density; support endpoints belong to the support."""
        v = np.asarray(v, dtype=float)
        if self.kind == "uniform-symmetric":
            h = self.params["half_width"]
            return np.where(np.abs(v) <= h, 0.5 / h, 0.0)
        if self.kind == "gaussian":
            s = self.params["scale"]
            return np.exp(-0.5 * (v / s) ** 2) / (s * math.sqrt(2 * math.pi))
        if self.kind == "cauchy":
            s = self.params["scale"]
            return s / (math.pi * (v * v + s * s))
        b = np.asarray(self.params["breakpoints"])
        vals = np.asarray(self.params["values"])
        # at an interior breakpoint take the larger neighbouring value
        padded = np.concatenate(([0.0], vals, [0.0]))
        right = np.searchsorted(b, v, side="right")
        left = np.searchsorted(b, v, side="left")
        return np.maximum(padded[right], padded[left])

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "uniform-symmetric":
            h = self.params["half_width"]
            return np.clip((v + h) / (2 * h), 0.0, 1.0)
        if self.kind == "gaussian":
            return special.ndtr(v / self.params["scale"])
        if self.kind == "cauchy":
            return 0.5 + np.arctan(v / self.params["scale"]) / math.pi
        b = np.asarray(self.params["breakpoints"])
        return np.interp(v, b, self.params["_cum"], left=0.0, right=1.0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform-symmetric":
            h = self.params["half_width"]
            return rng.uniform(-h, h, n)
        if self.kind == "gaussian":
            return self.params["scale"] * rng.standard_normal(n)
        if self.kind == "cauchy":
            return self.params["scale"] * rng.standard_cauchy(n)
        u = rng.random(n)
        return np.interp(u, self.params["_cum"], self.params["breakpoints"])

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        params = {k: v for k, v in self.params.items() if not k.startswith("_")}
        return {"kind": self.kind, "params": params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DisorderSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigurationError("disorder spec needs a 'kind' field")
        return cls(data["kind"], dict(data.get("params", {})))

    @classmethod
    def from_json(cls, text: str) -> "DisorderSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid disorder JSON: {exc}") from None
        return cls.from_dict(data)


def _normalize_piecewise(params):
    try:
        b = [float(x) for x in params["breakpoints"]]
        vals = [float(x) for x in params["values"]]
    except (KeyError, TypeError, ValueError):
        raise ConfigurationError("piecewise-density needs numeric 'breakpoints' and 'values'") from None
    if len(b) < 2 or len(vals) != len(b) - 1:
        raise ConfigurationError("need len(values) == len(breakpoints) - 1 >= 1")
    if any(not math.isfinite(x) for x in b + vals):
        raise ConfigurationError("breakpoints and values must be finite")
    if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
        raise ConfigurationError("breakpoints must be strictly increasing")
    if any(x < 0 for x in vals):
        raise ConfigurationError("density values must be nonnegative")
    widths = np.diff(b)
    mass = float(np.dot(widths, vals))
    if mass <= 0:
        raise ConfigurationError("density has zero mass")
    vals = [x / mass for x in vals]
    cum = np.concatenate(([0.0], np.cumsum(widths * np.asarray(vals))))
    cum[-1] = 1.0
    return {"breakpoints": b, "values": vals, "_cum": cum}


@dataclass(frozen=True)
class PotentialSample:
    """One realized potential ``V(omega)`` on the nodes of a tree."""

    values: np.ndarray
    lam: float
    seed: StreamId = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError("disorder strength must be >= 0")

    @property
    def diagonal(self) -> np.ndarray:
        return self.lam * self.values


def lambda_from_anderson(width: float, hopping: float = 1.0) -> float:
    """Disorder strength for onsite energies uniform on ``[-W/2, W/2]``."""
    return width / (2.0 * hopping)


def density_eval(spec: DisorderSpec, v: float) -> float:
    return float(spec.density(v))


def sample(spec: DisorderSpec, seed: StreamId, n: int) -> np.ndarray:
    """``n`` iid draws from ``spec``; deterministic in ``(spec, seed, n)``."""
    if n < 0:
        raise ConfigurationError("n must be >= 0")
    return spec.draw(stream_rng(seed), n)


def _window_average(spec, v, nu):
    return (spec.cdf(v + nu) - spec.cdf(v - nu)) / (2 * nu)


def minimal_function(spec: DisorderSpec, v: float, tol: float = 1e-6) -> float:
    """Infimum over window half-widths in (0, 1] of the windowed average.

    The infimum is located on a geometric grid and then refined with a
    bounded scalar minimization around the best grid point.
    """
    averages = _window_average(spec, v, _NU_GRID)
    j = int(np.argmin(averages))
    best = float(averages[j])
    lo = _NU_GRID[min(j + 1, len(_NU_GRID) - 1)]
    hi = _NU_GRID[max(j - 1, 0)]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda nu: float(_window_average(spec, v, nu)),
            bounds=(lo, hi), method="bounded", options={"xatol": tol * lo},
        )
        best = min(best, float(res.fun))
    return max(best, 0.0)


def regularity_constant(spec: DisorderSpec, grid, cap: float = 1e3) -> float:
    """Smallest ``b`` with ``rho <= b * M_rho`` on ``grid``.

    ``0/0`` counts as 1.  Returns ``math.inf`` when a ratio exceeds ``cap``
    (or the density is positive where the minimal function vanishes).  For
    piecewise densities the breakpoints and piece midpoints are added to the
    grid so that narrow features are never stepped over.
    """
    points = np.asarray(grid, dtype=float).ravel()
    if spec.kind == "piecewise-density":
        b = np.asarray(spec.params["breakpoints"])
        points = np.concatenate((points, b, 0.5 * (b[1:] + b[:-1])))
    worst = 0.0
    for v in points:
        rho = density_eval(spec, v)
        m = minimal_function(spec, v)
        if rho == 0.0:
            ratio = 1.0 if m == 0.0 else 0.0
        elif m == 0.0:
            return math.inf
        else:
            ratio = rho / m
        if ratio > cap:
            return math.inf
        worst = max(worst, ratio)
    return worst
