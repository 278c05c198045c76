"""(lambda, E) phase diagrams and the spectral-edge window scanner."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .disorder import DisorderSpec
from .errors import BetheLabError, ConfigurationError
from .lyapunov import (
    Criterion,
    LyapunovEstimate,
    delocalization_criterion,
    estimate_finite_depth,
    population_dynamics,
)
from .streams import StreamId
from .tree import free_lyapunov, spectrum_edges, weak_disorder_threshold

METHODS = ("finite-depth", "population", "closed-form")


class CellClass(str, enum.Enum):
    OUTSIDE = "outside-spectrum"
    HOLDS = "criterion-holds"
    FAILS = "criterion-fails"
    UNDECIDED = "undecided"


_FROM_CRITERION = {
    Criterion.HOLDS: CellClass.HOLDS,
    Criterion.FAILS: CellClass.FAILS,
    Criterion.UNDECIDED: CellClass.UNDECIDED,
}


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "finite-depth"
    eta: float = 1e-6
    R: int = 14
    n: int = 200
    boundary: str = "free"
    pool_size: int = 2000
    burn_in: int = 20
    sweeps: int = 20
    disorder: DisorderSpec = field(default_factory=DisorderSpec)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown estimator method {self.method!r}")
        if self.eta < 0:
            raise ConfigurationError("eta must be >= 0")
        if self.R < 1 or self.n < 2:
            raise ConfigurationError("need R >= 1 and n >= 2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["disorder"] = self.disorder.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EstimatorConfig":
        data = dict(data)
        if "disorder" in data and not isinstance(data["disorder"], DisorderSpec):
            data["disorder"] = DisorderSpec.from_dict(data["disorder"])
        return cls(**data)


def estimate(K: int, lam: float, E: float, config: EstimatorConfig, seed: StreamId,
             threads: int | None = None) -> LyapunovEstimate:
    """One Lyapunov estimate with the configured backend."""
    if config.method == "closed-form":
        if lam != 0.0:
            raise ConfigurationError("closed-form backend is only available at lambda = 0")
        return LyapunovEstimate(free_lyapunov(K, E), 0.0, 1, "closed-form", 0.0, 0)
    if config.method == "population":
        _, est = population_dynamics(K, lam, E, config.eta, config.pool_size, config.burn_in,
                                     config.sweeps, config.disorder, seed)
        return est
    return estimate_finite_depth(K, lam, E, config.eta, config.R, config.n, config.disorder,
                                 seed, config.boundary, threads)


def classify(K: int, lam: float, E: float, est: LyapunovEstimate | None) -> CellClass:
    if abs(E) > spectrum_edges(K, lam)[1]:
        return CellClass.OUTSIDE
    if est is None:
        return CellClass.UNDECIDED
    return _FROM_CRITERION[delocalization_criterion(est, K)]


@dataclass
class PhaseGrid:
    K: int
    lambda_axis: np.ndarray
    energy_axis: np.ndarray
    L_values: np.ndarray
    stderr_values: np.ndarray
    class_codes: np.ndarray  # object array of CellClass
    config: EstimatorConfig
    seed: int
    failures: dict = field(default_factory=dict)

    def criterion_mask(self) -> np.ndarray:
        """Cells with a finite estimate satisfying the criterion.

        Unlike ``class_codes`` this ignores the spectrum, so at ``lam = 0``
        with the closed-form backend it shows the whole ``|E| < K + 1``
        region including the part outside the spectrum.
        """
        L, s = self.L_values, self.stderr_values
        with np.errstate(invalid="ignore"):
            return np.isfinite(L) & (L + 2 * s < math.log(self.K))

    def rows(self):
        for i, lam in enumerate(self.lambda_axis):
            for j, E in enumerate(self.energy_axis):
                yield (float(lam), float(E), float(self.L_values[i, j]),
                       float(self.stderr_values[i, j]), CellClass(self.class_codes[i, j]).value)

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if not math.isfinite(x) else float(x) for x in row] for row in a]

        return {
            "tool": "bethe_lab",
            "version": __version__,
            "K": self.K,
            "seed": self.seed,
            "estimator": self.config.to_dict(),
            "lambda_axis": [float(x) for x in self.lambda_axis],
            "energy_axis": [float(x) for x in self.energy_axis],
            "L_values": clean(self.L_values),
            "stderr_values": clean(self.stderr_values),
            "class_codes": [[CellClass(c).value for c in row] for row in self.class_codes],
            "failures": {f"{i},{j}": msg for (i, j), msg in self.failures.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseGrid":
        def arr(rows):
            return np.array([[math.nan if x is None else x for x in row] for row in rows], dtype=float)

        codes = np.array([[CellClass(c) for c in row] for row in data["class_codes"]], dtype=object)
        failures = {tuple(int(x) for x in k.split(",")): v for k, v in data.get("failures", {}).items()}
        return cls(int(data["K"]), np.array(data["lambda_axis"], dtype=float),
                   np.array(data["energy_axis"], dtype=float), arr(data["L_values"]),
                   arr(data["stderr_values"]), codes, EstimatorConfig.from_dict(data["estimator"]),
                   int(data["seed"]), failures)


def scan(K: int, lambdas, energies, config: EstimatorConfig, seed: int,
         threads: int | None = None) -> PhaseGrid:
    """Estimate and classify every cell of a (lambda, E) grid.

    Cell ``c = i * len(energies) + j`` draws its samples from streams
    ``c << 32, (c << 32) + 1, ...`` so cells are independent of each other
    and of evaluation order.  Cells outside the spectrum are not sampled;
    with the closed-form backend their exponent is still filled in.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if lambdas.size == 0 or energies.size == 0:
        raise ConfigurationError("axes must be nonempty")
    if np.any(lambdas < 0):
        raise ConfigurationError("lambda must be >= 0")
    shape = (lambdas.size, energies.size)
    L = np.full(shape, math.nan)
    S = np.full(shape, math.nan)
    codes = np.empty(shape, dtype=object)
    failures = {}
    for i, lam in enumerate(lambdas):
        for j, E in enumerate(energies):
            outside = abs(E) > spectrum_edges(K, lam)[1]
            est = None
            if not outside or config.method == "closed-form":
                cell = i * energies.size + j
                try:
                    est = estimate(K, float(lam), float(E), config, (seed, cell << 32), threads)
                except BetheLabError as exc:
                    failures[(i, j)] = str(exc)
            if est is not None:
                L[i, j], S[i, j] = est.mean, est.stderr
            codes[i, j] = classify(K, lam, E, est)
    return PhaseGrid(K, lambdas, energies, L, S, codes, config, seed, failures)


@dataclass(frozen=True)
class EdgeWindow:
    delta: float
    edge: float
    probes: dict  # energy -> (mean, stderr, criterion)
    diagnostic: str = ""


def edge_window(K: int, lam: float, config: EstimatorConfig, seed: int, side: str = "both",
                delta_max: float | None = None, resolution: float = 1e-3, probes: int = 8,
                threads: int | None = None) -> EdgeWindow:
    """Largest window below the spectral edge on which the criterion holds.

    A candidate width ``d`` is accepted if the criterion holds at the
    ``probes`` energies ``|E_lam| - d * k / probes`` (``k = 0..probes-1``),
    mirrored to the lower edge for ``side`` ``"lower"`` or ``"both"``.  The
    width is bisected on ``[0, delta_max]`` (default: the whole half
    spectrum) down to ``resolution``.  Every energy uses the same seed, and
    estimates are cached across candidates.
    """
    if lam >= weak_disorder_threshold(K):
        raise ConfigurationError(f"lambda={lam} is not below the weak-disorder threshold")
    if side not in ("lower", "upper", "both"):
        raise ConfigurationError("side must be 'lower', 'upper' or 'both'")
    edge = spectrum_edges(K, lam)[1]
    if delta_max is None:
        delta_max = edge
    signs = {"lower": (-1.0,), "upper": (1.0,), "both": (-1.0, 1.0)}[side]
    cache: dict = {}

    def holds_at(E):
        key = round(E, 12)
        if key not in cache:
            est = estimate(K, lam, key, config, seed, threads)
            cache[key] = (est.mean, est.stderr, delocalization_criterion(est, K).value)
        return cache[key][2] == Criterion.HOLDS.value

    def window_holds(d):
        return all(holds_at(sg * (edge - d * k / probes)) for k in range(probes) for sg in signs)

    if not all(holds_at(sg * edge) for sg in signs):
        return EdgeWindow(0.0, edge, cache, "criterion fails at the spectral edge; "
                          "check the estimator configuration")
    if window_holds(delta_max):
        return EdgeWindow(delta_max, edge, cache)
    lo, hi = 0.0, delta_max
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if window_holds(mid):
            lo = mid
        else:
            hi = mid
    return EdgeWindow(lo, edge, cache)


CSV_COLUMNS = ("lambda", "E", "L_mean", "L_stderr", "class")


def export(grid: PhaseGrid, fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for lam, E, L, s, c in grid.rows():
                writer.writerow([f"{lam:.9g}", f"{E:.9g}", f"{L:.9g}", f"{s:.9g}", c])
    elif fmt == "json":
        path.write_text(json.dumps(grid.to_dict(), indent=1))
    else:
        raise ConfigurationError(f"unknown export format {fmt!r}")
    return path


def load_grid(path) -> PhaseGrid:
    return PhaseGrid.from_dict(json.loads(Path(path).read_text()))
