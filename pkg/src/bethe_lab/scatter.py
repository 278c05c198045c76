"""Reflection of a lattice wire attached to a tree vertex.

A half-infinite wire with onsite energy ``u_wire`` and unit hopping carries
plane waves at ``E = u_wire + 2 cos k``.  With ``exp(ik xi)`` incoming and
``R exp(-ik xi)`` outgoing, matching at the attachment vertex ``x`` gives

    R = -(1 + exp(ik) g) / (1 + exp(-ik) g),    g = G(x, x; E + i0),

and ``|1 + e^{-ik} g|^2 - |1 + e^{ik} g|^2 = 4 sin(k) Im g``, so the wire
reflects less than everything exactly when ``Im g > 0``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .disorder import DisorderSpec, PotentialSample
from .errors import ConfigurationError, PoleError
from .lyapunov import PoolConfig, vertex_green_samples
from .oracle import assemble, wire_reflection
from .tree import SpectralPoint, build_topology, forward_recursion, free_forward_green

CSV_COLUMNS = ("E", "k", "u_wire", "mean_abs_R", "frac_subunitary", "mean_Im_G")


@dataclass(frozen=True)
class WireSetup:
    k: float = math.pi / 2
    u_wire: float = 0.0
    attach_vertex: int = 0

    def __post_init__(self):
        if not 0 < self.k < math.pi:
            raise ConfigurationError("k must lie in (0, pi)")

    @property
    def energy(self) -> float:
        return self.u_wire + 2.0 * math.cos(self.k)

    @classmethod
    def at_energy(cls, E: float, k: float = math.pi / 2, attach_vertex: int = 0) -> "WireSetup":
        return cls(k, E - 2.0 * math.cos(k), attach_vertex)


def _matching_terms(g, k):
    if not 0 < k < math.pi:
        raise ConfigurationError("k must lie in (0, pi)")
    g = complex(g)
    if g.imag < 0:
        raise ConfigurationError("Im g < 0 is not a boundary value from the upper half plane")
    phase = complex(math.cos(k), math.sin(k))
    # the conjugate phase makes num and den exact conjugates for real g
    num = 1 + phase * g
    den = 1 + phase.conjugate() * g
    if den == 0:
        raise PoleError("reflection coefficient has a pole (bound state at this energy)")
    return num, den


def reflection_coefficient(g: complex, k: float) -> complex:
    num, den = _matching_terms(g, k)
    return -num / den


def reflection_magnitude(g: complex, k: float) -> float:
    """``|R|`` as a ratio of moduli; exactly 1.0 for real ``g``."""
    num, den = _matching_terms(g, k)
    return abs(num) / abs(den)


@dataclass(frozen=True)
class ScatterRow:
    E: float
    k: float
    u_wire: float
    mean_abs_R: float
    frac_subunitary: float
    mean_Im_G: float


def transmission_profile(K: int, lam: float, energies, eta: float, n: int, spec: DisorderSpec,
                         seed: int, k: float = math.pi / 2, method: str = "population",
                         pool_config: PoolConfig = PoolConfig(),
                         threads: int | None = None) -> list[ScatterRow]:
    """Reflection statistics over disorder along an energy grid.

    Energy ``j`` uses streams ``j << 32`` onward.  A sample counts as
    sub-unitary when ``|R| < 1 - 10 eta``.
    """
    if eta <= 0:
        raise ConfigurationError("eta must be > 0")
    rows = []
    for j, E in enumerate(np.asarray(energies, dtype=float)):
        wire = WireSetup.at_energy(float(E), k)
        g = vertex_green_samples(K, lam, float(E), eta, n, spec, (seed, j << 32), method,
                                 pool_config=pool_config, threads=threads)
        absr = np.array([reflection_magnitude(x, k) for x in g])
        rows.append(ScatterRow(float(E), k, wire.u_wire, float(absr.mean()),
                               float(np.mean(absr < 1 - 10 * eta)), float(g.imag.mean())))
    return rows


def export_profile(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([f"{getattr(r, c):.9g}" for c in CSV_COLUMNS])
    return path


def wire_oracle_check(K: int, lam: float, values, wire: WireSetup, R: int = 6,
                      n_wire: int = 200) -> tuple[complex, complex]:
    """Reflection from the matching formula and from a dense wire-plus-tree solve.

    The depth-``R`` tree is continued below its leaves by the free tree, so
    its root Green function has a genuine imaginary part inside the band.
    The dense system carries that continuation as a leaf self-energy
    ``-K * gamma_free`` and solves for the wire amplitudes and ``R`` jointly.
    Returns ``(formula, oracle)``.
    """
    if wire.attach_vertex != 0:
        raise ConfigurationError("the oracle check attaches the wire at the root")
    topo = build_topology(K, R)
    sample = PotentialSample(np.asarray(values, float), lam)
    point = SpectralPoint(wire.energy, 0.0, lam)
    free = free_forward_green(K, point.z)
    g = forward_recursion(topo, sample, point, free).root
    extra = np.zeros(topo.node_count, dtype=complex)
    extra[topo.level_slice(R)] = -K * free
    oracle = wire_reflection(assemble(topo, sample), 0, wire.k, wire.u_wire, n_wire, extra)
    return reflection_coefficient(g, wire.k), oracle


