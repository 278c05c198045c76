"""Brute-force oracle: explicit tree Hamiltonians and dense linear algebra.

Nothing here uses the tree recursion; the point of the module is to be an
independent route to the same numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .disorder import DisorderSpec, PotentialSample
from .errors import ConfigurationError, ConvergenceError, NumericalSingularityError, SizeError
from .streams import StreamId, parallel_map, stream_rng
from .tree import TreeTopology, build_topology, spectrum_edges

MAX_DIMENSION = 5000


@dataclass(frozen=True)
class ExplicitHamiltonian:
    """``T + lam V`` stored as a diagonal plus an edge list (unit hopping)."""

    diagonal: np.ndarray
    edges: np.ndarray  # shape (n_edges, 2)
    branching: int
    lam: float

    @property
    def dimension(self) -> int:
        return self.diagonal.size

    def dense(self, dtype=float) -> np.ndarray:
        h = np.diag(self.diagonal.astype(dtype))
        i, j = self.edges[:, 0], self.edges[:, 1]
        h[i, j] = 1.0
        h[j, i] = 1.0
        return h


def assemble(topology: TreeTopology, potential: PotentialSample) -> ExplicitHamiltonian:
    n = topology.node_count
    if n > MAX_DIMENSION:
        raise SizeError(f"dimension {n} exceeds oracle cap {MAX_DIMENSION}")
    values = np.asarray(potential.values, dtype=float)
    if values.shape != (n,):
        raise ConfigurationError("potential length does not match topology")
    child = np.arange(1, n)
    edges = np.column_stack(((child - 1) // topology.branching, child))
    return ExplicitHamiltonian(potential.lam * values, edges, topology.branching, potential.lam)


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lu, piv = linalg.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-14 * max(pivots.max(), 1.0):
        raise NumericalSingularityError("matrix is singular to working precision")
    return linalg.lu_solve((lu, piv), b)


def resolvent_column(h: ExplicitHamiltonian, z: complex, site: int) -> np.ndarray:
    """Column ``site`` of ``(H - z)^-1`` by LU with partial pivoting."""
    if not 0 <= site < h.dimension:
        raise ConfigurationError(f"site {site} out of range")
    a = h.dense(complex) - complex(z) * np.eye(h.dimension)
    rhs = np.zeros(h.dimension, dtype=complex)
    rhs[site] = 1.0
    return _solve(a, rhs)


def smallest_eigenvalue(h: ExplicitHamiltonian, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Lowest eigenvalue by shifted inverse power iteration.

    The shift ``E_lam - 1`` lies below the spectrum whenever the potential is
    bounded by one.  The start vector alternates sign between tree levels,
    which on a bipartite graph overlaps the ground state.  Iteration stops
    once the eigen-residual of the Rayleigh quotient is below ``tol``.
    """
    n = h.dimension
    if n > MAX_DIMENSION:
        raise SizeError(f"dimension {n} exceeds oracle cap {MAX_DIMENSION}")
    if n == 1:
        return float(h.diagonal[0])
    if np.max(np.abs(h.diagonal)) <= h.lam:
        shift = spectrum_edges(h.branching, h.lam)[0] - 1.0
    else:
        # unbounded potential sample: Gershgorin lower bound instead
        shift = float(np.min(h.diagonal)) - (h.branching + 1) - 1.0
    a = h.dense()
    lu = linalg.lu_factor(a - shift * np.eye(n))
    sign = np.ones(n)
    parent = h.edges[:, 0]
    for child, p in zip(h.edges[:, 1], parent):
        sign[child] = -sign[p]
    x = sign / math.sqrt(n)
    for _ in range(max_iter):
        y = linalg.lu_solve(lu, x)
        x = y / np.linalg.norm(y)
        ax = a @ x
        theta = float(x @ ax)
        if np.linalg.norm(ax - theta * x) < tol:
            return theta
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps")


@dataclass(frozen=True)
class EdgeProbability:
    delta_e: float
    estimate: float
    low: float
    high: float
    count: int
    n: int


def wilson_interval(count: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = count / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    low = 0.0 if count == 0 else max(0.0, centre - half)
    high = 1.0 if count == n else min(1.0, centre + half)
    return (low, high)


def sample_minima(K: int, R: int, lam: float, n: int, spec: DisorderSpec, seed: StreamId,
                  tol: float = 1e-8, threads: int | None = None) -> np.ndarray:
    """``inf sigma(H^(R))`` for ``n`` independent potentials (stream ``i`` per sample)."""
    topo = build_topology(K, R)

    def one(i):
        values = spec.draw(stream_rng(seed, i), topo.node_count)
        return smallest_eigenvalue(assemble(topo, PotentialSample(values, lam, (seed, i))), tol)

    return np.array(parallel_map(one, n, threads))


def edge_probability(K: int, R: int, lam: float, delta_e, n: int, spec: DisorderSpec,
                     seed: StreamId, threads: int | None = None, minima=None):
    """Monte Carlo ``P(inf sigma(H^(R)) < E_lam + delta_e)`` with Wilson 95% interval.

    ``delta_e`` may be a sequence; all values are evaluated on the same
    samples so the estimates are nested.
    """
    scalar = np.ndim(delta_e) == 0
    deltas = np.atleast_1d(np.asarray(delta_e, dtype=float))
    if np.any(deltas < 0):
        raise ConfigurationError("delta_e must be >= 0")
    if minima is None:
        minima = sample_minima(K, R, lam, n, spec, seed, threads=threads)
    edge = spectrum_edges(K, lam)[0]
    out = []
    for d in deltas:
        count = int(np.count_nonzero(minima < edge + d))
        lo, hi = wilson_interval(count, len(minima))
        out.append(EdgeProbability(float(d), count / len(minima), lo, hi, count, len(minima)))
    return out[0] if scalar else out


def wire_reflection(h: ExplicitHamiltonian, attach: int, k: float, u_wire: float,
                    n_wire: int = 200, extra_diagonal=None) -> complex:
    """Reflection amplitude of a lattice wire attached to ``attach``.

    The graph is coupled by a unit bond to site 1 of a wire with sites
    ``1..n_wire`` and onsite energy ``u_wire``; the energy is
    ``E = u_wire + 2 cos k``.  Beyond the last site the wave is
    ``exp(ik xi) + R exp(-ik xi)``; ``R`` is an unknown of the dense system,
    as are all graph and wire amplitudes.  ``extra_diagonal`` adds a
    (possibly complex) self-energy to the graph diagonal.
    """
    if not 0 < k < math.pi:
        raise ConfigurationError("k must lie in (0, pi)")
    ng = h.dimension
    energy = u_wire + 2.0 * math.cos(k)
    size = ng + n_wire + 1
    a = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)
    a[:ng, :ng] = h.dense(complex) - energy * np.eye(ng)
    if extra_diagonal is not None:
        a[:ng, :ng] += np.diag(np.asarray(extra_diagonal, dtype=complex))
    w0 = ng  # wire site xi=1
    a[attach, w0] = 1.0
    for m in range(n_wire):
        row = w0 + m
        a[row, row] = u_wire - energy
        a[row, attach if m == 0 else row - 1] = 1.0
        if m + 1 < n_wire:
            a[row, row + 1] = 1.0
        else:
            # psi(n_wire + 1) = e^{ik(n+1)} + R e^{-ik(n+1)}
            xi = n_wire + 1
            a[row, size - 1] = np.exp(-1j * k * xi)
            b[row] -= np.exp(1j * k * xi)
    # psi(n_wire) = e^{ik n} + R e^{-ik n}
    last = size - 1
    a[last, w0 + n_wire - 1] = 1.0
    a[last, last] = -np.exp(-1j * k * n_wire)
    b[last] = np.exp(1j * k * n_wire)
    return complex(_solve(a, b)[last])
