"""Rooted K-ary trees, the forward Green-function recursion, free closed forms.

Nodes are indexed breadth first: the root is 0, the children of node ``i``
are ``K*i + 1, ..., K*i + K`` and the nodes of depth ``d`` occupy the
contiguous block ``level_slice(d)``.  All recursions therefore run level by
level on numpy slices.

The forward (cavity) value ``gamma[v]`` is the diagonal resolvent entry at
``v`` of the subtree hanging below ``v``.  Off-diagonal entries follow from

    G(0, x) = gamma[0] * prod_{j=1..|x|} (-gamma[x_j])

along the root-to-``x`` path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import PotentialSample
from .errors import ConfigurationError, SizeError

RESONANCE_FLOOR = 1e-300
_MAX_NODES = 2**62


@dataclass(frozen=True)
class TreeTopology:
    branching: int
    depth: int

    def __post_init__(self):
        if self.branching < 2:
            raise ConfigurationError("branching K must be >= 2")
        if self.depth < 0:
            raise ConfigurationError("depth R must be >= 0")

    @property
    def node_count(self) -> int:
        K = self.branching
        return (K ** (self.depth + 1) - 1) // (K - 1)

    def level_start(self, d: int) -> int:
        return (self.branching**d - 1) // (self.branching - 1)

    def level_slice(self, d: int) -> slice:
        return slice(self.level_start(d), self.level_start(d + 1))

    def children(self, i: int) -> range:
        if self.depth_of(i) >= self.depth:
            return range(0)
        K = self.branching
        return range(K * i + 1, K * i + K + 1)

    def parent(self, i: int) -> int | None:
        return None if i == 0 else (i - 1) // self.branching

    def depth_of(self, i: int) -> int:
        if not 0 <= i < self.node_count:
            raise IndexError(f"node {i} not in tree")
        d = 0
        while i >= self.level_start(d + 1):
            d += 1
        return d

    def path(self, target: int) -> list[int]:
        """Nodes from the root to ``target``, both included."""
        nodes = [target]
        while nodes[-1] != 0:
            nodes.append(self.parent(nodes[-1]))
        return nodes[::-1]


@dataclass(frozen=True)
class SpectralPoint:
    energy: float
    eta: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ConfigurationError("eta must be >= 0")
        if self.lam < 0:
            raise ConfigurationError("lambda must be >= 0")

    @property
    def z(self) -> complex:
        # +0.0 imaginary part selects the upper-half-plane boundary value
        return complex(self.energy, self.eta + 0.0)


@dataclass
class GreenState:
    gamma: np.ndarray
    point: SpectralPoint
    topology: TreeTopology
    resonances: int = 0

    @property
    def root(self) -> complex:
        return complex(self.gamma[0])


def build_topology(K: int, R: int) -> TreeTopology:
    if K < 2 or R < 0:
        raise ConfigurationError("need K >= 2 and R >= 0")
    # node_count < K**(R+1); compare exponents before forming huge integers
    if (R + 1) * math.log2(K) > 62:
        raise SizeError(f"tree K={K}, R={R} exceeds the machine integer range")
    topo = TreeTopology(K, R)
    if topo.node_count >= _MAX_NODES:
        raise SizeError(f"tree K={K}, R={R} exceeds the machine integer range")
    return topo


def _guard(den):
    """Clamp near-zero denominators; returns (den, number clamped)."""
    small = np.abs(den) < RESONANCE_FLOOR
    count = int(np.count_nonzero(small))
    if count:
        den = np.where(small, RESONANCE_FLOOR, den)
    return den, count


def forward_recursion(topology: TreeTopology, potential: PotentialSample,
                      point: SpectralPoint, boundary=None) -> GreenState:
    """Forward values on every node of a finite rooted tree.

    By default leaves see nothing below them, ``gamma = 1/(lam V - z)``,
    which makes ``gamma[0]`` the root entry of the resolvent of the finite
    tree operator.  ``boundary`` (a complex scalar or one value per leaf)
    attaches ``K`` extra children with the given forward value below every
    leaf; passing the free value ``free_forward_green(K, z)`` continues the
    tree as an infinite free tree.
    """
    K, R = topology.branching, topology.depth
    values = np.asarray(potential.values, dtype=float)
    if values.shape != (topology.node_count,):
        raise ConfigurationError(
            f"potential has {values.size} values, tree has {topology.node_count} nodes")
    if point.lam != potential.lam:
        raise ConfigurationError("spectral point and potential disagree on lambda")
    z = point.z
    diag = potential.lam * values
    gamma = np.empty(topology.node_count, dtype=complex)
    resonances = 0
    below = 0.0 if boundary is None else K * np.asarray(boundary, dtype=complex)
    for d in range(R, -1, -1):
        sl = topology.level_slice(d)
        den = diag[sl] - z - below
        den, count = _guard(den)
        resonances += count
        gamma[sl] = 1.0 / den
        below = gamma[sl].reshape(-1, K).sum(axis=1) if d > 0 else None
    return GreenState(gamma, point, topology, resonances)


def level_green(state: GreenState, d: int) -> np.ndarray:
    """Signed ``G(0, x)`` for every ``x`` at depth ``d``, in index order."""
    topo = state.topology
    if not 0 <= d <= topo.depth:
        raise ConfigurationError(f"depth {d} outside tree of depth {topo.depth}")
    row = state.gamma[:1].copy()
    for j in range(1, d + 1):
        row = -np.repeat(row, topo.branching) * state.gamma[topo.level_slice(j)]
    return row


def path_green_magnitude(state: GreenState, target: int) -> float:
    """``|G(0, target)|`` from the product of forward values on the path."""
    path = state.topology.path(target)
    return float(np.prod(np.abs(state.gamma[path])))


def homogeneous_vertex_green(K: int, lam: float, point: SpectralPoint, gammas, v0: float) -> complex:
    """Diagonal Green function at a vertex of degree ``K + 1``.

    ``gammas`` are the forward values of the ``K + 1`` neighbouring branches.
    """
    gammas = np.asarray(gammas, dtype=complex)
    if gammas.shape[-1] != K + 1:
        raise ConfigurationError(f"need K+1 = {K + 1} branch values, got {gammas.shape[-1]}")
    den = lam * v0 - point.z - gammas.sum(axis=-1)
    den, _ = _guard(np.asarray(den))
    out = 1.0 / den
    return complex(out) if out.ndim == 0 else out


def free_forward_green(K: int, z) -> complex:
    """Forward value of the free rooted tree, root of ``K g^2 + z g + 1 = 0``.

    The square root is taken with its cut on ``[-2 sqrt K, 2 sqrt K]`` and
    asymptotic to ``z``; on the cut the upper-half-plane boundary value is
    returned.  Of the two roots the smaller one is formed directly and the
    other through ``g+ g- = 1/K`` to avoid cancellation.
    """
    z = complex(z) + 0j
    if z.imag == 0.0:
        z = complex(z.real, 0.0)
    a = 2.0 * math.sqrt(K)
    s = np.sqrt(z - a) * np.sqrt(z + a)
    minus = -z - s
    plus = -z + s
    if abs(plus) >= abs(minus):
        return complex(plus / (2 * K))
    return complex(2.0 / minus)


def free_lattice_green(K: int, z) -> complex:
    """Diagonal Green function of the free regular tree of degree ``K + 1``."""
    z = complex(z)
    return 1.0 / (-z - (K + 1) * free_forward_green(K, z))


def free_lyapunov(K: int, E: float) -> float:
    """``-log |free_forward_green(K, E + i0)|`` in closed form."""
    E = abs(float(E))
    if E <= 2.0 * math.sqrt(K):
        return 0.5 * math.log(K)
    return math.log(0.5 * (E + math.sqrt(E * E - 4.0 * K)))


def spectrum_edges(K: int, lam: float) -> tuple[float, float]:
    """Almost-sure spectrum ``[E_lam, |E_lam|]`` for potentials in ``[-1, 1]``."""
    edge = 2.0 * math.sqrt(K) + lam
    return (-edge, edge)


def weak_disorder_threshold(K: int) -> float:
    if K < 2:
        raise ConfigurationError("K must be >= 2")
    return (math.sqrt(K) - 1.0) ** 2 / 2.0
