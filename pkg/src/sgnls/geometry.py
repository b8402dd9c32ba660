"""Vertex enumeration, adjacency, self-similar measure and quadrature on the gasket.

Vertices of the level-m graph are stored with exact integer coordinates:
a point is written as ``(a/2^m) * e1 + (b/2^m) * e2`` with ``e1 = (1, 0)``
and ``e2 = (1/2, sqrt(3)/2)``, and the pair ``(a, b)`` is kept as integers
at the common denominator ``2^m``.  Vertex identity and deduplication are
therefore exact; floating-point coordinates are a derived view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import CapacityError, DomainError, LevelError

# Hausdorff, walk and spectral dimensions; Sobolev embedding threshold.
D_H = math.log(3) / math.log(2)
D_W = math.log(5) / math.log(2)
D_S = math.log(9) / math.log(5)
SIGMA_INF = D_S / 2.0

#: default cap on the refinement level
M_MAX_DEFAULT = 8

# corner coordinates in the (e1, e2) basis at denominator 2^0
_CORNERS = ((0, 0), (1, 0), (0, 1))

ALPHABET = (0, 1, 2)


def vertex_count(m: int) -> int:
    """Number of vertices of the level-m graph, (3^(m+1) + 3) / 2."""
    return (3 ** (m + 1) + 3) // 2


def validate_address(word) -> tuple:
    word = tuple(int(c) for c in word)
    if any(c not in (0, 1, 2) for c in word):
        raise DomainError(f"cell address must use symbols 0,1,2, got {word}")
    return word


def cell_measure(word) -> float:
    """Self-similar measure of the cell addressed by ``word``: 3^-len(word)."""
    word = validate_address(word)
    return 3.0 ** (-len(word))


def cell_corner_keys(word, m: int) -> list[tuple[int, int]]:
    """Integer coordinates (scale 2^m) of the 3 corners of the cell ``word``.

    ``len(word) <= m`` is required; corners are returned in the order of the
    fixed points p0, p1, p2 of the three contractions.
    """
    word = validate_address(word)
    if len(word) > m:
        raise LevelError(f"cell of depth {len(word)} has no corners at scale 2^{m}")
    out = []
    for corner in _CORNERS:
        a, b = corner
        scale = 1
        # innermost contraction first: F_w = F_{w_1} o ... o F_{w_n}
        for c in reversed(word):
            pa, pb = _CORNERS[c]
            a, b = a + pa * scale, b + pb * scale
            scale *= 2
        shift = 2 ** (m - len(word))
        out.append((a * shift, b * shift))
    return out


def _edge_midpoint(p: tuple[int, int], q: tuple[int, int]) -> tuple[int, int]:
    return ((p[0] + q[0]) // 2, (p[1] + q[1]) // 2)


@dataclass(frozen=True)
class VertexSet:
    """Immutable level-m vertex set with adjacency and quadrature weights.

    Indexing is deterministic: vertices are grouped by the level at which
    they first appear (so indices of V_{m-1} are literally the prefix
    ``0 .. |V_{m-1}|-1`` of the V_m indexing) and sorted lexicographically
    by exact coordinates within each group.
    """

    level: int
    keys: tuple  # tuple of (a, b) integer pairs at scale 2^level
    boundary_ids: tuple
    neighbors: tuple  # tuple of sorted tuples of neighbor indices
    cells: tuple  # per level-m cell: (word, corner index triple)
    incident_counts: tuple  # number of level-m cells touching each vertex
    _index: dict = field(repr=False, hash=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.keys)

    def index_of(self, key: tuple[int, int]) -> int:
        return self._index[key]

    @property
    def coords(self) -> np.ndarray:
        """Euclidean coordinates, side length 1 (derived floating view)."""
        k = np.asarray(self.keys, dtype=float) / 2 ** self.level
        xy = np.empty_like(k)
        xy[:, 0] = k[:, 0] + 0.5 * k[:, 1]
        xy[:, 1] = (math.sqrt(3) / 2) * k[:, 1]
        return xy

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Vertex weights of the corner-average rule: #incident cells / 3^(m+1)."""
        return np.asarray(self.incident_counts, dtype=float) / 3 ** (self.level + 1)

    def edges(self):
        """Each undirected edge once, as (p, q) with p < q."""
        for p, nbrs in enumerate(self.neighbors):
            for q in nbrs:
                if q > p:
                    yield p, q


def enumerate_vertices(m: int, m_max: int = M_MAX_DEFAULT) -> VertexSet:
    """Build V_m with adjacency, deterministic indices and cell incidence."""
    if m < 0:
        raise DomainError("level must be nonnegative")
    if m > m_max:
        raise CapacityError(f"level {m} exceeds the configured maximum {m_max}")

    index: dict[tuple[int, int], int] = {}
    keys: list[tuple[int, int]] = []
    for lvl in range(m + 1):
        fresh = set()
        for word in product(ALPHABET, repeat=lvl):
            for key in cell_corner_keys(word, m):
                if key not in index:
                    fresh.add(key)
        for key in sorted(fresh):
            index[key] = len(keys)
            keys.append(key)

    n = len(keys)
    assert n == vertex_count(m)

    nbr_sets: list[set[int]] = [set() for _ in range(n)]
    incident = [0] * n
    cells = []
    for word in product(ALPHABET, repeat=m):
        corners = [index[k] for k in cell_corner_keys(word, m)]
        cells.append((word, tuple(corners)))
        for i in range(3):
            incident[corners[i]] += 1
            for j in range(i + 1, 3):
                nbr_sets[corners[i]].add(corners[j])
                nbr_sets[corners[j]].add(corners[i])

    boundary = tuple(index[cell_corner_keys((), m)[i]] for i in range(3))
    return VertexSet(
        level=m,
        keys=tuple(keys),
        boundary_ids=boundary,
        neighbors=tuple(tuple(sorted(s)) for s in nbr_sets),
        cells=tuple(cells),
        incident_counts=tuple(incident),
        _index=index,
    )


def junction_points(m: int, vs: VertexSet | None = None):
    """Vertices of V_m outside V_0 together with their two incident cell addresses.

    For m = 1 these are exactly the three edge midpoints of V_1 \\ V_0, each
    the intersection of a unique unordered pair of level-1 cells.
    """
    if m < 1:
        raise DomainError("no junction points at level 0")
    if vs is None:
        vs = enumerate_vertices(m)
    if vs.level != m:
        raise LevelError(f"vertex set has level {vs.level}, requested {m}")
    incident_words: dict[int, list[tuple]] = {}
    for word, corners in vs.cells:
        for c in corners:
            incident_words.setdefault(c, []).append(word)
    boundary = set(vs.boundary_ids)
    out = []
    for vid in range(vs.n_vertices):
        if vid in boundary:
            continue
        words = sorted(incident_words[vid])
        out.append((vid, tuple(words)))
    return out


@dataclass(frozen=True)
class GraphFunction:
    """Complex (or real) values on the vertices of V_level."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (vertex_count(self.level),):
            raise LevelError(
                f"expected {vertex_count(self.level)} values for level "
                f"{self.level}, got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    def restricted(self, m: int) -> "GraphFunction":
        """Restriction to V_m, m <= level (prefix-stable indexing)."""
        if m > self.level:
            raise LevelError("cannot restrict to a finer level")
        return GraphFunction(m, self.values[: vertex_count(m)])


def integrate(f: GraphFunction, vs: VertexSet):
    """Corner-average quadrature of f against the self-similar measure.

    Equals sum over level-m cells of 3^-m * (mean of the corner values),
    i.e. a weighted vertex sum with weight (#incident cells) / 3^(m+1).
    """
    if f.level != vs.level:
        raise LevelError(f"function level {f.level} != vertex-set level {vs.level}")
    return np.dot(vs.quadrature_weights, f.values)


def support_measure(f: GraphFunction, vs: VertexSet, threshold: float | None = None) -> float:
    """Total measure of level-m cells where |f| exceeds threshold at a corner."""
    if f.level != vs.level:
        raise LevelError(f"function level {f.level} != vertex-set level {vs.level}")
    absv = np.abs(f.values)
    if threshold is None:
        threshold = 1e-12 * absv.max(initial=0.0)
    if threshold < 0:
        raise DomainError("threshold must be nonnegative")
    count = 0
    for _, corners in vs.cells:
        if any(absv[c] > threshold for c in corners):
            count += 1
    return count * 3.0 ** (-vs.level)


def refinement_cells(vs: VertexSet, lvl: int):
    """Level-``lvl`` cells expressed inside a finer vertex set.

    Returns a list of (corner index triple, midpoint index triple) where
    midpoint i is opposite corner i.  Used by eigenfunction extension.
    """
    if lvl >= vs.level:
        raise LevelError("refinement requires lvl < vertex-set level")
    out = []
    for word in product(ALPHABET, repeat=lvl):
        ck = cell_corner_keys(word, vs.level)
        corners = tuple(vs.index_of(k) for k in ck)
        mids = tuple(
            vs.index_of(_edge_midpoint(ck[j], ck[l]))
            for (j, l) in ((1, 2), (0, 2), (0, 1))
        )
        out.append((corners, mids))
    return out
