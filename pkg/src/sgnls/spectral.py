"""Graph Laplacians, spectral decimation and eigenbasis assembly.

Continuum normalization: the Laplacian is (3/2) * lim 5^m * Delta_m with the
self-similar measure normalized to total mass 1.  All continuum eigenvalues
reported by this module carry that constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import geometry
from .errors import (
    ConstructionError,
    ConvergenceError,
    DomainError,
    ForbiddenEigenvalueError,
    LevelError,
    PreconditionError,
)
from .geometry import GraphFunction, VertexSet, enumerate_vertices, vertex_count

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

#: graph eigenvalues at which the decimation extension formula degenerates
FORBIDDEN = (2.0, 5.0, 6.0)

SEED_RESIDUAL_TOL = 1e-12
GRAPH_EIGEN_TOL = 1e-10
EIGENSPACE_ATOL = 1e-8
_LIMIT_RTOL = 1e-14
_LIMIT_MAX_ITER = 60


def _check_bc(bc: str) -> str:
    if bc not in (DIRICHLET, NEUMANN):
        raise DomainError(f"unknown boundary condition {bc!r}")
    return bc


def graph_energy(u: GraphFunction, m: int, vs: VertexSet | None = None,
                 renormalized: bool = False) -> float:
    """Half-sum of squared edge differences of u on V_m.

    With ``renormalized=True`` returns (5/3)^m * E_m(u), the resistance-scaled
    energy whose limit defines the standard energy form.
    """
    if vs is None or vs.level != m:
        vs = enumerate_vertices(m)
    if u.level < m:
        raise LevelError("function lives on a coarser level than requested")
    vals = u.values[: vertex_count(m)]
    e = 0.0
    for p, q in vs.edges():
        e += abs(vals[q] - vals[p]) ** 2
    if renormalized:
        e *= (5.0 / 3.0) ** m
    return e


def laplacian_matrix(vs: VertexSet, bc: str) -> np.ndarray:
    """Dense matrix of -Delta_m under the given boundary condition.

    Neumann: full |V_m| x |V_m| graph Laplacian D - A (boundary rows keep
    their 2 neighbors).  Dirichlet: the principal submatrix on V_m \\ V_0,
    returned at full size with boundary rows/columns zeroed so that indices
    match the vertex set.
    """
    _check_bc(bc)
    n = vs.n_vertices
    lap = np.zeros((n, n))
    for p, nbrs in enumerate(vs.neighbors):
        lap[p, p] = len(nbrs)
        for q in nbrs:
            lap[p, q] = -1.0
    if bc == DIRICHLET:
        for b in vs.boundary_ids:
            lap[b, :] = 0.0
            lap[:, b] = 0.0
    return lap


def graph_laplacian_apply(u: GraphFunction, m: int, bc: str,
                          vs: VertexSet | None = None) -> GraphFunction:
    """Pointwise Delta_m u(x) = sum_{y ~ x} (u(y) - u(x)).

    The Dirichlet variant returns values only at interior vertices (boundary
    entries of the output are 0); boundary values of u enter the interior
    rows as clamped data.
    """
    _check_bc(bc)
    if vs is None or vs.level != m:
        vs = enumerate_vertices(m)
    vals = u.values[: vertex_count(m)]
    out = np.zeros(vs.n_vertices, dtype=np.result_type(vals, float))
    for p, nbrs in enumerate(vs.neighbors):
        acc = 0.0
        for q in nbrs:
            acc = acc + vals[q]
        out[p] = acc - len(nbrs) * vals[p]
    if bc == DIRICHLET:
        out[list(vs.boundary_ids)] = 0.0
    return GraphFunction(m, out)


def _neumann_weight_matrix(vs: VertexSet) -> np.ndarray:
    """Relative vertex weights (interior 1, boundary 1/2) as a diagonal."""
    w = vs.quadrature_weights
    return np.diag(w / w.max())


def graph_spectrum(m: int, bc: str, vs: VertexSet | None = None,
                   m_max: int = geometry.M_MAX_DEFAULT):
    """Full spectrum of -Delta_m under bc, ascending.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns of a
    full-size |V_m| matrix; Dirichlet eigenvectors vanish on the boundary.
    Dirichlet eigenvectors are orthonormal in the counting measure.  The
    Neumann operator weights the two-neighbor boundary rows by the inverse
    relative vertex measure (a factor 2); this is the generator of the graph
    energy in L2 of the self-similar measure and, unlike the unweighted
    boundary rows, satisfies the spectral-decimation relation exactly.  Its
    eigenvectors are orthonormal in that weighted inner product (which
    coincides with the counting measure at m = 0).
    """
    _check_bc(bc)
    if vs is None or vs.level != m:
        vs = enumerate_vertices(m, m_max=m_max)
    lap = laplacian_matrix(vs, NEUMANN)
    if bc == DIRICHLET:
        interior = [i for i in range(vs.n_vertices) if i not in vs.boundary_ids]
        vals, vecs_int = scipy.linalg.eigh(lap[np.ix_(interior, interior)])
        vecs = np.zeros((vs.n_vertices, len(interior)))
        vecs[interior, :] = vecs_int
    else:
        weight = _neumann_weight_matrix(vs)
        vals, vecs = scipy.linalg.eigh(lap, weight)
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError("eigensolver returned non-finite eigenvalues")
    vals = np.maximum(vals, 0.0)  # clip -1e-15 round-off at the bottom
    return vals, vecs


def decimate_down(lam: float, branch: str = "minus") -> float:
    """Solve lam = x * (5 - x) one level down.

    The minus branch is the root below 5/2, evaluated in the cancellation-free
    form 2*lam / (5 + sqrt(25 - 4*lam)); the plus branch is the other root.
    """
    if lam > 25.0 / 4.0:
        raise DomainError(f"discriminant negative for graph eigenvalue {lam}")
    root = math.sqrt(25.0 - 4.0 * lam)
    if branch == "minus":
        return 2.0 * lam / (5.0 + root)
    if branch == "plus":
        return (5.0 + root) / 2.0
    raise DomainError(f"unknown branch {branch!r}")


def is_forbidden(lam: float, tol: float = 1e-9) -> bool:
    return any(abs(lam - f) <= tol for f in FORBIDDEN)


def decimation_sequence(lam_birth: float, length: int) -> list[float]:
    """Graph eigenvalues from the birth value downward through refinement.

    Follows the minus branch, except that a birth value 6 continues with 3
    (the minus root 2 is forbidden for the extension algorithm; the residual
    check of the extended function is the arbiter of this choice).
    """
    seq = [lam_birth]
    lam = lam_birth
    for _ in range(length - 1):
        if abs(lam - 6.0) <= 1e-12:
            lam = 3.0
        else:
            lam = decimate_down(lam)
        seq.append(lam)
    return seq


def decimation_limit(lam_birth: float) -> float:
    """lim_n 5^n * lam_n starting from lam_0 = lam_birth (minus branch, 6 -> 3)."""
    if lam_birth < 0:
        raise DomainError("graph eigenvalue must be nonnegative")
    if lam_birth == 0.0:
        return 0.0
    a = lam_birth
    lam = lam_birth
    for n in range(1, _LIMIT_MAX_ITER + 1):
        if abs(lam - 6.0) <= 1e-12:
            lam = 3.0
            a = 5.0 ** n * lam
        else:
            root = math.sqrt(25.0 - 4.0 * lam)
            lam = 2.0 * lam / (5.0 + root)
            a_next = a * 10.0 / (5.0 + root)
            if abs(a_next - a) <= _LIMIT_RTOL * abs(a_next):
                return a_next
            a = a_next
    raise ConvergenceError(
        f"decimation limit did not converge from {lam_birth} "
        f"in {_LIMIT_MAX_ITER} iterations"
    )


def renormalize_eigenvalue(lam_birth: float, birth_level: int) -> float:
    """Continuum eigenvalue (3/2) * lim 5^(birth_level + n) * lam_n."""
    return 1.5 * 5.0 ** birth_level * decimation_limit(lam_birth)


@lru_cache(maxsize=None)
def lambda_6_series(j: int = 2) -> float:
    """Continuum eigenvalue of the localized family member psi^(j)."""
    return renormalize_eigenvalue(6.0, j)


@lru_cache(maxsize=None)
def c6() -> float:
    """Scaling constant of the localized family: Lambda_j = c6 * 5^j."""
    return lambda_6_series(2) / 25.0


def extend_eigenfunction(u: GraphFunction, lam_next: float, vs: VertexSet,
                         check_input: bool = True) -> GraphFunction:
    """Extend a level-m graph eigenfunction to level m+1 with eigenvalue lam_next.

    Old vertices keep their values; the new vertex opposite old corner x0 in
    a level-m cell with corners (x0, x1, x2) gets
    ``((4 - lam) * (u(x1) + u(x2)) + 2 * u(x0)) / ((2 - lam) * (5 - lam))``.
    """
    if is_forbidden(lam_next):
        raise ForbiddenEigenvalueError(
            f"extension undefined at graph eigenvalue {lam_next}"
        )
    m = u.level
    if vs.level < m + 1:
        raise LevelError("target vertex set too coarse for extension")
    lam_m = lam_next * (5.0 - lam_next)
    if check_input:
        res = eigen_equation_residual(u, lam_m)
        if res > GRAPH_EIGEN_TOL * max(1.0, float(np.abs(u.values).max())):
            raise PreconditionError(
                f"input is not a level-{m} eigenfunction for {lam_m} "
                f"(residual {res:.2e})"
            )
    out = np.zeros(vertex_count(m + 1), dtype=u.values.dtype)
    out[: vertex_count(m)] = u.values
    denom = (2.0 - lam_next) * (5.0 - lam_next)
    for corners, mids in geometry.refinement_cells(vs, m):
        c = [u.values[i] for i in corners]
        for i in range(3):
            j, l = {0: (1, 2), 1: (0, 2), 2: (0, 1)}[i]
            out[mids[i]] = ((4.0 - lam_next) * (c[j] + c[l]) + 2.0 * c[i]) / denom
    return GraphFunction(m + 1, out)


def eigen_equation_residual(u: GraphFunction, lam: float,
                            vs: VertexSet | None = None,
                            include_boundary: bool = False) -> float:
    """Max-norm residual of the graph eigen-equation -Delta u = lam u.

    Interior rows only by default; ``include_boundary`` adds the Neumann
    boundary rows (meaningful for functions vanishing on V_0).
    """
    m = u.level
    if vs is None or vs.level != m:
        vs = enumerate_vertices(m)
    res = 0.0
    boundary = set(vs.boundary_ids)
    for p, nbrs in enumerate(vs.neighbors):
        if p in boundary and not include_boundary:
            continue
        acc = sum(u.values[q] for q in nbrs)
        res = max(res, abs(len(nbrs) * u.values[p] - acc - lam * u.values[p]))
    return res


@dataclass(frozen=True)
class LocalizedDescriptor:
    """Identifies a localized eigenfunction: generation j, junction and cells."""

    j: int
    junction: int  # 0, 1 or 2: midpoint of edge (0,1), (0,2), (1,2) of V_0
    word: tuple
    word_mate: tuple


@dataclass(frozen=True)
class EigenPair:
    lam: float  # continuum eigenvalue
    graph_history: tuple  # graph eigenvalues from birth level onward
    birth_level: int
    bc: str  # "dirichlet", "neumann" or "both"
    values: GraphFunction  # L2(mu)-normalized vertex values at the basis level
    localized: LocalizedDescriptor | None = None


_JUNCTION_EDGES = ((0, 1), (0, 2), (1, 2))


def build_localized(j: int, junction: int, M: int,
                    vs: VertexSet | None = None) -> EigenPair:
    """Construct the generation-j localized eigenfunction at level M.

    The seed lives at level j on the two depth-(j-1) cells meeting at the
    chosen junction of V_1 \\ V_0: value 2 at the junction, -1 at its four
    direct neighbors, +1 at the two vertices adjacent to two (-1)-vertices,
    0 elsewhere.  It is validated as a graph eigenfunction with eigenvalue 6
    and extended by spectral decimation (3, then the minus branch).
    """
    if j < 2:
        raise DomainError("localized family starts at generation j = 2")
    if M < j:
        raise LevelError(f"target level {M} below birth level {j}")
    if junction not in (0, 1, 2):
        raise DomainError("junction must be 0, 1 or 2")
    if vs is None or vs.level != M:
        vs = enumerate_vertices(M)

    a, b = _JUNCTION_EDGES[junction]
    word = (a,) + (b,) * (j - 2)
    word_mate = (b,) + (a,) * (j - 2)

    vals = np.zeros(vertex_count(j))
    scale = 2 ** (M - j)
    for w, anchor in ((word, b), (word_mate, a)):
        ck = geometry.cell_corner_keys(w, j)
        # corner `anchor` of the cell is the junction point
        mids = {
            frozenset((0, 1)): geometry._edge_midpoint(ck[0], ck[1]),
            frozenset((0, 2)): geometry._edge_midpoint(ck[0], ck[2]),
            frozenset((1, 2)): geometry._edge_midpoint(ck[1], ck[2]),
        }
        others = [i for i in range(3) if i != anchor]
        vals[_at(vs, ck[anchor], scale)] = 2.0
        for o in others:
            vals[_at(vs, mids[frozenset((anchor, o))], scale)] = -1.0
        vals[_at(vs, mids[frozenset(others)], scale)] = 1.0

    seed = GraphFunction(j, vals)
    res = eigen_equation_residual(seed, 6.0, include_boundary=True)
    if res > SEED_RESIDUAL_TOL:
        raise ConstructionError(
            f"localized seed residual {res:.2e} exceeds {SEED_RESIDUAL_TOL}"
        )

    history = decimation_sequence(6.0, M - j + 1)
    u = seed
    for lam_next in history[1:]:
        u = extend_eigenfunction(u, lam_next, vs, check_input=False)
        res = eigen_equation_residual(u, lam_next, include_boundary=True)
        if res > GRAPH_EIGEN_TOL:
            raise ConstructionError(
                f"extension residual {res:.2e} at level {u.level}"
            )

    norm = math.sqrt(float(np.real(
        np.dot(vs.quadrature_weights, np.abs(u.values) ** 2))))
    u = GraphFunction(M, u.values / norm)
    return EigenPair(
        lam=renormalize_eigenvalue(6.0, j),
        graph_history=tuple(history),
        birth_level=j,
        bc="both",
        values=u,
        localized=LocalizedDescriptor(j, junction, word, word_mate),
    )


def _at(vs: VertexSet, key, scale: int) -> int:
    return vs.index_of((key[0] * scale, key[1] * scale))


@dataclass(frozen=True)
class EigenBasis:
    level: int
    bc: str
    pairs: tuple  # ordered EigenPair tuple
    vs: VertexSet = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    @property
    def matrix(self) -> np.ndarray:
        """Vertex values as columns, shape (n_vertices, size)."""
        return np.column_stack([p.values.values for p in self.pairs])

    def localized_index(self, j: int) -> int:
        for i, p in enumerate(self.pairs):
            if p.localized is not None and p.localized.j == j:
                return i
        raise KeyError(f"no localized member of generation {j}")


def _mu_dot(w, u, v):
    return float(np.real(np.dot(w, np.conj(u) * v)))


def build_basis(M: int, bc: str, vs: VertexSet | None = None,
                m_max: int = geometry.M_MAX_DEFAULT) -> EigenBasis:
    """Assemble the ordered L2(mu)-orthonormal eigenbasis at level M.

    Direct symmetric eigensolve, per-eigenvalue minus-branch renormalization,
    insertion of the localized family (generations 2..M) as distinguished
    eigenspace representatives, and Gram-Schmidt within each eigenspace that
    never modifies the localized members.
    """
    _check_bc(bc)
    if vs is None or vs.level != M:
        vs = enumerate_vertices(M, m_max=m_max)
    w = vs.quadrature_weights
    vals, vecs = graph_spectrum(M, bc, vs=vs, m_max=m_max)

    localized = {}
    if M >= 2:
        for j in range(2, M + 1):
            pair = build_localized(j, 0, M, vs=vs)
            localized[j] = pair

    # group into eigenspaces
    groups = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[start] > EIGENSPACE_ATOL:
            groups.append((start, i))
            start = i
    pairs = []
    for g0, g1 in groups:
        lam_graph = float(np.mean(vals[g0:g1]))
        if lam_graph <= EIGENSPACE_ATOL:  # zero mode up to eigensolver round-off
            lam_graph = 0.0
        lam_cont = renormalize_eigenvalue(lam_graph, M) if lam_graph > 0 else 0.0
        dim = g1 - g0
        members: list[np.ndarray] = []
        member_pairs: list[EigenPair] = []
        for j, lp in sorted(localized.items()):
            if abs(lp.graph_history[-1] - lam_graph) <= EIGENSPACE_ATOL:
                members.append(lp.values.values.astype(float))
                member_pairs.append(EigenPair(
                    lam=lp.lam, graph_history=lp.graph_history,
                    birth_level=lp.birth_level, bc=bc, values=lp.values,
                    localized=lp.localized))
        # remaining eigensolve vectors, ordered by dominant-vertex index
        cols = list(range(g0, g1))
        cols.sort(key=lambda c: int(np.argmax(np.abs(vecs[:, c]))))
        history = tuple(decimation_sequence(lam_graph, 8)) if lam_graph > 0 else (0.0,)
        for c in cols:
            if len(members) == dim:
                break
            v = vecs[:, c].astype(float).copy()
            for u in members:
                v -= (_mu_dot(w, u, v) / _mu_dot(w, u, u)) * u
            nrm = math.sqrt(_mu_dot(w, v, v))
            if nrm < 1e-6 * math.sqrt(_mu_dot(w, vecs[:, c], vecs[:, c])):
                continue  # linearly dependent on the localized members
            v /= nrm
            members.append(v)
            member_pairs.append(EigenPair(
                lam=lam_cont, graph_history=history, birth_level=M, bc=bc,
                values=GraphFunction(M, v), localized=None))
        if len(members) != dim:
            raise ConstructionError(
                f"eigenspace at graph eigenvalue {lam_graph} lost rank "
                f"({len(members)} of {dim})"
            )
        pairs.extend(member_pairs)

    expected = vertex_count(M) - (3 if bc == DIRICHLET else 0)
    if len(pairs) != expected:
        raise ConstructionError(
            f"basis size {len(pairs)} != expected {expected}"
        )
    return EigenBasis(level=M, bc=bc, pairs=tuple(pairs), vs=vs)


def eigen_residual(pair: EigenPair, vs: VertexSet,
                   bc: str | None = None) -> float:
    """Relative L2(mu) residual of the continuum eigen-equation at level M.

    ``|| (3/2) 5^M (-Delta_M) u - Lambda u || / (Lambda ||u||)``; for the
    zero eigenvalue the absolute residual is returned.
    """
    if bc is None:
        bc = pair.bc if pair.bc in (DIRICHLET, NEUMANN) else DIRICHLET
    M = vs.level
    u = pair.values
    lap_u = graph_laplacian_apply(u, M, bc, vs=vs)
    w = vs.quadrature_weights
    lap_vals = lap_u.values.copy()
    if bc == NEUMANN:
        # boundary rows of the measure-weighted operator carry a factor 2
        lap_vals[list(vs.boundary_ids)] *= 2.0
    op = -1.5 * 5.0 ** M * lap_vals
    resid = op - pair.lam * u.values
    num = math.sqrt(float(np.real(np.dot(w, np.abs(resid) ** 2))))
    if pair.lam == 0.0:
        return num
    den = pair.lam * math.sqrt(float(np.real(np.dot(w, np.abs(u.values) ** 2))))
    return num / den
