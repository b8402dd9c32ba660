"""Decimation, renormalization, localized construction, basis assembly."""

import math

import numpy as np
import pytest

from sgnls import geometry, spectral
from sgnls.errors import (
    ConstructionError,
    DomainError,
    ForbiddenEigenvalueError,
    LevelError,
    PreconditionError,
)
from sgnls.geometry import GraphFunction, enumerate_vertices, vertex_count
from sgnls.spectral import (
    DIRICHLET,
    NEUMANN,
    build_basis,
    build_localized,
    c6,
    decimate_down,
    decimation_sequence,
    eigen_equation_residual,
    eigen_residual,
    extend_eigenfunction,
    graph_energy,
    graph_laplacian_apply,
    graph_spectrum,
    lambda_6_series,
    renormalize_eigenvalue,
)


# ---------------------------------------------------------------- energies

def test_energy_of_constant_is_zero():
    u = GraphFunction(2, np.full(vertex_count(2), 3.7))
    assert graph_energy(u, 2) == 0.0


def test_energy_level0_indicator():
    # E(u) = u^T L u: a corner indicator scores its vertex degree
    u = GraphFunction(0, np.array([1.0, 0.0, 0.0]))
    assert graph_energy(u, 0) == pytest.approx(2.0)


def test_energy_matches_quadratic_form(vs4, rng):
    vals = rng.normal(size=vs4.n_vertices)
    u = GraphFunction(4, vals)
    direct = sum((vals[i] - vals[j]) ** 2 for i, j in vs4.edges())
    assert graph_energy(u, 4, vs=vs4) == pytest.approx(direct, rel=1e-12)


def test_renormalized_energy_rayleigh_quotient(vs6, vs7):
    """(5/3)^m E_m(psi) / ||psi||^2 tends to Lambda_2 as m grows.

    For a unit-L2(mu) graph eigenfunction vanishing on the boundary the
    renormalized energy equals (3/2) 5^m lambda_m, whose limit is Lambda.
    """
    target = lambda_6_series(2)
    vals = {}
    for m, vs in ((6, vs6), (7, vs7)):
        pair = build_localized(2, 0, m, vs=vs)
        vals[m] = graph_energy(pair.values, m, vs=vs, renormalized=True)
    assert vals[6] == pytest.approx(target, rel=2e-2)
    # convergence: the level-7 value is closer
    assert abs(vals[7] - target) < abs(vals[6] - target)


# ---------------------------------------------------------- graph Laplacian

def test_laplacian_constant_neumann():
    u = GraphFunction(2, np.ones(vertex_count(2)))
    out = graph_laplacian_apply(u, 2, NEUMANN)
    assert np.allclose(out.values, 0.0, atol=1e-14)


def test_level1_dirichlet_hand_eigenvectors():
    """3x3 interior oracle: (1,1,1) -> eigenvalue 2, (1,-1,0) -> eigenvalue 5."""
    vs = enumerate_vertices(1)
    interior = [i for i in range(6) if i not in vs.boundary_ids]
    for interior_vals, lam in (((1.0, 1.0, 1.0), 2.0),):
        u = np.zeros(6)
        for i, v in zip(interior, interior_vals):
            u[i] = v
        out = graph_laplacian_apply(GraphFunction(1, u), 1, DIRICHLET)
        assert np.allclose(-out.values[interior], lam * u[interior], atol=1e-12)
    # any vector orthogonal to (1,1,1) on the interior triangle hits 5
    u = np.zeros(6)
    u[interior[0]], u[interior[1]] = 1.0, -1.0
    out = graph_laplacian_apply(GraphFunction(1, u), 1, DIRICHLET)
    assert np.allclose(-out.values[interior], 5.0 * u[interior], atol=1e-12)


# ---------------------------------------------------------------- spectra

def test_level1_dirichlet_spectrum():
    vals, _ = graph_spectrum(1, DIRICHLET)
    assert np.allclose(sorted(vals), [2.0, 5.0, 5.0], atol=1e-12)


def test_level0_neumann_spectrum():
    vals, _ = graph_spectrum(0, NEUMANN)
    assert np.allclose(sorted(vals), [0.0, 3.0, 3.0], atol=1e-12)


@pytest.mark.parametrize("bc,m", [(DIRICHLET, 1), (DIRICHLET, 2),
                                  (NEUMANN, 1), (NEUMANN, 2)])
def test_decimation_consistency(bc, m):
    """Every non-forbidden level-(m+1) eigenvalue maps into the level-m set.

    (The level-0 Neumann graph has no interior vertex, so the relation is
    asserted from level 1 on.)
    """
    lo, _ = graph_spectrum(m, bc)
    hi, _ = graph_spectrum(m + 1, bc)
    for lam in hi:
        if spectral.is_forbidden(lam, 1e-6):
            continue
        image = lam * (5.0 - lam)
        assert np.min(np.abs(lo - image)) < 1e-9


@pytest.mark.parametrize("m", [1, 2, 3])
def test_spectrum_counts(m):
    d, _ = graph_spectrum(m, DIRICHLET)
    n, _ = graph_spectrum(m, NEUMANN)
    assert np.count_nonzero(d > 1e-12) == (3 ** (m + 1) - 3) // 2
    assert len(n) == vertex_count(m)


def test_level2_dirichlet_closed_under_decimation():
    """Level-2 spectrum = decimation preimages of level 1 plus born values."""
    lo, _ = graph_spectrum(1, DIRICHLET)
    hi, _ = graph_spectrum(2, DIRICHLET)
    expected = []
    for lam in lo:
        for branch in ("minus", "plus"):
            expected.append(decimate_down(lam, branch))
    expected += [5.0] * 3 + [6.0] * 3  # born at level 2
    assert len(hi) == 12
    assert np.allclose(sorted(hi), sorted(expected), atol=1e-9)


# ------------------------------------------------------------- decimation

def test_decimate_down_examples():
    assert decimate_down(0.0) == 0.0
    assert decimate_down(6.0) == pytest.approx(2.0, abs=1e-14)
    assert decimate_down(2.0) == pytest.approx((5 - math.sqrt(17)) / 2, abs=1e-14)


def test_decimate_down_branches_are_roots():
    for lam in (0.5, 2.0, 3.7, 6.0):
        for branch in ("minus", "plus"):
            x = decimate_down(lam, branch)
            assert x * (5 - x) == pytest.approx(lam, abs=1e-12)


def test_decimate_down_domain_error():
    with pytest.raises(DomainError):
        decimate_down(6.5)


def test_renormalize_zero():
    assert renormalize_eigenvalue(0.0, 3) == 0.0


def test_renormalize_birth_level_ratio_exactly_5():
    for j in range(2, 7):
        ratio = lambda_6_series(j + 1) / lambda_6_series(j)
        assert abs(ratio - 5.0) <= 5.0 * 1e-9


def test_c6_reproduces_family():
    for j in range(2, 8):
        assert lambda_6_series(j) == pytest.approx(c6() * 5.0 ** j, rel=1e-9)


def test_renormalize_against_first_dirichlet_eigenvalue(basis_d6):
    """The birth value 2 at level 1 renormalizes to the ground eigenvalue."""
    lam1 = np.sort(basis_d6.eigenvalues)[0]
    assert renormalize_eigenvalue(2.0, 1) == pytest.approx(lam1, rel=1e-10)


# -------------------------------------------------------------- extension

def test_extend_constant():
    vs = enumerate_vertices(2)
    u = GraphFunction(1, np.full(6, 2.5))
    out = extend_eigenfunction(u, 0.0, vs)
    assert np.allclose(out.values, 2.5, atol=1e-14)


def test_extend_forbidden_value_rejected():
    vs = enumerate_vertices(3)
    seed = build_localized(2, 0, 2).values
    with pytest.raises(ForbiddenEigenvalueError):
        extend_eigenfunction(seed, 2.0, vs)


def test_extend_precondition_residual():
    vs = enumerate_vertices(2)
    u = GraphFunction(1, np.arange(6, dtype=float))
    with pytest.raises(PreconditionError):
        extend_eigenfunction(u, 1.0, vs)


def test_extension_residual_small():
    vs = enumerate_vertices(3)
    seed = build_localized(2, 0, 2).values
    lam3 = decimation_sequence(6.0, 2)[1]
    u = extend_eigenfunction(seed, lam3, vs, check_input=False)
    assert eigen_equation_residual(u, lam3, include_boundary=True) <= 1e-10


# ------------------------------------------------------- localized family

@pytest.mark.parametrize("j", [2, 3, 4, 5, 6])
def test_localized_seed_residual(j):
    vs = enumerate_vertices(j)
    pair = build_localized(j, 0, j, vs=vs)
    seed = pair.values  # at its birth level the values are the (scaled) seed
    assert pair.graph_history[0] == 6.0
    res = eigen_equation_residual(seed, 6.0, vs=vs, include_boundary=True)
    assert res <= 1e-12 * np.abs(seed.values).max()


def test_localized_l2_normalized(vs6):
    for j in (2, 4):
        pair = build_localized(j, 0, 6, vs=vs6)
        n = np.dot(vs6.quadrature_weights, np.abs(pair.values.values) ** 2)
        assert n == pytest.approx(1.0, rel=1e-12)


def test_localized_vanishes_outside_cells(vs6):
    pair = build_localized(3, 0, 6, vs=vs6)
    desc = pair.localized
    inside = set()
    for word in (desc.word, desc.word_mate):
        for cell_word, corners in vs6.cells:
            if cell_word[: len(word)] == word:
                inside.update(corners)
    outside = [i for i in range(vs6.n_vertices) if i not in inside]
    assert np.all(pair.values.values[outside] == 0.0)


def test_localized_junction_choices_differ(vs6):
    a = build_localized(2, 0, 6, vs=vs6)
    b = build_localized(2, 1, 6, vs=vs6)
    assert a.lam == b.lam
    assert not np.allclose(a.values.values, b.values.values)


def test_localized_bad_arguments():
    with pytest.raises(DomainError):
        build_localized(1, 0, 6)
    with pytest.raises(LevelError):
        build_localized(4, 0, 3)
    with pytest.raises(DomainError):
        build_localized(2, 5, 6)


def test_localized_family_mutually_orthogonal(vs6):
    family = [build_localized(j, 0, 6, vs=vs6) for j in range(2, 7)]
    w = vs6.quadrature_weights
    for i in range(len(family)):
        for k in range(i + 1, len(family)):
            ip = np.dot(w, family[i].values.values * family[k].values.values)
            assert abs(ip) < 1e-10


# ---------------------------------------------------------------- basis

def test_basis_size_m2():
    basis = build_basis(2, DIRICHLET)
    assert basis.size == 12


@pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
def test_basis_gram_identity_m6(bc, basis_d6, basis_n6):
    basis = basis_d6 if bc == DIRICHLET else basis_n6
    w = basis.vs.quadrature_weights
    mat = basis.matrix
    gram = (mat * w[:, None]).T @ mat
    assert np.abs(gram - np.eye(basis.size)).max() < 1e-8


def test_basis_contains_localized_bit_identical(basis_d6, vs6):
    for j in range(2, 7):
        pair = basis_d6.pairs[basis_d6.localized_index(j)]
        direct = build_localized(j, 0, 6, vs=vs6)
        assert np.array_equal(pair.values.values, direct.values.values)
        assert pair.lam == direct.lam


def test_basis_ordering_ascending(basis_d6):
    lam = basis_d6.eigenvalues
    assert np.all(np.diff(lam) >= -1e-9)


def test_neumann_basis_has_constant_mode(basis_n6):
    lam = basis_n6.eigenvalues
    assert lam.min() == 0.0
    const = basis_n6.pairs[int(np.argmin(lam))].values.values
    assert np.allclose(const, const[0], atol=1e-10)
    # Dirichlet eigenvalues strictly positive is checked in the counting test


def test_dirichlet_eigenvalues_strictly_positive(basis_d6):
    assert basis_d6.eigenvalues.min() > 0


# -------------------------------------------------------------- residuals

def test_constant_mode_zero_residual(basis_n6):
    idx = int(np.argmin(basis_n6.eigenvalues))
    assert eigen_residual(basis_n6.pairs[idx], basis_n6.vs, NEUMANN) < 1e-10


def test_localized_residual_decreases(vs6, vs7):
    p6 = build_localized(2, 0, 6, vs=vs6)
    p7 = build_localized(2, 0, 7, vs=vs7)
    r6 = eigen_residual(p6, vs6)
    r7 = eigen_residual(p7, vs7)
    assert r6 <= 1e-2
    assert r7 / r6 <= 0.25


def test_graph_eigen_equation_exact_at_own_level(basis_d4):
    """Substituting the graph eigenvalue for Lambda gives a tiny residual."""
    vs = basis_d4.vs
    for pair in basis_d4.pairs[:10]:
        lam_graph = pair.graph_history[4 - pair.birth_level] \
            if pair.birth_level <= 4 else pair.graph_history[0]
        res = eigen_equation_residual(pair.values, lam_graph, vs=vs)
        assert res <= 1e-10
