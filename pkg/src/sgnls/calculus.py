"""Vertex/spectral transforms, L^q and fractional Sobolev norms, dyadic blocks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, LevelError
from .geometry import D_S, SIGMA_INF, GraphFunction
from .spectral import DIRICHLET, EigenBasis, c6


@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficients of a function against an ordered eigenbasis."""

    basis: EigenBasis = field(repr=False, compare=False)
    coeffs: np.ndarray = field(compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.size,):
            raise LevelError(
                f"expected {self.basis.size} coefficients, got shape {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    def copy_with(self, coeffs: np.ndarray) -> "SpectralCoeffs":
        return SpectralCoeffs(self.basis, coeffs)


def to_coeffs(f: GraphFunction, basis: EigenBasis) -> SpectralCoeffs:
    """Analysis transform: coeffs[i] = <f, phi_i> in L2(mu).

    The basis functions are real, so the inner product reduces to the
    quadrature-weighted dot product with each column.
    """
    if f.level != basis.level:
        raise LevelError(
            f"function level {f.level} != basis level {basis.level}"
        )
    w = basis.vs.quadrature_weights
    return SpectralCoeffs(basis, basis.matrix.T @ (w * f.values))


def from_coeffs(c: SpectralCoeffs) -> GraphFunction:
    """Synthesis transform: sum_i coeffs[i] * phi_i as vertex values."""
    return GraphFunction(c.basis.level, c.basis.matrix @ c.coeffs)


def lq_norm(f: GraphFunction, q: float, basis_or_vs) -> float:
    """L^q(mu) norm by corner-average quadrature; q = inf is the vertex max."""
    vs = getattr(basis_or_vs, "vs", basis_or_vs)
    if f.level != vs.level:
        raise LevelError(f"function level {f.level} != vertex-set level {vs.level}")
    if q == np.inf:
        return float(np.abs(f.values).max())
    if q <= 1:
        raise DomainError(f"L^q norm requires q > 1, got {q}")
    w = vs.quadrature_weights
    return float(np.dot(w, np.abs(f.values) ** q) ** (1.0 / q))


def hs_norm(c: SpectralCoeffs, s: float) -> float:
    """Spectral fractional Sobolev norm sqrt(sum (1 + Lambda)^s |coeff|^2)."""
    if s < 0:
        raise DomainError("regularity s must be nonnegative")
    lam = c.basis.eigenvalues
    return float(np.sqrt(np.sum((1.0 + lam) ** s * np.abs(c.coeffs) ** 2)))


def sigma_q(q: float) -> float:
    """Critical Sobolev regularity (d_S / 2) * (1 - 2/q) for the L^q embedding."""
    if q <= 2:
        raise DomainError(f"sigma_q defined for q > 2, got {q}")
    return (D_S / 2.0) * (1.0 - 2.0 / q)


def pointwise_power(f: GraphFunction, k: int) -> GraphFunction:
    """Value-wise |f|^(2k) * f, the nonlinearity of order 2k + 1."""
    if k < 1:
        raise DomainError("nonlinearity order k must be >= 1")
    return GraphFunction(f.level, np.abs(f.values) ** (2 * k) * f.values)


def dyadic_bound(j: int) -> int:
    """Index bound N_j = (3^(j+1) - 3) / 2 of the j-th dyadic block."""
    if j < 0:
        raise DomainError("block index must be nonnegative")
    return (3 ** (j + 1) - 3) // 2


def _check_window(basis: EigenBasis, j: int) -> tuple[int, int]:
    if j < 1:
        raise DomainError("dyadic blocks start at j = 1")
    if basis.bc != DIRICHLET:
        raise DomainError("dyadic blocks are defined on the Dirichlet basis")
    lo, hi = dyadic_bound(j - 1), dyadic_bound(j)
    if hi > basis.size:
        raise LevelError(
            f"block {j} needs {hi} basis elements, basis has {basis.size}"
        )
    return lo, hi


def dyadic_project(c: SpectralCoeffs, j: int) -> SpectralCoeffs:
    """Zero all coefficients outside the index window (N_{j-1}, N_j]."""
    lo, hi = _check_window(c.basis, j)
    out = np.zeros_like(c.coeffs)
    out[lo:hi] = c.coeffs[lo:hi]
    return SpectralCoeffs(c.basis, out)


def dyadic_eigenvalue_check(basis: EigenBasis, j: int) -> tuple[float, float]:
    """(min, max) of lambda_k / Lambda_j over the j-th dyadic window.

    Lambda_j = c6 * 5^j is the localized-family eigenvalue of generation j;
    the window eigenvalues are comparable to it with j-independent constants.
    """
    if j > basis.level - 1:
        raise LevelError(
            f"block {j} requires basis level >= {j + 1}, have {basis.level}"
        )
    lo, hi = _check_window(basis, j)
    ratios = basis.eigenvalues[lo:hi] / (c6() * 5.0 ** j)
    return float(ratios.min()), float(ratios.max())
