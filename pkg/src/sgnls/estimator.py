"""Scikit-learn style front end for the vertex <-> spectral transform."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .calculus import SpectralCoeffs, from_coeffs, to_coeffs
from .cache import load_or_build
from .geometry import GraphFunction, vertex_count


class SpectralTransform(BaseEstimator, TransformerMixin):
    """Maps vertex-sampled functions to eigenbasis coefficients and back.

    ``fit`` builds (or loads from cache) the eigenbasis at the configured
    level and boundary condition; ``transform`` performs the analysis of each
    row, ``inverse_transform`` the synthesis.  Rows are vertex-value vectors
    of length |V_level|.
    """

    def __init__(self, level: int = 6, bc: str = "dirichlet", cache_dir=None):
        self.level = level
        self.bc = bc
        self.cache_dir = cache_dir

    def fit(self, X=None, y=None):
        self.basis_ = load_or_build(self.level, self.bc, self.cache_dir)
        self.n_features_in_ = self.basis_.vs.n_vertices
        return self

    def _check_fitted(self):
        if not hasattr(self, "basis_"):
            raise NotFittedError(
                "SpectralTransform must be fitted before use"
            )

    def transform(self, X) -> np.ndarray:
        """Rows of vertex values -> rows of basis coefficients."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X))
        if X.shape[1] != vertex_count(self.level):
            raise ValueError(
                f"expected {vertex_count(self.level)} vertex values per row, "
                f"got {X.shape[1]}"
            )
        out = np.empty((X.shape[0], self.basis_.size), dtype=complex)
        for i, row in enumerate(X):
            out[i] = to_coeffs(GraphFunction(self.level, row), self.basis_).coeffs
        return out

    def inverse_transform(self, C) -> np.ndarray:
        """Rows of basis coefficients -> rows of vertex values."""
        self._check_fitted()
        C = np.atleast_2d(np.asarray(C, dtype=complex))
        if C.shape[1] != self.basis_.size:
            raise ValueError(
                f"expected {self.basis_.size} coefficients per row, "
                f"got {C.shape[1]}"
            )
        out = np.empty((C.shape[0], self.n_features_in_), dtype=complex)
        for i, row in enumerate(C):
            out[i] = from_coeffs(SpectralCoeffs(self.basis_, row)).values
        return out
