"""Numerically safe primitives: stable log-sum-exp, Gauss-Hermite rules, SPD matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .errors import ConfigError

MAX_GH_NODES = 128


def log_sum_exp(w, axis=-1):
    """Return log(sum(exp(w))) along `axis`, shifted by the max for stability.

    An all-(-inf) slice yields -inf (zero total mass) without overflow or NaN.
    """
    w = np.asarray(w, dtype=float)
    m = np.max(w, axis=axis, keepdims=True)
    # slices that are entirely -inf: shift by 0 instead so exp(-inf) = 0 cleanly
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(w - m_safe), axis=axis)) + np.squeeze(m_safe, axis=axis)
    return out


def softmax(w, axis=-1):
    """Stable softmax along `axis`. All-(-inf) slices produce NaN (caller checks)."""
    w = np.asarray(w, dtype=float)
    m = np.max(w, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(w - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def gauss_hermite(n_nodes):
    """Nodes and weights for integrals against exp(-x^2) on the real line.

    Exact for polynomials of degree <= 2*n_nodes - 1.
    """
    if not (1 <= n_nodes <= MAX_GH_NODES):
        raise ConfigError(f"n_nodes must be in [1, {MAX_GH_NODES}], got {n_nodes}")
    return np.polynomial.hermite.hermgauss(n_nodes)


def gauss_hermite_normal(n_nodes):
    """Nodes z and probability weights p with sum(p * f(z)) ~ E[f(xi)], xi ~ N(0,1)."""
    x, w = gauss_hermite(n_nodes)
    return x * np.sqrt(2.0), w / np.sqrt(np.pi)


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive-definite matrix together with its lower Cholesky factor."""

    entries: np.ndarray
    chol: np.ndarray

    SYM_TOL = 1e-12
    PIVOT_REL_TOL = 1e-12

    @classmethod
    def from_matrix(cls, a) -> "SpdMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigError(f"expected a square matrix, got shape {a.shape}")
        if np.max(np.abs(a - a.T)) > cls.SYM_TOL:
            raise ConfigError("matrix is not symmetric within 1e-12")
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise ConfigError("matrix is not positive definite") from exc
        # reject near-singular covariances: pivots relative to the largest diagonal entry
        pivots = np.diag(chol) ** 2
        if np.min(pivots) <= cls.PIVOT_REL_TOL * np.max(np.diag(a)):
            raise ConfigError("matrix is numerically singular (tiny Cholesky pivot)")
        a = a.copy()
        a.setflags(write=False)
        chol.setflags(write=False)
        return cls(entries=a, chol=chol)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal_part(self):
        """Diagonal of the matrix; valid as the full matrix only if is_diagonal."""
        return np.diag(self.entries)

    @property
    def is_diagonal(self) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.all(off == 0.0))

    def solve(self, b):
        """Solve A x = b using the stored Cholesky factor."""
        return cho_solve((self.chol, True), b)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def sample(self, mean, gen, n):
        """Draw n points from N(mean, A)."""
        u = gen.standard_normal((n, self.dim))
        return np.asarray(mean, dtype=float) + u @ self.chol.T
