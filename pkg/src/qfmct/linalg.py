"""Dense symmetric linear algebra used throughout the package.

All inputs here are small (a*d up to a few hundred) symmetric, usually
positive semi-definite matrices, so everything goes through ``eigh``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

DEFAULT_RTOL = 1e-10
SYMMETRY_RTOL = 1e-8


class DimensionError(ValueError):
    """Raised for non-square or shape-incompatible matrices."""


class SymmetryError(ValueError):
    """Raised when a matrix that must be symmetric is not."""


class NotPSDError(ValueError):
    """Raised when a matrix has an eigenvalue clearly below zero."""


@dataclass(frozen=True)
class SymEig:
    """Eigenvalues in non-increasing order with orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return A


def _check_symmetric(A: np.ndarray) -> np.ndarray:
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise SymmetryError("matrix is not symmetric within relative tolerance 1e-8")
    return 0.5 * (A + A.T)


def sym_eig(A) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending."""
    A = _check_symmetric(_as_square(A))
    w, V = np.linalg.eigh(A)
    return SymEig(values=w[::-1].copy(), vectors=V[:, ::-1].copy())


def _psd_spectrum(A, rtol: float) -> tuple[np.ndarray, np.ndarray, float]:
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    eig = sym_eig(A)
    w = eig.values
    scale = np.max(np.abs(w)) if w.size else 0.0
    tol = rtol * scale
    if w.size and w[-1] < -tol:
        raise NotPSDError(
            f"matrix is not positive semi-definite (smallest eigenvalue {w[-1]:.3e})"
        )
    return np.clip(w, 0.0, None), eig.vectors, tol


def pseudo_inverse(A, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix.

    Eigenvalues at or below ``rtol * max|eigenvalue|`` are treated as zero.
    Slightly negative eigenvalues inside that band are clamped; anything
    more negative raises :class:`NotPSDError`.
    """
    w, V, tol = _psd_spectrum(A, rtol)
    keep = w > tol
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    P = (V * inv) @ V.T
    return 0.5 * (P + P.T)


def sym_sqrt(A, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Symmetric PSD square root S with S @ S == A."""
    w, V, tol = _psd_spectrum(A, rtol)
    w = np.where(w > tol, w, 0.0)
    S = (V * np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T)


def batch_pseudo_inverse(S: np.ndarray, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Pseudo-inverse of a stack ``(..., r, r)`` of symmetric PSD matrices.

    The numerical rank is decided separately for each matrix in the stack.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise DimensionError(f"expected a stack of square matrices, got {S.shape}")
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    w, V = np.linalg.eigh(S)
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    tol = rtol * scale
    if np.any(w < -tol):
        raise NotPSDError("stack contains a matrix that is not positive semi-definite")
    keep = w > tol
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return np.einsum("...ik,...k,...jk->...ij", V, inv, V)


def centering_matrix(a: int) -> np.ndarray:
    """The a x a centering matrix I - 11'/a."""
    if int(a) != a or a < 2:
        raise ValueError(f"centering matrix needs a >= 2, got {a}")
    a = int(a)
    return np.eye(a) - np.full((a, a), 1.0 / a)


def kron(A, B) -> np.ndarray:
    return np.kron(np.atleast_2d(np.asarray(A, dtype=float)), np.atleast_2d(np.asarray(B, dtype=float)))


def direct_sum(blocks) -> np.ndarray:
    """Block-diagonal assembly of a list of matrices."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        raise DimensionError("direct sum of an empty list")
    return block_diag(*blocks)
