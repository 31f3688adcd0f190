"""
Small dense linear algebra helpers used by the Riccati solvers and the bounds.
"""

from __future__ import annotations

import numpy as np


def spectral_radius(F: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(F))))


def spectral_norm(M: np.ndarray) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def symmetrize(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def asymmetry(M: np.ndarray) -> float:
    """Relative asymmetry ||M - M^T|| / max(1, ||M||)."""
    M = np.asarray(M, dtype=float)
    return float(np.linalg.norm(M - M.T) / max(1.0, np.linalg.norm(M)))


def min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(M))[0])


def max_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(M))[-1])


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """||new - old|| / ||old||, with only a tiny floor on the denominator."""
    scale = max(float(np.linalg.norm(old)), np.finfo(float).tiny)
    return float(np.linalg.norm(new - old) / scale)
