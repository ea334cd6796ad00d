"""Small dense linear algebra for symmetric positive-definite matrices.

Everything here works on plain ``numpy`` arrays. Dimensions are small (a few
dozen at most), so the routines favour robustness over speed: Cholesky with an
explicit relative pivot check, and cyclic Jacobi rotations for eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite

PIVOT_RTOL = 1e-12
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SpdCertificate:
    """A symmetric matrix together with its Cholesky factor and smallest eigenvalue."""

    matrix: np.ndarray
    factor: np.ndarray
    lambda_min: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def as_symmetric(m) -> np.ndarray:
    """Copy ``m`` into a float array that is symmetric bit-for-bit (upper triangle wins)."""
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises NotPositiveDefinite when a pivot falls below ``1e-12`` times the
    largest diagonal entry.
    """
    d = m.shape[0]
    scale = float(np.max(np.abs(np.diag(m)))) if d else 0.0
    tol = PIVOT_RTOL * scale
    L = np.zeros_like(m, dtype=float)
    for j in range(d):
        pivot = m[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at index {j} (tolerance {tol:.3e})")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < d:
            L[j + 1:, j] = (m[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def jacobi_eigenvalues(m: np.ndarray, rtol: float = JACOBI_RTOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted ascending."""
    a = np.array(m, dtype=float)
    d = a.shape[0]
    if d == 1:
        return a.diagonal().copy()
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return np.zeros(d)
    a /= scale
    total = np.sqrt(np.sum(a * a))
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum((a - np.diag(np.diag(a))) ** 2))
        if off <= rtol * total:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    # tiny rotation angle: tan(angle) ~ apq / h, avoiding overflow in theta
                    t = apq / h
                else:
                    theta = h / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate columns p, q then rows p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a)) * scale


def spd_factorize(m) -> SpdCertificate:
    m = as_symmetric(m)
    factor = cholesky(m)
    lam = float(jacobi_eigenvalues(m)[0])
    if not lam > 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lam:.3e} is not positive")
    return SpdCertificate(matrix=m, factor=factor, lambda_min=lam)


def _forward_substitute(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = np.zeros_like(b, dtype=float)
    for i in range(L.shape[0]):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def _back_substitute(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = U.shape[0]
    x = np.zeros_like(b, dtype=float)
    for i in range(d - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def spd_solve(c: SpdCertificate, b: np.ndarray) -> np.ndarray:
    """Solve ``matrix @ x = b`` using the certificate's factor; ``b`` may be a vector or matrix."""
    y = _forward_substitute(c.factor, np.asarray(b, dtype=float))
    return _back_substitute(c.factor.T, y)


def spd_inverse(c: SpdCertificate) -> np.ndarray:
    inv = spd_solve(c, np.eye(c.dim))
    return as_symmetric(0.5 * (inv + inv.T))


def matrix_power_apply(m: np.ndarray, p: int, v: np.ndarray) -> np.ndarray:
    """``m**p @ v`` by ``p`` repeated matrix-vector products."""
    if p < 0:
        raise ValueError("power must be non-negative")
    out = np.array(v, dtype=float)
    for _ in range(p):
        out = m @ out
    return out


def operator_norm(m: np.ndarray) -> float:
    """Spectral norm; ``m`` need not be symmetric."""
    return float(np.sqrt(max(jacobi_eigenvalues(m.T @ m)[-1], 0.0)))
