"""Small dense complex linear algebra used throughout the package.

The eigensolver is a cyclic Jacobi iteration on Hermitian matrices. The
matrices met here are at most a few hundred rows, so robustness and
accurate small eigenvalues matter more than speed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "EigenSystem",
    "InterlacingReport",
    "hermitian_eig",
    "dft_matrix",
    "augmented_dft",
    "interlacing_violation",
    "sturmian_check",
]

HERMITIAN_RTOL = 1e-12
JACOBI_TOL = 1e-12
GRAM_CLIP = 1e-12
INTERLACE_SLACK = 1e-9
_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and unitary eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def _check_hermitian(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.linalg.norm(A), 1.0)
    if np.linalg.norm(A - A.conj().T) > HERMITIAN_RTOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return A


def _offdiag_norm(A):
    return np.linalg.norm(A - np.diag(np.diag(A)))


def hermitian_eig(A, gram=False):
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    A : (n, n) array_like
        Hermitian matrix.
    gram : bool
        If True the input is known to be positive semidefinite (a Gram
        matrix); eigenvalues in ``[-1e-12, 0)`` are clipped to zero.

    Returns
    -------
    EigenSystem
        Eigenvalues sorted descending, eigenvectors as columns, with
        ``A = U diag(lam) U^H``.
    """
    A = _check_hermitian(A)
    n = A.shape[0]
    A = 0.5 * (A + A.conj().T)
    V = np.eye(n, dtype=complex)
    target = JACOBI_TOL * np.linalg.norm(A)

    for _ in range(_MAX_SWEEPS):
        if _offdiag_norm(A) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                tau = (A[q, q].real - A[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # J acts on the (p, q) plane: J = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                jpp, jpq = c, s
                jqp, jqq = -s * phase.conjugate(), c * phase.conjugate()
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = colp * jpp + colq * jqp
                A[:, q] = colp * jpq + colq * jqq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = np.conj(jpp) * rowp + np.conj(jqp) * rowq
                A[q, :] = np.conj(jpq) * rowp + np.conj(jqq) * rowq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = vp * jpp + vq * jqp
                V[:, q] = vp * jpq + vq * jqq
    else:
        raise np.linalg.LinAlgError("Jacobi iteration did not converge")

    lam = np.diag(A).real.copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    V = V[:, order]
    if gram:
        lam[(lam < 0) & (lam >= -GRAM_CLIP)] = 0.0
    return EigenSystem(lam, V)


def dft_matrix(L):
    """Unitary DFT matrix with entries ``exp(-2j*pi*p*q/L)/sqrt(L)``."""
    if L < 1:
        raise ValueError("DFT size must be at least 1")
    k = np.arange(L)
    return np.exp(-2j * np.pi * np.outer(k, k) / L) / np.sqrt(L)


def augmented_dft(L, S):
    """``dft_matrix(L)`` Kronecker ``I_S``; acts blockwise on ``S``-vectors."""
    if L < 1 or S < 1:
        raise ValueError("augmented DFT dimensions must be at least 1")
    return np.kron(dft_matrix(L), np.eye(S))


@dataclass(frozen=True)
class InterlacingReport:
    passed: bool
    checked: int
    first_violation: Optional[str] = None


def interlacing_violation(outer, inner, slack=INTERLACE_SLACK):
    """Return a description of the first interlacing failure, or None.

    ``outer`` holds the ``r+1`` descending eigenvalues of a matrix and
    ``inner`` the ``r`` eigenvalues of one of its ``r x r`` principal
    submatrices. Requires ``outer[k+1] <= inner[k] <= outer[k]``.
    """
    outer = np.asarray(outer, dtype=float)
    inner = np.asarray(inner, dtype=float)
    if outer.size != inner.size + 1:
        raise ValueError("outer must have exactly one more eigenvalue than inner")
    for k in range(inner.size):
        if not (outer[k + 1] - slack <= inner[k] <= outer[k] + slack):
            return (
                f"k={k}: need {outer[k + 1]:.6g} <= {inner[k]:.6g} <= {outer[k]:.6g}"
            )
    return None


def sturmian_check(A, steps, slack=INTERLACE_SLACK):
    """Check eigenvalue interlacing along the chain of leading principal submatrices.

    Starting from the full ``n x n`` matrix, ``steps`` nested leading
    submatrices are peeled off and each consecutive pair is tested.
    """
    A = _check_hermitian(A)
    n = A.shape[0]
    if not 0 <= steps < n:
        raise ValueError("steps must be smaller than the matrix dimension")
    eigs = {n: hermitian_eig(A).eigenvalues}
    checked = 0
    for size in range(n - 1, n - 1 - steps, -1):
        eigs[size] = hermitian_eig(A[:size, :size]).eigenvalues
        msg = interlacing_violation(eigs[size + 1], eigs[size], slack)
        checked += 1
        if msg is not None:
            return InterlacingReport(False, checked, f"size {size + 1}->{size}, {msg}")
    return InterlacingReport(True, checked)
