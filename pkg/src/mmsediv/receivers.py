"""Linear receivers: SINRs, mutual information, outage events and detection.

All functions accept either a :class:`~mmsediv.channels.ChannelRealization`
or a bare array, and array inputs may carry leading batch axes
``(..., rows, cols)``. Rates are in bits (log base 2); natural logs only
appear in :func:`eigen_exponents`.
"""

from dataclasses import dataclass

import numpy as np

from .channels import ChannelRealization

__all__ = [
    "RankError",
    "EigenExponents",
    "QPSK",
    "gram",
    "resolvent_diag",
    "mmse_sinr",
    "zf_sinr",
    "stream_rates",
    "ml_rate",
    "mutual_info",
    "outage_indicator",
    "separate_outage",
    "mac_user_outage",
    "gram_eigenvalues",
    "eigen_exponents",
    "jensen_upper_event",
    "jensen_lower_event",
    "mmse_equalize",
    "slice_qpsk",
    "detect_streams",
]

ZF_RANK_TOL = 1e-12

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)


class RankError(np.linalg.LinAlgError):
    """Channel Gram matrix is numerically rank deficient."""


def _matrix(channel):
    if isinstance(channel, ChannelRealization):
        return channel.matrix
    return np.asarray(channel, dtype=complex)


def _herm(A):
    return np.conj(np.swapaxes(A, -1, -2))


def gram(channel):
    """``H^H H`` for a single channel or a batch."""
    H = _matrix(channel)
    return _herm(H) @ H


def resolvent_diag(channel, rho):
    """Diagonal of ``(I + rho H^H H)^{-1}``, one entry per stream."""
    if np.any(np.asarray(rho) <= 0):
        raise ValueError("SNR must be positive")
    W = gram(channel)
    n = W.shape[-1]
    A = np.eye(n) + rho * W
    inv = np.linalg.inv(A)
    return np.diagonal(inv, axis1=-2, axis2=-1).real.copy()


def mmse_sinr(channel, rho):
    """Per-stream MMSE output SINR ``1/[(I + rho H^H H)^{-1}]_kk - 1``.

    Valid for both ``N >= M`` and ``N < M``.

    Examples
    --------
    >>> float(mmse_sinr(np.array([[1.0]]), 3.0)[0])
    3.0
    """
    d = resolvent_diag(channel, rho)
    return np.maximum(1.0 / d - 1.0, 0.0)


def _check_full_rank(W):
    ev = np.linalg.eigvalsh(W)
    top = ev[..., -1]
    if np.any(ev[..., 0] < ZF_RANK_TOL * top) or np.any(top <= 0):
        raise RankError("channel is rank deficient; zero forcing is undefined")


def zf_sinr(channel, rho):
    """Per-stream zero-forcing SINR ``rho / [(H^H H)^{-1}]_kk``.

    Raises
    ------
    RankError
        If the smallest Gram eigenvalue is below ``1e-12`` times the largest.
    """
    if np.any(np.asarray(rho) <= 0):
        raise ValueError("SNR must be positive")
    W = gram(channel)
    _check_full_rank(W)
    d = np.diagonal(np.linalg.inv(W), axis1=-2, axis2=-1).real
    return rho / d


def stream_rates(channel, rho, receiver="mmse"):
    """Per-stream rates ``log2(1 + gamma_k)`` evaluated without cancellation."""
    if receiver == "mmse":
        return -np.log2(resolvent_diag(channel, rho))
    if receiver == "zf":
        return np.log2(1.0 + zf_sinr(channel, rho))
    raise ValueError(f"no per-stream rates for receiver {receiver!r}")


def ml_rate(channel, rho):
    """Joint (maximum likelihood) mutual information ``log2 det(I + rho H^H H)``."""
    W = gram(channel)
    sign, logdet = np.linalg.slogdet(np.eye(W.shape[-1]) + rho * W)
    return logdet / np.log(2.0)


def mutual_info(sinrs, L_d=1):
    """Sum-rate ``(1/L_d) sum_k log2(1 + gamma_k)`` over the last axis."""
    sinrs = np.asarray(sinrs, dtype=float)
    return np.sum(np.log2(1.0 + sinrs), axis=-1) / L_d


def outage_indicator(I, R):
    """Outage iff the mutual information is strictly below the target rate."""
    return np.asarray(I) < R


def separate_outage(rates, R, M):
    """Separate spatial encoding: each of the ``M`` streams carries ``R/M``."""
    return np.any(np.asarray(rates) < R / M, axis=-1)


def mac_user_outage(channel, rho, R, user, M):
    """Outage of MAC user ``user`` (1-based) from the jointly equalized streams."""
    H = _matrix(channel)
    K = H.shape[-1] // M
    if not 1 <= user <= K:
        raise IndexError(f"user index {user} outside 1..{K}")
    rates = stream_rates(H, rho, "mmse")
    own = rates[..., (user - 1) * M:user * M].sum(axis=-1)
    return own < R


def gram_eigenvalues(channel):
    """Nonzero-slot eigenvalues of ``H^H H`` (``min(rows, cols)`` of them), descending."""
    H = _matrix(channel)
    L = min(H.shape[-2], H.shape[-1])
    ev = np.linalg.eigvalsh(gram(H))[..., ::-1][..., :L]
    return np.maximum(ev, 0.0)


@dataclass(frozen=True)
class EigenExponents:
    alphas: np.ndarray
    count_above_one: int


def eigen_exponents(eigenvalues, rho):
    """SNR exponents ``alpha_k = -ln(lambda_k) / ln(rho)`` and how many exceed one.

    A zero eigenvalue maps to ``+inf``.
    """
    if rho <= 1:
        raise ValueError("exponents need rho > 1")
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be nonnegative")
    with np.errstate(divide="ignore"):
        alphas = -np.log(lam) / np.log(rho)
    return EigenExponents(alphas, int(np.count_nonzero(alphas > 1)))


def jensen_upper_event(eigenvalues, rho, R, M, N, streams=None):
    """Event implied by outage through Jensen's inequality on the trace.

    True iff ``sum_k 1/(1 + rho lambda_k) >= M 2^{-R/M} - (streams - N)^+``
    where the sum runs over the ``min(streams, N)`` nonzero-slot eigenvalues.
    ``streams`` defaults to ``M``; for a MAC user pass ``K M``.
    """
    streams = M if streams is None else streams
    lam = np.asarray(eigenvalues, dtype=float)
    lhs = np.sum(1.0 / (1.0 + rho * lam), axis=-1)
    rhs = M * 2.0 ** (-R / M) - max(streams - N, 0)
    return lhs >= rhs


def jensen_lower_event(channel, rho, R, M=None):
    """Event that implies outage: ``M log2(mean_k 1/S_k) < R`` with ``S_k`` the
    resolvent diagonal. ``M`` defaults to the number of streams."""
    d = resolvent_diag(channel, rho)
    M = d.shape[-1] if M is None else M
    return M * np.log2(np.mean(1.0 / d, axis=-1)) < R


def mmse_equalize(H, rho, y):
    """Apply ``W = (H^H H + I/rho)^{-1} H^H`` to ``y = sqrt(rho) H x + n``."""
    H = _matrix(H)
    A = gram(H) + np.eye(H.shape[-1]) / rho
    b = (_herm(H) @ y[..., None])[..., 0]
    return np.linalg.solve(A, b[..., None])[..., 0] / np.sqrt(rho)


def slice_qpsk(x):
    """Nearest QPSK index; ties go to the lowest index."""
    dist = np.abs(np.asarray(x)[..., None] - QPSK) ** 2
    return np.argmin(dist, axis=-1)


def _detect_errors(H, rho, tx_idx, noise):
    x = QPSK[tx_idx]
    y = np.sqrt(rho) * (H @ x[..., None])[..., 0] + noise
    return slice_qpsk(mmse_equalize(H, rho, y)) != tx_idx


def detect_streams(channel, rho, tx, rng):
    """Transmit QPSK symbols ``tx`` over ``channel`` with CN(0,1) noise, MMSE
    equalize, slice, and return the number of symbol errors.

    ``tx`` holds constellation points with shape ``(..., M)``; leading axes
    are independent channel uses over the same channel.
    """
    H = _matrix(channel)
    tx = np.asarray(tx, dtype=complex)
    idx = slice_qpsk(tx)
    if not np.allclose(QPSK[idx], tx):
        raise ValueError("tx symbols must be unit-energy QPSK points")
    shape = tx.shape[:-1] + (H.shape[-2],)
    z = rng.standard_normal(shape + (2,))
    noise = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
    return int(np.count_nonzero(_detect_errors(H, rho, idx, noise)))
