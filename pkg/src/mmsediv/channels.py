"""Channel sampling and equivalent channel matrices.

Four constructions are supported:

* ``flat``  -- an ``N x M`` i.i.d. Rayleigh matrix,
* ``mac``   -- ``K`` users stacked side by side, ``N x KM``,
* ``zp``    -- zero-padded block transmission over an ISI channel, a tall
  banded block-Toeplitz matrix of size ``N(L_d+nu) x M L_d``,
* ``cp``    -- cyclic-prefix block transmission, a block-circulant
  ``N L_d x M L_d`` matrix.

Every builder has a batched core (``zp_matrix``, ``cp_matrix``) that
accepts tap arrays with arbitrary leading batch axes; the Monte Carlo
engine uses these directly.

Conventions
-----------
CN(0, 1) entries have independent real and imaginary parts of variance
1/2. ISI taps use a uniform power profile with per-entry variance
``1/(nu+1)`` so the total energy per antenna pair is one. The guard
length is fixed to the channel memory, ``L_e = nu``.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np

from .numkernel import augmented_dft

__all__ = [
    "SCHEMES",
    "RECEIVERS",
    "ConfigError",
    "SystemConfig",
    "ChannelRealization",
    "ResamplingReport",
    "cn_from_normals",
    "sample_flat",
    "stack_mac",
    "sample_isi",
    "zp_matrix",
    "cp_matrix",
    "build_zp",
    "build_cp",
    "cp_frequency_blocks",
    "dft_resampling_check",
    "normals_per_trial",
    "effective_channels",
]

SCHEMES = ("flat", "mac", "zp", "cp")
RECEIVERS = ("mmse", "zf", "ml")
ENCODINGS = ("joint", "separate")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SystemConfig:
    """One link configuration.

    ``M`` transmit antennas per user, ``N`` receive antennas, ``K`` users,
    ``nu`` channel memory, ``L_d`` data block length and ``R`` the target
    spectral efficiency in bits/s/Hz. ``user`` selects which MAC user's
    outage is tracked. ``cp_precoder`` composes the IDFT precoder into the
    CP effective channel instead of using the bare block-circulant matrix.
    """

    M: int
    N: int
    R: float
    K: int = 1
    nu: int = 0
    L_d: int = 1
    scheme: str = "flat"
    encoding: str = "joint"
    receiver: str = "mmse"
    user: int = 1
    cp_precoder: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("M", "N", "K", "L_d", "user"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(name, f"must be an integer, got {value!r}")
            if value < 1:
                raise ConfigError(name, "must be at least 1")
        if isinstance(self.nu, bool) or not isinstance(self.nu, (int, np.integer)):
            raise ConfigError("nu", f"must be an integer, got {self.nu!r}")
        if self.nu < 0:
            raise ConfigError("nu", "must be nonnegative")
        if isinstance(self.R, bool) or not isinstance(self.R, (int, float, np.floating, np.integer)):
            raise ConfigError("R", f"must be a number, got {self.R!r}")
        if not np.isfinite(self.R) or self.R <= 0:
            raise ConfigError("R", "must be a positive finite rate")
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"must be one of {SCHEMES}")
        if self.encoding not in ENCODINGS:
            raise ConfigError("encoding", f"must be one of {ENCODINGS}")
        if self.receiver not in RECEIVERS:
            raise ConfigError("receiver", f"must be one of {RECEIVERS}")
        if self.scheme in ("zp", "cp"):
            if self.L_d < self.nu + 1:
                raise ConfigError("L_d", "block schemes need L_d >= nu + 1")
        else:
            if self.nu != 0:
                raise ConfigError("nu", f"scheme {self.scheme!r} has no channel memory")
            if self.L_d != 1:
                raise ConfigError("L_d", f"scheme {self.scheme!r} uses L_d = 1")
        if self.scheme != "mac" and self.K != 1:
            raise ConfigError("K", "multiple users require scheme 'mac'")
        if self.user > self.K:
            raise ConfigError("user", "user index exceeds K")
        if self.cp_precoder and self.scheme != "cp":
            raise ConfigError("cp_precoder", "only meaningful for scheme 'cp'")

    @classmethod
    def from_mapping(cls, data):
        """Build a config from a mapping, ignoring unrelated keys."""
        names = {f.name for f in fields(cls)}
        for required in ("M", "N", "R"):
            if required not in data:
                raise ConfigError(required, "missing required field")
        kwargs = {k: v for k, v in data.items() if k in names}
        if "R" in kwargs and isinstance(kwargs["R"], (int, np.integer)) and not isinstance(kwargs["R"], bool):
            kwargs["R"] = float(kwargs["R"])
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)

    @property
    def streams(self):
        """Number of equalizer output streams."""
        if self.scheme == "mac":
            return self.K * self.M
        return self.M * self.L_d

    @property
    def shape(self):
        """(rows, cols) of the effective channel matrix."""
        if self.scheme == "flat":
            return self.N, self.M
        if self.scheme == "mac":
            return self.N, self.K * self.M
        if self.scheme == "zp":
            return self.N * (self.L_d + self.nu), self.M * self.L_d
        return self.N * self.L_d, self.M * self.L_d


@dataclass
class ChannelRealization:
    """An effective channel matrix plus how it was built."""

    matrix: np.ndarray
    scheme: str = "flat"
    taps: Optional[List[np.ndarray]] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape


def _as_matrix(channel):
    if isinstance(channel, ChannelRealization):
        return channel.matrix
    return np.asarray(channel)


def cn_from_normals(z):
    """Pair up the last axis of real N(0,1) draws into CN(0,1) samples."""
    z = np.asarray(z, dtype=float)
    return (z[..., 0::2] + 1j * z[..., 1::2]) * np.sqrt(0.5)


def _cn(rng, shape):
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_flat(M, N, rng, seed=None):
    """Draw an ``N x M`` matrix of i.i.d. CN(0, 1) entries."""
    if M < 1 or N < 1:
        raise ValueError("antenna counts must be at least 1")
    return ChannelRealization(_cn(rng, (N, M)), "flat", seed=seed)


def stack_mac(user_channels):
    """Concatenate per-user ``N x M`` channels into ``[H_1 ... H_K]``."""
    mats = [_as_matrix(h) for h in user_channels]
    if not mats:
        raise ValueError("need at least one user channel")
    if any(m.shape != mats[0].shape for m in mats):
        raise ValueError("all user channels must share one shape")
    return ChannelRealization(np.hstack(mats), "mac", meta={"K": len(mats)})


def sample_isi(M, N, nu, rng):
    """Draw ``nu + 1`` tap matrices with per-entry variance ``1/(nu+1)``."""
    if nu < 0:
        raise ValueError("channel memory must be nonnegative")
    taps = _cn(rng, (nu + 1, N, M)) / np.sqrt(nu + 1)
    return list(taps)


def _tap_array(taps):
    if isinstance(taps, np.ndarray):
        arr = taps
    else:
        arr = np.stack([np.atleast_2d(np.asarray(t)) for t in taps]) if len(taps) else np.empty((0,))
    if arr.ndim < 3 or arr.shape[-3] == 0:
        raise ValueError("at least one channel tap is required")
    return arr.astype(complex, copy=False)


def zp_matrix(taps, L_d):
    """Batched zero-padding channel; ``taps`` has shape ``(..., nu+1, N, M)``."""
    taps = _tap_array(taps)
    if L_d < 1:
        raise ValueError("L_d must be at least 1")
    *batch, P, N, M = taps.shape
    nu = P - 1
    out = np.zeros((*batch, N * (L_d + nu), M * L_d), dtype=complex)
    for j in range(L_d):
        for i in range(P):
            r = j + i
            out[..., r * N:(r + 1) * N, j * M:(j + 1) * M] = taps[..., i, :, :]
    return out


def cp_matrix(taps, L_d):
    """Batched block-circulant CP channel; block (r, j) is ``H_{(r-j) mod L_d}``."""
    taps = _tap_array(taps)
    *batch, P, N, M = taps.shape
    if L_d < P:
        raise ValueError("cyclic prefix needs L_d >= nu + 1")
    out = np.zeros((*batch, N * L_d, M * L_d), dtype=complex)
    for j in range(L_d):
        for i in range(P):
            r = (j + i) % L_d
            out[..., r * N:(r + 1) * N, j * M:(j + 1) * M] = taps[..., i, :, :]
    return out


def build_zp(taps, L_d):
    """Equivalent channel for zero-padded transmission (single realization)."""
    arr = _tap_array(taps)
    return ChannelRealization(zp_matrix(arr, L_d), "zp", taps=list(arr))


def build_cp(taps, L_d, precoder=False):
    """Equivalent channel for cyclic-prefix transmission (single realization).

    With ``precoder=True`` the IDFT precoder is folded in, giving
    ``H_eq @ Q_Tx^H``.
    """
    arr = _tap_array(taps)
    H = cp_matrix(arr, L_d)
    if precoder:
        M = arr.shape[-1]
        H = H @ augmented_dft(L_d, M).conj().T
    return ChannelRealization(H, "cp", taps=list(arr), meta={"precoder": precoder})


def cp_frequency_blocks(taps, L_d):
    """Per-bin channel ``B_k = sum_i H_i exp(-2j pi i (k-1) / L_d)``, k = 1..L_d."""
    arr = _tap_array(taps)
    if L_d < 1:
        raise ValueError("L_d must be at least 1")
    i = np.arange(arr.shape[-3])
    k = np.arange(L_d)
    phase = np.exp(-2j * np.pi * np.outer(k, i) / L_d)
    return np.einsum("ki,...inm->...knm", phase, arr)


@dataclass(frozen=True)
class ResamplingReport:
    passed: bool
    max_error: float
    decimation: int


def dft_resampling_check(taps_simo, L1, L2, tol=1e-10):
    """Check that the ``L1``-point frequency samples of a SIMO channel are the
    every-``T``-th samples of its ``L2 = T L1``-point samples.

    The ``L1`` side is computed with an FFT of the zero-padded impulse
    response, the ``L2`` side by direct evaluation of the frequency blocks.
    """
    h = np.stack([np.asarray(t, dtype=complex).reshape(-1) for t in taps_simo])
    nu = h.shape[0] - 1
    if L1 < nu + 1:
        raise ValueError("L1 must be at least nu + 1")
    if L2 < L1 or L2 % L1:
        raise ValueError("L2 must be an integer multiple of L1")
    T = L2 // L1
    b1 = np.fft.fft(h, n=L1, axis=0)
    b2 = cp_frequency_blocks(h[:, :, None], L2)[..., 0]
    err = float(np.max(np.abs(b1 - b2[::T])))
    return ResamplingReport(err <= tol, err, T)


def normals_per_trial(config):
    """Real N(0,1) variates one channel draw consumes."""
    rows_cols = config.N * config.M
    if config.scheme == "mac":
        return 2 * rows_cols * config.K
    return 2 * rows_cols * (config.nu + 1)


def effective_channels(config, normals):
    """Map a ``(n, normals_per_trial)`` block of N(0,1) draws to ``n`` effective channels."""
    normals = np.asarray(normals, dtype=float)
    n = normals.shape[0]
    z = cn_from_normals(normals)
    M, N = config.M, config.N
    if config.scheme == "flat":
        return z.reshape(n, N, M)
    if config.scheme == "mac":
        users = z.reshape(n, config.K, N, M)
        return users.transpose(0, 2, 1, 3).reshape(n, N, config.K * M)
    taps = z.reshape(n, config.nu + 1, N, M) / np.sqrt(config.nu + 1)
    if config.scheme == "zp":
        return zp_matrix(taps, config.L_d)
    H = cp_matrix(taps, config.L_d)
    if config.cp_precoder:
        H = H @ augmented_dft(config.L_d, M).conj().T
    return H
