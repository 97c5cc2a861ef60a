"""Closed-form diversity orders of linear MMSE receivers.

Every function returns integer slope orders. Floors and ceilings of
``M 2^{-R/M}`` are evaluated on exact rationals whenever ``R/M`` is an
integer; otherwise in floating point with a snap to the nearest integer
when within ``1e-9`` times the magnitude of the terms that were combined,
so rounding noise never flips a diversity value and a tiny but positive
power term is never mistaken for zero.

At the isolated rates where the argument of the ceiling is an integer, the
ceiling form and the ``floor(x + 1)`` form disagree. Functions that can hit
such a point report the second value in :attr:`DiversityValue.alternate`.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

__all__ = [
    "DiversityValue",
    "QipSolution",
    "flat_rate_thresholds",
    "diversity_flat",
    "diversity_flat_upper_at_integer_points",
    "diversity_separate",
    "diversity_zf",
    "diversity_mac_bounds",
    "diversity_zp_bounds",
    "diversity_zp_siso",
    "diversity_cp",
    "diversity_cp_simo",
    "qip_solve",
    "qip_bruteforce",
    "formulas_for",
]

SNAP = 1e-9


@dataclass(frozen=True)
class DiversityValue:
    """An integer diversity order with provenance.

    ``kind`` is ``"exact"``, ``"lower"`` or ``"upper"``. ``alternate`` is
    the competing value at a discontinuity point, else None.
    """

    value: int
    formula: str
    inputs: dict = field(default_factory=dict)
    kind: str = "exact"
    alternate: Optional[int] = None

    def __int__(self):
        return self.value

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class QipSolution:
    allocation: Tuple[int, ...]
    objective: int


def _scaled_pow2(scale, R, M):
    """``scale * 2^(-R/M)``, exact when ``R/M`` is an integer."""
    q = Fraction(R) / M
    if q.denominator == 1 and q >= 0:
        return Fraction(scale, 2 ** q.numerator)
    return scale * 2.0 ** (-float(R) / M)


def _snap(x, scale=1.0):
    if isinstance(x, Fraction):
        return x
    r = round(x)
    return float(r) if abs(x - r) <= SNAP * float(scale) else x


def _ceil(x, scale=1.0):
    return int(math.ceil(_snap(x, scale)))


def _floor(x, scale=1.0):
    return int(math.floor(_snap(x, scale)))


def _is_integer(x, scale=1.0):
    x = _snap(x, scale)
    if isinstance(x, Fraction):
        return x.denominator == 1
    return float(x).is_integer()


def _pos(x):
    return x if x > 0 else 0


def _check_rate(R, *counts):
    if not R > 0:
        raise ValueError("rate must be positive")
    if any(c < 1 for c in counts):
        raise ValueError("antenna counts and block lengths must be at least 1")


def _flat_arg(R, M, N):
    """``M 2^{-R/M} - (M-N)^+`` and the magnitude of its terms."""
    p = _scaled_pow2(M, R, M)
    return p - max(M - N, 0), p + max(M - N, 0)


def _quadratic(S, weight):
    return S * S + weight * S


def diversity_flat(R, M, N):
    """Diversity of the MMSE receiver with joint spatial encoding on a flat channel.

    ``d = S^2 + |N - M| S`` with ``S = ceil((M 2^{-R/M} - (M-N)^+)^+)``.
    """
    _check_rate(R, M, N)
    x, scale = _flat_arg(R, M, N)
    x = _pos(x)
    S = _ceil(x, scale)
    d = _quadratic(S, abs(N - M))
    alt = None
    if x > 0 and _is_integer(x, scale):
        alt = _quadratic(_floor(x + 1, scale), abs(N - M))
    return DiversityValue(d, "flat", {"R": R, "M": M, "N": N}, "exact", alt)


def diversity_flat_upper_at_integer_points(R, M, N):
    """Floor-form upper bound ``floor((M 2^{-R/M} + 1 - (M-N)^+)^+)`` in place of ``S``.

    Coincides with :func:`diversity_flat` except where ``M 2^{-R/M}`` is an
    integer; the ceiling form is carried in ``alternate`` when they differ.
    """
    _check_rate(R, M, N)
    x, scale = _flat_arg(R, M, N)
    F = _floor(_pos(x + 1), scale + 1)
    d = _quadratic(F, abs(N - M))
    ceil_form = diversity_flat(R, M, N).value
    return DiversityValue(
        d, "flat-floor", {"R": R, "M": M, "N": N}, "upper",
        ceil_form if ceil_form != d else None,
    )


def flat_rate_thresholds(M, N):
    """Rates at which the flat-channel diversity steps down.

    Returns a list of ``(R_threshold, d_below, d_at_or_above)`` sorted by
    increasing rate. At ``R_threshold`` the ceiling argument equals an
    integer ``s`` and the diversity takes the lower value.
    """
    out = []
    excess = max(M - N, 0)
    for s in range(1, M - excess):
        R = M * math.log2(M / (s + excess))
        out.append((R, _quadratic(s + 1, abs(N - M)), _quadratic(s, abs(N - M))))
    return sorted(out)


def diversity_separate(M, N):
    """Separate per-antenna encoding: ``N - M + 1`` (requires ``N >= M``)."""
    if N < M:
        raise ValueError("separate-encoding diversity is stated for N >= M")
    return DiversityValue(N - M + 1, "separate", {"M": M, "N": N})


def diversity_zf(M, N):
    """Zero forcing, joint or separate encoding: ``N - M + 1``."""
    if N < M:
        raise ValueError("zero forcing needs N >= M")
    return DiversityValue(N - M + 1, "zf", {"M": M, "N": N})


def diversity_mac_bounds(R, M, N, K):
    """Per-user diversity bounds for a ``K``-user MAC with joint MMSE equalization.

    The upper bound keeps ``(M - N)^+`` rather than ``(KM - N)^+`` in the
    rate term, as in the published statement.
    """
    _check_rate(R, M, N, K)
    inputs = {"R": R, "M": M, "N": N, "K": K}
    w = abs(N - K * M)
    excess = max(M - N, 0)
    p_lo = _scaled_pow2(M, R, M)
    p_hi = _scaled_pow2(K * M, R, K * M)
    S_lo = _ceil(_pos(p_lo - excess), p_lo + excess)
    S_hi = _ceil(_pos(p_hi - excess), p_hi + excess)
    lower = DiversityValue(_quadratic(S_lo, w), "mac-lower", inputs, "lower")
    upper = DiversityValue(_quadratic(S_hi, w), "mac-upper", inputs, "upper")
    return lower, upper


def diversity_zp_bounds(R, M, N, nu, L_d):
    """Lower and upper bounds on zero-padding MMSE diversity.

    upper: ``F^2 + |(nu+1)N - M| F`` with ``F = floor((M 2^{-R/M} + 1 - (M-N)^+)^+)``
    lower: ``ceil(Q)^2 + |(nu+1)N - M| ceil(Q)``, ``Q = max(0, M 2^{-R/M} - (M L_d - M))``
    """
    _check_rate(R, M, N, L_d)
    if nu < 0:
        raise ValueError("channel memory must be nonnegative")
    inputs = {"R": R, "M": M, "N": N, "nu": nu, "L_d": L_d}
    w = abs((nu + 1) * N - M)
    p = _scaled_pow2(M, R, M)
    excess = max(M - N, 0)
    F = _floor(_pos(p + 1 - excess), p + 1 + excess)
    Q = _ceil(_pos(p - (M * L_d - M)), p + M * L_d - M)
    lower = DiversityValue(_quadratic(Q, w), "zp-lower", inputs, "lower")
    upper = DiversityValue(_quadratic(F, w), "zp-upper", inputs, "upper")
    return lower, upper


def diversity_zp_siso(nu):
    """Single-antenna ZP with MMSE equalization: ``nu + 1`` at every rate."""
    if nu < 0:
        raise ValueError("channel memory must be nonnegative")
    return DiversityValue(nu + 1, "zp-siso", {"nu": nu})


def _cp_value(Omega, L_d, w):
    u = Omega // L_d
    return Omega * (2 * u + 1) - u * L_d * (u + 1) + w * Omega


def diversity_cp(R, M, N, nu, L_d):
    """Cyclic-prefix MMSE diversity from the QIP allocation.

    ``Omega = ceil(M L_d 2^{-R/M})``, ``u = floor(Omega / L_d)``,
    ``d = Omega (2u + 1) - u L_d (u + 1) + |N - M| Omega``.

    Exact for ``L_d = nu + 1``; for longer blocks the same number is an
    upper bound (``kind="upper"``).
    """
    _check_rate(R, M, N, L_d)
    if L_d < nu + 1:
        raise ValueError("cyclic prefix needs L_d >= nu + 1")
    x = _scaled_pow2(M * L_d, R, M)
    Omega = _ceil(x, x)
    d = _cp_value(Omega, L_d, abs(N - M))
    alt = None
    if _is_integer(x, x):
        alt = _cp_value(_floor(x, x) + 1, L_d, abs(N - M))
    kind = "exact" if L_d == nu + 1 else "upper"
    inputs = {"R": R, "M": M, "N": N, "nu": nu, "L_d": L_d}
    return DiversityValue(d, "cp", inputs, kind, alt)


def diversity_cp_simo(R, N, nu, L_d):
    """SIMO cyclic-prefix MMSE diversity ``N min(nu + 1, floor(2^{-R} L_d) + 1)``."""
    _check_rate(R, N, L_d)
    if L_d < nu + 1:
        raise ValueError("cyclic prefix needs L_d >= nu + 1")
    x = _scaled_pow2(L_d, R, 1)
    d = N * min(nu + 1, _floor(x, x) + 1)
    return DiversityValue(d, "cp-simo", {"R": R, "N": N, "nu": nu, "L_d": L_d})


def qip_solve(Omega, ell, cap=None):
    """Minimize ``sum n_k^2`` over nonnegative integers with ``sum n_k = Omega``.

    The optimum spreads ``Omega`` as evenly as possible: ``t`` entries equal
    ``u = Omega // ell`` and the remaining ``ell - t`` equal ``u + 1``.
    ``cap`` only triggers a warning when an entry exceeds it.

    >>> qip_solve(5, 3)
    QipSolution(allocation=(1, 2, 2), objective=9)
    """
    if Omega < 0 or ell < 1:
        raise ValueError("need Omega >= 0 and ell >= 1")
    u = Omega // ell
    t = ell * (u + 1) - Omega
    alloc = (u,) * t + (u + 1,) * (ell - t)
    K = Omega - u * ell
    objective = ell * u * u + 2 * u * K + K
    if cap is not None and max(alloc) > cap:
        warnings.warn(f"QIP allocation entry {max(alloc)} exceeds cap {cap}", stacklevel=2)
    return QipSolution(alloc, objective)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def qip_bruteforce(Omega, ell):
    """Exhaustive QIP oracle for ``Omega <= 12``, ``ell <= 6``.

    Returns the lexicographically first minimizer.
    """
    if not (0 <= Omega <= 12 and 1 <= ell <= 6):
        raise ValueError("brute force limited to 0 <= Omega <= 12, 1 <= ell <= 6")
    best = None
    for n in _compositions(Omega, ell):
        obj = sum(v * v for v in n)
        if best is None or obj < best[1]:
            best = (n, obj)
    return QipSolution(*best)


def formulas_for(config):
    """All closed forms that apply to a :class:`~mmsediv.channels.SystemConfig`."""
    c = config
    out = []
    if c.scheme == "flat":
        out.append(diversity_flat(c.R, c.M, c.N))
        out.append(diversity_flat_upper_at_integer_points(c.R, c.M, c.N))
        if c.N >= c.M:
            out.append(diversity_separate(c.M, c.N))
            out.append(diversity_zf(c.M, c.N))
    elif c.scheme == "mac":
        out.extend(diversity_mac_bounds(c.R, c.M, c.N, c.K))
    elif c.scheme == "zp":
        out.extend(diversity_zp_bounds(c.R, c.M, c.N, c.nu, c.L_d))
        if c.M == 1 and c.N == 1:
            out.append(diversity_zp_siso(c.nu))
    else:
        out.append(diversity_cp(c.R, c.M, c.N, c.nu, c.L_d))
        if c.M == 1:
            out.append(diversity_cp_simo(c.R, c.N, c.nu, c.L_d))
    return out
