"""Diversity-slope estimation on log-log outage curves."""

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "HIT_FLOOR",
    "InsufficientDataError",
    "SlopeEstimate",
    "Verdict",
    "estimate_slope",
    "fit_power_law",
    "local_slope",
    "compare",
]

HIT_FLOOR = 100


class InsufficientDataError(ValueError):
    """Too few sweep points qualify for a slope fit."""


@dataclass(frozen=True)
class SlopeEstimate:
    """Negative log-log slope of ``p_hat`` against ``rho``.

    Attributes
    ----------
    d_hat : float
        Estimated diversity order ``-dlog10(p)/dlog10(rho)``.
    stderr : float
        OLS standard error of the slope (0 with exactly two points).
    window : tuple of float
        ``(snr_lo_db, snr_hi_db)`` as requested.
    points_used : int
    """

    d_hat: float
    stderr: float
    window: Tuple[float, float]
    points_used: int


def fit_power_law(rho, p, weights=None):
    """Fit ``log10 p = a - d log10 rho``; returns ``(d, stderr)``.

    Ordinary least squares by default, weighted least squares when
    ``weights`` is given. The standard error comes from the fitted
    residuals, so a noiseless power law yields exactly zero.
    """
    x = np.log10(np.asarray(rho, dtype=float))
    y = np.log10(np.asarray(p, dtype=float))
    if x.size < 2:
        raise InsufficientDataError("need at least two points")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    dof = x.size - 2
    if dof == 0:
        return float(-coef[1]), 0.0
    resid = (y - X @ coef) * sw
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv((X * w[:, None]).T @ X)
    return float(-coef[1]), float(math.sqrt(max(cov[1, 1], 0.0)))


def estimate_slope(sweep, window, hit_floor=HIT_FLOOR, weighted=False):
    """Estimate diversity from the sweep points inside ``window``.

    Parameters
    ----------
    sweep : SweepResult
    window : (float, float)
        Inclusive SNR range in dB.
    hit_floor : int
        Points with fewer hits are excluded.
    weighted : bool
        Weight points by hit count (inverse variance of ``log p_hat``).

    Raises
    ------
    InsufficientDataError
        Fewer than two points in the window meet the hit floor.
    """
    lo, hi = float(window[0]), float(window[1])
    if hi < lo:
        raise ValueError("window must be (low, high)")
    pts = [p for p in sweep.points if lo <= p.snr_db <= hi and p.hits >= hit_floor]
    if len(pts) < 2:
        raise InsufficientDataError(
            f"need at least 2 points in [{lo}, {hi}] dB with hits >= {hit_floor} "
            f"(hit floor); found {len(pts)}"
        )
    rho = [p.rho for p in pts]
    phat = [p.p_hat for p in pts]
    weights = [p.hits for p in pts] if weighted else None
    d, se = fit_power_law(rho, phat, weights)
    return SlopeEstimate(d, se, (lo, hi), len(pts))


def local_slope(sweep, hit_floor=1):
    """Two-point slope between the last two points with at least ``hit_floor`` hits.

    Returns None when fewer than two points qualify.
    """
    pts = [p for p in sweep.points if p.hits >= hit_floor]
    if len(pts) < 2:
        return None
    a, b = pts[-2], pts[-1]
    return -(math.log10(b.p_hat) - math.log10(a.p_hat)) / (math.log10(b.rho) - math.log10(a.rho))


@dataclass(frozen=True)
class Verdict:
    d_hat: float
    stderr: float
    predicted: float
    tolerance: float
    delta: float
    window: Tuple[float, float]
    passed: bool
    formula: Optional[str] = None

    def to_dict(self):
        out = asdict(self)
        out["pass"] = out.pop("passed")
        out["window"] = list(self.window)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def compare(estimate, predicted, tol):
    """Pass iff ``|d_hat - predicted| <= tol``.

    ``predicted`` may be a number or a :class:`~mmsediv.formulas.DiversityValue`.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    formula = getattr(predicted, "formula", None)
    target = float(getattr(predicted, "value", predicted))
    delta = abs(estimate.d_hat - target)
    return Verdict(estimate.d_hat, estimate.stderr, target, float(tol), delta,
                   tuple(estimate.window), bool(delta <= tol), formula)
