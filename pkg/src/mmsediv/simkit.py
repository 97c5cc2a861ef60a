"""Deterministic Monte Carlo engine for outage and symbol-error sweeps.

Reproducibility contract
------------------------
Every trial owns a 64-bit seed derived statelessly from the master seed,
the SNR point index and the trial index (:func:`trial_seed`). All random
numbers a trial consumes come from the SplitMix64 sequence started at that
seed, so a trial's outcome never depends on which worker ran it, on the
batch it was grouped into, or on execution order. Trials are batched in
fixed, globally aligned chunks and hit counts are integer sums, so a sweep
is bit-identical under any worker count.
"""

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import binomtest

from . import receivers as rx
from .channels import (
    ChannelRealization,
    ConfigError,
    SystemConfig,
    effective_channels,
    normals_per_trial,
)

__all__ = [
    "ENGINE_VERSION",
    "CSV_COLUMNS",
    "CHUNK",
    "trial_seed",
    "trial_seeds",
    "trial_words",
    "trial_normals",
    "wilson_interval",
    "SweepPoint",
    "SweepResult",
    "SandwichReport",
    "default_workers",
    "outage_sweep",
    "ser_sweep",
    "sandwich_check",
    "implication_violations",
    "replay_channel",
]

ENGINE_VERSION = "mmsediv-sim/1"
CSV_COLUMNS = ("snr_db", "trials", "hits", "p_hat", "ci_low", "ci_high")
CHUNK = 1 << 16
WILSON_LEVEL = 0.95

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_U64 = np.uint64


# ---------------------------------------------------------------------------
# counter-based seeding
# ---------------------------------------------------------------------------

def _mix(z):
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z):
    z = (z ^ (z >> _U64(30))) * _U64(_M1)
    z = (z ^ (z >> _U64(27))) * _U64(_M2)
    return z ^ (z >> _U64(31))


def trial_seed(master, index):
    """SplitMix64 finalizer applied to ``master XOR golden * index`` (mod 2^64)."""
    return _mix((int(master) & _MASK) ^ ((_GOLDEN * int(index)) & _MASK))


def trial_seeds(master, indices):
    """Vectorized :func:`trial_seed` over an array of indices."""
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_array(_U64(int(master) & _MASK) ^ (idx * _U64(_GOLDEN)))


def trial_words(seeds, count):
    """First ``count`` SplitMix64 outputs of each seed, shape ``(n, count)``."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    steps = (np.arange(1, count + 1, dtype=np.uint64) * _U64(_GOLDEN))
    with np.errstate(over="ignore"):
        return _mix_array(seeds[:, None] + steps[None, :])


def _normals_from_words(words):
    u = (words >> _U64(11)).astype(np.float64) * (1.0 / (1 << 53))
    u1 = 1.0 - u[:, 0::2]
    u2 = u[:, 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(u.shape, dtype=float)
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return z


def trial_normals(seeds, count):
    """``count`` standard normals per seed via Box-Muller on the trial stream."""
    words = trial_words(seeds, count + (count & 1))
    return _normals_from_words(words)[:, :count]


def _point_seed(master, point):
    return trial_seed(master, point)


def default_workers():
    """Worker count from ``MDL_THREADS``, else 1."""
    env = os.environ.get("MDL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

def wilson_interval(hits, n):
    """95% Wilson score interval, clamped so it always contains ``hits/n``."""
    if n <= 0:
        raise ValueError("need at least one trial")
    ci = binomtest(int(hits), int(n)).proportion_ci(WILSON_LEVEL, method="wilson")
    p = hits / n
    low = 0.0 if hits == 0 else min(float(ci.low), p)
    high = 1.0 if hits == n else max(float(ci.high), p)
    return low, high


@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    rho: float
    trials: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    streams: int = 1

    @classmethod
    def from_counts(cls, snr_db, trials, hits, streams=1):
        n = trials * streams
        low, high = wilson_interval(hits, n)
        return cls(float(snr_db), 10.0 ** (snr_db / 10.0), int(trials), int(hits),
                   hits / n, low, high, int(streams))


@dataclass
class SweepResult:
    config: SystemConfig
    points: List[SweepPoint]
    master_seed: int
    kind: str = "outage"
    engine: str = ENGINE_VERSION
    meta: dict = field(default_factory=dict)

    def snr_db(self):
        return np.array([p.snr_db for p in self.points])

    def p_hat(self):
        return np.array([p.p_hat for p in self.points])

    def monotonicity_violations(self):
        """Indices ``i`` where point ``i+1`` sits significantly above point ``i``."""
        pts = self.points
        return [i for i in range(len(pts) - 1) if pts[i + 1].ci_low > pts[i].ci_high]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            w.writerow([repr(p.snr_db), p.trials * p.streams, p.hits,
                        repr(p.p_hat), repr(p.ci_low), repr(p.ci_high)])
        return buf.getvalue()

    def to_dict(self):
        return {
            "engine": self.engine,
            "kind": self.kind,
            "master_seed": int(self.master_seed),
            "config": self.config.to_dict(),
            "meta": self.meta,
            "points": [asdict(p) for p in self.points],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(
            SystemConfig.from_mapping(data["config"]),
            [SweepPoint(**p) for p in data["points"]],
            int(data["master_seed"]),
            data.get("kind", "outage"),
            data.get("engine", ENGINE_VERSION),
            data.get("meta", {}),
        )

    @classmethod
    def from_csv(cls, text, config, master_seed=0, kind="outage"):
        """Rebuild a result from the fixed-column CSV (streams folded into trials)."""
        rows = list(csv.DictReader(io.StringIO(text)))
        points = []
        for r in rows:
            snr = float(r["snr_db"])
            points.append(SweepPoint(snr, 10.0 ** (snr / 10.0), int(r["trials"]),
                                     int(r["hits"]), float(r["p_hat"]),
                                     float(r["ci_low"]), float(r["ci_high"])))
        return cls(config, points, master_seed, kind)

    def write(self, directory, stem):
        """Write ``<stem>.csv`` and ``<stem>.json`` atomically."""
        os.makedirs(directory, exist_ok=True)
        paths = []
        for ext, text in (("csv", self.to_csv()), ("json", self.to_json())):
            path = os.path.join(directory, f"{stem}.{ext}")
            atomic_write(path, text)
            paths.append(path)
        return paths


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# per-trial kernels
# ---------------------------------------------------------------------------

EVENTS = ("outage", "jensen_upper", "jensen_lower")


def _check_outage_config(config, event):
    c = config
    if event not in EVENTS:
        raise ConfigError("event", f"must be one of {EVENTS}")
    rows, cols = c.shape
    if c.receiver == "zf" and rows < cols:
        raise ConfigError("receiver", "zero forcing needs at least as many rows as streams")
    if c.receiver == "ml" and (c.scheme == "mac" or c.encoding == "separate"):
        raise ConfigError("receiver", "ML outage is defined for joint single-user links only")
    if event != "outage" and (c.scheme not in ("flat", "mac") or c.receiver != "mmse"):
        raise ConfigError("event", "Jensen events are defined for MMSE on flat or MAC channels")


def _user_slice(config):
    if config.scheme == "mac":
        u = config.user
        return slice((u - 1) * config.M, u * config.M)
    return slice(None)


def _outage_from_channels(config, H, rho, event="outage"):
    c = config
    if event == "jensen_upper":
        eigs = rx.gram_eigenvalues(H)
        return rx.jensen_upper_event(eigs, rho, c.R, c.M, c.N, streams=c.streams)
    if event == "jensen_lower":
        return rx.jensen_lower_event(H, rho, c.R, c.streams)
    if c.receiver == "ml":
        return rx.ml_rate(H, rho) / c.L_d < c.R
    rates = rx.stream_rates(H, rho, c.receiver)[..., _user_slice(c)]
    if c.encoding == "separate":
        return rx.separate_outage(rates, c.R, c.M)
    return rates.sum(axis=-1) / c.L_d < c.R


def _outage_chunk(config, rho, seeds, event):
    z = trial_normals(seeds, normals_per_trial(config))
    H = effective_channels(config, z)
    return int(np.count_nonzero(_outage_from_channels(config, H, rho, event)))


def _ser_chunk(config, rho, seeds):
    M, N = config.M, config.N
    nch = normals_per_trial(config)
    ncount = nch + 2 * N
    ncount += ncount & 1
    words = trial_words(seeds, ncount + M)
    z = _normals_from_words(words[:, :ncount])
    H = effective_channels(config, z[:, :nch])
    noise = (z[:, nch:nch + 2 * N:2] + 1j * z[:, nch + 1:nch + 2 * N:2]) * np.sqrt(0.5)
    idx = (words[:, ncount:] >> _U64(62)).astype(np.intp)
    return int(np.count_nonzero(rx._detect_errors(H, rho, idx, noise)))


def _chunks(start, stop):
    c = start // CHUNK
    while c * CHUNK < stop:
        lo = max(start, c * CHUNK)
        hi = min(stop, (c + 1) * CHUNK)
        if lo < hi:
            yield lo, hi
        c += 1


def _run_range(kernel, point_seed, start, stop, pool):
    def job(bounds):
        lo, hi = bounds
        return kernel(trial_seeds(point_seed, np.arange(lo, hi, dtype=np.uint64)))

    ranges = list(_chunks(start, stop))
    if pool is None:
        return sum(job(r) for r in ranges)
    return sum(pool.map(job, ranges))


def _next_target(total, hits, min_hits, max_trials):
    if hits == 0:
        want = 2 * total
    else:
        want = math.ceil(total * min_hits * 1.25 / hits)
    return min(max_trials, max(want, total + CHUNK))


def _sweep(config, snr_grid_db, trials, master_seed, workers, min_hits, max_trials, make_kernel):
    if trials < 1:
        raise ConfigError("trials", "must be at least 1")
    grid = [float(s) for s in snr_grid_db]
    if not grid:
        raise ConfigError("snr", "SNR grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("snr", "SNR grid must be strictly increasing")
    max_trials = trials if max_trials is None else max(int(max_trials), trials)
    workers = default_workers() if workers is None else max(1, int(workers))
    counts = []
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for p, snr in enumerate(grid):
            rho = 10.0 ** (snr / 10.0)
            kernel = make_kernel(rho)
            seed = _point_seed(master_seed, p)
            total = trials
            hits = _run_range(kernel, seed, 0, total, pool)
            while min_hits and hits < min_hits and total < max_trials:
                target = _next_target(total, hits, min_hits, max_trials)
                hits += _run_range(kernel, seed, total, target, pool)
                total = target
            counts.append((snr, total, hits))
    finally:
        if pool is not None:
            pool.shutdown()
    return counts


def outage_sweep(config, snr_grid_db, trials_per_point, master_seed, workers=None,
                 min_hits=None, max_trials=None, event="outage"):
    """Empirical outage probability over an SNR grid.

    Parameters
    ----------
    config : SystemConfig
    snr_grid_db : sequence of float
        Strictly increasing SNR points in dB; ``rho = 10^(snr/10)``.
    trials_per_point : int
        Channel draws per point.
    master_seed : int
        64-bit master seed; fully determines the result.
    workers : int, optional
        Thread count; defaults to ``MDL_THREADS`` or 1. Does not affect output.
    min_hits, max_trials : int, optional
        Early-stop control. When ``min_hits`` is set, a point keeps drawing
        past ``trials_per_point`` until it has that many hits or reaches
        ``max_trials``.
    event : {"outage", "jensen_upper", "jensen_lower"}
        Count the Jensen bound events instead of outage itself.
    """
    if not isinstance(config, SystemConfig):
        raise ConfigError("config", "expected a SystemConfig")
    config.validate()
    _check_outage_config(config, event)

    def make_kernel(rho):
        return lambda seeds: _outage_chunk(config, rho, seeds, event)

    counts = _sweep(config, snr_grid_db, trials_per_point, master_seed, workers,
                    min_hits, max_trials, make_kernel)
    points = [SweepPoint.from_counts(s, n, h) for s, n, h in counts]
    kind = "outage" if event == "outage" else event
    return SweepResult(config, points, int(master_seed), kind)


def ser_sweep(config, snr_grid_db, symbols_per_point, master_seed, workers=None,
              min_hits=None, max_trials=None):
    """Uncoded QPSK symbol error rate with MMSE equalization and slicing.

    Each trial is one channel draw carrying one QPSK vector of ``M``
    symbols; ``hits`` counts symbol errors out of ``trials * M``.
    """
    if not isinstance(config, SystemConfig):
        raise ConfigError("config", "expected a SystemConfig")
    config.validate()
    if config.scheme != "flat":
        raise ConfigError("scheme", "SER sweeps are defined for flat channels")
    M = config.M
    channel_uses = max(1, math.ceil(symbols_per_point / M))
    cap = None if max_trials is None else max(1, math.ceil(max_trials / M))

    def make_kernel(rho):
        return lambda seeds: _ser_chunk(config, rho, seeds)

    counts = _sweep(config, snr_grid_db, channel_uses, master_seed, workers,
                    min_hits, cap, make_kernel)
    points = [SweepPoint.from_counts(s, n, h, streams=M) for s, n, h in counts]
    return SweepResult(config, points, int(master_seed), "ser")


# ---------------------------------------------------------------------------
# per-realization bound sandwich
# ---------------------------------------------------------------------------

def implication_violations(lower, outage, upper):
    """Draws breaking ``lower => outage => upper``."""
    lower = np.asarray(lower, dtype=bool)
    outage = np.asarray(outage, dtype=bool)
    upper = np.asarray(upper, dtype=bool)
    return (lower & ~outage) | (outage & ~upper)


@dataclass
class SandwichReport:
    trials: int
    snr_grid_db: List[float]
    checks: int
    violations: int
    counts: dict
    first_violation_seed: Optional[int] = None
    first_violation_snr_db: Optional[float] = None

    @property
    def passed(self):
        return self.violations == 0


def replay_channel(config, seed):
    """Regenerate the effective channel of a single trial from its seed."""
    seeds = np.array([seed], dtype=np.uint64)
    H = effective_channels(config, trial_normals(seeds, normals_per_trial(config)))[0]
    return ChannelRealization(H, config.scheme, seed=int(seed))


def sandwich_check(config, trials, master_seed, snr_grid_db=(0.0, 10.0, 20.0, 30.0)):
    """Verify per draw that the lower Jensen event implies outage and outage
    implies the upper Jensen event, at every SNR of ``snr_grid_db``.

    For a MAC the tracked user's outage is sandwiched between the all-stream
    lower event and the trace event with ``K M`` streams.
    """
    config.validate()
    if config.scheme not in ("flat", "mac"):
        raise ConfigError("scheme", "sandwich check is defined for flat and MAC channels")
    if config.receiver != "mmse" or config.encoding != "joint":
        raise ConfigError("receiver", "sandwich check needs joint encoding with MMSE")
    seed0 = _point_seed(master_seed, 0)
    seeds = trial_seeds(seed0, np.arange(trials, dtype=np.uint64))
    counts = {"lower": 0, "outage": 0, "upper": 0}
    violations = 0
    first_seed = first_snr = None
    for lo, hi in _chunks(0, trials):
        s = seeds[lo:hi]
        H = effective_channels(config, trial_normals(s, normals_per_trial(config)))
        eigs = rx.gram_eigenvalues(H)
        for snr in snr_grid_db:
            rho = 10.0 ** (snr / 10.0)
            out = _outage_from_channels(config, H, rho)
            low = rx.jensen_lower_event(H, rho, config.R, config.streams)
            up = rx.jensen_upper_event(eigs, rho, config.R, config.M, config.N,
                                       streams=config.streams)
            bad = implication_violations(low, out, up)
            counts["lower"] += int(low.sum())
            counts["outage"] += int(out.sum())
            counts["upper"] += int(up.sum())
            nbad = int(bad.sum())
            if nbad and first_seed is None:
                first_seed = int(s[np.argmax(bad)])
                first_snr = float(snr)
            violations += nbad
    return SandwichReport(trials, [float(s) for s in snr_grid_db],
                          trials * len(snr_grid_db), violations, counts,
                          first_seed, first_snr)
