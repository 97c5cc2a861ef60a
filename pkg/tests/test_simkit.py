"""Tests for seeding, sweeps, confidence intervals and the bound sandwich."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from mmsediv import receivers as rx
from mmsediv.channels import ConfigError, SystemConfig, effective_channels, normals_per_trial
from mmsediv.simkit import (
    CSV_COLUMNS,
    SweepPoint,
    SweepResult,
    default_workers,
    implication_violations,
    outage_sweep,
    replay_channel,
    sandwich_check,
    ser_sweep,
    trial_normals,
    trial_seed,
    trial_seeds,
    trial_words,
    wilson_interval,
)

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Reference sequential generator."""

    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + GOLDEN) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)


def _finalizer(z):
    gen = SplitMix64((z - GOLDEN) & MASK)
    return gen.next()


class TestSeeding:
    def test_deterministic(self):
        assert trial_seed(12345, 678) == trial_seed(12345, 678)

    def test_matches_reference_finalizer(self):
        for master, index in [(0, 0), (1, 2), (MASK, 7), (2**63 + 5, 10**12)]:
            expected = _finalizer(master ^ ((GOLDEN * index) & MASK))
            assert trial_seed(master, index) == expected

    def test_vector_matches_scalar(self):
        idx = np.array([0, 1, 2, 1000, 2**40], dtype=np.uint64)
        vec = trial_seeds(99, idx)
        assert [int(v) for v in vec] == [trial_seed(99, int(i)) for i in idx]

    def test_no_collisions(self):
        seeds = trial_seeds(2024, np.arange(1_000_000, dtype=np.uint64))
        assert np.unique(seeds).size == seeds.size

    def test_avalanche(self):
        rng = np.random.default_rng(0)
        flips = []
        for _ in range(10_000):
            master = int(rng.integers(0, 2**63)) * 2 + int(rng.integers(0, 2))
            index = int(rng.integers(0, 2**62))
            bit = int(rng.integers(0, 64))
            a = trial_seed(master, index)
            b = trial_seed(master ^ (1 << bit), index)
            flips.append(bin(a ^ b).count("1"))
        assert np.mean(flips) >= 20

    def test_stream_matches_sequential_generator(self):
        seeds = trial_seeds(5, np.arange(4, dtype=np.uint64))
        words = trial_words(seeds, 6)
        for s, row in zip(seeds, words):
            gen = SplitMix64(int(s))
            assert [int(w) for w in row] == [gen.next() for _ in range(6)]

    def test_stream_prefix_stable(self):
        seeds = trial_seeds(5, np.arange(10, dtype=np.uint64))
        np.testing.assert_array_equal(trial_normals(seeds, 8)[:, :3], trial_normals(seeds, 3))

    def test_normal_moments(self):
        z = trial_normals(trial_seeds(11, np.arange(100_000, dtype=np.uint64)), 4)
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1) < 0.01
        assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 0.01
        assert abs(np.mean(z ** 4) - 3) < 0.05

    def test_default_workers_env(self, monkeypatch):
        monkeypatch.setenv("MDL_THREADS", "3")
        assert default_workers() == 3
        monkeypatch.delenv("MDL_THREADS")
        assert default_workers() == 1


class TestWilson:
    def test_zero_hits(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and hi > 0

    def test_all_hits(self):
        lo, hi = wilson_interval(100, 100)
        assert hi == 1.0 and lo < 1

    def test_hand_formula(self):
        k, n, z = 37, 1000, 1.96
        p = k / n
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
        lo, hi = wilson_interval(k, n)
        assert lo == pytest.approx(centre - half, abs=1e-4)
        assert hi == pytest.approx(centre + half, abs=1e-4)

    @settings(max_examples=200, deadline=None)
    @given(n=st.integers(1, 10**9), frac=st.floats(0, 1))
    def test_contains_estimate(self, n, frac):
        k = int(frac * n)
        lo, hi = wilson_interval(k, n)
        assert 0 <= lo <= k / n <= hi <= 1


class TestOutageSweep:
    def test_scalar_rayleigh(self):
        res = outage_sweep(SystemConfig(M=1, N=1, R=1.0), [10.0], 1_000_000, 1)
        p = res.points[0]
        assert p.ci_low <= 1 - math.exp(-0.1) <= p.ci_high

    def test_vanishing_rate(self):
        res = outage_sweep(SystemConfig(M=2, N=2, R=1e-6), [0.0, 10.0, 20.0], 10_000, 2)
        assert all(p.hits == 0 for p in res.points)

    def test_worker_invariance(self):
        cfg = SystemConfig(M=2, N=2, R=4.0)
        kw = dict(min_hits=500, max_trials=400_000)
        a = outage_sweep(cfg, [10.0, 20.0, 30.0], 70_000, 3, workers=1, **kw)
        b = outage_sweep(cfg, [10.0, 20.0, 30.0], 70_000, 3, workers=8, **kw)
        assert a.to_csv() == b.to_csv()

    def test_early_stop_reaches_floor(self):
        res = outage_sweep(SystemConfig(M=1, N=1, R=1.0), [20.0, 30.0], 1000, 4,
                           min_hits=200, max_trials=10**6)
        assert all(p.hits >= 200 for p in res.points)
        assert res.points[1].trials > res.points[0].trials

    def test_early_stop_cap(self):
        res = outage_sweep(SystemConfig(M=1, N=1, R=1.0), [60.0], 1000, 4,
                           min_hits=200, max_trials=5000)
        assert res.points[0].trials == 5000

    def test_sorted_ascending(self):
        with pytest.raises(ConfigError):
            outage_sweep(SystemConfig(M=1, N=1, R=1.0), [10.0, 0.0], 10, 0)

    def test_zero_trials(self):
        with pytest.raises(ConfigError):
            outage_sweep(SystemConfig(M=1, N=1, R=1.0), [0.0], 0, 0)

    def test_zf_wide_rejected(self):
        with pytest.raises(ConfigError) as exc:
            outage_sweep(SystemConfig(M=3, N=2, R=1.0, receiver="zf"), [0.0], 10, 0)
        assert exc.value.field == "receiver"

    def test_jensen_event_needs_flat(self):
        cfg = SystemConfig(M=1, N=1, R=1.0, scheme="cp", nu=1, L_d=2)
        with pytest.raises(ConfigError):
            outage_sweep(cfg, [0.0], 10, 0, event="jensen_upper")

    def test_receiver_ordering_per_draw(self):
        grid = [0.0, 10.0, 20.0]
        hits = {}
        for receiver in ("ml", "mmse", "zf"):
            cfg = SystemConfig(M=2, N=3, R=3.0, receiver=receiver)
            hits[receiver] = [p.hits for p in outage_sweep(cfg, grid, 50_000, 5).points]
        for i in range(len(grid)):
            assert hits["ml"][i] <= hits["mmse"][i] <= hits["zf"][i]

    def test_separate_dominates_joint(self):
        grid = [0.0, 10.0, 20.0]
        joint = outage_sweep(SystemConfig(M=2, N=2, R=3.0), grid, 50_000, 6)
        sep = outage_sweep(SystemConfig(M=2, N=2, R=3.0, encoding="separate"), grid, 50_000, 6)
        assert all(s.hits >= j.hits for s, j in zip(sep.points, joint.points))

    def test_jensen_event_ordering(self):
        grid = [0.0, 10.0, 20.0]
        cfg = SystemConfig(M=2, N=2, R=4.0)
        counts = {ev: [p.hits for p in outage_sweep(cfg, grid, 50_000, 7, event=ev).points]
                  for ev in ("jensen_lower", "outage", "jensen_upper")}
        for i in range(len(grid)):
            assert counts["jensen_lower"][i] <= counts["outage"][i] <= counts["jensen_upper"][i]

    def test_mac_users_symmetric(self):
        grid = [10.0]
        a = outage_sweep(SystemConfig(M=2, N=4, R=3.0, K=2, scheme="mac", user=1), grid, 100_000, 8)
        b = outage_sweep(SystemConfig(M=2, N=4, R=3.0, K=2, scheme="mac", user=2), grid, 100_000, 8)
        pa, pb = a.points[0], b.points[0]
        assert pa.ci_low <= pb.ci_high and pb.ci_low <= pa.ci_high

    def test_block_schemes_run(self):
        for scheme in ("zp", "cp"):
            cfg = SystemConfig(M=1, N=2, R=1.0, scheme=scheme, nu=1, L_d=3)
            res = outage_sweep(cfg, [0.0, 10.0], 10_000, 9)
            assert res.points[0].hits >= res.points[1].hits

    def test_monotone_on_shipped_sweep(self):
        res = outage_sweep(SystemConfig(M=2, N=2, R=4.0), list(range(0, 31, 3)), 20_000, 10)
        assert res.monotonicity_violations() == []

    def test_monotonicity_flag(self):
        cfg = SystemConfig(M=1, N=1, R=1.0)
        pts = [SweepPoint.from_counts(0.0, 10_000, 100), SweepPoint.from_counts(10.0, 10_000, 1000)]
        assert SweepResult(cfg, pts, 0).monotonicity_violations() == [0]

    def test_replay_channel(self):
        cfg = SystemConfig(M=2, N=3, R=1.0)
        seed = trial_seed(trial_seed(77, 0), 5)
        z = trial_normals(np.array([seed], dtype=np.uint64), normals_per_trial(cfg))
        np.testing.assert_array_equal(replay_channel(cfg, seed).matrix, effective_channels(cfg, z)[0])


class TestSerialization:
    @pytest.fixture
    def result(self):
        return outage_sweep(SystemConfig(M=2, N=2, R=4.0), [0.0, 5.0, 10.0], 5_000, 42)

    def test_csv_header(self, result):
        assert result.to_csv().splitlines()[0] == ",".join(CSV_COLUMNS)

    def test_csv_roundtrip(self, result):
        back = SweepResult.from_csv(result.to_csv(), result.config, 42)
        assert [(p.snr_db, p.trials, p.hits) for p in back.points] == \
               [(p.snr_db, p.trials, p.hits) for p in result.points]
        assert back.to_csv() == result.to_csv()

    def test_json_roundtrip(self, result):
        back = SweepResult.from_dict(json.loads(result.to_json()))
        assert back.master_seed == 42 and back.points == result.points
        assert back.config == result.config

    def test_write(self, result, tmp_path):
        csv_path, json_path = result.write(tmp_path, "run")
        assert open(csv_path).read() == result.to_csv()
        assert json.load(open(json_path))["master_seed"] == 42
        assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp")]


def _qpsk_rayleigh_ser(rho):
    def integrand(g):
        q = 0.5 * special.erfc(np.sqrt(rho * g / 2))
        return (2 * q - q * q) * np.exp(-g)
    return integrate.quad(integrand, 0, np.inf, limit=200)[0]


class TestSerSweep:
    def test_scalar_oracle(self):
        res = ser_sweep(SystemConfig(M=1, N=1, R=1.0), [10.0], 400_000, 3)
        p = res.points[0]
        assert p.ci_low <= _qpsk_rayleigh_ser(10.0) <= p.ci_high

    def test_counts_bounded(self):
        res = ser_sweep(SystemConfig(M=2, N=2, R=4.0), [0.0, 10.0], 10_000, 4)
        for p in res.points:
            assert p.streams == 2 and 0 <= p.hits <= p.trials * p.streams
            assert p.p_hat == p.hits / (p.trials * 2)

    def test_high_snr_no_errors(self):
        res = ser_sweep(SystemConfig(M=1, N=4, R=1.0), [60.0], 20_000, 5)
        assert res.points[0].hits == 0

    def test_rejects_block_scheme(self):
        with pytest.raises(ConfigError) as exc:
            ser_sweep(SystemConfig(M=1, N=1, R=1.0, scheme="cp", nu=1, L_d=2), [0.0], 10, 0)
        assert exc.value.field == "scheme"

    def test_worker_invariance(self):
        cfg = SystemConfig(M=2, N=2, R=4.0)
        a = ser_sweep(cfg, [10.0, 20.0], 150_000, 6, workers=1)
        b = ser_sweep(cfg, [10.0, 20.0], 150_000, 6, workers=8)
        assert a.to_csv() == b.to_csv()


class TestSandwich:
    @pytest.mark.parametrize("kwargs", [dict(M=2, N=2), dict(M=2, N=3), dict(M=3, N=2),
                                        dict(M=2, N=4, K=2, scheme="mac")])
    def test_no_violations(self, kwargs):
        rep = sandwich_check(SystemConfig(R=3.0, **kwargs), 10_000, 1)
        assert rep.passed and rep.first_violation_seed is None
        assert rep.counts["lower"] <= rep.counts["outage"] <= rep.counts["upper"]

    def test_single_antenna_equality(self):
        rep = sandwich_check(SystemConfig(M=1, N=2, R=2.0), 10_000, 2)
        assert rep.passed and rep.counts["lower"] == rep.counts["outage"]

    def test_rejects_block_scheme(self):
        with pytest.raises(ConfigError):
            sandwich_check(SystemConfig(M=1, N=1, R=1.0, scheme="zp", nu=1, L_d=2), 10, 0)

    def test_negative_control_eigenvalues(self):
        # large eigenvalues make the trace event false; claiming outage anyway must be caught
        eigs = np.array([[100.0, 100.0]])
        upper = rx.jensen_upper_event(eigs, 10.0, 2.0, 2, 2)
        assert not upper[0]
        bad = implication_violations([False], [True], upper)
        assert bad.tolist() == [True]

    def test_negative_control_lower(self):
        assert implication_violations([True], [False], [True]).tolist() == [True]
        assert implication_violations([False, True], [False, True], [False, True]).tolist() == [False, False]
