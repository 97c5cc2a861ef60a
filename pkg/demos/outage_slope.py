"""Simulate an outage curve and read off its diversity order.

Run with ``python demos/outage_slope.py``. Takes about half a minute on
one core. The 2x2 link at 10 bps/Hz should show a slope close to 1,
and a scalar Rayleigh link is included as a sanity reference.
"""

from mmsediv import SystemConfig, compare, estimate_slope, outage_sweep
from mmsediv.formulas import formulas_for


def show(config, grid, window, trials):
    sweep = outage_sweep(config, grid, trials, master_seed=7, min_hits=200, max_trials=20 * trials)
    print(f"\n{config.M}x{config.N} R={config.R} ({config.receiver}, {config.encoding})")
    for p in sweep.points:
        print(f"  {p.snr_db:5.1f} dB  p={p.p_hat:.3e}  [{p.ci_low:.2e}, {p.ci_high:.2e}]  n={p.trials}")
    predicted = formulas_for(config)[0]
    verdict = compare(estimate_slope(sweep, window), predicted, 0.3)
    print(f"  d_hat={verdict.d_hat:.2f} +/- {verdict.stderr:.2f}, predicted {verdict.predicted:g}:"
          f" {'pass' if verdict.passed else 'fail'}")


def main():
    show(SystemConfig(M=1, N=1, R=1.0), [10, 15, 20, 25, 30], (10, 30), 200_000)
    show(SystemConfig(M=2, N=2, R=10.0), [30, 34, 38, 42], (30, 42), 1_000_000)


if __name__ == "__main__":
    main()
