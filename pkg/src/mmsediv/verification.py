"""Invariant suites run by ``mdl verify`` and by the test-suite.

Each suite draws its own random inputs from a seeded generator and returns
a :class:`SuiteResult`; a suite passes only with zero violations.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import receivers as rx
from .channels import (
    SystemConfig,
    cp_frequency_blocks,
    cp_matrix,
    dft_resampling_check,
    sample_isi,
    zp_matrix,
)
from .formulas import qip_bruteforce, qip_solve
from .numkernel import augmented_dft, sturmian_check
from .simkit import sandwich_check

__all__ = [
    "SuiteResult",
    "SANDWICH_CONFIGS",
    "suite_sandwich",
    "suite_sturmian",
    "suite_cp_diagonalization",
    "suite_zp_blocks",
    "suite_qip",
    "suite_dft_resampling",
    "suite_mmse_vs_zf",
    "run_all",
]

MATRIX_TOL = 1e-10

SANDWICH_CONFIGS = (
    dict(M=2, N=2),
    dict(M=2, N=3),
    dict(M=3, N=2),
    dict(M=2, N=4, K=2, scheme="mac"),
)
SANDWICH_RATES = (1.0, 2.5, 4.0, 8.0)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    checked: int
    violations: int
    detail: Optional[str] = None

    def to_dict(self):
        return asdict(self)


def _result(name, checked, failures):
    detail = failures[0] if failures else None
    return SuiteResult(name, not failures, checked, len(failures), detail)


def suite_sandwich(trials=10_000, seed=1, configs=SANDWICH_CONFIGS, rates=SANDWICH_RATES):
    """Per-draw Jensen implications for each configuration and rate."""
    failures = []
    checked = 0
    for i, base in enumerate(configs):
        for j, R in enumerate(rates):
            cfg = SystemConfig(R=float(R), **base)
            rep = sandwich_check(cfg, trials, seed + 1000 * i + j)
            checked += rep.checks
            if not rep.passed:
                failures.append(
                    f"{base} R={R}: {rep.violations} violations, first seed "
                    f"{rep.first_violation_seed} at {rep.first_violation_snr_db} dB"
                )
    return _result("sandwich", checked, failures)


def suite_sturmian(count=1000, max_dim=8, seed=2):
    """Interlacing along nested principal submatrices of random Gram matrices."""
    rng = np.random.default_rng(seed)
    failures = []
    for t in range(count):
        n = int(rng.integers(2, max_dim + 1))
        rows = int(rng.integers(1, max_dim + 1))
        z = rng.standard_normal((rows, n, 2))
        H = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
        rep = sturmian_check(H.conj().T @ H, n - 1)
        if not rep.passed:
            failures.append(f"draw {t} ({rows}x{n}): {rep.first_violation}")
    return _result("sturmian", count, failures)


def _random_block_params(rng):
    M = int(rng.integers(1, 4))
    N = int(rng.integers(1, 4))
    nu = int(rng.integers(0, 3))
    L_d = int(rng.integers(nu + 1, nu + 5))
    return M, N, nu, L_d


def suite_cp_diagonalization(count=1000, seed=3):
    """Block-circulant factorization ``H_eq = Q_Rx^H Lambda Q_Tx`` and its spectrum."""
    rng = np.random.default_rng(seed)
    failures = []
    for t in range(count):
        M, N, nu, L_d = _random_block_params(rng)
        taps = np.stack(sample_isi(M, N, nu, rng))
        H = cp_matrix(taps, L_d)
        B = cp_frequency_blocks(taps, L_d)
        Lam = np.zeros((N * L_d, M * L_d), dtype=complex)
        for k in range(L_d):
            Lam[k * N:(k + 1) * N, k * M:(k + 1) * M] = B[k]
        rebuilt = augmented_dft(L_d, N).conj().T @ Lam @ augmented_dft(L_d, M)
        err = np.linalg.norm(H - rebuilt)
        ev_full = np.sort(np.linalg.eigvalsh(H.conj().T @ H))
        ev_bins = np.sort(np.concatenate([np.linalg.eigvalsh(b.conj().T @ b) for b in B]))
        spec_err = np.max(np.abs(ev_full - ev_bins)) / max(1.0, ev_full[-1])
        if err > MATRIX_TOL or spec_err > MATRIX_TOL:
            failures.append(
                f"draw {t} (M={M}, N={N}, nu={nu}, L_d={L_d}): "
                f"factorization error {err:.3g}, spectrum error {spec_err:.3g}"
            )
    return _result("cp_diagonalization", count, failures)


def suite_zp_blocks(count=1000, seed=4):
    """Every diagonal ``M x M`` block of the ZP Gram matrix equals ``sum_i H_i^H H_i``."""
    rng = np.random.default_rng(seed)
    failures = []
    for t in range(count):
        M, N, nu, L_d = _random_block_params(rng)
        taps = np.stack(sample_isi(M, N, nu, rng))
        H = zp_matrix(taps, L_d)
        G = H.conj().T @ H
        D = np.einsum("inm,ink->mk", taps.conj(), taps)
        worst = max(
            np.linalg.norm(G[j * M:(j + 1) * M, j * M:(j + 1) * M] - D) for j in range(L_d)
        )
        if worst > MATRIX_TOL:
            failures.append(f"draw {t} (M={M}, N={N}, nu={nu}, L_d={L_d}): error {worst:.3g}")
    return _result("zp_blocks", count, failures)


def suite_qip(max_omega=12, max_ell=6):
    """Closed-form QIP allocation against exhaustive search."""
    failures = []
    checked = 0
    for ell in range(1, max_ell + 1):
        for omega in range(max_omega + 1):
            fast = qip_solve(omega, ell)
            slow = qip_bruteforce(omega, ell)
            checked += 1
            if fast.objective != slow.objective or sorted(fast.allocation) != sorted(slow.allocation):
                failures.append(f"Omega={omega}, ell={ell}: {fast} vs {slow}")
    return _result("qip", checked, failures)


def suite_dft_resampling(draws=100, seed=5, pairs=((2, 4), (3, 9), (4, 8)), max_n=2):
    """Coarse-grid frequency samples are a decimation of fine-grid samples."""
    rng = np.random.default_rng(seed)
    failures = []
    checked = 0
    for L1, L2 in pairs:
        for N in range(1, max_n + 1):
            for _ in range(draws):
                nu = int(rng.integers(0, L1))
                taps = sample_isi(1, N, nu, rng)
                rep = dft_resampling_check(taps, L1, L2, MATRIX_TOL)
                checked += 1
                if not rep.passed:
                    failures.append(f"L1={L1}, L2={L2}, N={N}, nu={nu}: error {rep.max_error:.3g}")
    return _result("dft_resampling", checked, failures)


def suite_mmse_vs_zf(count=1000, seed=6, rho_db=(0.0, 10.0, 20.0, 30.0)):
    """MMSE output SINR dominates zero forcing entrywise on full-rank channels."""
    rng = np.random.default_rng(seed)
    failures = []
    checked = 0
    for t in range(count):
        M = int(rng.integers(1, 5))
        N = int(rng.integers(M, 7))
        z = rng.standard_normal((N, M, 2))
        H = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
        for snr in rho_db:
            rho = 10.0 ** (snr / 10.0)
            g_mmse = rx.mmse_sinr(H, rho)
            g_zf = rx.zf_sinr(H, rho)
            checked += 1
            if np.any(g_mmse < g_zf * (1 - 1e-9)):
                failures.append(f"draw {t} ({N}x{M}) at {snr} dB: {g_mmse} < {g_zf}")
    return _result("mmse_vs_zf", checked, failures)


def run_all(sandwich_trials=10_000, config=None, seed=0):
    """Run every suite; with a flat or MAC ``config`` the sandwich also covers it."""
    configs = SANDWICH_CONFIGS
    if config is not None and config.scheme in ("flat", "mac"):
        extra = dict(M=config.M, N=config.N)
        if config.scheme == "mac":
            extra.update(K=config.K, scheme="mac")
        if extra not in configs:
            configs = configs + (extra,)
    return [
        suite_sandwich(sandwich_trials, seed + 1, configs),
        suite_sturmian(seed=seed + 2),
        suite_cp_diagonalization(seed=seed + 3),
        suite_zp_blocks(seed=seed + 4),
        suite_qip(),
        suite_dft_resampling(seed=seed + 5),
        suite_mmse_vs_zf(seed=seed + 6),
    ]
