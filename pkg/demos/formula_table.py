"""Closed-form diversity orders across rates for a few antenna setups.

Run with ``python demos/formula_table.py``. Prints the flat-fading MMSE
diversity, the rate thresholds where it drops, and the block-scheme
predictions for a short ISI channel.
"""

from mmsediv.formulas import (
    diversity_cp,
    diversity_cp_simo,
    diversity_flat,
    diversity_zf,
    diversity_zp_siso,
    flat_rate_thresholds,
)


def main():
    print("flat fading, joint encoding, MMSE receiver")
    for M, N in [(2, 2), (2, 3), (3, 3)]:
        rates = [0.5, 1, 2, 3, 4, 6, 10]
        row = "  ".join(f"R={R:<4g} d={diversity_flat(R, M, N).value}" for R in rates)
        print(f"  {M}x{N}: {row}  (ZF: {diversity_zf(M, N).value})")
        for R, before, after in flat_rate_thresholds(M, N):
            print(f"        drops {before} -> {after} at R = {R:.5f}")

    print("\nblock transmission, nu=1")
    print(f"  SISO zero padding, any rate: d = {diversity_zp_siso(1).value}")
    for R in (0.5, 1, 2, 3):
        cp = diversity_cp_simo(R, 1, 1, 4)
        simo = diversity_cp_simo(R, 2, 1, 2)
        mimo = diversity_cp(R, 2, 2, 1, 2)
        print(f"  R={R:<4g} SISO-CP L_d=4: {cp.value}   SIMO-CP N=2 L_d=2: {simo.value}"
              f"   2x2 CP L_d=2: {mimo.value} ({mimo.kind})")


if __name__ == "__main__":
    main()
