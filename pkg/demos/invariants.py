"""Run the structural property suites at a reduced size.

Run with ``python demos/invariants.py``. Each suite checks an identity
or inequality on random draws and reports how many cases it examined.
"""

from mmsediv import verification


def main():
    for res in verification.run_all(sandwich_trials=2000):
        status = "ok" if res.passed else "VIOLATED"
        print(f"{res.name:<20} {status:<9} checked={res.checked:<7} violations={res.violations}")
        if res.detail:
            print(f"    {res.detail}")


if __name__ == "__main__":
    main()
