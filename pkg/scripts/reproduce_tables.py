"""Run every benchmark load sweep and write one CSV per obstacle/material pair.

    python3 scripts/reproduce_tables.py --out results/
    python3 scripts/reproduce_tables.py --only tip-symmetric plane-asymmetric
"""

from __future__ import annotations

import argparse
import csv
import io
import time
from pathlib import Path

from hddcm.cli import sweep
from hddcm.experiments import ExperimentSpec

SWEEPS = {
    "tip-symmetric": [2, 4, 6, 8, 10],
    "tip-asymmetric": [1, 2, 3, 4, 5],
    "plane-symmetric": [1, 2, 4, 6, 8, 10],
    "plane-asymmetric": [1, 2, 3, 4, 5],
    "hemisphere-symmetric": [1, 2, 2.25, 2.5, 3, 4, 6, 8, 10],
    "hemisphere-asymmetric": [2.5, 3, 3.5],
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--only", nargs="+", choices=sorted(SWEEPS), default=sorted(SWEEPS))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for key in args.only:
        obstacle, material = key.split("-")
        t0 = time.perf_counter()
        text = sweep(ExperimentSpec(obstacle, material), [float(g) for g in SWEEPS[key]])
        (args.out / f"{key}.csv").write_text(text, encoding="utf-8")
        print(f"{key} ({time.perf_counter() - t0:.1f}s)")
        for row in csv.DictReader(io.StringIO(text)):
            print(f"  gamma={row['gamma']:>5} {row['final_status']:<26} stage={row['stage_reached']} "
                  f"xi={row['xi_active'] or '-'}")


if __name__ == "__main__":
    main()
