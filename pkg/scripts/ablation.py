#!/usr/bin/env python3
"""Compare V, AV and A variants on the hollow/solid paired dataset over several seeds.

Usage:
    python scripts/ablation.py --config configs/ablation.cfg --out runs/ablation [--seeds 0,1,2] [--json]

The directional check passes when AV beats V by at least --gap mean IoU
at t=0.4 for a majority of seeds and A reaches 90% material accuracy.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent))

from main import configure_logging
from run_pipeline import run_pipeline

VARIANTS = ("V", "AV", "A")
IOU_KEY = "0.4"


def run_ablation(config_path: str, work_dir: Path, seeds: list[int], force: bool = False) -> list[dict]:
    rows = []
    for seed in seeds:
        row = {"seed": seed}
        for variant in VARIANTS:
            report = run_pipeline(
                config_path,
                Path(work_dir) / f"seed{seed}" / variant,
                {"seed": seed, "variant": variant},
                force=force,
            )
            row[f"{variant}_iou"] = report["mean_iou"][IOU_KEY]
            row[f"{variant}_material"] = report["material_accuracy"]
        row["gap"] = row["AV_iou"] - row["V_iou"]
        rows.append(row)
    return rows


def verdict(rows: list[dict], gap: float, min_accuracy: float = 0.9) -> bool:
    wins = sum(1 for row in rows if row["gap"] >= gap)
    accurate = all((row["A_material"] or 0.0) > min_accuracy for row in rows)
    return wins * 2 > len(rows) and accurate


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--gap", type=float, default=0.05)
    parser.add_argument("--force", action="store_true")
    parser.add_argument("--json", action="store_true", help="print rows as JSON")
    args = parser.parse_args()

    configure_logging()
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    rows = run_ablation(args.config, Path(args.out), seeds, force=args.force)

    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'seed':>4}  {'V iou':>7}  {'AV iou':>7}  {'gap':>7}  {'A mat':>6}")
        for row in rows:
            material = row["A_material"] if row["A_material"] is not None else float("nan")
            print(f"{row['seed']:>4}  {row['V_iou']:>7.4f}  {row['AV_iou']:>7.4f}  {row['gap']:>+7.4f}  {material:>6.3f}")
    passed = verdict(rows, args.gap)
    print(f"directional check: {'PASS' if passed else 'FAIL'}")
    sys.exit(0 if passed else 1)


if __name__ == "__main__":
    main()
