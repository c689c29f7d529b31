#!/usr/bin/env python3
"""Run gen-data, train-ae, train-recon and eval end to end from one config.

Usage:
    python scripts/run_pipeline.py --config configs/overfit4.cfg --out runs/overfit4 [--seed N] [--force]

Each stage gets its own output directory under --out; the stage configs
(with data_dir / checkpoint paths filled in) are written next to them.
Prints the evaluation table and exits with the first failing stage's code.
"""

import argparse
import json
import sys
from pathlib import Path

# Add parent dir to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import dump_config, parse_config
from main import configure_logging, dispatch
from state import atomic_write_text

STAGES = ("gen-data", "train-ae", "train-recon", "eval")


def stage_configs(work_dir: Path) -> dict[str, dict]:
    data_dir = work_dir / "gen-data"
    return {
        "gen-data": {},
        "train-ae": {"data_dir": str(data_dir)},
        "train-recon": {
            "data_dir": str(data_dir),
            "pretrained_checkpoint": str(work_dir / "train-ae" / "pretrained.vxw"),
        },
        "eval": {
            "data_dir": str(data_dir),
            "checkpoint": str(work_dir / "train-recon" / "model.vxw"),
        },
    }


def run_pipeline(config_path: str, work_dir: Path, overrides: dict, force: bool = False) -> dict:
    """Returns the parsed eval report; raises SystemExit with the failing stage's code."""
    work_dir = Path(work_dir)
    base = parse_config(config_path, overrides)
    for stage, updates in stage_configs(work_dir).items():
        stage_cfg = base.model_copy(update=updates)
        cfg_path = work_dir / f"{stage}.cfg"
        atomic_write_text(cfg_path, dump_config(stage_cfg))
        argv = [stage, "--config", str(cfg_path), "--out", str(work_dir / stage)]
        if force:
            argv.append("--force")
        code = dispatch(argv)
        if code != 0:
            print(f"stage {stage} failed with exit code {code}", file=sys.stderr)
            raise SystemExit(code)
    return json.loads((work_dir / "eval" / "report.json").read_text(encoding="utf-8"))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args()

    configure_logging()
    overrides = {"seed": args.seed} if args.seed is not None else {}
    report = run_pipeline(args.config, Path(args.out), overrides, force=args.force)
    print(json.dumps({"mean_iou": report["mean_iou"], "material_accuracy": report["material_accuracy"]}, indent=2))


if __name__ == "__main__":
    main()
