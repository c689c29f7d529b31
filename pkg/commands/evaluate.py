"""eval: score a checkpoint (or a directory of predicted grids) on one split."""

import logging

from autodiff.checkpoint import load_checkpoint
from commands.base import BaseCommand, build_network
from datagen.storage import load_sequences
from errors import ConfigParseError
from network.evaluation import evaluate_model, evaluate_predictions, prediction_path
from state import atomic_write_text
from voxel import read_voxels

logger = logging.getLogger(__name__)


class EvaluateCommand(BaseCommand):
    name = "eval"
    required_keys = ("data_dir",)
    artifact_name = "report.json"

    def run(self) -> None:
        cfg = self.config
        sequences = load_sequences(cfg.data_dir, cfg.split)
        if cfg.predictions_dir:
            pairs = [(seq, read_voxels(prediction_path(cfg.predictions_dir, seq))) for seq in sequences]
            report = evaluate_predictions(pairs, cfg.thresholds)
        elif cfg.checkpoint:
            model = build_network(cfg)
            model.load_state_dict(load_checkpoint(cfg.checkpoint))
            report = evaluate_model(model, sequences, cfg.thresholds, window=cfg.window, threads=cfg.threads)
        else:
            raise ConfigParseError("missing required key 'checkpoint' (or 'predictions_dir')", key="checkpoint")
        table = report.to_table()
        atomic_write_text(self.out_dir / "report.txt", table)
        atomic_write_text(self.artifact, report.to_json())
        print(table, end="")
