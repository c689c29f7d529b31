"""reconstruct: write the predicted voxel grid of each requested sequence."""

import logging

from autodiff.checkpoint import load_checkpoint
from commands.base import BaseCommand, build_network
from datagen.storage import load_sequences
from errors import InvalidInputError
from network.evaluation import prediction_path, reconstruct
from state import atomic_write_text
from voxel import write_voxels

logger = logging.getLogger(__name__)


class ReconstructCommand(BaseCommand):
    name = "reconstruct"
    required_keys = ("data_dir", "checkpoint")
    artifact_name = "predictions.tsv"

    def run(self) -> None:
        cfg = self.config
        sequences = load_sequences(cfg.data_dir, cfg.split)
        if cfg.sample_id:
            sequences = [seq for seq in sequences if seq.sample_id == cfg.sample_id]
        if not sequences:
            raise InvalidInputError(f"no sequences for sample_id={cfg.sample_id!r} in split {cfg.split}")

        model = build_network(cfg)
        model.load_state_dict(load_checkpoint(cfg.checkpoint))
        lines = []
        for seq in sequences:
            grid = reconstruct(model, seq, window=cfg.window)
            path = prediction_path(self.out_dir, seq)
            write_voxels(path, grid)
            material = grid.material.value if grid.material else "-"
            lines.append(f"{seq.sample_id}\t{seq.object_index}\t{path.name}\t{material}\n")
            logger.debug("Reconstructed %s object %d -> %s", seq.sample_id, seq.object_index, path.name)
        atomic_write_text(self.artifact, "".join(lines))
        logger.info("Reconstructed %d sequence(s) into %s", len(lines), self.out_dir)
