"""train-recon: frozen-encoder stage then joint fine-tuning of the full network."""

import logging

from autodiff.checkpoint import load_checkpoint, save_checkpoint
from commands.base import BaseCommand, build_network
from datagen.storage import load_sequences
from network.training import metrics_jsonl, train_reconstruction
from state import atomic_write_text

logger = logging.getLogger(__name__)


class TrainReconstructionCommand(BaseCommand):
    name = "train-recon"
    required_keys = ("data_dir", "pretrained_checkpoint")
    artifact_name = "model.vxw"

    def run(self) -> None:
        pretrained = load_checkpoint(self.config.pretrained_checkpoint)
        sequences = load_sequences(self.config.data_dir, self.config.train_split)
        model = build_network(self.config)
        model.load_pretrained(pretrained)
        records = train_reconstruction(model, sequences, self.config.training_config(), self.should_stop)
        atomic_write_text(self.out_dir / "metrics.jsonl", metrics_jsonl(records))
        save_checkpoint(self.artifact, model.state_dict())
