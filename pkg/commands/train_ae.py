"""train-ae: pretrain the encoders against mirrored 2-D decoders."""

import logging

from autodiff.checkpoint import save_checkpoint
from commands.base import BaseCommand, build_network
from datagen.storage import load_sequences
from network.training import metrics_jsonl, pretrain_autoencoders
from state import atomic_write_text

logger = logging.getLogger(__name__)


class TrainAutoencoderCommand(BaseCommand):
    name = "train-ae"
    required_keys = ("data_dir",)
    artifact_name = "pretrained.vxw"

    def run(self) -> None:
        sequences = load_sequences(self.config.data_dir, self.config.train_split)
        model = build_network(self.config)
        records = pretrain_autoencoders(model, sequences, self.config.training_config(), self.should_stop)
        atomic_write_text(self.out_dir / "metrics_pretrain.jsonl", metrics_jsonl(records))
        save_checkpoint(self.artifact, model.state_dict())
