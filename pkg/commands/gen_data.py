"""gen-data: synthesize a dataset of scenes (or single-view objects)."""

import logging

from commands.base import BaseCommand
from datagen.generate import generate_dataset
from datagen.storage import MANIFEST_NAME

logger = logging.getLogger(__name__)


class GenDataCommand(BaseCommand):
    name = "gen-data"
    artifact_name = MANIFEST_NAME

    def run(self) -> None:
        generate_dataset(self.config.dataset_spec(), self.out_dir, threads=self.config.threads)
