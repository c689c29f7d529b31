"""spectrogram: mel spectrogram windows of a WAV file, optionally dumped as CSV."""

import logging

from audio import read_wav
from commands.base import BaseCommand
from spectral import segment_audio, spectrogram_to_csv, write_spectrograms
from state import atomic_write_text

logger = logging.getLogger(__name__)


class SpectrogramCommand(BaseCommand):
    name = "spectrogram"
    required_keys = ("input_wav",)
    artifact_name = "spectrograms.spg"

    def run(self) -> None:
        clip = read_wav(self.config.input_wav)
        spectrograms = segment_audio(clip, mode=self.config.spectrogram_mode.value, threads=self.config.threads)
        if self.csv:
            for index, spectrogram in enumerate(spectrograms):
                atomic_write_text(self.out_dir / f"spectrogram_{index:03d}.csv", spectrogram_to_csv(spectrogram))
        write_spectrograms(self.artifact, spectrograms)
        logger.info("Wrote %d spectrogram window(s) for %s", len(spectrograms), self.config.input_wav)
