"""synth-audio: one modal impact sound for a material and size."""

import logging

from audio import material_modal_params, synthesize_impact, write_wav
from commands.base import BaseCommand

logger = logging.getLogger(__name__)


class SynthAudioCommand(BaseCommand):
    name = "synth-audio"
    artifact_name = "impact.wav"

    def run(self) -> None:
        cfg = self.config
        model = material_modal_params(cfg.material, cfg.size_scale)
        clip = synthesize_impact(model, impulse_gain=cfg.impulse_gain, duration=cfg.duration, sample_rate=cfg.sample_rate)
        write_wav(self.artifact, clip)
        logger.info(
            "Synthesized %.2f s %s impact (%d modes, peak %.3f)",
            clip.duration, cfg.material.value, len(model.modes), clip.peak,
        )
