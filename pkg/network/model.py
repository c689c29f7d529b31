"""The reconstruction network: per-modality encoders, optional fusion, voxel decoder, material head."""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from autodiff.ops import loss_mse, softmax
from autodiff.tensor import Tensor, stack
from config import (
    ConvSpec,
    Decoder2DConfig,
    DecoderConfig3D,
    EncoderConfig,
    FusionConfig,
    FusionMode,
    Variant,
    build_config,
)
from errors import ConfigurationError, FormatError, InvalidInputError, UnsupportedVariantError
from models import Material, SampleSequence
from network.decoder import ImageDecoder, VoxelDecoder
from network.encoder import SequenceEncoder
from network.fusion import Fusion
from network.layers import DenseLayer, ParameterSet
from spectral import spectrogram_to_input

logger = logging.getLogger(__name__)

MATERIALS = tuple(Material)
PRETRAIN_SUFFIX = "_ae"


@dataclass(frozen=True)
class ModelInputs:
    """Per-frame network inputs, each (1, S, S); None for an absent modality."""

    visual: Optional[list[Tensor]] = None
    audio: Optional[list[Tensor]] = None


@dataclass(frozen=True)
class Prediction:
    occupancy: Tensor
    material_logits: Optional[Tensor] = None
    feature: Optional[Tensor] = None


def default_decoder2d(enc: EncoderConfig) -> Decoder2DConfig:
    """Mirror of the encoder: hidden extent back to the input size."""
    return build_config(
        Decoder2DConfig,
        input_size=enc.hidden_extent,
        input_channels=enc.lstm_channels,
        output_size=enc.input_size,
        stages=[
            ConvSpec(kernel=4, stride=2, padding=1, channels=enc.conv1.channels),
            ConvSpec(kernel=8, stride=4, padding=2, channels=1),
        ],
    )


def micro_configs(
    variant: Variant = Variant.AUDIO_VISUAL, mode: FusionMode = FusionMode.ADD
) -> tuple[EncoderConfig, DecoderConfig3D, FusionConfig, Decoder2DConfig]:
    """8x8 inputs and a 4^3 output; small enough for whole-network finite differences."""
    enc = EncoderConfig(
        input_size=8,
        conv1=ConvSpec(kernel=3, stride=2, padding=1, channels=3),
        conv2=ConvSpec(kernel=3, stride=2, padding=1, channels=3),
        lstm_kernel=3,
        lstm_channels=2,
        feature_dim=6,
    )
    fus = FusionConfig(mode=mode, feature_dim=6, fused_dim=4, mfb_factor=2)
    dec = DecoderConfig3D(
        input_dim=fus.output_dim if variant is Variant.AUDIO_VISUAL else enc.feature_dim,
        seed_channels=4,
        output_size=4,
        stages=[
            ConvSpec(kernel=2, stride=1, padding=0, channels=3),
            ConvSpec(kernel=2, stride=2, padding=0, channels=2),
            ConvSpec(kernel=1, stride=1, padding=0, channels=2),
            ConvSpec(kernel=1, stride=1, padding=0, channels=2),
            ConvSpec(kernel=1, stride=1, padding=0, channels=1),
        ],
    )
    dec2d = Decoder2DConfig(
        input_size=2,
        input_channels=2,
        output_size=8,
        stages=[
            ConvSpec(kernel=4, stride=2, padding=1, channels=2),
            ConvSpec(kernel=4, stride=2, padding=1, channels=1),
        ],
    )
    return enc, dec, fus, dec2d


class ReconstructionNetwork:
    """One of the A, V or AV variants. Parameters live in a single named ParameterSet:
    visual.*, audio.*, visual_ae.*, audio_ae.*, fusion.*, decoder.*, material.*"""

    def __init__(
        self,
        variant: Variant,
        enc: EncoderConfig,
        dec: DecoderConfig3D,
        fus: FusionConfig,
        dec2d: Optional[Decoder2DConfig] = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        self.variant = Variant(variant)
        self.enc_cfg = enc
        self.dec_cfg = dec
        self.fusion_cfg = fus
        dec2d = dec2d or default_decoder2d(enc)
        self._check_dims(enc, dec, fus, dec2d)

        self.params = ParameterSet(np.random.default_rng(seed), dtype=dtype)
        self.encoders: dict[str, SequenceEncoder] = {}
        self.image_decoders: dict[str, ImageDecoder] = {}
        for modality in self.modalities:
            self.encoders[modality] = SequenceEncoder(self.params, modality, enc)
            self.image_decoders[modality] = ImageDecoder(self.params, modality + PRETRAIN_SUFFIX, dec2d)
        self.fusion = Fusion(self.params, "fusion", fus) if self.variant is Variant.AUDIO_VISUAL else None
        self.decoder = VoxelDecoder(self.params, "decoder", dec)
        self.material_head = (
            DenseLayer(self.params, "material", enc.feature_dim, len(MATERIALS)) if self.variant.has_audio else None
        )
        logger.debug(
            "Built %s network: %d parameter tensor(s), %d value(s)",
            self.variant.value, len(self.params), self.parameter_count(),
        )

    def _check_dims(self, enc, dec, fus, dec2d) -> None:
        if self.variant is Variant.AUDIO_VISUAL:
            if fus.feature_dim != enc.feature_dim:
                raise ConfigurationError(f"fusion expects {fus.feature_dim}-d features, encoder gives {enc.feature_dim}")
            expected = fus.output_dim
        else:
            expected = enc.feature_dim
        if dec.input_dim != expected:
            raise ConfigurationError(f"3-D decoder input_dim {dec.input_dim} does not match feature dim {expected}")
        if (dec2d.input_size, dec2d.input_channels, dec2d.output_size) != (
            enc.hidden_extent, enc.lstm_channels, enc.input_size,
        ):
            raise ConfigurationError("2-D decoder does not mirror the encoder geometry")

    @property
    def modalities(self) -> tuple[str, ...]:
        names = []
        if self.variant.has_visual:
            names.append("visual")
        if self.variant.has_audio:
            names.append("audio")
        return tuple(names)

    @property
    def dtype(self):
        return self.params.dtype

    # parameter groups

    def pretrain_prefixes(self) -> tuple[str, ...]:
        prefixes: list[str] = []
        for modality, encoder in self.encoders.items():
            prefixes.extend(encoder.trunk_prefixes)
            prefixes.append(modality + PRETRAIN_SUFFIX + ".")
        return tuple(prefixes)

    def head_prefixes(self) -> tuple[str, ...]:
        """Trained while the encoder trunks are frozen."""
        prefixes = [f"{modality}.feature." for modality in self.encoders]
        prefixes += ["fusion.", "decoder.", "material."]
        return tuple(prefixes)

    def reconstruction_prefixes(self) -> tuple[str, ...]:
        return tuple(f"{modality}." for modality in self.encoders) + ("fusion.", "decoder.", "material.")

    def parameter_count(self, prefixes: Optional[tuple[str, ...]] = None) -> int:
        """Values used at inference (pretraining decoders excluded unless asked for)."""
        return self.params.count(prefixes or self.reconstruction_prefixes())

    # forward passes

    def _frames(self, inputs: ModelInputs, modality: str) -> list[Tensor]:
        frames = getattr(inputs, modality)
        if frames is None:
            raise InvalidInputError(f"{self.variant.value} network needs {modality} input")
        return frames

    def features(self, inputs: ModelInputs) -> dict[str, Tensor]:
        return {modality: encoder.encode(self._frames(inputs, modality)) for modality, encoder in self.encoders.items()}

    def forward(self, inputs: ModelInputs) -> Prediction:
        features = self.features(inputs)
        if self.fusion is not None:
            joint = self.fusion(features["audio"], features["visual"])
        else:
            joint = features[self.modalities[0]]
        logits = self.material_head(features["audio"]) if self.material_head is not None else None
        return Prediction(occupancy=self.decoder(joint), material_logits=logits, feature=joint)

    __call__ = forward

    def material_logits(self, audio_feature: Tensor) -> Tensor:
        if self.material_head is None:
            raise UnsupportedVariantError(f"{self.variant.value} network has no audio encoder for material")
        return self.material_head(audio_feature)

    def classify_material(self, audio_feature: Tensor) -> Tensor:
        """Softmax over (granite, slate, oak, marble)."""
        return softmax(self.material_logits(audio_feature))

    def autoencoder_loss(self, inputs: ModelInputs) -> Tensor:
        """MSE between every input frame of every modality and its mirrored 2-D reconstruction."""
        outputs, targets = [], []
        for modality, encoder in self.encoders.items():
            frames = self._frames(inputs, modality)
            decoder = self.image_decoders[modality]
            outputs.extend(decoder(hidden) for hidden in encoder.hidden_states(frames))
            targets.extend(frames)
        return loss_mse(stack(outputs), Tensor(np.stack([t.data for t in targets])))

    # persistence

    def state_dict(self) -> dict[str, np.ndarray]:
        return self.params.state_dict()

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        trained_for = infer_variant(state)
        if trained_for is not None and trained_for is not self.variant:
            raise InvalidInputError(
                f"checkpoint holds a {trained_for.value} network, config asks for {self.variant.value}"
            )
        self.params.load_state_dict(dict(state), strict=True)

    def load_pretrained(self, state: Mapping[str, np.ndarray]) -> list[str]:
        """Take encoder trunks and 2-D decoders from an autoencoder checkpoint."""
        prefixes = self.pretrain_prefixes()
        wanted = {name for name in self.params.names() if name.startswith(prefixes)}
        missing = wanted - set(state)
        if missing:
            raise FormatError(f"pretrained checkpoint lacks {len(missing)} tensor(s), e.g. {sorted(missing)[0]}")
        loaded = self.params.load_state_dict({name: state[name] for name in wanted}, strict=False)
        logger.info("Loaded %d pretrained tensor(s)", len(loaded))
        return loaded


def infer_variant(state: Mapping[str, np.ndarray]) -> Optional[Variant]:
    has_visual = any(name.startswith("visual.") for name in state)
    has_audio = any(name.startswith("audio.") for name in state)
    if has_visual and has_audio:
        return Variant.AUDIO_VISUAL
    if has_visual:
        return Variant.VISUAL
    if has_audio:
        return Variant.AUDIO
    return None


def build_model(
    variant: Variant,
    enc: EncoderConfig,
    dec: DecoderConfig3D,
    fus: FusionConfig,
    dec2d: Optional[Decoder2DConfig] = None,
    seed: int = 0,
    dtype=np.float32,
) -> ReconstructionNetwork:
    return ReconstructionNetwork(variant, enc, dec, fus, dec2d=dec2d, seed=seed, dtype=dtype)


def prepare_inputs(seq: SampleSequence, variant: Variant, dtype=np.float32) -> ModelInputs:
    """Frames as (1, 88, 88) tensors; spectrograms scaled to [0, 1] and zero-padded to 88x88."""
    visual = audio = None
    if variant.has_visual:
        visual = [Tensor(frame[None].astype(dtype)) for frame in seq.frames]
    if variant.has_audio:
        if len(seq.spectrograms) != seq.frame_count:
            raise InvalidInputError(f"{seq.sample_id}: audio input does not line up with the frames")
        audio = [Tensor(spectrogram_to_input(s)[None].astype(dtype)) for s in seq.spectrograms]
    return ModelInputs(visual=visual, audio=audio)
