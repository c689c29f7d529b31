"""Run configuration: key=value files, validation and derived network configs."""

import hashlib
import io
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from errors import ConfigParseError, ConfigurationError
from models import FRAME_SIZE, GRID_SIZE, Material, ShapeKind

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    AUDIO = "A"
    VISUAL = "V"
    AUDIO_VISUAL = "AV"

    @property
    def has_audio(self) -> bool:
        return self in (Variant.AUDIO, Variant.AUDIO_VISUAL)

    @property
    def has_visual(self) -> bool:
        return self in (Variant.VISUAL, Variant.AUDIO_VISUAL)


class FusionMode(str, Enum):
    ADD = "add"
    CONCAT = "concat"
    MFB = "mfb"


class SpectrogramMode(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


class ConvSpec(BaseModel):
    kernel: int
    stride: int = 1
    padding: int = 0
    channels: int

    @field_validator("kernel", "stride", "channels")
    @classmethod
    def positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v


def _conv_extent(extent: int, spec: ConvSpec) -> int:
    return (extent + 2 * spec.padding - spec.kernel) // spec.stride + 1


def _transposed_extent(extent: int, spec: ConvSpec) -> int:
    return (extent - 1) * spec.stride + spec.kernel - 2 * spec.padding


class EncoderConfig(BaseModel):
    """Two strided convs, a ConvLSTM and a dense projection."""

    input_size: int = FRAME_SIZE
    conv1: ConvSpec = ConvSpec(kernel=7, stride=4, padding=3, channels=32)
    conv2: ConvSpec = ConvSpec(kernel=3, stride=2, padding=1, channels=64)
    lstm_kernel: int = 3
    lstm_channels: int = 64
    feature_dim: int = 1024

    @model_validator(mode="after")
    def check_trace(self) -> "EncoderConfig":
        trace = self.trace
        if min(trace) < 1:
            raise ValueError(f"encoder extent trace {trace} has a non-positive extent")
        if self.conv2.kernel > 5 or self.lstm_kernel > 5:
            raise ValueError("only the first encoder kernel may exceed 5x5")
        if self.lstm_kernel % 2 == 0:
            raise ValueError(f"ConvLSTM kernel must be odd for same padding, got {self.lstm_kernel}")
        return self

    @property
    def trace(self) -> list[int]:
        after_conv1 = _conv_extent(self.input_size, self.conv1)
        after_conv2 = _conv_extent(after_conv1, self.conv2)
        return [self.input_size, after_conv1, after_conv2, after_conv2]

    @property
    def hidden_extent(self) -> int:
        return self.trace[-1]

    @property
    def flat_dim(self) -> int:
        return self.lstm_channels * self.hidden_extent ** 2


class Decoder2DConfig(BaseModel):
    """Mirrored image decoder used for autoencoder pretraining."""

    input_size: int = 11
    input_channels: int = 64
    output_size: int = FRAME_SIZE
    stages: list[ConvSpec] = [
        ConvSpec(kernel=4, stride=2, padding=1, channels=32),
        ConvSpec(kernel=8, stride=4, padding=2, channels=1),
    ]

    @model_validator(mode="after")
    def check_trace(self) -> "Decoder2DConfig":
        trace = self.trace
        if min(trace) < 1 or trace[-1] != self.output_size:
            raise ValueError(f"2-D decoder trace {trace} does not end at {self.output_size}")
        if self.stages[-1].channels != 1:
            raise ValueError("2-D decoder must end with one channel")
        return self

    @property
    def trace(self) -> list[int]:
        extents = [self.input_size]
        for spec in self.stages:
            extents.append(_transposed_extent(extents[-1], spec))
        return extents


class DecoderConfig3D(BaseModel):
    """Dense seed then five transposed 3-D convolutions, final sigmoid."""

    input_dim: int = 1024
    seed_channels: int = 256
    output_size: int = GRID_SIZE
    stages: list[ConvSpec] = [
        ConvSpec(kernel=2, stride=1, padding=0, channels=128),
        ConvSpec(kernel=2, stride=2, padding=0, channels=64),
        ConvSpec(kernel=2, stride=2, padding=0, channels=32),
        ConvSpec(kernel=3, stride=2, padding=1, channels=16),
        ConvSpec(kernel=4, stride=2, padding=1, channels=1),
    ]

    @model_validator(mode="after")
    def check_trace(self) -> "DecoderConfig3D":
        if len(self.stages) != 5:
            raise ValueError(f"3-D decoder needs exactly five transposed convs, got {len(self.stages)}")
        trace = self.trace
        if min(trace) < 1 or trace[-1] != self.output_size:
            raise ValueError(f"3-D decoder trace {trace} does not end at {self.output_size}")
        if self.stages[-1].channels != 1:
            raise ValueError("3-D decoder must end with one channel")
        return self

    @property
    def trace(self) -> list[int]:
        extents = [1]
        for spec in self.stages:
            extents.append(_transposed_extent(extents[-1], spec))
        return extents


class FusionConfig(BaseModel):
    mode: FusionMode = FusionMode.ADD
    feature_dim: int = 1024
    fused_dim: int = 1024
    mfb_factor: int = 5

    @property
    def output_dim(self) -> int:
        if self.mode is FusionMode.CONCAT:
            return 2 * self.feature_dim
        if self.mode is FusionMode.MFB:
            return self.fused_dim
        return self.feature_dim


class TrainingConfig(BaseModel):
    seed: int = 0
    threads: int = 1
    epochs_pretrain: int = 200
    epochs_frozen: int = 100
    epochs_joint: int = 400
    lr_pretrain: float = 1e-3
    lr_recon: float = 1e-3
    lr_finetune: float = 1e-4
    batch_size: int = 8
    material_loss_weight: float = 0.1
    window: int = 10
    strides: list[int] = [1, 2, 3]


class DatasetSpec(BaseModel):
    seed: int = 0
    n_scenes: int = 200
    frame_count: int = 20
    fps: float = 30.0
    max_objects: int = 3
    single_view: bool = False
    views: int = 1
    distinct_view_sounds: bool = False
    paired_materials: bool = False
    shape_kinds: list[ShapeKind] = list(ShapeKind)
    frame_size: int = 160
    gravity: float = 0.0


def build_config(model_cls: type[BaseModel], **values) -> BaseModel:
    """Construct a derived config, reporting an invalid geometry as ConfigurationError."""
    try:
        return model_cls(**values)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid {model_cls.__name__}: {exc.errors()[0]['msg']}") from exc


def _split_list(v):
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class RunConfig(BaseModel):
    """Every key any command reads, with defaults. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    # run
    seed: int = 0
    threads: int = 1
    data_dir: Optional[str] = None
    checkpoint: Optional[str] = None
    pretrained_checkpoint: Optional[str] = None
    predictions_dir: Optional[str] = None
    sample_id: Optional[str] = None

    # network
    variant: Variant = Variant.AUDIO_VISUAL
    fusion_mode: FusionMode = FusionMode.ADD
    feature_dim: int = 1024
    fused_dim: int = 1024
    mfb_factor: int = 5
    conv1_channels: int = 32
    conv2_channels: int = 64
    lstm_channels: int = 64
    seed_channels: int = 256
    decoder_channels: list[int] = [128, 64, 32, 16]

    # training
    epochs_pretrain: int = 200
    epochs_frozen: int = 100
    epochs_joint: int = 400
    lr_pretrain: float = 1e-3
    lr_recon: float = 1e-3
    lr_finetune: float = 1e-4
    batch_size: int = 8
    material_loss_weight: float = 0.1
    window: int = 10
    strides: list[int] = [1, 2, 3]
    train_split: str = "train"

    # evaluation
    split: str = "test"
    thresholds: list[float] = [0.3, 0.4, 0.5]

    # dataset
    n_scenes: int = 200
    frame_count: int = 20
    fps: float = 30.0
    max_objects: int = 3
    single_view: bool = False
    views: int = 1
    distinct_view_sounds: bool = False
    paired_materials: bool = False
    shape_kinds: list[ShapeKind] = list(ShapeKind)
    frame_size: int = 160
    gravity: float = 0.0

    # audio
    sample_rate: int = 44100
    material: Material = Material.GRANITE
    size_scale: float = 1.0
    impulse_gain: float = 1.0
    duration: float = 3.0
    input_wav: Optional[str] = None
    spectrogram_mode: SpectrogramMode = SpectrogramMode.MULTI

    @field_validator("decoder_channels", "strides", "thresholds", "shape_kinds", mode="before")
    @classmethod
    def comma_list(cls, v):
        return _split_list(v)

    @field_validator("thresholds")
    @classmethod
    def open_unit_interval(cls, v: list[float]) -> list[float]:
        for t in v:
            if not 0.0 < t < 1.0:
                raise ValueError(f"threshold {t} outside (0, 1)")
        return v

    @field_validator("strides")
    @classmethod
    def known_strides(cls, v: list[int]) -> list[int]:
        if not v or any(s not in (1, 2, 3) for s in v):
            raise ValueError(f"strides must be drawn from 1,2,3, got {v}")
        return v

    @field_validator("max_objects")
    @classmethod
    def object_range(cls, v: int) -> int:
        if not 1 <= v <= 3:
            raise ValueError(f"max_objects must be 1..3, got {v}")
        return v

    @field_validator("decoder_channels")
    @classmethod
    def four_hidden_stages(cls, v: list[int]) -> list[int]:
        if len(v) != 4:
            raise ValueError(f"decoder_channels needs 4 values (the fifth stage is the 1-channel output), got {v}")
        return v

    def require(self, *keys: str) -> None:
        """Raise ConfigParseError for command-specific keys that are unset."""
        for key in keys:
            if getattr(self, key) in (None, ""):
                raise ConfigParseError(f"missing required key '{key}'", key=key)

    def encoder_config(self) -> EncoderConfig:
        return build_config(
            EncoderConfig,
            conv1=ConvSpec(kernel=7, stride=4, padding=3, channels=self.conv1_channels),
            conv2=ConvSpec(kernel=3, stride=2, padding=1, channels=self.conv2_channels),
            lstm_channels=self.lstm_channels,
            feature_dim=self.feature_dim,
        )

    def decoder2d_config(self) -> Decoder2DConfig:
        encoder = self.encoder_config()
        return build_config(
            Decoder2DConfig,
            input_size=encoder.hidden_extent,
            input_channels=self.lstm_channels,
            stages=[
                ConvSpec(kernel=4, stride=2, padding=1, channels=self.conv1_channels),
                ConvSpec(kernel=8, stride=4, padding=2, channels=1),
            ],
        )

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            mode=self.fusion_mode,
            feature_dim=self.feature_dim,
            fused_dim=self.fused_dim,
            mfb_factor=self.mfb_factor,
        )

    def decoder3d_config(self) -> DecoderConfig3D:
        fusion = self.fusion_config()
        input_dim = fusion.output_dim if self.variant is Variant.AUDIO_VISUAL else self.feature_dim
        geometry = DecoderConfig3D().stages
        channels = list(self.decoder_channels) + [1]
        return build_config(
            DecoderConfig3D,
            input_dim=input_dim,
            seed_channels=self.seed_channels,
            stages=[spec.model_copy(update={"channels": c}) for spec, c in zip(geometry, channels)],
        )

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            seed=self.seed,
            threads=self.threads,
            epochs_pretrain=self.epochs_pretrain,
            epochs_frozen=self.epochs_frozen,
            epochs_joint=self.epochs_joint,
            lr_pretrain=self.lr_pretrain,
            lr_recon=self.lr_recon,
            lr_finetune=self.lr_finetune,
            batch_size=self.batch_size,
            material_loss_weight=self.material_loss_weight,
            window=self.window,
            strides=self.strides,
        )

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(
            seed=self.seed,
            n_scenes=self.n_scenes,
            frame_count=self.frame_count,
            fps=self.fps,
            max_objects=self.max_objects,
            single_view=self.single_view,
            views=self.views,
            distinct_view_sounds=self.distinct_view_sounds,
            paired_materials=self.paired_materials,
            shape_kinds=self.shape_kinds,
            frame_size=self.frame_size,
            gravity=self.gravity,
        )

    def digest(self, *exclude: str) -> str:
        """SHA-256 of the dumped config, ignoring `exclude` and `threads`."""
        lines = [
            line for line in dump_config(self).splitlines()
            if line.split("=", 1)[0] not in {"threads", *exclude}
        ]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _key_lines(text: str) -> dict[str, int]:
    lines: dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key = line.split("=", 1)[0].strip()
        if key.startswith("export "):
            key = key[len("export "):].strip()
        lines.setdefault(key, number)
    return lines


def parse_config_text(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Validate key=value text; errors name the key and its 1-based line."""
    raw = dotenv_values(stream=io.StringIO(text))
    key_lines = _key_lines(text)
    for key in raw:
        if key not in RunConfig.model_fields:
            raise ConfigParseError(f"unknown key '{key}'", line=key_lines.get(key), key=key)
    values = {key: value for key, value in raw.items() if value is not None}
    values.update(overrides or {})
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        raise ConfigParseError(
            f"invalid value for '{key}': {error['msg']}", line=key_lines.get(key), key=key
        ) from exc


def parse_config(path: Optional[str], overrides: Optional[dict] = None) -> RunConfig:
    """Read a run config file (or only defaults when `path` is None)."""
    if path is None:
        return parse_config_text("", overrides)
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigParseError(f"config file not found: {path}")
    config = parse_config_text(config_file.read_text(encoding="utf-8"), overrides)
    logger.debug("Parsed config %s (variant=%s, seed=%d)", path, config.variant.value, config.seed)
    return config


def _render(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(_render(item) for item in value)
    return str(value)


def dump_config(config: RunConfig) -> str:
    """Render a config back to key=value text; parsing it yields the same config."""
    lines = []
    for key in RunConfig.model_fields:
        value = getattr(config, key)
        if value is None:
            continue
        lines.append(f"{key}={_render(value)}")
    return "\n".join(lines) + "\n"


def load_settings(env_path: Optional[str] = ".env") -> None:
    """Load process settings (LOG_LEVEL, LOG_FORMAT, CONFIG_PATH, LEDGER_PATH) from .env."""
    if env_path and Path(env_path).exists():
        load_dotenv(env_path)
        logger.debug("Loaded environment from %s", env_path)


def ledger_path() -> str:
    return os.environ.get("LEDGER_PATH", "runs.db")
