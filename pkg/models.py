"""Domain value types: materials, modal models, audio, spectrograms, voxel grids, scenes."""

import hashlib
import json
import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GRID_SIZE = 30
FRAME_SIZE = 88
N_MELS = 64
SPECTROGRAM_FRAMES = 25
DEFAULT_SAMPLE_RATE = 44100
DB_FLOOR = -80.0


class Material(str, Enum):
    GRANITE = "granite"
    SLATE = "slate"
    OAK = "oak"
    MARBLE = "marble"

    @property
    def code(self) -> int:
        return list(Material).index(self)

    @classmethod
    def from_code(cls, code: int) -> "Material":
        return list(cls)[code]


MATERIAL_NONE_CODE = 255


class ShapeKind(str, Enum):
    SOLID_BOX = "solid_box"
    HOLLOW_BOX = "hollow_box"
    SPHERE = "sphere"
    SHELL_SPHERE = "shell_sphere"
    L_BEAM = "l_beam"
    TABLE_LIKE = "table_like"

    @property
    def is_hollow(self) -> bool:
        return self in (ShapeKind.HOLLOW_BOX, ShapeKind.SHELL_SPHERE)


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class ArrayModel(BaseModel):
    """Base for models holding numpy payloads. Compare payloads with np.array_equal."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class Mode(BaseModel):
    """One damped sinusoid: a * exp(-d t) * sin(2 pi f t + phase)."""

    frequency: float
    damping: float = 0.0
    amplitude: float = 1.0
    phase: float = 0.0

    @field_validator("frequency")
    @classmethod
    def audible(cls, v: float) -> float:
        if not 20.0 <= v <= 20000.0:
            raise ValueError(f"mode frequency {v} Hz outside 20..20000 Hz")
        return v

    @field_validator("damping", "amplitude")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"must be >= 0, got {v}")
        return v

    @field_validator("phase")
    @classmethod
    def wrap_phase(cls, v: float) -> float:
        return v % (2.0 * math.pi)


class ModalModel(BaseModel):
    modes: list[Mode] = Field(min_length=1, max_length=64)
    material: Material

    @field_validator("modes")
    @classmethod
    def sorted_by_frequency(cls, v: list[Mode]) -> list[Mode]:
        return sorted(v, key=lambda mode: mode.frequency)

    @property
    def max_frequency(self) -> float:
        return self.modes[-1].frequency


class AudioClip(ArrayModel):
    """Mono float64 samples; `normalization` is the peak scale factor already applied."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE
    normalization: float = 1.0

    @field_validator("samples", mode="before")
    @classmethod
    def as_float_vector(cls, v) -> np.ndarray:
        array = np.asarray(v, dtype=np.float64)
        if array.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {array.shape}")
        return array

    @field_validator("sample_rate")
    @classmethod
    def positive_rate(cls, v: int) -> int:
        if v <= 0:
            raise ValueError(f"sample_rate must be positive, got {v}")
        return v

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    @classmethod
    def silence(cls, duration: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "AudioClip":
        return cls(samples=np.zeros(round(duration * sample_rate)), sample_rate=sample_rate)


class Spectrogram(ArrayModel):
    """Log-power mel spectrogram, (mel bins, frames) in dB with a -80 dB floor."""

    values: np.ndarray
    mel_low: float = 20.0
    mel_high: float = DEFAULT_SAMPLE_RATE / 2

    @field_validator("values", mode="before")
    @classmethod
    def check_grid(cls, v) -> np.ndarray:
        array = np.asarray(v, dtype=np.float32)
        if array.shape != (N_MELS, SPECTROGRAM_FRAMES):
            raise ValueError(f"spectrogram must be {N_MELS}x{SPECTROGRAM_FRAMES}, got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("spectrogram values must be finite")
        return np.maximum(array, np.float32(DB_FLOOR))

    @classmethod
    def floor(cls) -> "Spectrogram":
        return cls(values=np.full((N_MELS, SPECTROGRAM_FRAMES), DB_FLOOR, dtype=np.float32))


class VoxelGrid(ArrayModel):
    occupancy: np.ndarray
    material: Optional[Material] = None

    @field_validator("occupancy", mode="before")
    @classmethod
    def check_occupancy(cls, v) -> np.ndarray:
        array = np.asarray(v, dtype=np.float32)
        if array.shape != (GRID_SIZE,) * 3:
            raise ValueError(f"voxel grid must be {GRID_SIZE}^3, got {array.shape}")
        if not np.all((array >= 0.0) & (array <= 1.0)):
            raise ValueError("occupancy values must lie in [0, 1]")
        return array

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.occupancy == 0.0) | (self.occupancy == 1.0)))

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.occupancy > 0.5))

    @classmethod
    def empty(cls) -> "VoxelGrid":
        return cls(occupancy=np.zeros((GRID_SIZE,) * 3, dtype=np.float32))


class BoundingBox(BaseModel):
    """Pixel box on the scene canvas; (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    @field_validator("w", "h")
    @classmethod
    def positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"box extent must be >= 1, got {v}")
        return v


class ObjectSpec(BaseModel):
    """One sounding object. Position is the sprite's top-left corner in
    canvas pixels, velocity is in pixels per second (y grows downward)."""

    kind: ShapeKind
    size_scale: float = 1.0
    material: Material
    position: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    view: str = "front"

    @field_validator("size_scale")
    @classmethod
    def scale_range(cls, v: float) -> float:
        if not 0.3 < v <= 1.0:
            raise ValueError(f"size_scale must lie in (0.3, 1], got {v}")
        return v


class SceneConfig(BaseModel):
    objects: list[ObjectSpec] = Field(min_length=1, max_length=3)
    frame_count: int = 20
    fps: float = 30.0
    rng_seed: int = 0
    frame_size: int = 160
    sprite_scale: int = 2
    gravity: float = 0.0
    min_impact_speed: float = 1.0
    gain_per_speed: float = 0.01
    impact_duration: float = 0.5
    sample_rate: int = DEFAULT_SAMPLE_RATE

    @field_validator("frame_count")
    @classmethod
    def at_least_one_window(cls, v: int) -> int:
        if v < 10:
            raise ValueError(f"frame_count must be >= 10, got {v}")
        return v

    @field_validator("fps")
    @classmethod
    def positive_fps(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"fps must be positive, got {v}")
        return v

    @property
    def duration(self) -> float:
        return self.frame_count / self.fps

    def sample_id(self) -> str:
        """Stable id: SHA-256 of the canonical JSON of this config."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return "scene-" + hashlib.sha256(canonical.encode()).hexdigest()[:16]


class SingleViewConfig(BaseModel):
    """One object, one (or five) silhouette views, one three-second impact."""

    kind: ShapeKind
    size_scale: float = 1.0
    material: Material
    views: int = 1
    distinct_view_sounds: bool = False
    rng_seed: int = 0
    duration: float = 3.0
    sample_rate: int = DEFAULT_SAMPLE_RATE

    @field_validator("views")
    @classmethod
    def one_or_five(cls, v: int) -> int:
        if v not in (1, 5):
            raise ValueError(f"views must be 1 or 5, got {v}")
        return v

    def sample_id(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return "single-" + hashlib.sha256(canonical.encode()).hexdigest()[:16]


class ImpactEvent(BaseModel):
    time: float
    object_index: int
    speed: float
    gain: float
    kind: str = "wall"


class SampleSequence(ArrayModel):
    """Aligned per-object query: frames, spectrograms, boxes and ground truth."""

    sample_id: str
    object_index: int = 0
    frames: np.ndarray
    spectrograms: list[Spectrogram]
    boxes: list[BoundingBox]
    voxels: VoxelGrid
    material: Material

    @field_validator("frames", mode="before")
    @classmethod
    def check_frames(cls, v) -> np.ndarray:
        array = np.asarray(v, dtype=np.float32)
        if array.ndim != 3 or array.shape[1:] != (FRAME_SIZE, FRAME_SIZE):
            raise ValueError(f"frames must be (T, {FRAME_SIZE}, {FRAME_SIZE}), got {array.shape}")
        if not np.all((array >= 0.0) & (array <= 1.0)):
            raise ValueError("frame values must lie in [0, 1]")
        return array

    @model_validator(mode="after")
    def aligned(self) -> "SampleSequence":
        count = len(self.frames)
        if len(self.spectrograms) != count or len(self.boxes) != count:
            raise ValueError(
                f"misaligned sequence: {count} frames, {len(self.spectrograms)} spectrograms, {len(self.boxes)} boxes"
            )
        return self

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def select(self, indices: list[int]) -> "SampleSequence":
        return SampleSequence(
            sample_id=self.sample_id,
            object_index=self.object_index,
            frames=self.frames[indices],
            spectrograms=[self.spectrograms[i] for i in indices],
            boxes=[self.boxes[i] for i in indices],
            voxels=self.voxels,
            material=self.material,
        )


class SceneSample(ArrayModel):
    """Everything generated for one scene: a sequence per object plus audio."""

    sample_id: str
    seed: int
    split: Split
    config: dict
    sequences: list[SampleSequence]
    mixed: AudioClip
    unmixed: list[AudioClip]
    events: list[ImpactEvent] = []


def split_for_seed(seed: int) -> Split:
    """80/10/10 partition by seed: 0-7 train, 8 val, 9 test."""
    bucket = seed % 10
    if bucket < 8:
        return Split.TRAIN
    return Split.VAL if bucket == 8 else Split.TEST
