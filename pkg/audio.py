"""Impact-sound synthesis from per-material modal tables, track mixing and WAV I/O."""

import csv
import io
import logging
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.io import wavfile

from errors import FormatError, InvalidInputError, MissingPrerequisiteError
from models import DEFAULT_SAMPLE_RATE, AudioClip, Material, ModalModel, Mode
from state import atomic_write

logger = logging.getLogger(__name__)

MODAL_TABLE_PATH = Path(__file__).parent / "data" / "modal_tables.tsv"
MAX_AUDIBLE_HZ = 20000.0
PCM_SCALE = 32767


@lru_cache(maxsize=4)
def load_modal_table(path: Path = MODAL_TABLE_PATH) -> dict[Material, list[tuple[float, float, float]]]:
    """Read (frequency, damping, amplitude) rows per material, ordered by mode index."""
    if not Path(path).exists():
        raise MissingPrerequisiteError(f"modal table not found: {path}")
    with open(path, encoding="utf-8") as handle:
        rows = [line for line in handle if line.strip() and not line.lstrip().startswith("#")]
    table: dict[Material, list[tuple[int, float, float, float]]] = {}
    for row in csv.DictReader(rows, delimiter="\t"):
        try:
            material = Material(row["material"].strip())
            entry = (int(row["mode"]), float(row["frequency"]), float(row["damping"]), float(row["amplitude"]))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad modal table row {row}: {exc}") from exc
        table.setdefault(material, []).append(entry)
    missing = set(Material) - set(table)
    if missing:
        raise FormatError(f"modal table lacks materials: {sorted(m.value for m in missing)}")
    return {material: [entry[1:] for entry in sorted(entries)] for material, entries in table.items()}


def material_modal_params(material: Material, size_scale: float = 1.0) -> ModalModel:
    """Table lookup; frequencies scale by 1/size_scale (smaller objects ring higher).

    Modes pushed above 20 kHz are dropped.
    """
    if not 0.0 < size_scale <= 1.0:
        raise InvalidInputError(f"size_scale must lie in (0, 1], got {size_scale}")
    material = Material(material)
    modes = [
        Mode(frequency=frequency / size_scale, damping=damping, amplitude=amplitude, phase=0.0)
        for frequency, damping, amplitude in load_modal_table()[material]
        if frequency / size_scale <= MAX_AUDIBLE_HZ
    ]
    if not modes:
        raise InvalidInputError(f"no audible modes left for {material.value} at size_scale {size_scale}")
    return ModalModel(modes=modes, material=material)


def _peak_normalize(samples: np.ndarray) -> tuple[np.ndarray, float]:
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    if peak > 1.0:
        return samples / peak, 1.0 / peak
    return samples, 1.0


def synthesize_impact(
    model: ModalModel,
    impulse_gain: float = 1.0,
    duration: float = 0.5,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    normalize: bool = True,
) -> AudioClip:
    """Sum of damped sinusoids scaled by `impulse_gain`, peak-normalised if it clips.

    With normalize=False the raw clip is returned so callers summing many
    impacts keep their relative loudness and normalise once afterwards.
    """
    if duration <= 0:
        raise InvalidInputError(f"duration must be positive, got {duration}")
    if impulse_gain < 0:
        raise InvalidInputError(f"impulse_gain must be >= 0, got {impulse_gain}")
    if model.max_frequency * 2.0 > sample_rate:
        raise InvalidInputError(
            f"mode at {model.max_frequency:.1f} Hz is above Nyquist for {sample_rate} Hz sampling"
        )

    t = np.arange(round(duration * sample_rate), dtype=np.float64) / sample_rate
    freq = np.array([m.frequency for m in model.modes])[:, None]
    damping = np.array([m.damping for m in model.modes])[:, None]
    amplitude = np.array([m.amplitude for m in model.modes])[:, None]
    phase = np.array([m.phase for m in model.modes])[:, None]

    waves = amplitude * np.exp(-damping * t) * np.sin(2.0 * np.pi * freq * t + phase)
    samples, factor = impulse_gain * waves.sum(axis=0), 1.0
    if normalize:
        samples, factor = _peak_normalize(samples)
    return AudioClip(samples=samples, sample_rate=sample_rate, normalization=factor)


def mix_tracks(clips: Sequence[AudioClip], offsets: Sequence[float], normalize: bool = True) -> AudioClip:
    """Sample-wise sum of clips placed at `offsets` seconds."""
    if not clips:
        raise InvalidInputError("mix_tracks needs at least one clip")
    if len(clips) != len(offsets):
        raise InvalidInputError(f"{len(clips)} clips but {len(offsets)} offsets")
    sample_rate = clips[0].sample_rate
    if any(clip.sample_rate != sample_rate for clip in clips):
        raise InvalidInputError("cannot mix clips with different sample rates")
    if any(offset < 0 for offset in offsets):
        raise InvalidInputError("offsets must be >= 0")

    starts = [round(offset * sample_rate) for offset in offsets]
    length = max(start + len(clip.samples) for start, clip in zip(starts, clips))
    mixed = np.zeros(length, dtype=np.float64)
    for start, clip in zip(starts, clips):
        mixed[start:start + len(clip.samples)] += clip.samples

    factor = 1.0
    if normalize:
        mixed, factor = _peak_normalize(mixed)
    return AudioClip(samples=mixed, sample_rate=sample_rate, normalization=factor)


def normalize_jointly(clips: Sequence[AudioClip]) -> tuple[list[AudioClip], float]:
    """Scale every clip by one shared factor so the loudest peak is at most 1.

    Sums and loudness ratios between the clips survive; the factor is
    recorded on each returned clip.
    """
    peak = max((clip.peak for clip in clips), default=0.0)
    factor = 1.0 / peak if peak > 1.0 else 1.0
    scaled = [
        AudioClip(
            samples=clip.samples * factor,
            sample_rate=clip.sample_rate,
            normalization=clip.normalization * factor,
        )
        for clip in clips
    ]
    return scaled, factor


def encode_wav(clip: AudioClip) -> bytes:
    """16-bit PCM mono WAV bytes."""
    pcm = np.round(np.clip(clip.samples, -1.0, 1.0) * PCM_SCALE).astype("<i2")
    buffer = io.BytesIO()
    wavfile.write(buffer, clip.sample_rate, pcm)
    return buffer.getvalue()


def write_wav(path: Path, clip: AudioClip) -> None:
    atomic_write(Path(path), encode_wav(clip))


def read_wav(path: Path) -> AudioClip:
    """Read a WAV file as mono float samples in [-1, 1] (channels averaged)."""
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisiteError(f"WAV file not found: {path}")
    try:
        sample_rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM_SCALE
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / np.iinfo(np.int32).max
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 127.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise FormatError(f"WAV file {path} has no samples")
    return AudioClip(samples=samples, sample_rate=int(sample_rate))
