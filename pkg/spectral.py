"""STFT and mel log-power spectrograms aligned to video frames."""

import io
import logging
import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import librosa
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, model_validator

from errors import FormatError, InvalidInputError, MissingPrerequisiteError
from models import DB_FLOOR, FRAME_SIZE, N_MELS, SPECTROGRAM_FRAMES, AudioClip, Spectrogram
from state import atomic_write

logger = logging.getLogger(__name__)

MULTI_WINDOW_SECONDS = 0.03
MULTI_HOP_SECONDS = 0.0225
SINGLE_WINDOW_SECONDS = 3.0
# At 256 points and 44.1 kHz an FFT bin is about 172 Hz wide, wider than the
# lowest HTK mel bands. Five bands (0, 1, 4, 5 and 10, all below about 660 Hz)
# contain no bin centre and always sit at the -80 dB floor. Low modes such as
# oak's below 700 Hz land in the few bands that do hold a bin.
MULTI_FFT = 256
MULTI_HOP = 44
SINGLE_FFT = 4096
AMIN = 1e-8

SPG_MAGIC = b"SPG1"


class StftConfig(BaseModel):
    window_length: int
    hop: int

    @model_validator(mode="after")
    def check_hop(self) -> "StftConfig":
        if not 0 < self.hop <= self.window_length:
            raise ValueError(f"hop must satisfy 0 < hop <= window_length, got {self.hop}, {self.window_length}")
        return self

    @property
    def window(self) -> np.ndarray:
        """Symmetric Hann: 0.5 * (1 - cos(2 pi n / (N - 1)))."""
        return np.hanning(self.window_length)

    def frame_count(self, length: int) -> int:
        return (length - self.window_length) // self.hop + 1

    @classmethod
    def multi(cls) -> "StftConfig":
        return cls(window_length=MULTI_FFT, hop=MULTI_HOP)

    @classmethod
    def single(cls, length: int) -> "StftConfig":
        """Hop chosen so a window of `length` samples yields 25 frames."""
        return cls(window_length=SINGLE_FFT, hop=max(1, (length - SINGLE_FFT) // (SPECTROGRAM_FRAMES - 1)))


def stft(clip: AudioClip, cfg: StftConfig) -> np.ndarray:
    """Complex matrix (N/2 + 1 bins, M frames) of Hann-windowed frames."""
    samples = clip.samples
    if len(samples) < cfg.window_length:
        raise InvalidInputError(f"clip has {len(samples)} samples, shorter than one {cfg.window_length}-sample window")
    frames = sliding_window_view(samples, cfg.window_length)[:: cfg.hop]
    return np.fft.rfft(frames * cfg.window, axis=1).T


def mel_spectrogram(
    stft_out: np.ndarray,
    n_mels: int = N_MELS,
    f_low: float = 20.0,
    f_high: Optional[float] = None,
    sample_rate: int = 44100,
) -> Spectrogram:
    """Mel-pooled power in dB (-80 dB floor), truncated or floor-padded to 25 frames."""
    bins = stft_out.shape[0]
    if bins < n_mels:
        raise InvalidInputError(f"{bins} STFT bins cannot feed {n_mels} mel bands")
    f_high = sample_rate / 2 if f_high is None else f_high
    with warnings.catch_warnings():
        # The empty low bands noted at MULTI_FFT make librosa warn; they floor at -80 dB.
        warnings.simplefilter("ignore", UserWarning)
        filterbank = librosa.filters.mel(
            sr=sample_rate, n_fft=2 * (bins - 1), n_mels=n_mels, fmin=f_low, fmax=f_high, htk=True, norm=None
        )
    power = np.abs(stft_out) ** 2
    db = librosa.power_to_db(filterbank @ power, ref=1.0, amin=AMIN, top_db=None)

    frames = db.shape[1]
    if frames >= SPECTROGRAM_FRAMES:
        db = db[:, :SPECTROGRAM_FRAMES]
    else:
        db = np.pad(db, ((0, 0), (0, SPECTROGRAM_FRAMES - frames)), constant_values=DB_FLOOR)
    return Spectrogram(values=db.astype(np.float32), mel_low=f_low, mel_high=f_high)


def clip_spectrogram(clip: AudioClip, cfg: StftConfig) -> Spectrogram:
    return mel_spectrogram(stft(clip, cfg), sample_rate=clip.sample_rate)


def _window(samples: np.ndarray, start: int, length: int) -> np.ndarray:
    chunk = samples[start:start + length]
    if len(chunk) < length:
        chunk = np.pad(chunk, (0, length - len(chunk)))
    return chunk


def multi_window_starts(length: int, sample_rate: int) -> list[int]:
    """Start samples of successive 0.03 s windows advanced by 0.0225 s (25% overlap)."""
    window = round(MULTI_WINDOW_SECONDS * sample_rate)
    hop = MULTI_HOP_SECONDS * sample_rate
    count = max(1, math.floor((length - window) / hop) + 1)
    return [round(k * hop) for k in range(count)]


def frame_window_starts(sample_rate: int, video_fps: float, frame_count: int) -> list[int]:
    """One window start per video frame timestamp i / fps."""
    return [round(i / video_fps * sample_rate) for i in range(frame_count)]


def segment_audio(
    track: AudioClip,
    mode: str = "multi",
    video_fps: Optional[float] = None,
    frame_count: Optional[int] = None,
    threads: int = 1,
) -> list[Spectrogram]:
    """Cut a track into spectrogram windows.

    single: one 3 s window. multi: 0.03 s windows; successive with 25%
    overlap when `video_fps` is None, otherwise one per video frame
    (`frame_count` frames, default the track duration times fps). Windows
    running past the end are zero-padded.
    """
    if len(track.samples) == 0:
        raise InvalidInputError("cannot segment an empty track")
    rate = track.sample_rate
    if mode == "single":
        length = round(SINGLE_WINDOW_SECONDS * rate)
        window = AudioClip(samples=_window(track.samples, 0, length), sample_rate=rate)
        return [clip_spectrogram(window, StftConfig.single(length))]
    if mode != "multi":
        raise InvalidInputError(f"unknown segmentation mode '{mode}'")

    length = round(MULTI_WINDOW_SECONDS * rate)
    if video_fps is None:
        starts = multi_window_starts(len(track.samples), rate)
    else:
        if video_fps <= 0:
            raise InvalidInputError(f"video_fps must be positive, got {video_fps}")
        count = frame_count if frame_count is not None else max(1, math.floor(track.duration * video_fps))
        starts = frame_window_starts(rate, video_fps, count)
    cfg = StftConfig.multi()

    def _one(start: int) -> Spectrogram:
        return clip_spectrogram(AudioClip(samples=_window(track.samples, start, length), sample_rate=rate), cfg)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            spectrograms = list(executor.map(_one, starts))
    else:
        spectrograms = [_one(start) for start in starts]
    logger.debug("Segmented %.3f s track into %d window(s)", track.duration, len(spectrograms))
    return spectrograms


def spectrogram_to_input(spectrogram: Spectrogram, size: int = FRAME_SIZE) -> np.ndarray:
    """Map dB to [0, 1] via (dB + 80) / 80 and zero-pad to size x size (zero = floor)."""
    scaled = np.clip((spectrogram.values - DB_FLOOR) / -DB_FLOOR, 0.0, 1.0)
    canvas = np.zeros((size, size), dtype=np.float32)
    canvas[: scaled.shape[0], : scaled.shape[1]] = scaled
    return canvas


def spectrogram_to_csv(spectrogram: Spectrogram) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, spectrogram.values, delimiter=",", fmt="%.4f")
    return buffer.getvalue()


def encode_grid(values: np.ndarray) -> bytes:
    """SPG1: magic, uint32 rank, uint32 extents, float32 little-endian payload."""
    values = np.asarray(values)
    header = SPG_MAGIC + struct.pack("<I", values.ndim) + struct.pack(f"<{values.ndim}I", *values.shape)
    return header + np.ascontiguousarray(values, dtype="<f4").tobytes()


def decode_grid(blob: bytes) -> np.ndarray:
    if blob[:4] != SPG_MAGIC:
        raise FormatError(f"bad SPG magic {blob[:4]!r}")
    if len(blob) < 8:
        raise FormatError("SPG header truncated")
    (rank,) = struct.unpack("<I", blob[4:8])
    header_end = 8 + 4 * rank
    if len(blob) < header_end:
        raise FormatError("SPG extents truncated")
    shape = struct.unpack(f"<{rank}I", blob[8:header_end])
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    if len(blob) - header_end != expected:
        raise FormatError(f"SPG payload has {len(blob) - header_end} bytes, expected {expected}")
    return np.frombuffer(blob[header_end:], dtype="<f4").reshape(shape).astype(np.float32)


def write_spectrograms(path: Path, spectrograms: list[Spectrogram]) -> None:
    atomic_write(Path(path), encode_grid(np.stack([s.values for s in spectrograms])))


def read_spectrograms(path: Path) -> list[Spectrogram]:
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisiteError(f"spectrogram file not found: {path}")
    grid = decode_grid(path.read_bytes())
    if grid.ndim != 3 or grid.shape[1:] != (N_MELS, SPECTROGRAM_FRAMES):
        raise FormatError(f"{path} holds a {grid.shape} grid, expected (T, {N_MELS}, {SPECTROGRAM_FRAMES})")
    return [Spectrogram(values=values) for values in grid]
