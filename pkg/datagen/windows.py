"""Strided sliding-window augmentation of frame sequences."""

import logging
from typing import Sequence

from errors import InvalidInputError
from models import SampleSequence

logger = logging.getLogger(__name__)


def window_indices(frame_count: int, stride: int, window: int = 10) -> list[list[int]]:
    """Frame indices of every window: start s, then s + stride, ..., advancing s by 1."""
    span = stride * (window - 1)
    return [list(range(start, start + span + 1, stride)) for start in range(frame_count - span)]


def augment_windows(seq: SampleSequence, stride: int, window: int = 10) -> list[SampleSequence]:
    """Windows of `window` (frame, spectrogram) pairs taking every stride-th frame.

    Returns an empty list when the sequence is too short.
    """
    if stride not in (1, 2, 3):
        raise InvalidInputError(f"stride must be 1, 2 or 3, got {stride}")
    return [seq.select(indices) for indices in window_indices(seq.frame_count, stride, window)]


def training_windows(seq: SampleSequence, strides: Sequence[int], window: int = 10) -> list[SampleSequence]:
    """All stride windows of a sequence; a sequence no longer than one window is used whole."""
    if seq.frame_count <= window:
        return [seq]
    windows = [w for stride in strides for w in augment_windows(seq, stride, window)]
    logger.debug("%s object %d: %d training window(s)", seq.sample_id, seq.object_index, len(windows))
    return windows
