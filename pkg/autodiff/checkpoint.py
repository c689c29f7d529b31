"""VXW1 weight container.

Layout (little-endian):
    b"VXW1"
    repeated until EOF:
        uint32 name_length, name (utf-8)
        uint32 rank, rank x uint32 extents
        prod(extents) x float32 payload
"""

import logging
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from errors import FormatError, MissingPrerequisiteError
from state import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"VXW1"
_U32 = struct.Struct("<I")


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        array = np.asarray(array)
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode_tensors(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {blob[:4]!r}, expected {MAGIC!r}")
    tensors: dict[str, np.ndarray] = {}
    offset = 4

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(blob):
            raise FormatError(f"checkpoint truncated at byte {offset} (needed {count} more)")
        chunk = blob[offset:offset + count]
        offset += count
        return chunk

    while offset < len(blob):
        (name_length,) = _U32.unpack(take(4))
        try:
            name = take(name_length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"checkpoint tensor name at byte {offset} is not utf-8") from exc
        (rank,) = _U32.unpack(take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        if any(extent == 0 for extent in shape):
            raise FormatError(f"tensor '{name}' has a zero extent {shape}")
        count = int(np.prod(shape, dtype=np.int64))
        payload = np.frombuffer(take(4 * count), dtype="<f4")
        if name in tensors:
            raise FormatError(f"duplicate tensor name '{name}'")
        tensors[name] = payload.reshape(shape).astype(np.float32)
    return tensors


def save_checkpoint(path: Path, tensors: Mapping[str, np.ndarray]) -> None:
    atomic_write(Path(path), encode_tensors(tensors))
    logger.info("Wrote checkpoint %s (%d tensors)", path, len(tensors))


def load_checkpoint(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisiteError(f"checkpoint not found: {path}")
    return decode_tensors(path.read_bytes())
