"""Voxel grids: thresholding, IoU, silhouette projection and file formats.

Grid axes are (depth, vertical, horizontal); vertical index 0 is the top.
"""

import logging
import re
import struct
from pathlib import Path

import numpy as np
from scipy import ndimage

from errors import FormatError, InvalidInputError, MissingPrerequisiteError
from models import FRAME_SIZE, GRID_SIZE, MATERIAL_NONE_CODE, Material, VoxelGrid
from state import atomic_write

logger = logging.getLogger(__name__)

VXG_MAGIC = b"VXG1"
VIEWS = ("front", "side", "top")
_ROTATED = re.compile(r"^rotated:(-?\d+(?:\.\d+)?)$")
_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def binarize(grid: VoxelGrid, t: float = 0.5) -> VoxelGrid:
    """occupancy > t becomes 1, everything else 0."""
    return VoxelGrid(occupancy=(grid.occupancy > t).astype(np.float32), material=grid.material)


def iou_arrays(pred: np.ndarray, gt: np.ndarray, t: float) -> float:
    """IoU of {pred > t} against {gt == 1}; 1.0 when both sets are empty."""
    if pred.shape != gt.shape:
        raise InvalidInputError(f"iou shapes differ: {pred.shape} vs {gt.shape}")
    if not np.all((gt == 0) | (gt == 1)):
        raise InvalidInputError("ground-truth occupancy must be binary")
    predicted = pred > t
    truth = gt == 1
    union = np.count_nonzero(predicted | truth)
    if union == 0:
        return 1.0
    return np.count_nonzero(predicted & truth) / union


def iou(pred: VoxelGrid, gt: VoxelGrid, t: float = 0.5) -> float:
    if not 0.0 < t < 1.0:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {t}")
    return iou_arrays(pred.occupancy, gt.occupancy, t)


def fit_to_square(image: np.ndarray, out_size: int = FRAME_SIZE) -> np.ndarray:
    """Nearest-neighbour resize keeping aspect ratio, centred on a zero square."""
    height, width = image.shape
    scale = out_size / max(height, width)
    new_h = max(1, min(out_size, round(height * scale)))
    new_w = max(1, min(out_size, round(width * scale)))
    rows = np.minimum((np.arange(new_h) / scale).astype(int), height - 1)
    cols = np.minimum((np.arange(new_w) / scale).astype(int), width - 1)
    canvas = np.zeros((out_size, out_size), dtype=np.float32)
    top = (out_size - new_h) // 2
    left = (out_size - new_w) // 2
    canvas[top:top + new_h, left:left + new_w] = image[np.ix_(rows, cols)]
    return canvas


def project(occupancy: np.ndarray, view: str = "front") -> np.ndarray:
    """Orthographic max-projection at grid resolution, rows top to bottom."""
    if view == "front":
        return occupancy.max(axis=0)
    if view == "side":
        return occupancy.max(axis=2).T
    if view == "top":
        return occupancy.max(axis=1)
    match = _ROTATED.match(view)
    if match:
        angle = float(match.group(1))
        # Nearest-voxel rotation about the vertical axis keeps the grid binary.
        turned = ndimage.rotate(occupancy, angle, axes=(0, 2), reshape=False, order=0, mode="constant", cval=0.0)
        return turned.max(axis=0)
    raise InvalidInputError(f"unknown view '{view}', expected one of {VIEWS} or 'rotated:<degrees>'")


def project_silhouette(grid: VoxelGrid, view: str = "front", out_size: int = FRAME_SIZE) -> np.ndarray:
    """Foreground 1.0 on background 0.0, scaled to out_size x out_size."""
    if not grid.is_binary:
        raise InvalidInputError("silhouette projection needs a binary grid")
    return fit_to_square(project(grid.occupancy, view).astype(np.float32), out_size)


def encode_voxels(grid: VoxelGrid) -> bytes:
    """VXG1: magic, material byte (0-3 or 255 for none), 27000 float32 values."""
    code = MATERIAL_NONE_CODE if grid.material is None else grid.material.code
    return VXG_MAGIC + struct.pack("<B", code) + np.ascontiguousarray(grid.occupancy, dtype="<f4").tobytes()


def decode_voxels(blob: bytes) -> VoxelGrid:
    expected = len(VXG_MAGIC) + 1 + 4 * GRID_SIZE ** 3
    if blob[:4] != VXG_MAGIC:
        raise FormatError(f"bad voxel magic {blob[:4]!r}, expected {VXG_MAGIC!r}")
    if len(blob) != expected:
        raise FormatError(f"voxel file has {len(blob)} bytes, expected {expected}")
    code = blob[4]
    if code == MATERIAL_NONE_CODE:
        material = None
    elif code < len(Material):
        material = Material.from_code(code)
    else:
        raise FormatError(f"unknown material byte {code}")
    occupancy = np.frombuffer(blob[5:], dtype="<f4").reshape((GRID_SIZE,) * 3).astype(np.float32)
    try:
        return VoxelGrid(occupancy=occupancy, material=material)
    except ValueError as exc:
        raise FormatError(f"voxel payload invalid: {exc}") from exc


def write_voxels(path: Path, grid: VoxelGrid) -> None:
    atomic_write(Path(path), encode_voxels(grid))


def read_voxels(path: Path) -> VoxelGrid:
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisiteError(f"voxel file not found: {path}")
    return decode_voxels(path.read_bytes())


def encode_pgm(image: np.ndarray) -> bytes:
    """Binary 8-bit PGM of a [0, 1] grayscale image."""
    height, width = image.shape
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def decode_pgm(blob: bytes) -> np.ndarray:
    header = _PGM_HEADER.match(blob)
    if header is None:
        raise FormatError("not a binary PGM (P5) image")
    width, height, maxval = (int(group) for group in header.groups())
    payload = blob[header.end():]
    if maxval != 255 or len(payload) != width * height:
        raise FormatError(f"PGM payload has {len(payload)} bytes for {width}x{height} at maxval {maxval}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.float32) / 255.0


def write_pgm(path: Path, image: np.ndarray) -> None:
    atomic_write(Path(path), encode_pgm(image))


def read_pgm(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisiteError(f"image not found: {path}")
    return decode_pgm(path.read_bytes())
