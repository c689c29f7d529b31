"""Procedural voxel shapes on the 30^3 grid.

Every shape is centred on the grid and spans 15 * size_scale voxels from
the centre along each axis it fills. Hollow variants keep the outer hull
of their solid counterpart, so they cast identical axis silhouettes.
"""

import numpy as np

from errors import InvalidInputError
from models import GRID_SIZE, Material, ShapeKind, VoxelGrid

WALL_THICKNESS = 2.0
_CENTER = GRID_SIZE / 2


def _voxel_centers() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coords = np.arange(GRID_SIZE) + 0.5 - _CENTER
    return np.meshgrid(coords, coords, coords, indexing="ij")


def _box(depth, vertical, horizontal, half: float) -> np.ndarray:
    return (np.abs(depth) <= half) & (np.abs(vertical) <= half) & (np.abs(horizontal) <= half)


def _ball(depth, vertical, horizontal, radius: float) -> np.ndarray:
    return np.sqrt(depth ** 2 + vertical ** 2 + horizontal ** 2) <= radius


def gen_shape(kind: ShapeKind, size_scale: float = 1.0, material: Material | None = None) -> VoxelGrid:
    if not 0.3 < size_scale <= 1.0:
        raise InvalidInputError(f"size_scale must lie in (0.3, 1], got {size_scale}")
    kind = ShapeKind(kind)
    depth, vertical, horizontal = _voxel_centers()
    half = _CENTER * size_scale

    if kind is ShapeKind.SOLID_BOX:
        occupied = _box(depth, vertical, horizontal, half)
    elif kind is ShapeKind.HOLLOW_BOX:
        occupied = _box(depth, vertical, horizontal, half) & ~_box(depth, vertical, horizontal, half - WALL_THICKNESS)
    elif kind is ShapeKind.SPHERE:
        occupied = _ball(depth, vertical, horizontal, half)
    elif kind is ShapeKind.SHELL_SPHERE:
        occupied = _ball(depth, vertical, horizontal, half) & ~_ball(depth, vertical, horizontal, half - WALL_THICKNESS)
    elif kind is ShapeKind.L_BEAM:
        arm = max(WALL_THICKNESS, 2.0 * half / 3.0)
        hull = _box(depth, vertical, horizontal, half)
        # Vertical index grows downward: the foot runs along the bottom.
        occupied = hull & ((vertical >= half - arm) | (horizontal <= -half + arm))
    elif kind is ShapeKind.TABLE_LIKE:
        hull = _box(depth, vertical, horizontal, half)
        top = vertical <= -half + max(WALL_THICKNESS, half / 4.0)
        leg = max(WALL_THICKNESS, half / 4.0)
        legs = (np.abs(np.abs(depth) - half) <= leg) & (np.abs(np.abs(horizontal) - half) <= leg)
        occupied = hull & (top | legs)
    else:
        raise InvalidInputError(f"unknown shape kind {kind}")

    return VoxelGrid(occupancy=occupied.astype(np.float32), material=material)
