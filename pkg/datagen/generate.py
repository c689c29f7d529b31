"""Random scene configs and whole-dataset generation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from config import DatasetSpec
from datagen.scene import gen_scene_sequence, gen_single_view
from datagen.storage import entry_for, write_manifest, write_sample
from models import GRID_SIZE, Material, ObjectSpec, SceneConfig, SingleViewConfig
from voxel import VIEWS

logger = logging.getLogger(__name__)

SEEDS_PER_DATASET = 10000
HOLLOW_MATERIALS = (Material.OAK, Material.SLATE)
SOLID_MATERIALS = (Material.GRANITE, Material.MARBLE)


def scene_seed(dataset_seed: int, index: int) -> int:
    """Consecutive per-scene seeds, so the seed % 10 split is 80/10/10 over any 10 scenes."""
    return dataset_seed * SEEDS_PER_DATASET + index


def _pick(rng: np.random.Generator, options):
    return options[int(rng.integers(len(options)))]


def _pick_material(rng: np.random.Generator, spec: DatasetSpec, kind) -> Material:
    if spec.paired_materials:
        return _pick(rng, HOLLOW_MATERIALS if kind.is_hollow else SOLID_MATERIALS)
    return _pick(rng, list(Material))


def random_scene_config(spec: DatasetSpec, seed: int) -> SceneConfig:
    rng = np.random.default_rng(seed)
    sprite_scale = 2
    objects = []
    for _ in range(int(rng.integers(1, spec.max_objects + 1))):
        kind = _pick(rng, spec.shape_kinds)
        size_scale = float(rng.uniform(0.4, 1.0))
        room = spec.frame_size - GRID_SIZE * sprite_scale
        speed = rng.uniform(80.0, 200.0, size=2) * rng.choice([-1.0, 1.0], size=2)
        objects.append(
            ObjectSpec(
                kind=kind,
                size_scale=size_scale,
                material=_pick_material(rng, spec, kind),
                position=(float(rng.uniform(0, room)), float(rng.uniform(0, room))),
                velocity=(float(speed[0]), float(speed[1])),
                view=_pick(rng, VIEWS),
            )
        )
    return SceneConfig(
        objects=objects,
        frame_count=spec.frame_count,
        fps=spec.fps,
        rng_seed=seed,
        frame_size=spec.frame_size,
        sprite_scale=sprite_scale,
        gravity=spec.gravity,
    )


def random_single_view_config(spec: DatasetSpec, seed: int) -> SingleViewConfig:
    rng = np.random.default_rng(seed)
    kind = _pick(rng, spec.shape_kinds)
    return SingleViewConfig(
        kind=kind,
        size_scale=float(rng.uniform(0.4, 1.0)),
        material=_pick_material(rng, spec, kind),
        views=spec.views,
        distinct_view_sounds=spec.distinct_view_sounds,
        rng_seed=seed,
    )


def generate_sample(spec: DatasetSpec, seed: int):
    if spec.single_view:
        return gen_single_view(random_single_view_config(spec, seed))
    return gen_scene_sequence(random_scene_config(spec, seed))


def generate_dataset(spec: DatasetSpec, out_dir: Path, threads: int = 1) -> list[str]:
    """Generate `spec.n_scenes` samples into `out_dir`; the manifest is written last."""
    out_dir = Path(out_dir)
    seeds = [scene_seed(spec.seed, index) for index in range(spec.n_scenes)]

    def _build(seed: int):
        sample = generate_sample(spec, seed)
        write_sample(out_dir, sample)
        logger.debug("Generated %s (seed=%d, split=%s)", sample.sample_id, seed, sample.split.value)
        return entry_for(sample)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            entries = list(executor.map(_build, seeds))
    else:
        entries = [_build(seed) for seed in seeds]

    write_manifest(out_dir, entries)
    counts = {split: sum(1 for e in entries if e.split.value == split) for split in ("train", "val", "test")}
    logger.info("Generated %d sample(s) in %s (%s)", len(entries), out_dir, counts)
    return [entry.sample_id for entry in entries]
