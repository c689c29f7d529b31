"""Scene simulation: moving silhouette sprites, impact events and aligned audio."""

import logging
from dataclasses import dataclass, field

import numpy as np

from audio import material_modal_params, mix_tracks, normalize_jointly, synthesize_impact
from datagen.shapes import gen_shape
from errors import ConfigurationError
from models import (
    AudioClip,
    BoundingBox,
    ImpactEvent,
    ModalModel,
    Mode,
    SampleSequence,
    SceneConfig,
    SceneSample,
    SingleViewConfig,
    VoxelGrid,
    split_for_seed,
)
from spectral import segment_audio
from voxel import fit_to_square, project, project_silhouette

logger = logging.getLogger(__name__)

SUBSTEPS = 8
SINGLE_VIEW_ANGLES = (0, 72, 144, 216, 288)


@dataclass
class _Body:
    sprite: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    events: list[ImpactEvent] = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.sprite.shape[0]

    @property
    def width(self) -> int:
        return self.sprite.shape[1]

    def box(self) -> BoundingBox:
        x, y = np.round(self.position).astype(int)
        return BoundingBox(x=int(x), y=int(y), w=self.width, h=self.height)


def make_sprite(grid: VoxelGrid, view: str, scale: int) -> np.ndarray:
    """Silhouette cropped to its nonzero bounding box and upscaled by `scale`."""
    silhouette = project(grid.occupancy, view)
    rows = np.flatnonzero(silhouette.any(axis=1))
    cols = np.flatnonzero(silhouette.any(axis=0))
    cropped = silhouette[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    return np.kron(cropped, np.ones((scale, scale), dtype=np.float32)).astype(np.float32)


def _overlaps(a: _Body, b: _Body) -> bool:
    ax, ay = a.position
    bx, by = b.position
    return ax < bx + b.width and bx < ax + a.width and ay < by + b.height and by < ay + a.height


def _reflect(body: _Body, axis: int, limit: float) -> float:
    """Bounce off the walls along one axis; returns the normal speed of a hit (0 if none)."""
    position = body.position[axis]
    if position < 0:
        body.position[axis] = -position
    elif position > limit:
        body.position[axis] = 2 * limit - position
    else:
        return 0.0
    body.position[axis] = min(max(body.position[axis], 0.0), limit)
    speed = abs(body.velocity[axis])
    body.velocity[axis] = -body.velocity[axis]
    return speed


def _record(cfg: SceneConfig, body: _Body, index: int, time: float, speed: float, kind: str) -> None:
    if speed >= cfg.min_impact_speed:
        body.events.append(
            ImpactEvent(time=time, object_index=index, speed=speed, gain=speed * cfg.gain_per_speed, kind=kind)
        )


def _step(cfg: SceneConfig, bodies: list[_Body], touching: set[tuple[int, int]], time: float, dt: float) -> None:
    for index, body in enumerate(bodies):
        body.velocity[1] += cfg.gravity * dt
        body.position += body.velocity * dt
        limits = (cfg.frame_size - body.width, cfg.frame_size - body.height)
        for axis in (0, 1):
            speed = _reflect(body, axis, limits[axis])
            if speed:
                _record(cfg, body, index, time, speed, "wall")

    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            overlapping = _overlaps(bodies[i], bodies[j])
            if overlapping and (i, j) not in touching:
                # Equal masses, elastic: velocities swap.
                speed = float(np.linalg.norm(bodies[i].velocity - bodies[j].velocity))
                bodies[i].velocity, bodies[j].velocity = bodies[j].velocity.copy(), bodies[i].velocity.copy()
                _record(cfg, bodies[i], i, time, speed, "object")
                _record(cfg, bodies[j], j, time, speed, "object")
                touching.add((i, j))
            elif not overlapping:
                touching.discard((i, j))


def _composite(cfg: SceneConfig, bodies: list[_Body]) -> np.ndarray:
    canvas = np.zeros((cfg.frame_size, cfg.frame_size), dtype=np.float32)
    for body in bodies:
        box = body.box()
        region = canvas[box.y:box.y + box.h, box.x:box.x + box.w]
        np.maximum(region, body.sprite, out=region)
    return canvas


def _object_track(cfg: SceneConfig, model: ModalModel, events: list[ImpactEvent]) -> AudioClip:
    """Unnormalised sum of the object's impact clips; loudness follows impact speed."""
    length = round(cfg.duration * cfg.sample_rate)
    samples = np.zeros(length, dtype=np.float64)
    for event in events:
        clip = synthesize_impact(model, event.gain, cfg.impact_duration, cfg.sample_rate, normalize=False)
        start = round(event.time * cfg.sample_rate)
        if start >= length:
            continue
        stop = min(length, start + len(clip.samples))
        samples[start:stop] += clip.samples[: stop - start]
    return AudioClip(samples=samples, sample_rate=cfg.sample_rate)


def gen_scene_sequence(cfg: SceneConfig, threads: int = 1) -> SceneSample:
    """Simulate a scene and return one aligned SampleSequence per object plus audio.

    Sprites move ballistically on a square canvas with 8 sub-steps per
    frame. Wall bounces and sprite-overlap onsets are impacts; each audible
    impact adds a modal clip (gain proportional to speed) to that object's
    unmixed track.
    """
    grids = [gen_shape(spec.kind, spec.size_scale, spec.material) for spec in cfg.objects]
    bodies = []
    for spec, grid in zip(cfg.objects, grids):
        sprite = make_sprite(grid, spec.view, cfg.sprite_scale)
        if max(sprite.shape) >= cfg.frame_size:
            raise ConfigurationError(
                f"{spec.kind.value} sprite {sprite.shape} does not fit a {cfg.frame_size}px frame"
            )
        limits = np.array([cfg.frame_size - sprite.shape[1], cfg.frame_size - sprite.shape[0]], dtype=np.float64)
        position = np.clip(np.array(spec.position, dtype=np.float64), 0.0, limits)
        bodies.append(_Body(sprite=sprite, position=position, velocity=np.array(spec.velocity, dtype=np.float64)))

    dt = 1.0 / cfg.fps / SUBSTEPS
    touching: set[tuple[int, int]] = set()
    frames: list[list[np.ndarray]] = [[] for _ in bodies]
    boxes: list[list[BoundingBox]] = [[] for _ in bodies]
    for frame_index in range(cfg.frame_count):
        canvas = _composite(cfg, bodies)
        for index, body in enumerate(bodies):
            box = body.box()
            crop = canvas[box.y:box.y + box.h, box.x:box.x + box.w]
            frames[index].append(fit_to_square(crop))
            boxes[index].append(box)
        for sub in range(SUBSTEPS):
            _step(cfg, bodies, touching, (frame_index + (sub + 1) / SUBSTEPS) / cfg.fps, dt)

    sample_id = cfg.sample_id()
    raw_tracks = [
        _object_track(
            cfg,
            material_modal_params(spec.material, spec.size_scale),
            [event for event in body.events if event.time < cfg.duration],
        )
        for spec, body in zip(cfg.objects, bodies)
    ]
    # One factor for the mix and every track keeps mixed == sum(unmixed).
    raw_mixed = mix_tracks(raw_tracks, [0.0] * len(raw_tracks), normalize=False)
    (mixed, *unmixed), factor = normalize_jointly([raw_mixed, *raw_tracks])

    sequences = []
    for index, (spec, grid, track) in enumerate(zip(cfg.objects, grids, unmixed)):
        spectrograms = segment_audio(track, "multi", video_fps=cfg.fps, frame_count=cfg.frame_count, threads=threads)
        sequences.append(
            SampleSequence(
                sample_id=sample_id,
                object_index=index,
                frames=np.stack(frames[index]),
                spectrograms=spectrograms,
                boxes=boxes[index],
                voxels=grid,
                material=spec.material,
            )
        )

    events = sorted((e for body in bodies for e in body.events if e.time < cfg.duration), key=lambda e: e.time)
    logger.debug(
        "Scene %s: %d object(s), %d impact(s), audio scale %.4f", sample_id, len(bodies), len(events), factor
    )
    return SceneSample(
        sample_id=sample_id,
        seed=cfg.rng_seed,
        split=split_for_seed(cfg.rng_seed),
        config=cfg.model_dump(mode="json"),
        sequences=sequences,
        mixed=mixed,
        unmixed=unmixed,
        events=events,
    )


def _hit_point_model(model: ModalModel, rng: np.random.Generator) -> ModalModel:
    """Rescale mode amplitudes to mimic striking a different point on the object."""
    weights = rng.uniform(0.3, 1.0, size=len(model.modes))
    modes = [
        Mode(frequency=m.frequency, damping=m.damping, amplitude=m.amplitude * w, phase=m.phase)
        for m, w in zip(model.modes, weights)
    ]
    return ModalModel(modes=modes, material=model.material)


def gen_single_view(cfg: SingleViewConfig) -> SceneSample:
    """One object seen from 1 or 5 views, each paired with a 3 s impact spectrogram.

    Views are the front projection plus rotations about the vertical axis.
    The same clip serves every view unless `distinct_view_sounds` is set.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    grid = gen_shape(cfg.kind, cfg.size_scale, cfg.material)
    model = material_modal_params(cfg.material, cfg.size_scale)
    gain = float(rng.uniform(0.5, 1.0))
    base_clip = synthesize_impact(model, gain, cfg.duration, cfg.sample_rate)

    frames, boxes, spectrograms = [], [], []
    for view_index in range(cfg.views):
        angle = SINGLE_VIEW_ANGLES[view_index]
        view = "front" if angle == 0 else f"rotated:{angle}"
        image = project_silhouette(grid, view)
        rows = np.flatnonzero(image.any(axis=1))
        cols = np.flatnonzero(image.any(axis=0))
        frames.append(image)
        boxes.append(
            BoundingBox(x=int(cols[0]), y=int(rows[0]), w=int(cols[-1] - cols[0] + 1), h=int(rows[-1] - rows[0] + 1))
        )
        if cfg.distinct_view_sounds and view_index > 0:
            clip = synthesize_impact(_hit_point_model(model, rng), gain, cfg.duration, cfg.sample_rate)
        else:
            clip = base_clip
        spectrograms.extend(segment_audio(clip, "single"))

    sample_id = cfg.sample_id()
    sequence = SampleSequence(
        sample_id=sample_id,
        frames=np.stack(frames),
        spectrograms=spectrograms,
        boxes=boxes,
        voxels=grid,
        material=cfg.material,
    )
    return SceneSample(
        sample_id=sample_id,
        seed=cfg.rng_seed,
        split=split_for_seed(cfg.rng_seed),
        config=cfg.model_dump(mode="json"),
        sequences=[sequence],
        mixed=base_clip,
        unmixed=[base_clip],
        events=[ImpactEvent(time=0.0, object_index=0, speed=0.0, gain=gain, kind="strike")],
    )
