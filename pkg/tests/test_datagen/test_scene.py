"""Tests for datagen/scene.py."""

import numpy as np
import pytest

from audio import material_modal_params
from datagen.scene import _object_track, gen_scene_sequence, gen_single_view, make_sprite
from datagen.shapes import gen_shape
from errors import ConfigurationError
from models import (
    DB_FLOOR,
    ImpactEvent,
    Material,
    ObjectSpec,
    SceneConfig,
    ShapeKind,
    SingleViewConfig,
    Split,
)


class TestSceneSequence:
    def test_aligned_outputs(self, one_object_scene):
        (seq,) = one_object_scene.sequences
        assert seq.frames.shape == (12, 88, 88)
        assert len(seq.spectrograms) == 12
        assert len(seq.boxes) == 12
        assert seq.material is Material.GRANITE

    def test_boxes_stay_on_canvas(self, one_object_scene):
        for box in one_object_scene.sequences[0].boxes:
            assert 0 <= box.x and box.x + box.w <= 160
            assert 0 <= box.y and box.y + box.h <= 160

    def test_object_moves(self, one_object_scene):
        boxes = one_object_scene.sequences[0].boxes
        assert (boxes[0].x, boxes[0].y) != (boxes[-1].x, boxes[-1].y)

    def test_wall_bounce_is_an_impact(self, one_object_scene):
        assert one_object_scene.events
        assert one_object_scene.events[0].kind == "wall"
        assert one_object_scene.events[0].gain > 0

    def test_silent_before_first_impact(self, one_object_scene):
        first = one_object_scene.events[0].time
        seq = one_object_scene.sequences[0]
        silent_frames = [i for i in range(seq.frame_count) if (i + 1) / 30.0 < first]
        assert silent_frames
        for i in silent_frames:
            assert np.all(seq.spectrograms[i].values == DB_FLOOR)
        assert any(np.any(s.values > DB_FLOOR) for s in seq.spectrograms)

    def test_audio_length_matches_video(self, one_object_scene):
        assert one_object_scene.mixed.duration == pytest.approx(12 / 30.0)
        assert len(one_object_scene.unmixed) == 1

    def test_split_from_seed(self, one_object_scene):
        assert one_object_scene.split is Split.TRAIN
        assert one_object_scene.seed == 3

    def test_deterministic(self, one_object_scene):
        again = gen_scene_sequence(SceneConfig(**one_object_scene.config))
        assert again.sample_id == one_object_scene.sample_id
        assert np.array_equal(again.sequences[0].frames, one_object_scene.sequences[0].frames)
        assert np.array_equal(again.mixed.samples, one_object_scene.mixed.samples)

    def test_objects_collide(self):
        cfg = SceneConfig(
            objects=[
                ObjectSpec(kind=ShapeKind.SOLID_BOX, size_scale=0.6, material=Material.OAK,
                           position=(10.0, 60.0), velocity=(150.0, 0.0)),
                ObjectSpec(kind=ShapeKind.SOLID_BOX, size_scale=0.6, material=Material.MARBLE,
                           position=(100.0, 60.0), velocity=(-150.0, 0.0)),
            ],
            frame_count=12,
        )
        sample = gen_scene_sequence(cfg)
        assert len(sample.sequences) == 2
        assert [s.object_index for s in sample.sequences] == [0, 1]
        assert any(event.kind == "object" for event in sample.events)

    def test_oversized_sprite(self):
        cfg = SceneConfig(
            objects=[ObjectSpec(kind=ShapeKind.SOLID_BOX, material=Material.OAK)],
            frame_count=10,
            frame_size=40,
        )
        with pytest.raises(ConfigurationError):
            gen_scene_sequence(cfg)

    def test_static_object_is_silent(self):
        cfg = SceneConfig(
            objects=[ObjectSpec(kind=ShapeKind.SOLID_BOX, size_scale=0.6, material=Material.GRANITE,
                                position=(40.0, 40.0), velocity=(0.0, 0.0))],
            frame_count=10,
        )
        sample = gen_scene_sequence(cfg)
        assert sample.events == []
        assert sample.unmixed[0].peak == 0.0
        assert all(np.all(s.values == DB_FLOOR) for s in sample.sequences[0].spectrograms)

    def test_mixed_is_sum_of_unmixed(self):
        cfg = SceneConfig(
            objects=[
                ObjectSpec(kind=ShapeKind.SOLID_BOX, size_scale=0.6, material=Material.OAK,
                           position=(10.0, 60.0), velocity=(150.0, 0.0)),
                ObjectSpec(kind=ShapeKind.SPHERE, size_scale=0.6, material=Material.GRANITE,
                           position=(100.0, 60.0), velocity=(-200.0, 40.0)),
            ],
            frame_count=20,
        )
        sample = gen_scene_sequence(cfg)
        total = sample.unmixed[0].samples + sample.unmixed[1].samples
        assert np.max(np.abs(sample.mixed.samples - total)) < 1e-6
        assert all(track.peak <= 1.0 for track in [sample.mixed, *sample.unmixed])
        assert {track.normalization for track in sample.unmixed} == {sample.mixed.normalization}


class TestObjectTrack:
    def test_louder_for_faster_impacts(self):
        cfg = SceneConfig(
            objects=[ObjectSpec(kind=ShapeKind.SOLID_BOX, size_scale=0.7, material=Material.GRANITE)],
            frame_count=60,
        )
        events = [
            ImpactEvent(time=0.1, object_index=0, speed=80.0, gain=80.0 * cfg.gain_per_speed),
            ImpactEvent(time=1.0, object_index=0, speed=200.0, gain=200.0 * cfg.gain_per_speed),
        ]
        track = _object_track(cfg, material_modal_params(Material.GRANITE, 0.7), events)
        rate = cfg.sample_rate
        slow = np.abs(track.samples[round(0.1 * rate):round(0.6 * rate)]).max()
        fast = np.abs(track.samples[round(1.0 * rate):round(1.5 * rate)]).max()
        assert fast / slow == pytest.approx(200.0 / 80.0, rel=1e-9)
        assert track.normalization == 1.0


class TestSprite:
    def test_cropped_and_scaled(self):
        sprite = make_sprite(gen_shape(ShapeKind.SOLID_BOX, 0.6), "front", 2)
        assert sprite.shape == (36, 36)
        assert np.all(sprite == 1.0)


class TestSingleView:
    def test_five_views(self):
        sample = gen_single_view(SingleViewConfig(kind=ShapeKind.L_BEAM, material=Material.SLATE, views=5))
        (seq,) = sample.sequences
        assert seq.frames.shape == (5, 88, 88)
        assert len(seq.spectrograms) == 5
        assert all(np.array_equal(s.values, seq.spectrograms[0].values) for s in seq.spectrograms)

    def test_distinct_view_sounds(self):
        cfg = SingleViewConfig(kind=ShapeKind.SPHERE, material=Material.OAK, views=5, distinct_view_sounds=True)
        seq = gen_single_view(cfg).sequences[0]
        assert not np.array_equal(seq.spectrograms[0].values, seq.spectrograms[1].values)

    def test_views_differ_for_asymmetric_shape(self):
        seq = gen_single_view(SingleViewConfig(kind=ShapeKind.L_BEAM, material=Material.OAK, views=5)).sequences[0]
        assert not np.array_equal(seq.frames[0], seq.frames[1])
