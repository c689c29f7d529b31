"""Tests for models.py."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from models import (
    GRID_SIZE,
    AudioClip,
    BoundingBox,
    Material,
    ModalModel,
    Mode,
    ObjectSpec,
    SampleSequence,
    SceneConfig,
    ShapeKind,
    SingleViewConfig,
    Spectrogram,
    Split,
    VoxelGrid,
    split_for_seed,
)


def make_sequence(count=3):
    return SampleSequence(
        sample_id="scene-test",
        frames=np.zeros((count, 88, 88)),
        spectrograms=[Spectrogram.floor() for _ in range(count)],
        boxes=[BoundingBox(x=0, y=0, w=10, h=10) for _ in range(count)],
        voxels=VoxelGrid.empty(),
        material=Material.OAK,
    )


class TestMaterial:
    def test_code_round_trip(self):
        for material in Material:
            assert Material.from_code(material.code) is material

    def test_hollow_kinds(self):
        assert ShapeKind.HOLLOW_BOX.is_hollow
        assert ShapeKind.SHELL_SPHERE.is_hollow
        assert not ShapeKind.SOLID_BOX.is_hollow


class TestMode:
    def test_inaudible_rejected(self):
        with pytest.raises(ValidationError):
            Mode(frequency=25000.0)

    def test_negative_damping_rejected(self):
        with pytest.raises(ValidationError):
            Mode(frequency=440.0, damping=-1.0)

    def test_phase_wrapped(self):
        assert math.isclose(Mode(frequency=440.0, phase=2.5 * math.pi).phase, 0.5 * math.pi)

    def test_modal_model_sorted(self):
        model = ModalModel(modes=[Mode(frequency=900.0), Mode(frequency=300.0)], material=Material.OAK)
        assert [m.frequency for m in model.modes] == [300.0, 900.0]
        assert model.max_frequency == 900.0

    def test_modal_model_needs_a_mode(self):
        with pytest.raises(ValidationError):
            ModalModel(modes=[], material=Material.OAK)


class TestAudioClip:
    def test_duration_and_peak(self):
        clip = AudioClip(samples=[0.0, -0.5, 0.25, 0.0], sample_rate=4)
        assert clip.duration == 1.0
        assert clip.peak == 0.5

    def test_two_dimensional_rejected(self):
        with pytest.raises(ValidationError):
            AudioClip(samples=np.zeros((2, 2)))

    def test_silence(self):
        clip = AudioClip.silence(0.5, sample_rate=1000)
        assert len(clip.samples) == 500
        assert clip.peak == 0.0


class TestSpectrogram:
    def test_shape_enforced(self):
        with pytest.raises(ValidationError):
            Spectrogram(values=np.zeros((64, 24)))

    def test_floor_applied(self):
        spectrogram = Spectrogram(values=np.full((64, 25), -200.0))
        assert spectrogram.values.min() == -80.0

    def test_non_finite_rejected(self):
        values = np.zeros((64, 25))
        values[0, 0] = np.nan
        with pytest.raises(ValidationError):
            Spectrogram(values=values)


class TestVoxelGrid:
    def test_shape_enforced(self):
        with pytest.raises(ValidationError):
            VoxelGrid(occupancy=np.zeros((29, 30, 30)))

    def test_range_enforced(self):
        with pytest.raises(ValidationError):
            VoxelGrid(occupancy=np.full((GRID_SIZE,) * 3, 1.5))

    def test_binary_and_count(self):
        occupancy = np.zeros((GRID_SIZE,) * 3)
        occupancy[0, 0, :5] = 1.0
        grid = VoxelGrid(occupancy=occupancy)
        assert grid.is_binary
        assert grid.occupied_count == 5

    def test_soft_grid_not_binary(self):
        assert not VoxelGrid(occupancy=np.full((GRID_SIZE,) * 3, 0.5)).is_binary


class TestBoundingBox:
    def test_zero_width_rejected(self):
        with pytest.raises(ValidationError):
            BoundingBox(x=0, y=0, w=0, h=3)


class TestSceneConfig:
    def test_sample_id_stable(self):
        spec = ObjectSpec(kind=ShapeKind.SPHERE, material=Material.MARBLE)
        a = SceneConfig(objects=[spec], rng_seed=5)
        b = SceneConfig(objects=[spec], rng_seed=5)
        assert a.sample_id() == b.sample_id()
        assert a.sample_id().startswith("scene-")

    def test_sample_id_depends_on_seed(self):
        spec = ObjectSpec(kind=ShapeKind.SPHERE, material=Material.MARBLE)
        assert SceneConfig(objects=[spec], rng_seed=1).sample_id() != SceneConfig(objects=[spec], rng_seed=2).sample_id()

    def test_short_sequence_rejected(self):
        spec = ObjectSpec(kind=ShapeKind.SPHERE, material=Material.MARBLE)
        with pytest.raises(ValidationError):
            SceneConfig(objects=[spec], frame_count=9)

    def test_too_many_objects(self):
        spec = ObjectSpec(kind=ShapeKind.SPHERE, material=Material.MARBLE)
        with pytest.raises(ValidationError):
            SceneConfig(objects=[spec] * 4)

    def test_size_scale_range(self):
        with pytest.raises(ValidationError):
            ObjectSpec(kind=ShapeKind.SPHERE, material=Material.MARBLE, size_scale=0.2)

    def test_duration(self):
        spec = ObjectSpec(kind=ShapeKind.SPHERE, material=Material.MARBLE)
        assert SceneConfig(objects=[spec], frame_count=30, fps=30.0).duration == 1.0

    def test_single_view_counts(self):
        with pytest.raises(ValidationError):
            SingleViewConfig(kind=ShapeKind.SPHERE, material=Material.OAK, views=3)
        assert SingleViewConfig(kind=ShapeKind.SPHERE, material=Material.OAK).sample_id().startswith("single-")


class TestSampleSequence:
    def test_misaligned_rejected(self):
        with pytest.raises(ValidationError):
            SampleSequence(
                sample_id="x",
                frames=np.zeros((3, 88, 88)),
                spectrograms=[Spectrogram.floor()] * 2,
                boxes=[BoundingBox(x=0, y=0, w=1, h=1)] * 3,
                voxels=VoxelGrid.empty(),
                material=Material.OAK,
            )

    def test_frame_range_enforced(self):
        with pytest.raises(ValidationError):
            SampleSequence(
                sample_id="x",
                frames=np.full((1, 88, 88), 2.0),
                spectrograms=[Spectrogram.floor()],
                boxes=[BoundingBox(x=0, y=0, w=1, h=1)],
                voxels=VoxelGrid.empty(),
                material=Material.OAK,
            )

    def test_select(self):
        seq = make_sequence(5)
        sub = seq.select([0, 2, 4])
        assert sub.frame_count == 3
        assert sub.material is Material.OAK


class TestSplit:
    @pytest.mark.parametrize("seed,split", [(0, Split.TRAIN), (7, Split.TRAIN), (18, Split.VAL), (29, Split.TEST)])
    def test_split_for_seed(self, seed, split):
        assert split_for_seed(seed) is split

    def test_eighty_ten_ten(self):
        splits = [split_for_seed(seed) for seed in range(1000)]
        assert splits.count(Split.TRAIN) == 800
        assert splits.count(Split.VAL) == 100
        assert splits.count(Split.TEST) == 100
