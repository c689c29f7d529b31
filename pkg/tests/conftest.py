"""Shared test fixtures."""

from pathlib import Path

import numpy as np
import pytest

from config import DatasetSpec, RunConfig, Variant
from datagen.generate import generate_dataset
from datagen.scene import gen_scene_sequence
from models import Material, ObjectSpec, SceneConfig, ShapeKind
from network.model import build_model, micro_configs
from state import ArtifactLedger

FIXTURES_DIR = Path(__file__).parent / "fixtures"

# Narrow channels keep full-size (88 -> 30^3) forward passes quick.
TINY_NETWORK = {
    "conv1_channels": 2,
    "conv2_channels": 2,
    "lstm_channels": 2,
    "feature_dim": 8,
    "fused_dim": 8,
    "mfb_factor": 2,
    "seed_channels": 4,
    "decoder_channels": [2, 2, 2, 2],
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def in_memory_ledger():
    ledger = ArtifactLedger(":memory:")
    yield ledger
    ledger.close()


@pytest.fixture
def fixture_path():
    """Return a function that resolves fixture file paths."""
    def _resolve(name: str) -> Path:
        return FIXTURES_DIR / name
    return _resolve


@pytest.fixture
def micro_model():
    """Return a factory for float64 micro networks (8x8 inputs, 4^3 output)."""
    def _build(variant=Variant.AUDIO_VISUAL, mode=None, seed=0):
        kwargs = {} if mode is None else {"mode": mode}
        enc, dec, fus, dec2d = micro_configs(variant, **kwargs)
        return build_model(variant, enc, dec, fus, dec2d=dec2d, seed=seed, dtype=np.float64)
    return _build


@pytest.fixture
def tiny_config():
    """Return a factory for RunConfigs with a narrow full-size network."""
    def _build(**overrides):
        return RunConfig(**{**TINY_NETWORK, **overrides})
    return _build


@pytest.fixture(scope="session")
def one_object_scene():
    cfg = SceneConfig(
        objects=[
            ObjectSpec(
                kind=ShapeKind.SOLID_BOX,
                size_scale=0.6,
                material=Material.GRANITE,
                position=(20.0, 30.0),
                velocity=(180.0, -150.0),
            )
        ],
        frame_count=12,
        rng_seed=3,
    )
    return gen_scene_sequence(cfg)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Two one-object scenes written to disk; both land in the train split."""
    root = tmp_path_factory.mktemp("dataset")
    spec = DatasetSpec(seed=0, n_scenes=2, max_objects=1, frame_count=10)
    generate_dataset(spec, root)
    return root
