"""End-to-end tests for the pipeline commands on a tiny dataset."""

import json

import numpy as np
import pytest

from audio import read_wav
from commands.evaluate import EvaluateCommand
from commands.gen_data import GenDataCommand
from commands.reconstruct import ReconstructCommand
from commands.spectrogram import SpectrogramCommand
from commands.synth_audio import SynthAudioCommand
from commands.train_ae import TrainAutoencoderCommand
from commands.train_recon import TrainReconstructionCommand
from config import RunConfig
from datagen.storage import load_sequences, read_manifest
from network.evaluation import prediction_path
from spectral import read_spectrograms
from tests.conftest import TINY_NETWORK
from voxel import read_voxels, write_voxels

TRAINING = {
    "variant": "AV",
    "epochs_pretrain": 1,
    "epochs_frozen": 1,
    "epochs_joint": 1,
    "batch_size": 2,
    "strides": [1],
    "split": "train",
}


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory, tiny_dataset):
    """Pretrain and train a tiny AV network once for the whole module."""
    root = tmp_path_factory.mktemp("run")
    base = RunConfig(**TINY_NETWORK, **TRAINING, data_dir=str(tiny_dataset))
    assert TrainAutoencoderCommand(base, root / "train-ae").safe_run() == 0
    recon_cfg = base.model_copy(update={"pretrained_checkpoint": str(root / "train-ae" / "pretrained.vxw")})
    assert TrainReconstructionCommand(recon_cfg, root / "train-recon").safe_run() == 0
    return base.model_copy(update={"checkpoint": str(root / "train-recon" / "model.vxw")}), root


class TestGenData:
    def test_writes_manifest(self, tmp_path):
        cfg = RunConfig(n_scenes=1, max_objects=1, frame_count=10, seed=2)
        assert GenDataCommand(cfg, tmp_path).safe_run() == 0
        assert len(read_manifest(tmp_path)) == 1


class TestSynthAudio:
    def test_writes_wav(self, tmp_path):
        cfg = RunConfig(material="oak", size_scale=0.5, duration=0.25, sample_rate=22050)
        assert SynthAudioCommand(cfg, tmp_path).safe_run() == 0
        clip = read_wav(tmp_path / "impact.wav")
        assert clip.sample_rate == 22050
        assert clip.duration == pytest.approx(0.25)
        assert clip.peak > 0


class TestSpectrogram:
    def test_csv_dump(self, tmp_path):
        SynthAudioCommand(RunConfig(duration=0.3), tmp_path / "synth").safe_run()
        cfg = RunConfig(input_wav=str(tmp_path / "synth" / "impact.wav"))
        assert SpectrogramCommand(cfg, tmp_path / "spec", csv=True).safe_run() == 0
        spectrograms = read_spectrograms(tmp_path / "spec" / "spectrograms.spg")
        assert len(list((tmp_path / "spec").glob("spectrogram_*.csv"))) == len(spectrograms)

    def test_missing_wav(self, tmp_path):
        cfg = RunConfig(input_wav=str(tmp_path / "absent.wav"))
        assert SpectrogramCommand(cfg, tmp_path / "spec").safe_run() == 3


class TestPrerequisites:
    def test_train_recon_without_pretrained(self, tmp_path, tiny_dataset):
        cfg = RunConfig(**TINY_NETWORK, data_dir=str(tiny_dataset), pretrained_checkpoint=str(tmp_path / "none.vxw"))
        assert TrainReconstructionCommand(cfg, tmp_path / "out").safe_run() == 3
        assert not (tmp_path / "out" / "model.vxw").exists()

    def test_train_ae_without_dataset(self, tmp_path):
        cfg = RunConfig(**TINY_NETWORK, data_dir=str(tmp_path / "nowhere"))
        assert TrainAutoencoderCommand(cfg, tmp_path / "out").safe_run() == 3

    def test_eval_needs_a_source(self, tmp_path, tiny_dataset):
        cfg = RunConfig(data_dir=str(tiny_dataset), split="train")
        assert EvaluateCommand(cfg, tmp_path).safe_run() == 2


class TestEvaluate:
    def test_perfect_predictions(self, tmp_path, tiny_dataset, capsys):
        predictions = tmp_path / "predictions"
        for seq in load_sequences(tiny_dataset, "train"):
            write_voxels(prediction_path(predictions, seq), seq.voxels)
        cfg = RunConfig(data_dir=str(tiny_dataset), split="train", predictions_dir=str(predictions))
        assert EvaluateCommand(cfg, tmp_path / "eval").safe_run() == 0
        report = json.loads((tmp_path / "eval" / "report.json").read_text())
        assert report["mean_iou"] == {"0.3": 1.0, "0.4": 1.0, "0.5": 1.0}
        assert report["material_accuracy"] == 1.0
        assert "mean" in capsys.readouterr().out

    def test_checkpoint(self, tmp_path, trained_run):
        cfg, _ = trained_run
        assert EvaluateCommand(cfg, tmp_path).safe_run() == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert len(report["records"]) == 2
        assert (tmp_path / "report.txt").exists()


class TestTraining:
    def test_metrics_written(self, trained_run):
        _, root = trained_run
        pretrain = (root / "train-ae" / "metrics_pretrain.jsonl").read_text().splitlines()
        recon = [json.loads(line) for line in (root / "train-recon" / "metrics.jsonl").read_text().splitlines()]
        assert len(pretrain) == 1
        assert [r["stage"] for r in recon] == ["frozen", "joint"]
        assert "iou@0.4" in recon[0]


class TestReconstruct:
    def test_byte_identical_reruns(self, tmp_path, trained_run):
        cfg, _ = trained_run
        assert ReconstructCommand(cfg, tmp_path / "a").safe_run() == 0
        assert ReconstructCommand(cfg, tmp_path / "b").safe_run() == 0
        files = sorted(p.name for p in (tmp_path / "a").glob("*.vxg"))
        assert len(files) == 2
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        grid = read_voxels(tmp_path / "a" / files[0])
        assert grid.material is not None
        assert np.all((grid.occupancy >= 0) & (grid.occupancy <= 1))

    def test_sample_filter(self, tmp_path, trained_run, tiny_dataset):
        cfg, _ = trained_run
        sample_id = read_manifest(tiny_dataset)[0].sample_id
        assert ReconstructCommand(cfg.model_copy(update={"sample_id": sample_id}), tmp_path).safe_run() == 0
        lines = (tmp_path / "predictions.tsv").read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith(sample_id)

    def test_unknown_sample(self, tmp_path, trained_run):
        cfg, _ = trained_run
        assert ReconstructCommand(cfg.model_copy(update={"sample_id": "scene-none"}), tmp_path).safe_run() == 1
