"""Autoencoder pretraining and two-stage reconstruction training."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from autodiff.ops import cross_entropy, loss_bce
from autodiff.optim import Adam
from autodiff.tensor import Tensor, gradients
from config import TrainingConfig
from datagen.windows import training_windows
from errors import InterruptedRunError, InvalidInputError, NumericDivergenceError
from models import SampleSequence
from network.model import MATERIALS, ModelInputs, ReconstructionNetwork, prepare_inputs
from voxel import iou_arrays

logger = logging.getLogger(__name__)

TRAIN_IOU_THRESHOLD = 0.4
StopCheck = Callable[[], bool]


class MetricsRecord(BaseModel):
    """One JSON line of the per-epoch metrics log."""

    model_config = ConfigDict(populate_by_name=True)

    stage: str
    epoch: int
    split: str = "train"
    loss: float
    iou: Optional[float] = Field(default=None, alias="iou@0.4")
    material_acc: Optional[float] = None

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, exclude_none=True)


@dataclass(frozen=True)
class TrainingItem:
    inputs: ModelInputs
    voxels: np.ndarray
    material_index: int


@dataclass(frozen=True)
class _SampleResult:
    loss: float
    grads: list[np.ndarray]
    occupancy: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None


def training_items(
    sequences: Sequence[SampleSequence], model: ReconstructionNetwork, cfg: TrainingConfig
) -> list[TrainingItem]:
    """Stride-augmented windows of every sequence, converted to network inputs."""
    if not sequences:
        raise InvalidInputError("training needs at least one sequence")
    items = []
    for seq in sequences:
        for window in training_windows(seq, cfg.strides, cfg.window):
            items.append(
                TrainingItem(
                    inputs=prepare_inputs(window, model.variant, model.dtype),
                    voxels=window.voxels.occupancy,
                    material_index=MATERIALS.index(window.material),
                )
            )
    logger.info("Prepared %d training window(s) from %d sequence(s)", len(items), len(sequences))
    return items


def batches(count: int, batch_size: int, rng: np.random.Generator) -> list[list[int]]:
    order = rng.permutation(count)
    return [order[start:start + batch_size].tolist() for start in range(0, count, batch_size)]


def _check_loss(value: float, stage: str, epoch: int) -> None:
    if not math.isfinite(value):
        raise NumericDivergenceError(f"{stage} loss became {value} at epoch {epoch}")


class Trainer:
    """Runs epochs of per-sample gradients, summed in sample order, one Adam step per batch."""

    def __init__(
        self,
        model: ReconstructionNetwork,
        cfg: TrainingConfig,
        should_stop: Optional[StopCheck] = None,
    ):
        self.model = model
        self.cfg = cfg
        self.should_stop = should_stop or (lambda: False)
        self.records: list[MetricsRecord] = []

    def _run_stage(
        self,
        stage: str,
        stage_index: int,
        items: Sequence[TrainingItem],
        prefixes: tuple[str, ...],
        lr: float,
        epochs: int,
        sample_fn: Callable[[TrainingItem, list[Tensor]], _SampleResult],
    ) -> list[MetricsRecord]:
        if epochs <= 0:
            logger.info("Stage %s: 0 epochs, weights left as they are", stage)
            return []
        params = self.model.params.select(prefixes)
        self.model.params.set_trainable(params)
        optimizer = Adam(params, lr=lr)
        rng = np.random.default_rng([self.cfg.seed, stage_index])
        records = []

        with ThreadPoolExecutor(max_workers=max(1, self.cfg.threads)) as executor:
            for epoch in range(1, epochs + 1):
                if self.should_stop():
                    raise InterruptedRunError(f"stopped during {stage} before epoch {epoch}")
                results: list[tuple[TrainingItem, _SampleResult]] = []
                for batch in batches(len(items), self.cfg.batch_size, rng):
                    batch_items = [items[i] for i in batch]
                    batch_results = list(executor.map(lambda item: sample_fn(item, params), batch_items))
                    for result in batch_results:
                        _check_loss(result.loss, stage, epoch)
                    total = [np.zeros(p.shape, dtype=np.float64) for p in params]
                    for result in batch_results:
                        for acc, grad in zip(total, result.grads):
                            acc += grad
                    optimizer.step([acc / len(batch_results) for acc in total])
                    results.extend(zip(batch_items, batch_results))
                record = self._record(stage, epoch, results)
                records.append(record)
                logger.info(
                    "stage=%s epoch=%d loss=%.6f iou=%s material_acc=%s",
                    stage, epoch, record.loss, record.iou, record.material_acc,
                )
        self.records.extend(records)
        return records

    @staticmethod
    def _record(stage: str, epoch: int, results: list[tuple[TrainingItem, _SampleResult]]) -> MetricsRecord:
        loss = float(np.mean([result.loss for _, result in results]))
        ious = [
            iou_arrays(result.occupancy, item.voxels, TRAIN_IOU_THRESHOLD)
            for item, result in results if result.occupancy is not None
        ]
        hits = [
            int(np.argmax(result.logits)) == item.material_index
            for item, result in results if result.logits is not None
        ]
        return MetricsRecord(
            stage=stage,
            epoch=epoch,
            loss=loss,
            iou=float(np.mean(ious)) if ious else None,
            material_acc=float(np.mean(hits)) if hits else None,
        )

    def _autoencoder_sample(self, item: TrainingItem, params: list[Tensor]) -> _SampleResult:
        loss = self.model.autoencoder_loss(item.inputs)
        return _SampleResult(loss=loss.item(), grads=gradients(loss, params))

    def _reconstruction_sample(self, item: TrainingItem, params: list[Tensor]) -> _SampleResult:
        prediction = self.model.forward(item.inputs)
        loss = loss_bce(prediction.occupancy, item.voxels)
        logits = None
        if prediction.material_logits is not None:
            loss = loss + self.cfg.material_loss_weight * cross_entropy(prediction.material_logits, item.material_index)
            logits = prediction.material_logits.numpy()
        return _SampleResult(
            loss=loss.item(),
            grads=gradients(loss, params),
            occupancy=prediction.occupancy.numpy(),
            logits=logits,
        )

    def pretrain(self, items: Sequence[TrainingItem]) -> list[MetricsRecord]:
        return self._run_stage(
            "pretrain", 0, items, self.model.pretrain_prefixes(),
            self.cfg.lr_pretrain, self.cfg.epochs_pretrain, self._autoencoder_sample,
        )

    def train_heads(self, items: Sequence[TrainingItem]) -> list[MetricsRecord]:
        return self._run_stage(
            "frozen", 1, items, self.model.head_prefixes(),
            self.cfg.lr_recon, self.cfg.epochs_frozen, self._reconstruction_sample,
        )

    def finetune(self, items: Sequence[TrainingItem]) -> list[MetricsRecord]:
        return self._run_stage(
            "joint", 2, items, self.model.reconstruction_prefixes(),
            self.cfg.lr_finetune, self.cfg.epochs_joint, self._reconstruction_sample,
        )


def pretrain_autoencoders(
    model: ReconstructionNetwork,
    sequences: Sequence[SampleSequence],
    cfg: TrainingConfig,
    should_stop: Optional[StopCheck] = None,
) -> list[MetricsRecord]:
    """Fit encoder trunks and mirrored 2-D decoders to reproduce their inputs (MSE)."""
    trainer = Trainer(model, cfg, should_stop)
    return trainer.pretrain(training_items(sequences, model, cfg))


def train_reconstruction(
    model: ReconstructionNetwork,
    sequences: Sequence[SampleSequence],
    cfg: TrainingConfig,
    should_stop: Optional[StopCheck] = None,
) -> list[MetricsRecord]:
    """Stage 1 trains the heads with frozen encoder trunks; stage 2 trains everything.

    Loss is BCE against the ground-truth grid plus material_loss_weight
    times the material cross-entropy when the network has audio.
    """
    trainer = Trainer(model, cfg, should_stop)
    items = training_items(sequences, model, cfg)
    trainer.train_heads(items)
    trainer.finetune(items)
    return trainer.records


def metrics_jsonl(records: Sequence[MetricsRecord]) -> str:
    return "".join(record.to_json() + "\n" for record in records)
