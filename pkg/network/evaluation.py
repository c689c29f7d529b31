"""Window-averaged reconstruction and IoU / BCE / material-accuracy reports."""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel

from autodiff.ops import BCE_CLAMP, softmax
from autodiff.tensor import no_grad
from errors import InvalidInputError
from models import Material, SampleSequence, VoxelGrid
from network.model import MATERIALS, ReconstructionNetwork, prepare_inputs
from voxel import iou_arrays

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.3, 0.4, 0.5)


def reconstruction_windows(frame_count: int, window: int = 10) -> list[list[int]]:
    """Consecutive non-overlapping windows; the last one ends on the final frame."""
    if frame_count <= window:
        return [list(range(frame_count))]
    windows = [list(range(start, start + window)) for start in range(0, frame_count - window + 1, window)]
    if windows[-1][-1] != frame_count - 1:
        windows.append(list(range(frame_count - window, frame_count)))
    return windows


def reconstruct(model: ReconstructionNetwork, seq: SampleSequence, window: int = 10) -> VoxelGrid:
    """Deterministic occupancy (and material for A/AV) averaged over the sequence windows."""
    occupancies = []
    probabilities = []
    with no_grad():
        for indices in reconstruction_windows(seq.frame_count, window):
            prediction = model.forward(prepare_inputs(seq.select(indices), model.variant, model.dtype))
            occupancies.append(prediction.occupancy.data.astype(np.float64))
            if prediction.material_logits is not None:
                probabilities.append(softmax(prediction.material_logits).data)
    occupancy = np.clip(np.mean(occupancies, axis=0), 0.0, 1.0).astype(np.float32)
    material = MATERIALS[int(np.argmax(np.mean(probabilities, axis=0)))] if probabilities else None
    return VoxelGrid(occupancy=occupancy, material=material)


def binary_cross_entropy(pred: np.ndarray, gt: np.ndarray) -> float:
    prob = np.clip(pred.astype(np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    labels = gt.astype(np.float64)
    return float(-np.mean(labels * np.log(prob) + (1.0 - labels) * np.log(1.0 - prob)))


def threshold_key(t: float) -> str:
    return f"{t:g}"


class EvaluationRecord(BaseModel):
    sample_id: str
    object_index: int
    iou: dict[str, float]
    bce: float
    material: Material
    predicted_material: Optional[Material] = None


class EvaluationReport(BaseModel):
    thresholds: list[float]
    records: list[EvaluationRecord]
    mean_iou: dict[str, float]
    mean_bce: float
    material_accuracy: Optional[float] = None

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    def to_table(self) -> str:
        keys = [threshold_key(t) for t in self.thresholds]
        header = ["sample", "object"] + [f"iou@{k}" for k in keys] + ["bce", "material", "predicted"]
        rows = [header]
        for record in self.records:
            rows.append(
                [record.sample_id, str(record.object_index)]
                + [f"{record.iou[k]:.4f}" for k in keys]
                + [
                    f"{record.bce:.4f}",
                    record.material.value,
                    record.predicted_material.value if record.predicted_material else "-",
                ]
            )
        accuracy = "-" if self.material_accuracy is None else f"{self.material_accuracy:.4f}"
        rows.append(["mean", ""] + [f"{self.mean_iou[k]:.4f}" for k in keys] + [f"{self.mean_bce:.4f}", "", accuracy])
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows) + "\n"


def score(seq: SampleSequence, predicted: VoxelGrid, thresholds: Sequence[float]) -> EvaluationRecord:
    for t in thresholds:
        if not 0.0 < t < 1.0:
            raise InvalidInputError(f"threshold must lie in (0, 1), got {t}")
    gt = seq.voxels.occupancy
    return EvaluationRecord(
        sample_id=seq.sample_id,
        object_index=seq.object_index,
        iou={threshold_key(t): iou_arrays(predicted.occupancy, gt, t) for t in thresholds},
        bce=binary_cross_entropy(predicted.occupancy, gt),
        material=seq.material,
        predicted_material=predicted.material,
    )


def summarize(records: list[EvaluationRecord], thresholds: Sequence[float]) -> EvaluationReport:
    keys = [threshold_key(t) for t in thresholds]
    classified = [r for r in records if r.predicted_material is not None]
    return EvaluationReport(
        thresholds=list(thresholds),
        records=records,
        mean_iou={k: float(np.mean([r.iou[k] for r in records])) if records else 0.0 for k in keys},
        mean_bce=float(np.mean([r.bce for r in records])) if records else 0.0,
        material_accuracy=(
            float(np.mean([r.predicted_material is r.material for r in classified])) if classified else None
        ),
    )


def evaluate_predictions(
    pairs: Sequence[tuple[SampleSequence, VoxelGrid]],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> EvaluationReport:
    """Score already reconstructed grids against their ground truth."""
    return summarize([score(seq, grid, thresholds) for seq, grid in pairs], thresholds)


def evaluate_model(
    model: ReconstructionNetwork,
    sequences: Sequence[SampleSequence],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    window: int = 10,
    threads: int = 1,
) -> EvaluationReport:
    """Reconstruct every sequence (in parallel, read-only) and score it."""

    def _one(seq: SampleSequence) -> EvaluationRecord:
        return score(seq, reconstruct(model, seq, window), thresholds)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(_one, sequences))
    report = summarize(records, thresholds)
    logger.info(
        "Evaluated %d sequence(s): mean iou %s, bce %.4f, material acc %s",
        len(records), report.mean_iou, report.mean_bce, report.material_accuracy,
    )
    return report


def prediction_path(root: Path, seq: SampleSequence) -> Path:
    """Where `reconstruct` writes, and `eval` reads, one sequence's predicted grid."""
    return Path(root) / f"{seq.sample_id}_object{seq.object_index}.vxg"
