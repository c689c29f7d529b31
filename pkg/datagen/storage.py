"""On-disk dataset layout.

<root>/manifest                   sample_id<TAB>seed<TAB>split<TAB>kind<TAB>config json
<root>/<sample_id>/mixed.wav
<root>/<sample_id>/events.csv
<root>/<sample_id>/audio.json             shared peak scale applied to mixed and unmixed audio
<root>/<sample_id>/object<k>/frames/frame_###.pgm
<root>/<sample_id>/object<k>/spectrograms.spg
<root>/<sample_id>/object<k>/boxes.csv
<root>/<sample_id>/object<k>/voxels.vxg
<root>/<sample_id>/object<k>/audio.wav
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from pydantic import BaseModel

from audio import encode_wav, read_wav
from errors import FormatError, MissingPrerequisiteError
from models import AudioClip, BoundingBox, ImpactEvent, SampleSequence, SceneSample, Split
from spectral import read_spectrograms, write_spectrograms
from state import atomic_write, atomic_write_text
from voxel import read_pgm, read_voxels, write_pgm, write_voxels

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest"
AUDIO_SCALE_NAME = "audio.json"


class ManifestEntry(BaseModel):
    sample_id: str
    seed: int
    split: Split
    kind: str
    config: dict

    def to_line(self) -> str:
        config = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return f"{self.sample_id}\t{self.seed}\t{self.split.value}\t{self.kind}\t{config}"

    @classmethod
    def from_line(cls, line: str) -> "ManifestEntry":
        parts = line.rstrip("\n").split("\t", 4)
        if len(parts) != 5:
            raise FormatError(f"manifest line has {len(parts)} fields, expected 5: {line[:80]!r}")
        sample_id, seed, split, kind, config = parts
        try:
            return cls(sample_id=sample_id, seed=int(seed), split=Split(split), kind=kind, config=json.loads(config))
        except ValueError as exc:
            raise FormatError(f"bad manifest line for {sample_id}: {exc}") from exc


class AudioScale(BaseModel):
    normalization: float = 1.0


def entry_for(sample: SceneSample) -> ManifestEntry:
    kind = "single_view" if "views" in sample.config else "scene"
    return ManifestEntry(
        sample_id=sample.sample_id, seed=sample.seed, split=sample.split, kind=kind, config=sample.config
    )


def write_manifest(root: Path, entries: list[ManifestEntry]) -> None:
    atomic_write_text(Path(root) / MANIFEST_NAME, "".join(entry.to_line() + "\n" for entry in entries))


def read_manifest(root: Path) -> list[ManifestEntry]:
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise MissingPrerequisiteError(f"dataset manifest not found: {path}")
    return [ManifestEntry.from_line(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _boxes_csv(boxes: list[BoundingBox]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["frame", "x", "y", "w", "h"])
    for index, box in enumerate(boxes):
        writer.writerow([index, box.x, box.y, box.w, box.h])
    return buffer.getvalue()


def _events_csv(events: list[ImpactEvent]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["time", "object", "speed", "gain", "kind"])
    for event in events:
        writer.writerow([repr(event.time), event.object_index, repr(event.speed), repr(event.gain), event.kind])
    return buffer.getvalue()


def write_sample(root: Path, sample: SceneSample) -> Path:
    """Write every artifact of one sample under <root>/<sample_id>/."""
    sample_dir = Path(root) / sample.sample_id
    atomic_write(sample_dir / "mixed.wav", encode_wav(sample.mixed))
    atomic_write_text(sample_dir / "events.csv", _events_csv(sample.events))
    scale = AudioScale(normalization=sample.mixed.normalization)
    atomic_write_text(sample_dir / AUDIO_SCALE_NAME, scale.model_dump_json())
    for sequence, track in zip(sample.sequences, sample.unmixed):
        object_dir = sample_dir / f"object{sequence.object_index}"
        for index, frame in enumerate(sequence.frames):
            write_pgm(object_dir / "frames" / f"frame_{index:03d}.pgm", frame)
        write_spectrograms(object_dir / "spectrograms.spg", sequence.spectrograms)
        atomic_write_text(object_dir / "boxes.csv", _boxes_csv(sequence.boxes))
        write_voxels(object_dir / "voxels.vxg", sequence.voxels)
        atomic_write(object_dir / "audio.wav", encode_wav(track))
    return sample_dir


def _read_boxes(path: Path) -> list[BoundingBox]:
    if not path.exists():
        raise MissingPrerequisiteError(f"boxes file not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        return [
            BoundingBox(x=int(row["x"]), y=int(row["y"]), w=int(row["w"]), h=int(row["h"]))
            for row in csv.DictReader(handle)
        ]


def _read_events(path: Path) -> list[ImpactEvent]:
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as handle:
        return [
            ImpactEvent(
                time=float(row["time"]),
                object_index=int(row["object"]),
                speed=float(row["speed"]),
                gain=float(row["gain"]),
                kind=row["kind"],
            )
            for row in csv.DictReader(handle)
        ]


def _read_scale(sample_dir: Path) -> float:
    path = sample_dir / AUDIO_SCALE_NAME
    if not path.exists():
        return 1.0
    try:
        return AudioScale.model_validate_json(path.read_text(encoding="utf-8")).normalization
    except ValueError as exc:
        raise FormatError(f"bad audio scale file {path}: {exc}") from exc


def _read_track(path: Path, normalization: float) -> AudioClip:
    return read_wav(path).model_copy(update={"normalization": normalization})


def read_sequence(object_dir: Path, sample_id: str, object_index: int) -> SampleSequence:
    frame_paths = sorted((object_dir / "frames").glob("frame_*.pgm"))
    if not frame_paths:
        raise MissingPrerequisiteError(f"no frames under {object_dir / 'frames'}")
    voxels = read_voxels(object_dir / "voxels.vxg")
    if voxels.material is None:
        raise FormatError(f"{object_dir / 'voxels.vxg'} has no material label")
    return SampleSequence(
        sample_id=sample_id,
        object_index=object_index,
        frames=np.stack([read_pgm(path) for path in frame_paths]),
        spectrograms=read_spectrograms(object_dir / "spectrograms.spg"),
        boxes=_read_boxes(object_dir / "boxes.csv"),
        voxels=voxels,
        material=voxels.material,
    )


def read_sample(root: Path, entry: ManifestEntry) -> SceneSample:
    sample_dir = Path(root) / entry.sample_id
    if not sample_dir.is_dir():
        raise MissingPrerequisiteError(f"sample directory not found: {sample_dir}")
    object_dirs = sorted(sample_dir.glob("object*"), key=lambda p: int(p.name[len("object"):]))
    sequences = [read_sequence(path, entry.sample_id, int(path.name[len("object"):])) for path in object_dirs]
    scale = _read_scale(sample_dir)
    return SceneSample(
        sample_id=entry.sample_id,
        seed=entry.seed,
        split=entry.split,
        config=entry.config,
        sequences=sequences,
        mixed=_read_track(sample_dir / "mixed.wav", scale),
        unmixed=[_read_track(path / "audio.wav", scale) for path in object_dirs],
        events=_read_events(sample_dir / "events.csv"),
    )


def iter_sequences(root: Path, split: Optional[str] = None) -> Iterator[SampleSequence]:
    """Every per-object sequence in the dataset, optionally restricted to one split."""
    for entry in read_manifest(root):
        if split is not None and entry.split.value != split:
            continue
        sample_dir = Path(root) / entry.sample_id
        for path in sorted(sample_dir.glob("object*"), key=lambda p: int(p.name[len("object"):])):
            yield read_sequence(path, entry.sample_id, int(path.name[len("object"):]))


def load_sequences(root: Path, split: Optional[str] = None) -> list[SampleSequence]:
    sequences = list(iter_sequences(root, split))
    logger.info("Loaded %d sequence(s) from %s (split=%s)", len(sequences), root, split or "all")
    return sequences
