"""Dataset ingestion: JSON Lines image records plus a sidecar manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass
class ImageRecord:
    """One image: dense feature vector, ground-truth captions, and
    (for test images) raw per-category detector scores."""

    image_id: str
    features: np.ndarray
    captions: tuple[str, ...]
    scores: np.ndarray | None = None

    def __post_init__(self):
        if not self.captions:
            raise DataError(f"image {self.image_id}: needs at least one caption")
        if self.features.size == 0 or not np.all(np.isfinite(self.features)):
            raise DataError(f"image {self.image_id}: bad feature vector")
        if not np.any(self.features):
            raise DataError(f"image {self.image_id}: zero feature vector")


def load_manifest(path: str | Path) -> dict:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if "feature_dim" not in manifest:
        raise DataError(f"{path}: manifest missing feature_dim")
    return manifest


def load_dataset(path: str | Path, manifest: dict | None = None) -> list[ImageRecord]:
    """Read records from JSONL; a manifest pins the expected feature size."""
    path = Path(path)
    if manifest is None:
        sidecar = path.with_suffix(".manifest.json")
        manifest = load_manifest(sidecar) if sidecar.exists() else {}
    dim = manifest.get("feature_dim")
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            try:
                rec = ImageRecord(
                    str(obj["id"]),
                    np.asarray(obj["features"], dtype=np.float64),
                    tuple(obj["captions"]),
                    np.asarray(obj["scores"], dtype=np.float64)
                    if obj.get("scores") is not None
                    else None,
                )
            except KeyError as e:
                raise DataError(f"{path}:{lineno}: missing field {e}") from e
            if dim is not None and rec.features.shape[0] != dim:
                raise DataError(
                    f"{path}:{lineno}: feature dim {rec.features.shape[0]} != {dim}"
                )
            records.append(rec)
    if not records:
        raise DataError(f"{path}: empty dataset")
    return records


def save_dataset(records, path: str | Path, manifest_extra: dict | None = None):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            obj = {
                "id": rec.image_id,
                "features": [float(x) for x in rec.features],
                "captions": list(rec.captions),
            }
            if rec.scores is not None:
                obj["scores"] = [float(x) for x in rec.scores]
            f.write(json.dumps(obj) + "\n")
    manifest = {"feature_dim": int(records[0].features.shape[0])}
    if manifest_extra:
        manifest.update(manifest_extra)
    path.with_suffix(".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
