"""Training datasets: (features, schedule target, t_f) records in JSON lines.

The first line of a dataset file is a header object carrying the feature
layout descriptor; each following line is one record.  An empty dataset is a
valid file containing only the header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError

DATASET_FORMAT = "schedule-dataset-v1"


@dataclass
class DatasetRecord:
    features: np.ndarray
    target: np.ndarray
    t_f: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.target = np.asarray(self.target, dtype=float)


@dataclass
class Dataset:
    """Records plus the layout descriptor they were generated under."""

    records: list
    layout: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def feature_length(self) -> int:
        if not self.records:
            return int(self.layout.get("feature_count", 0))
        return len(self.records[0].features)

    def feature_matrix(self) -> np.ndarray:
        return np.stack([r.features for r in self.records])

    def target_matrix(self) -> np.ndarray:
        return np.stack([r.target for r in self.records])

    def validate(self) -> "Dataset":
        n_feat = self.feature_length
        for k, rec in enumerate(self.records):
            if len(rec.features) != n_feat:
                raise ValueError(f"record {k} feature length {len(rec.features)}"
                                 f" != {n_feat}")
            if rec.target.ndim != 1 or len(rec.target) < 2:
                raise ValueError(f"record {k} target is not a schedule curve")
            if not np.isfinite(rec.t_f) or rec.t_f <= 0:
                raise ValueError(f"record {k} has invalid t_f")
        return self


def write_jsonl(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        header = {"format": DATASET_FORMAT, "layout": dataset.layout,
                  "n_records": len(dataset.records)}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in dataset.records:
            obj = {
                "features": [float(v) for v in rec.features],
                "target": [float(v) for v in rec.target],
                "t_f": float(rec.t_f),
                "meta": rec.meta,
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_jsonl(path) -> Dataset:
    records = []
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise FormatError("dataset file is empty (missing header)")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad dataset header: {exc}") from exc
        if header.get("format") != DATASET_FORMAT:
            raise FormatError(f"unsupported dataset format {header.get('format')!r}")
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(DatasetRecord(
                    np.asarray(obj["features"], dtype=float),
                    np.asarray(obj["target"], dtype=float),
                    float(obj["t_f"]), obj.get("meta", {})))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"bad dataset record on line {line_no}: {exc}") from exc
    return Dataset(records, header.get("layout", {})).validate()
