"""Report assembly and emission: histograms, summary statistics, provenance.

Emission is deliberately timestamp-free so identical seeds reproduce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class Histogram:
    """Uniform-bin histogram over [0, max observed].

    An all-zero or empty value set cannot span a positive range; the range
    degenerates to [0, 1] so the edges stay distinct (recorded as-is).
    """

    name: str
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def n_values(self) -> int:
        return int(self.counts.sum())


def make_histogram(name: str, values, n_bins: int = HISTOGRAM_BINS) -> Histogram:
    vals = np.asarray([v for v in np.ravel(values) if np.isfinite(v)], dtype=float)
    hi = float(vals.max()) if len(vals) else 0.0
    if hi <= 0.0:
        hi = 1.0
    counts, edges = np.histogram(vals, bins=n_bins, range=(0.0, hi))
    return Histogram(name, edges, counts.astype(int))


def summary_stats(values) -> dict:
    """Median and quartiles of the finite entries; None fields when empty."""
    vals = np.asarray([v for v in np.ravel(values) if np.isfinite(v)], dtype=float)
    if len(vals) == 0:
        return {"count": 0, "median": None, "q1": None, "q3": None,
                "min": None, "max": None}
    q1, med, q3 = (float(q) for q in np.percentile(vals, [25, 50, 75]))
    return {"count": int(len(vals)), "median": med, "q1": q1, "q3": q3,
            "min": float(vals.min()), "max": float(vals.max())}


@dataclass
class Report:
    """One experiment's emitted state: distributions plus bookkeeping.

    histograms and summaries are keyed by quantity name ("mre",
    "residual_linear", ...); excluded counts instances dropped from a
    distribution (e.g. residual-energy denominator under the floor) and
    feeds the count-conservation invariant: histogram counts must sum to
    processed minus excluded.
    """

    name: str
    histograms: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)
    processed: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add_distribution(self, key: str, values, processed: int | None = None,
                         excluded: int = 0) -> None:
        self.histograms[key] = make_histogram(key, values)
        self.summaries[key] = summary_stats(values)
        self.processed[key] = (len(np.ravel(values)) + excluded
                               if processed is None else processed)
        self.excluded[key] = excluded

    def check_conservation(self) -> None:
        for key, hist in self.histograms.items():
            want = self.processed.get(key, 0) - self.excluded.get(key, 0)
            if hist.n_values != want:
                raise ValueError(
                    f"{self.name}/{key}: histogram holds {hist.n_values} values,"
                    f" expected processed - excluded = {want}")


def provenance_block(spec_fields: dict, seeds: dict, extra: dict | None = None) -> dict:
    """Seeds, package version, and a stable hash of the configuration."""
    from .. import __version__

    canon = json.dumps(spec_fields, sort_keys=True)
    block = {
        "package_version": __version__,
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "config": spec_fields,
        "seeds": seeds,
    }
    if extra:
        block.update(extra)
    return block


def _hist_rows(hist: Histogram):
    for lo, hi, c in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
        yield [repr(float(lo)), repr(float(hi)), int(c)]


def emit_report(report: Report, out_dir) -> list:
    """Write histogram CSVs and the summary JSON; returns written paths.

    Every histogram goes to hist_<key>.csv (bin_lo,bin_hi,count); the
    summary, scalars, exclusions, and provenance go to <name>_summary.json
    with sorted keys.  Empty distributions produce header-only CSVs.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    report.check_conservation()
    paths = []
    for key in sorted(report.histograms):
        path = os.path.join(out_dir, f"hist_{key}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lo", "bin_hi", "count"])
            hist = report.histograms[key]
            if hist.n_values > 0:
                writer.writerows(_hist_rows(hist))
        paths.append(path)

    summary = {
        "name": report.name,
        "summaries": report.summaries,
        "scalars": report.scalars,
        "processed": report.processed,
        "excluded": report.excluded,
        "provenance": report.provenance,
    }
    spath = os.path.join(out_dir, f"{report.name}_summary.json")
    with open(spath, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    paths.append(spath)
    return paths
