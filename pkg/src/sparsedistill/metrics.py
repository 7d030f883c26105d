"""Sparsity, compression, storage-footprint, and timing measurements.

Storage accounting is 32-bit throughout: a dense layer costs 4 bytes per
weight, a compressed-sparse-row layer costs 4 bytes per kept value, 4 per
column index, and 4 per row pointer (rows + 1 of them).  Each layer is
charged whichever of the two encodings is smaller; biases stay dense.
The footprint compression a report shows always has the dense teacher's
bytes in the numerator.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, UsageError

__all__ = [
    "top1_error", "sparsity_ratio", "sparsity_summary", "per_layer_sparsity_pct",
    "compression_ratio", "csr_bytes", "dense_bytes", "footprint",
    "remaining_parameters", "inference_time", "SparsityReport", "emit_report",
    "REPORT_FORMATS",
]

REPORT_FORMATS = ("json", "markdown", "csv")


def top1_error(logits: np.ndarray, labels) -> float:
    """Fraction of rows whose argmax misses the label."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if len(logits) != len(labels):
        raise DomainError(f"{len(logits)} logit rows vs {len(labels)} labels")
    if len(labels) == 0:
        return 0.0
    return float(np.mean(np.argmax(logits, axis=1) != labels))


def sparsity_ratio(masks) -> float:
    """R_s: total weights over surviving weights, across all layers."""
    total = sum(int(np.asarray(m).size) for m in masks)
    kept = sum(int(np.count_nonzero(m)) for m in masks)
    if kept == 0:
        warnings.warn("every weight was pruned; sparsity ratio reported as +inf")
        return float("inf")
    return total / kept


def per_layer_sparsity_pct(masks) -> list[float]:
    """Percent of weights removed in each layer (biases excluded)."""
    return [float(100.0 * (1.0 - np.count_nonzero(m) / np.asarray(m).size)) for m in masks]


def sparsity_summary(masks) -> tuple[list[float], float]:
    """Per-layer removal percentages together with the overall ratio."""
    return per_layer_sparsity_pct(masks), sparsity_ratio(masks)


def compression_ratio(teacher_params: int, student_params: int) -> float:
    """R_c: trainable parameters before over after."""
    if teacher_params <= 0 or student_params <= 0:
        raise DomainError(
            f"parameter counts must be positive, got {teacher_params} and {student_params}")
    return teacher_params / student_params


def remaining_parameters(masks, biases) -> int:
    """Surviving weights plus (always dense) biases."""
    return sum(int(np.count_nonzero(m)) for m in masks) + sum(int(np.asarray(b).size) for b in biases)


def csr_bytes(mask: np.ndarray) -> int:
    """values + column indices (4 bytes per kept entry) + row pointers."""
    mask = np.asarray(mask)
    nnz = int(np.count_nonzero(mask))
    return 4 * nnz + 4 * nnz + 4 * (mask.shape[0] + 1)


def dense_bytes(shape) -> int:
    n = 1
    for s in shape:
        n *= int(s)
    return 4 * n


def footprint(masks, biases) -> dict:
    """Per-layer best-of encoding plus totals over one network's layers."""
    per_layer, stored, dense_total = [], 0, 0
    for m in masks:
        m = np.asarray(m)
        d = dense_bytes(m.shape)
        c = csr_bytes(m)
        choice = "csr" if c < d else "dense"
        per_layer.append({"shape": list(m.shape), "nnz": int(np.count_nonzero(m)),
                          "dense_bytes": d, "csr_bytes": c, "stored": choice})
        stored += min(c, d)
        dense_total += d
    bias_cost = sum(4 * int(np.asarray(b).size) for b in biases)
    return {
        "per_layer": per_layer,
        "bias_bytes": bias_cost,
        "dense_bytes": dense_total + bias_cost,
        "stored_bytes": stored + bias_cost,
    }


def inference_time(net, x: np.ndarray, masks=None, repetitions: int = 5,
                   warmup: int = 3) -> float:
    """Median wall-clock seconds for one deterministic forward pass."""
    from .student import student_logits

    if repetitions < 1:
        raise DomainError(f"repetitions must be >= 1, got {repetitions}")
    x = np.asarray(x, dtype=np.float64)
    for _ in range(warmup):
        student_logits(net, x, train=False, masks=masks)
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        student_logits(net, x, train=False, masks=masks)
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


@dataclass
class SparsityReport:
    """One network's evaluation row, in a stable field order."""

    network: str
    test_error_pct: float
    per_layer_sparsity: list[float]
    r_s: float
    r_c: float
    dense_bytes: int
    csr_bytes: int
    footprint_compression: float
    inference_ms: float | None = None
    config: dict = field(default_factory=dict)


_NUMERIC_KEYS = ("test_error_pct", "r_s", "r_c", "dense_bytes", "csr_bytes",
                 "footprint_compression", "inference_ms")


def _sig6(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if np.isinf(v):
            return "inf"
        return f"{v:.6g}"
    return str(v)


def _layers_cell(values) -> str:
    return "-".join(f"{v:.6g}" for v in values)


def emit_report(reports, fmt: str = "json", sort_key: str | None = None) -> str:
    """Render one document from one or more report rows.

    Numbers are printed to 6 significant digits in the tabular formats,
    straight from the stored fields; nothing is recomputed here.
    """
    if isinstance(reports, SparsityReport):
        reports = [reports]
    reports = list(reports)
    if not reports:
        raise UsageError("no report rows to emit")
    if fmt not in REPORT_FORMATS:
        raise UsageError(f"unknown report format {fmt!r}; expected one of {', '.join(REPORT_FORMATS)}")
    rows = [asdict(r) for r in reports]
    if sort_key is not None:
        if sort_key not in rows[0]:
            raise UsageError(f"unknown sort key {sort_key!r}")
        rows.sort(key=lambda r: (r[sort_key] is None, r[sort_key]))

    if fmt == "json":
        return json.dumps(rows, indent=2)

    header = ["network", "test_error_pct", "per_layer_sparsity", "r_s", "r_c",
              "dense_bytes", "csr_bytes", "footprint_compression", "inference_ms"]
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |",
                 "| " + " | ".join("---" for _ in header) + " |"]
        for row in rows:
            cells = [row["network"], _sig6(row["test_error_pct"]),
                     _layers_cell(row["per_layer_sparsity"])]
            cells += [_sig6(row[k]) for k in _NUMERIC_KEYS[1:]]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines)

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header + ["config"])
    for row in rows:
        cells = [row["network"], _sig6(row["test_error_pct"]),
                 _layers_cell(row["per_layer_sparsity"])]
        cells += [_sig6(row[k]) for k in _NUMERIC_KEYS[1:]]
        cells.append(json.dumps(row["config"], sort_keys=True))
        writer.writerow(cells)
    return buf.getvalue().rstrip("\n")
