"""Mode- and stage-indexed value weights and their on-disk format.

``weights[k, i-1]`` is the weight vector approximating the cost-to-go at
stage ``k`` given that mode ``i`` was the already-active mode. Stage 0 is
kept even though the online rule only reads stages ``1..N``; it gives the
predicted cost-to-go at the start of a run.

Weight file (JSON, version ``switchdp-weights-v1``)::

    {
      "schema_version": "switchdp-weights-v1",
      "horizon": N, "mode_count": M, "state_dim": n, "basis_size": m,
      "basis": "<descriptor>",
      "metadata": {...},
      "weights": [[[w_0 .. w_{m-1}] for mode 1..M] for stage 0..N]
    }

Floats are written with ``repr`` precision, which round-trips doubles
exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisDescriptorError, BasisSet, parse_descriptor
from .model import ArgumentError, SwitchDPError, check_mode

SCHEMA_VERSION = "switchdp-weights-v1"


class WeightFileError(SwitchDPError):
    """Base class for weight-file load failures."""


class CorruptDocumentError(WeightFileError):
    """The document is not valid JSON."""


class UnsupportedVersionError(WeightFileError):
    """The document declares a schema version this library cannot read."""


class StructureError(WeightFileError):
    """Header and weight array disagree, or required fields are missing."""


class BasisMismatchError(WeightFileError):
    """The basis descriptor does not match the declared dimensions."""


@dataclass
class ValueTable:
    basis: BasisSet
    weights: np.ndarray
    metadata: dict = field(default_factory=dict)
    # per-run training diagnostics; never persisted
    diagnostics: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 3:
            raise ArgumentError("weights must have shape (N+1, M, m)")
        if w.shape[2] != self.basis.size:
            raise ArgumentError(f"weight length {w.shape[2]} != basis size {self.basis.size}")
        if not np.all(np.isfinite(w)):
            raise ArgumentError("weights must be finite")
        w.setflags(write=False)
        self.weights = w

    @property
    def horizon(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def mode_count(self) -> int:
        return self.weights.shape[1]

    def weight(self, k: int, mode: int) -> np.ndarray:
        return self.weights[k, mode - 1]


def value(table: ValueTable, k: int, x, i_prev: int) -> float:
    """Approximate cost-to-go at stage ``k`` from ``x`` with ``i_prev`` already active."""
    if not 0 <= k <= table.horizon:
        raise ArgumentError(f"stage {k} outside 0..{table.horizon}")
    i_prev = check_mode(i_prev, table.mode_count)
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.size != table.basis.input_dim:
        raise ArgumentError(f"state must have {table.basis.input_dim} components, got {arr.size}")
    return float(table.basis.evaluate_batch(arr) @ table.weights[k, i_prev - 1])


def to_document(table: ValueTable) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "horizon": table.horizon,
        "mode_count": table.mode_count,
        "state_dim": table.basis.input_dim,
        "basis_size": table.basis.size,
        "basis": table.basis.descriptor,
        "metadata": table.metadata,
        "weights": table.weights.tolist(),
    }


def dumps(table: ValueTable) -> str:
    return json.dumps(to_document(table), indent=1) + "\n"


def save(table: ValueTable, destination) -> dict:
    """Write ``table`` to ``destination`` (path) and return the document."""
    doc = to_document(table)
    Path(destination).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return doc


def from_document(doc) -> ValueTable:
    if not isinstance(doc, dict):
        raise StructureError("weight document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedVersionError(
            f"unsupported weight schema {version!r}; this build reads {SCHEMA_VERSION!r}")
    try:
        horizon = int(doc["horizon"])
        mode_count = int(doc["mode_count"])
        state_dim = int(doc["state_dim"])
        basis_size = int(doc["basis_size"])
        descriptor = doc["basis"]
        raw = doc["weights"]
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"missing or malformed header field: {exc}") from None
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise StructureError("metadata must be an object")

    try:
        basis = parse_descriptor(descriptor)
    except (BasisDescriptorError, TypeError) as exc:
        raise BasisMismatchError(f"unreadable basis descriptor: {exc}") from None
    if basis.size != basis_size or basis.input_dim != state_dim:
        raise BasisMismatchError(
            f"descriptor {descriptor!r} gives n={basis.input_dim}, m={basis.size}; "
            f"header says n={state_dim}, m={basis_size}")

    if not isinstance(raw, list) or len(raw) != horizon + 1:
        raise StructureError(f"expected {horizon + 1} stage blocks of weights")
    for k, block in enumerate(raw):
        if not isinstance(block, list) or len(block) != mode_count:
            raise StructureError(f"stage {k}: expected {mode_count} weight rows")
        for i, row in enumerate(block, start=1):
            if not isinstance(row, list) or len(row) != basis_size:
                raise StructureError(f"stage {k}, mode {i}: expected {basis_size} weights")
    try:
        weights = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StructureError(f"non-numeric weight entry: {exc}") from None
    if not np.all(np.isfinite(weights)):
        raise StructureError("weights must be finite")
    return ValueTable(basis=basis, weights=weights, metadata=metadata)


def loads(text: str) -> ValueTable:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptDocumentError(f"weight file is not valid JSON: {exc}") from None
    return from_document(doc)


def load(source) -> ValueTable:
    return loads(Path(source).read_text(encoding="utf-8"))
