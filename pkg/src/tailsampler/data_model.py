"""Core records and manifest I/O.

A manifest is a table of items ``(id, class, prob[, features...])``.  CSV is
the canonical on-disk form; JSONL mirrors it with the same field names::

    id,class,prob,f0,f1
    a,0,0.93,0.1,-2.0

Probabilities are the classifier's probability of the *correct* label.  An
empty ``prob`` cell (or a missing/null ``prob`` key in JSONL) means the item
has not been annotated yet.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptyManifest,
    IndexOutOfRange,
    IoFailure,
    MalformedRow,
    ProbabilityOutOfRange,
)

PROB_FLOOR = 1e-12
PROB_SLACK = 1e-9


class Variant(str, enum.Enum):
    PAPER_ARGMAX = "paper-argmax"
    PROBABILISTIC = "probabilistic"
    EXACT_KDPP_ORACLE = "exact-kdpp"


def clip_probability(value: float, *, where: str = "") -> float:
    """Clamp float noise into [PROB_FLOOR, 1]; reject real violations."""
    value = float(value)
    if math.isnan(value) or value < -PROB_SLACK or value > 1.0 + PROB_SLACK:
        raise ProbabilityOutOfRange(f"probability {value!r} outside [0, 1]{where}")
    return min(max(value, PROB_FLOOR), 1.0)


@dataclass(frozen=True)
class ItemRecord:
    id: str
    class_label: int
    probability: float | None = None
    features: tuple[float, ...] | None = None

    def with_probability(self, p: float) -> "ItemRecord":
        return ItemRecord(self.id, self.class_label, clip_probability(p), self.features)


@dataclass(frozen=True)
class ClassManifest:
    items: tuple[ItemRecord, ...]
    num_classes: int
    class_counts: Mapping[int, int] = field(compare=False)

    @classmethod
    def from_items(cls, items: Iterable[ItemRecord], num_classes: int | None = None) -> "ClassManifest":
        items = tuple(items)
        if not items:
            raise EmptyManifest("manifest has no items")
        seen = set()
        for it in items:
            if it.id in seen:
                raise DuplicateId(f"duplicate id {it.id!r}")
            seen.add(it.id)
            if it.class_label < 0:
                raise ValueError(f"negative class label for {it.id!r}")
        top = max(it.class_label for it in items) + 1
        C = top if num_classes is None else int(num_classes)
        if C < top:
            raise ValueError(f"num_classes={C} but labels reach {top - 1}")
        counts = {c: 0 for c in range(C)}
        for it in items:
            counts[it.class_label] += 1
        return cls(items, C, counts)

    def __len__(self) -> int:
        return len(self.items)

    @cached_property
    def labels(self) -> np.ndarray:
        out = np.array([it.class_label for it in self.items], dtype=np.int64)
        out.flags.writeable = False
        return out

    @cached_property
    def probabilities(self) -> np.ndarray:
        """Probabilities as floats; unannotated items are NaN."""
        out = np.array([np.nan if it.probability is None else it.probability for it in self.items])
        out.flags.writeable = False
        return out

    @cached_property
    def features(self) -> np.ndarray | None:
        if any(it.features is None for it in self.items):
            return None
        out = np.array([it.features for it in self.items], dtype=float)
        out.flags.writeable = False
        return out

    def indices_of(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def frequency_order(self) -> list[int]:
        """Class labels sorted by descending count (ties by label)."""
        return sorted(self.class_counts, key=lambda c: (-self.class_counts[c], c))

    def reindex_by_frequency(self) -> tuple["ClassManifest", dict[int, int]]:
        """Relabel classes so that counts are non-increasing in the label.

        Returns the relabelled manifest and the old -> new label map.
        """
        mapping = {old: new for new, old in enumerate(self.frequency_order())}
        items = tuple(
            ItemRecord(it.id, mapping[it.class_label], it.probability, it.features)
            for it in self.items
        )
        return ClassManifest.from_items(items, self.num_classes), mapping

    def subset(self, indices: Sequence[int]) -> "ClassManifest":
        idx = sorted(set(int(i) for i in indices))
        return ClassManifest.from_items((self.items[i] for i in idx), self.num_classes)


@dataclass(frozen=True)
class DppSample:
    indices: frozenset[int]
    seed: int
    variant: Variant

    def __post_init__(self):
        object.__setattr__(self, "indices", frozenset(int(i) for i in self.indices))

    def __len__(self) -> int:
        return len(self.indices)

    def sorted(self) -> list[int]:
        return sorted(self.indices)


# -- parsing -----------------------------------------------------------------

def _parse_label(raw, line: int) -> int:
    try:
        if isinstance(raw, bool):
            raise ValueError
        if isinstance(raw, float) and not raw.is_integer():
            raise ValueError
        value = int(raw)
    except (TypeError, ValueError):
        raise MalformedRow(line, f"class label {raw!r} is not an integer") from None
    if value < 0:
        raise MalformedRow(line, f"class label {value} is negative")
    return value


def _parse_prob(raw, line: int) -> float | None:
    if raw is None or (isinstance(raw, str) and raw.strip() == ""):
        return None
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise MalformedRow(line, f"probability {raw!r} is not a number") from None
    return clip_probability(value, where=f" (line {line})")


def _parse_features(values, line: int) -> tuple[float, ...] | None:
    if values is None:
        return None
    try:
        feats = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise MalformedRow(line, "non-numeric feature value") from None
    if not all(math.isfinite(f) for f in feats):
        raise MalformedRow(line, "non-finite feature value")
    return feats or None


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except FileNotFoundError:
        raise IoFailure(f"no such file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _parse_csv(text: str) -> list[ItemRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyManifest("empty file") from None
    header = [h.strip() for h in header]
    if header[:3] != ["id", "class", "prob"]:
        raise MalformedRow(1, f"header must start with id,class,prob; got {','.join(header)}")
    n_feat = len(header) - 3
    expected = [f"f{j}" for j in range(n_feat)]
    if header[3:] != expected:
        raise MalformedRow(1, "feature columns must be named f0, f1, ...")
    items = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
        item_id = row[0]
        if item_id == "":
            raise MalformedRow(line, "empty id")
        feats = _parse_features(row[3:], line) if n_feat else None
        items.append(ItemRecord(item_id, _parse_label(row[1], line), _parse_prob(row[2], line), feats))
    return items


def _parse_jsonl(text: str) -> list[ItemRecord]:
    items = []
    for line, raw in enumerate(text.split("\n"), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRow(line, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict) or "id" not in obj or "class" not in obj:
            raise MalformedRow(line, "object needs 'id' and 'class'")
        items.append(
            ItemRecord(
                str(obj["id"]),
                _parse_label(obj["class"], line),
                _parse_prob(obj.get("prob"), line),
                _parse_features(obj.get("features"), line),
            )
        )
    return items


def parse_manifest(path, format: str | None = None) -> ClassManifest:
    """Read a CSV or JSONL manifest.

    ``format`` is ``"csv"`` or ``"jsonl"``; when omitted it is inferred from
    the file suffix (``.jsonl``/``.json`` means JSONL, anything else CSV).
    """
    fmt = (format or ("jsonl" if Path(path).suffix.lower() in {".jsonl", ".json"} else "csv")).lower()
    text = _read_text(path)
    if fmt == "csv":
        items = _parse_csv(text)
    elif fmt == "jsonl":
        items = _parse_jsonl(text)
    else:
        raise ValueError(f"unknown manifest format {format!r}")
    if not items:
        raise EmptyManifest(f"{path}: no rows")
    return ClassManifest.from_items(items)


# -- writing -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def manifest_to_csv(manifest: ClassManifest) -> str:
    dims = {len(it.features) for it in manifest.items if it.features is not None}
    if len(dims) > 1 or (dims and any(it.features is None for it in manifest.items)):
        raise ValueError("items carry features of inconsistent dimension")
    d = dims.pop() if dims else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "class", "prob"] + [f"f{j}" for j in range(d)])
    for it in manifest.items:
        prob = "" if it.probability is None else _fmt(it.probability)
        feats = [_fmt(f) for f in it.features] if d else []
        w.writerow([it.id, it.class_label, prob] + feats)
    return buf.getvalue()


def manifest_to_jsonl(manifest: ClassManifest) -> str:
    lines = []
    for it in manifest.items:
        obj = {"id": it.id, "class": it.class_label, "prob": it.probability}
        if it.features is not None:
            obj["features"] = list(it.features)
        lines.append(json.dumps(obj))
    return "\n".join(lines) + "\n"


def write_manifest(manifest: ClassManifest, path, format: str = "csv") -> None:
    text = manifest_to_jsonl(manifest) if format.lower() == "jsonl" else manifest_to_csv(manifest)
    _write_text(path, text)


def subset_csv(manifest: ClassManifest, indices: Iterable[int]) -> str:
    idx = sorted(set(int(i) for i in indices))
    n = len(manifest)
    bad = [i for i in idx if i < 0 or i >= n]
    if bad:
        raise IndexOutOfRange(f"indices {bad} outside [0, {n})")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "class"])
    for i in idx:
        it = manifest.items[i]
        w.writerow([it.id, it.class_label])
    return buf.getvalue()


def write_subset(manifest: ClassManifest, sample: DppSample | Iterable[int], path) -> None:
    """Write the selected items as ``id,class`` rows in manifest order."""
    indices = sample.indices if isinstance(sample, DppSample) else sample
    _write_text(path, subset_csv(manifest, indices))


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
