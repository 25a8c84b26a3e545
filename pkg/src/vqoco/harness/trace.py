"""Run traces and their line-delimited JSON encoding.

The first line is ``{"meta": {...}}``; each following line is one slot
record.  Floats are written with 17 significant digits so a load/dump cycle
reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError
from ..solver import SlotRecord

FORMAT = "vqoco-trace/1"


def _float(v):
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def encode(obj):
    """Compact JSON with ``.17g`` floats and keys in insertion order."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(encode(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{encode(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def digest_of(obj):
    return hashlib.sha256(encode(obj).encode()).hexdigest()


@dataclass(eq=False)
class RunTrace:
    """Slot records plus running sums of the objective and each constraint."""

    records: list
    metadata: dict = field(default_factory=dict)
    f_sum: np.ndarray = None
    g_sum: np.ndarray = None

    def __post_init__(self):
        if self.f_sum is None:
            self.f_sum, self.g_sum = running_sums(self.records, self.k)

    @property
    def k(self):
        if self.records:
            return self.records[0].g.shape[0]
        return int(self.metadata.get("k", 0))

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def lines(self):
        yield encode({"meta": self.metadata})
        for j, rec in enumerate(self.records):
            d = rec.to_dict()
            d["f_sum"] = self.f_sum[j]
            d["g_sum"] = self.g_sum[j]
            yield encode(d)

    def dumps(self):
        return "".join(line + "\n" for line in self.lines())

    def digest(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def write(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text):
        lines = text.splitlines()
        if not lines:
            raise InputError("empty trace")
        head = json.loads(lines[0])
        if "meta" not in head:
            raise InputError("trace is missing its metadata line")
        records, f_sum, g_sum = [], [], []
        for n, line in enumerate(lines[1:], start=2):
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"trace line {n}: {exc}") from None
            records.append(SlotRecord.from_dict(d))
            f_sum.append(float(d["f_sum"]))
            g_sum.append([float(v) for v in d["g_sum"]])
        meta = head["meta"]
        k = records[0].g.shape[0] if records else int(meta.get("k", 0))
        return cls(records, meta, np.array(f_sum, dtype=float),
                   np.array(g_sum, dtype=float).reshape(len(records), k))

    @classmethod
    def read(cls, path):
        return cls.loads(Path(path).read_text())


def running_sums(records, k):
    """Sequential running sums, accumulated in slot order."""
    f_sum = np.empty(len(records))
    g_sum = np.empty((len(records), k))
    f_acc, g_acc = 0.0, np.zeros(k)
    for j, rec in enumerate(records):
        f_acc = f_acc + rec.f
        g_acc = g_acc + rec.g
        f_sum[j] = f_acc
        g_sum[j] = g_acc
    return f_sum, g_sum
