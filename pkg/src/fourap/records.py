"""Check records: one inequality (or identity) evaluated on concrete inputs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class CheckRecord:
    """``lhs <relation> rhs`` up to ``tol``.

    ``bound`` is the number ``lhs`` was actually compared against
    (``rhs + tol`` for ``<=``, ``rhs - tol`` for ``>=``).
    """

    lemma: str
    inputs: dict
    lhs: float
    rhs: float
    relation: str = "<="
    tol: float = 1e-9
    extra: dict = field(default_factory=dict)
    passed: bool | None = None

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        if self.passed is None:
            self.passed = self.holds()

    @property
    def bound(self) -> float:
        if self.relation == "<=":
            return self.rhs + self.tol
        if self.relation == ">=":
            return self.rhs - self.tol
        return self.rhs

    def holds(self) -> bool:
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            return False
        if self.relation == "<=":
            return self.lhs <= self.rhs + self.tol
        if self.relation == ">=":
            return self.lhs >= self.rhs - self.tol
        if self.relation == "==":
            return abs(self.lhs - self.rhs) <= self.tol
        raise ValueError(f"unknown relation {self.relation!r}")

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self) -> dict:
        return {"lemma": self.lemma, "params": jsonable(self.inputs), "lhs": self.lhs,
                "rhs": self.rhs, "relation": self.relation, "tol": self.tol,
                "bound": self.bound, "pass": bool(self.passed), "extra": jsonable(self.extra)}


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj: Any) -> str:
    """Deterministic single-line JSON."""
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))
