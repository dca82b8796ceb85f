"""The common report record produced by every inequality check."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    constant_used: float
    ratio: float
    verdict: Verdict
    quad_error: float

    @classmethod
    def build(cls, lhs: float, base: float, constant: float, quad_error: float = 0.0) -> "InequalityReport":
        """Report for ``lhs <= constant * base``; ratio is ``lhs / base``."""
        lhs = float(lhs)
        base = float(base)
        quad_error = float(abs(quad_error))
        rhs = constant * base
        if base == 0.0 or not math.isfinite(base):
            return cls(lhs, rhs, constant, math.nan, Verdict.DEGENERATE, quad_error)
        verdict = Verdict.HOLDS if lhs <= rhs + quad_error else Verdict.VIOLATED
        return cls(lhs, rhs, constant, lhs / base, verdict, quad_error)

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        for key, value in d.items():
            if isinstance(value, float) and not math.isfinite(value):
                d[key] = None
        return d
