"""Check reports: a tree of named sub-checks with verdicts and witnesses."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INDETERMINATE = "INDETERMINATE"
    SKIPPED = "SKIPPED"


_SEVERITY = {Verdict.SKIPPED: 0, Verdict.PASS: 1, Verdict.INDETERMINATE: 2, Verdict.FAIL: 3}


def worst(verdicts) -> Verdict:
    best = Verdict.SKIPPED
    for v in verdicts:
        if _SEVERITY[v] > _SEVERITY[best]:
            best = v
    return best


@dataclass
class CheckReport:
    name: str
    verdict: Verdict = Verdict.PASS
    max_residual: float = 0.0
    witness: Optional[list[float]] = None
    children: list["CheckReport"] = field(default_factory=list)
    notes: Optional[str] = None
    data: Optional[dict] = None

    def add(self, child: "CheckReport") -> "CheckReport":
        self.children.append(child)
        return child

    def finalize(self) -> "CheckReport":
        """Parent verdict becomes the worst child verdict."""
        if self.children:
            self.verdict = worst(c.verdict for c in self.children)
            self.max_residual = max((c.max_residual for c in self.children), default=0.0)
        return self

    def find(self, name: str) -> Optional["CheckReport"]:
        if self.name == name:
            return self
        for c in self.children:
            got = c.find(name)
            if got is not None:
                return got
        return None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "verdict": self.verdict.value,
            "residual": self.max_residual,
            "witness": self.witness,
            "children": [c.to_json() for c in self.children],
        }
        if self.notes is not None:
            out["notes"] = self.notes
        if self.data is not None:
            out["data"] = self.data
        return out

    def pretty(self, indent: int = 0) -> str:
        pad = "  " * indent
        line = f"{pad}{self.verdict.value:13s} {self.name}"
        if self.max_residual:
            line += f"  (residual={self.max_residual:.3e})"
        if self.notes:
            line += f"  [{self.notes}]"
        lines = [line]
        for c in self.children:
            lines.append(c.pretty(indent + 1))
        return "\n".join(lines)


def leaf(name: str, passed: bool, residual: float,
         witness: Optional[Sequence[float]] = None, tol: Optional[float] = None,
         notes: Optional[str] = None) -> CheckReport:
    return CheckReport(
        name=name,
        verdict=Verdict.PASS if passed else Verdict.FAIL,
        max_residual=float(residual),
        witness=None if witness is None else [float(v) for v in witness],
        notes=notes,
    )


def residual_leaf(name: str, residual: float, tol: float,
                  witness: Optional[Sequence[float]] = None,
                  notes: Optional[str] = None) -> CheckReport:
    return leaf(name, residual <= tol, residual, witness, tol, notes)


def skipped(name: str, notes: str) -> CheckReport:
    return CheckReport(name=name, verdict=Verdict.SKIPPED, notes=notes)


def indeterminate(name: str, notes: str, residual: float = 0.0,
                  witness: Optional[Sequence[float]] = None) -> CheckReport:
    return CheckReport(
        name=name, verdict=Verdict.INDETERMINATE, max_residual=float(residual),
        witness=None if witness is None else [float(v) for v in witness], notes=notes)
