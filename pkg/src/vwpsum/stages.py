"""Staged residual reports shared by proof replays and specialization chains."""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import Scalar, relative_residual


@dataclass(frozen=True)
class Stage:
    name: str
    value: Scalar
    residual: float
    detail: str = ""


@dataclass
class StagedReport:
    """An ordered chain of representations of one quantity.

    Each stage's residual is measured against the previous stage (the first
    against ``reference``), so a break in the chain is attributed to the step
    that introduced it.
    """

    reference: Scalar
    stages: list[Stage] = field(default_factory=list)
    notes: dict[str, object] = field(default_factory=dict)

    def add(self, name: str, value: Scalar, detail: str = "", against: Scalar | None = None) -> Stage:
        prev = self.stages[-1].value if self.stages else self.reference
        base = prev if against is None else against
        stage = Stage(name, value, float(relative_residual(value, base)), detail)
        self.stages.append(stage)
        return stage

    @property
    def max_residual(self) -> float:
        return max((s.residual for s in self.stages), default=0.0)

    @property
    def final(self) -> Scalar:
        return self.stages[-1].value if self.stages else self.reference

    def failed_stage(self, tol: float) -> Stage | None:
        for s in self.stages:
            if not s.residual <= tol:
                return s
        return None

    def passed(self, tol: float) -> bool:
        return self.failed_stage(tol) is None
