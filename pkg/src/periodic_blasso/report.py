from __future__ import annotations

import math
from dataclasses import dataclass, field, fields


@dataclass
class SolverReport:
    """Per-run indicators shared by every solver."""

    factor: float = math.nan
    iterations: int = 0
    duration_s: float = 0.0
    converged: bool = False
    objective: float = math.nan
    splines_rrse: float = math.nan
    samples_rrse: float = math.nan
    sparsity: int = 0
    lam: float = math.nan
    trace: list = field(default_factory=list, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "trace"}
