"""Per-iteration run records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

LOG_COLUMNS = (
    "iteration",
    "wall_seconds",
    "lower_bound",
    "cuts_fine",
    "cuts_coarse",
    "cuts_semicoarse",
    "lp_solves_scenario",
    "lp_solves_cluster",
    "coarse_tree_size",
    "phase",
    "partition_sizes",
)

# columns that legitimately differ between otherwise identical runs
TIMING_COLUMNS = ("wall_seconds",)


@dataclass
class IterationRecord:
    """Counts are per iteration, not cumulative."""

    iteration: int
    wall_seconds: float
    lower_bound: float
    cuts_fine: int
    cuts_coarse: int
    cuts_semicoarse: int
    lp_solves_scenario: int
    lp_solves_cluster: int
    coarse_tree_size: float
    phase: str
    partition_sizes: List[int]


@dataclass
class ProgressLog:
    variant: str
    seed: int
    initial_bound: float
    config: Dict[str, Any] = field(default_factory=dict)
    records: List[IterationRecord] = field(default_factory=list)
    final_bounds: Optional[Dict[str, float]] = None
    termination: str = ""
    stage_classes: Optional[Dict[int, str]] = None
    engine: Any = field(default=None, repr=False, compare=False)

    @property
    def lower_bounds(self) -> List[float]:
        return [r.lower_bound for r in self.records]

    @property
    def final_lower_bound(self) -> float:
        return self.records[-1].lower_bound if self.records else self.initial_bound

    def totals(self) -> Dict[str, int]:
        keys = ("cuts_fine", "cuts_coarse", "cuts_semicoarse", "lp_solves_scenario", "lp_solves_cluster")
        return {k: int(sum(getattr(r, k) for r in self.records)) for k in keys}

    def lower_bound_at(self, seconds: Optional[float] = None, iteration: Optional[int] = None) -> float:
        """Last lower bound recorded at or before a wall-time or iteration checkpoint."""
        best = self.initial_bound
        for r in self.records:
            if seconds is not None and r.wall_seconds > seconds:
                break
            if iteration is not None and r.iteration > iteration:
                break
            best = r.lower_bound
        return best

    def is_monotone(self, tol: float = 0.0) -> bool:
        lbs = [self.initial_bound] + self.lower_bounds
        return all(b >= a - tol for a, b in zip(lbs, lbs[1:]))

    def summary(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "iterations": len(self.records),
            "initial_bound": self.initial_bound,
            "final_lower_bound": self.final_lower_bound,
            "final_bounds": self.final_bounds,
            "totals": self.totals(),
            "termination": self.termination,
            "stage_classes": {str(k): v for k, v in (self.stage_classes or {}).items()},
            "config": self.config,
        }
