"""Stagewise-independent scenario lattices, solver configuration and path sampling.

Stages are numbered ``1..T``. Stage ``t`` holds the fixed recourse matrix
``A_t`` and cost ``c_t`` together with a finite list of ``(B_{t,k}, b_{t,k})``
realizations. Stage 1 is deterministic and its technology matrix has zero
columns (there is no incoming state).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

PROB_TOL = 1e-9


@dataclass(frozen=True)
class Realization:
    index: int
    tech_B: np.ndarray
    rhs_b: np.ndarray
    probability: float


@dataclass(frozen=True)
class StageData:
    stage_index: int
    cost_c: np.ndarray
    recourse_A: np.ndarray
    realizations: tuple

    @property
    def n_vars(self) -> int:
        return int(self.recourse_A.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.recourse_A.shape[0])

    @property
    def n_realizations(self) -> int:
        return len(self.realizations)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([r.probability for r in self.realizations], dtype=float)


@dataclass(frozen=True)
class ScenarioLattice:
    stages: tuple

    @property
    def horizon(self) -> int:
        return len(self.stages)

    def stage(self, t: int) -> StageData:
        """Return stage ``t`` (1-based)."""
        return self.stages[t - 1]

    def sizes(self) -> List[int]:
        return [s.n_realizations for s in self.stages]


def make_stage(
    t: int,
    cost_c,
    recourse_A,
    techs: Sequence,
    rhss: Sequence,
    probabilities: Optional[Sequence[float]] = None,
) -> StageData:
    """Build a :class:`StageData` from plain arrays; uniform probabilities by default."""
    A = np.atleast_2d(np.asarray(recourse_A, dtype=float))
    c = np.asarray(cost_c, dtype=float).ravel()
    n = len(rhss)
    if probabilities is None:
        probabilities = [1.0 / n] * n
    reals = []
    for k, (B, b) in enumerate(zip(techs, rhss)):
        B = np.asarray(B, dtype=float)
        b = np.asarray(b, dtype=float).ravel()
        if B.ndim < 2:
            B = B.reshape(A.shape[0], -1)
        reals.append(Realization(k, B, b, float(probabilities[k])))
    return StageData(t, c, A, tuple(reals))


def make_lattice(stages: Sequence[StageData]) -> ScenarioLattice:
    return ScenarioLattice(tuple(stages))


def validate_lattice(lattice: ScenarioLattice) -> List[str]:
    """List every violated structural invariant; an empty list means well-formed."""
    problems: List[str] = []
    if lattice.horizon < 2:
        problems.append(f"horizon T={lattice.horizon} must be at least 2")
    prev_n = 0
    for pos, st in enumerate(lattice.stages, start=1):
        tag = f"stage {pos}"
        if st.stage_index != pos:
            problems.append(f"{tag}: stage_index {st.stage_index} out of order")
        m, n = st.recourse_A.shape
        if st.cost_c.shape != (n,):
            problems.append(f"{tag}: cost length {st.cost_c.shape[0]} != n_vars {n}")
        if not st.realizations:
            problems.append(f"{tag}: no realizations")
        if pos == 1 and len(st.realizations) != 1:
            problems.append(f"{tag}: first stage must be deterministic (1 realization)")
        for r in st.realizations:
            if r.tech_B.shape != (m, prev_n):
                problems.append(
                    f"{tag}: realization {r.index} dimension mismatch, B is "
                    f"{r.tech_B.shape}, expected {(m, prev_n)}"
                )
            if r.rhs_b.shape != (m,):
                problems.append(
                    f"{tag}: realization {r.index} dimension mismatch, b has length "
                    f"{r.rhs_b.shape[0]}, expected {m}"
                )
            if not (0.0 < r.probability <= 1.0):
                problems.append(f"{tag}: realization {r.index} probability {r.probability} outside (0, 1]")
            if not (np.all(np.isfinite(r.tech_B)) and np.all(np.isfinite(r.rhs_b))):
                problems.append(f"{tag}: realization {r.index} has non-finite data")
        if st.realizations:
            total = float(sum(r.probability for r in st.realizations))
            if abs(total - 1.0) > PROB_TOL:
                problems.append(f"{tag}: probability sum {total:.12g} != 1")
        prev_n = n
    return problems


class LatticeError(ValueError):
    pass


def check_lattice(lattice: ScenarioLattice) -> None:
    problems = validate_lattice(lattice)
    if problems:
        raise LatticeError("malformed lattice: " + "; ".join(problems))


def mean_value_lattice(lattice: ScenarioLattice) -> ScenarioLattice:
    """Collapse every stage to its probability-weighted mean realization."""
    check_lattice(lattice)
    stages = []
    for st in lattice.stages:
        p = st.probabilities
        B = sum(pk * r.tech_B for pk, r in zip(p, st.realizations))
        b = sum(pk * r.rhs_b for pk, r in zip(p, st.realizations))
        if st.n_realizations == 1:
            B, b = st.realizations[0].tech_B, st.realizations[0].rhs_b
        stages.append(replace(st, realizations=(Realization(0, np.asarray(B), np.asarray(b), 1.0),)))
    return ScenarioLattice(tuple(stages))


@dataclass(frozen=True)
class SamplePath:
    """Realization index for stages ``2..T`` (``indices[0]`` belongs to stage 2)."""

    indices: tuple

    def at(self, t: int) -> int:
        return 0 if t == 1 else self.indices[t - 2]


def sample_path(lattice: ScenarioLattice, rng: np.random.Generator) -> SamplePath:
    """Draw one realization per stage ``2..T`` independently from the stage distributions."""
    out = []
    for st in lattice.stages[1:]:
        if st.n_realizations == 1:
            out.append(0)
        else:
            out.append(int(rng.choice(st.n_realizations, p=st.probabilities)))
    return SamplePath(tuple(out))


class PathSampler:
    """Counter-keyed sampler: the path for ``(seed, stream, iteration)`` never depends on call order.

    Variants sharing a seed therefore see the same sequence of sample paths.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)

    def generator(self, iteration: int, stage: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream, int(iteration), int(stage)])

    def path(self, lattice_sizes: Sequence[int], probabilities: Sequence[np.ndarray], iteration: int) -> SamplePath:
        out = []
        for t in range(2, len(lattice_sizes) + 1):
            n = lattice_sizes[t - 1]
            if n == 1:
                out.append(0)
                continue
            rng = self.generator(iteration, t)
            out.append(int(rng.choice(n, p=probabilities[t - 1])))
        return SamplePath(tuple(out))

    def lattice_path(self, lattice: ScenarioLattice, iteration: int) -> SamplePath:
        return self.path(lattice.sizes(), [s.probabilities for s in lattice.stages], iteration)


@dataclass
class SolverConfig:
    """Tunable parameters shared by every variant.

    Tolerances named ``*_tolerance`` are relative: the engine scales them by
    ``1 + |lower bound|`` (stall, cut violation) or ``1 + max signature norm``
    (dual refinement) before use.
    """

    sample_paths_per_iter: int = 1
    stall_window: int = 30
    stall_tolerance: float = 1e-4
    refine_tolerance: float = 1e-4
    cut_violation_tolerance: float = 1e-6
    preprocess_threshold: float = 0.5
    importance_threshold: Optional[float] = None
    time_limit: float = 60.0
    max_iterations: int = 1000
    rng_seed: int = 0
    confidence_multiplier: float = 1.96
    cautious_inner_cap: int = 100

    def problems(self) -> List[str]:
        out = []
        if self.sample_paths_per_iter < 1:
            out.append("sample_paths_per_iter must be >= 1")
        if self.stall_window < 1:
            out.append("stall_window must be >= 1")
        for name in ("stall_tolerance", "cut_violation_tolerance", "time_limit", "confidence_multiplier"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        if self.refine_tolerance < 0:
            out.append("refine_tolerance must be >= 0")
        if not (0.0 <= self.preprocess_threshold <= 1.0):
            out.append("preprocess_threshold must lie in [0, 1]")
        if self.max_iterations < 0:
            out.append("max_iterations must be >= 0")
        if self.cautious_inner_cap < 1:
            out.append("cautious_inner_cap must be >= 1")
        return out

    def validate(self) -> "SolverConfig":
        problems = self.problems()
        if problems:
            raise ValueError("invalid solver config: " + "; ".join(problems))
        return self
