"""The seven algorithm variants as drivers over :class:`SDDPEngine`.

========  ==============================================================
sddp-qp   forward pass + fine quick backward pass
sddp-cp   forward pass + fine cautious pass
apep      SDDP on a coarse tree until the bound stalls, cautious
          partition refinement on a sampled path, and plain SDDP on the
          original tree once the coarse tree is larger than ``nu``
iter      as apep with ``nu = 1`` and quick refinement passes
apqp      quick backward pass, coarse cut first, semi-coarse on failure
apcp      cautious pass in partition mode
spap      fine cuts at more-important stages, apqp cuts elsewhere
========  ==============================================================
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .engine import SDDPEngine
from .lattice import PathSampler, SamplePath, ScenarioLattice, SolverConfig
from .lp import build_stage_subproblem, solve_lp, LPStatus
from .progress import IterationRecord, ProgressLog

VARIANTS = ("sddp-qp", "sddp-cp", "apep", "iter", "apqp", "apcp", "spap")

MORE_IMPORTANT = "more_important"
LESS_IMPORTANT = "less_important"


def normalize_variant(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key.endswith("-sddp"):
        key = key[: -len("-sddp")]
    if key not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    return key


@dataclass
class VariantSpec:
    name: str
    config: SolverConfig = field(default_factory=SolverConfig)
    stage_classes: Optional[Dict[int, str]] = None

    def __post_init__(self):
        self.name = normalize_variant(self.name)

    def problems(self) -> List[str]:
        out = self.config.problems()
        if self.stage_classes is not None:
            bad = {v for v in self.stage_classes.values() if v not in (MORE_IMPORTANT, LESS_IMPORTANT)}
            if bad:
                out.append(f"unknown stage classes {sorted(bad)}")
        return out


class SubproblemInfeasible(RuntimeError):
    pass


def myopic_stage_costs(lattice: ScenarioLattice) -> Dict[int, float]:
    """Sum over realizations of the stage-``t`` optimum with an empty incoming state and no future cost."""
    out = {}
    for t in range(2, lattice.horizon + 1):
        st = lattice.stage(t)
        x0 = np.zeros(lattice.stage(t - 1).n_vars)
        total = 0.0
        for r in st.realizations:
            sol = solve_lp(build_stage_subproblem(st.cost_c, st.recourse_A, r.tech_B, r.rhs_b, x0))
            if sol.status != LPStatus.OPTIMAL:
                raise SubproblemInfeasible(f"myopic stage-{t} problem is {sol.status.value}")
            total += sol.objective_value
        out[t] = total
    return out


def classify_stages(
    lattice: ScenarioLattice, Z: Optional[float] = None
) -> Tuple[Dict[int, str], Dict[int, float], float]:
    """Wet (more important) / dry (less important) labels from myopic stage costs.

    A stage is more important when its summed myopic cost is at most ``Z``;
    ``Z`` defaults to the median of those costs.
    """
    zbar = myopic_stage_costs(lattice)
    if Z is None:
        Z = float(np.median(list(zbar.values())))
    classes = {t: (MORE_IMPORTANT if v <= Z else LESS_IMPORTANT) for t, v in zbar.items()}
    return classes, zbar, float(Z)


class _Driver:
    """One algorithm iteration per :meth:`step`; returns the phase label."""

    def __init__(self, engine: SDDPEngine, spec: VariantSpec):
        self.engine = engine
        self.spec = spec
        self.lattice = engine.lattice

    def sample(self, it: int) -> SamplePath:
        return self.engine.sampler.lattice_path(self.lattice, it)

    def trajectories(self, it: int):
        # extra sample paths per iteration use disjoint counter keys
        k = self.spec.config.sample_paths_per_iter
        return [self.engine.forward_pass(self.sample(it * k + j)) for j in range(k)]

    def step(self, it: int) -> str:
        raise NotImplementedError


class _QuickDriver(_Driver):
    def __init__(self, engine, spec, modes: Optional[Dict[int, str]] = None, phase: str = "sddp"):
        super().__init__(engine, spec)
        self.modes = modes
        self.phase = phase

    def step(self, it):
        for traj in self.trajectories(it):
            self.engine.backward_pass(traj, self.modes)
        return self.phase


class _CautiousDriver(_Driver):
    def __init__(self, engine, spec, mode: str):
        super().__init__(engine, spec)
        self.mode = mode

    def step(self, it):
        for traj in self.trajectories(it):
            self.engine.cautious_pass(traj, self.mode)
        return "cautious"


class _RefineOutsideDriver(_Driver):
    """APEP / ITER: SDDP on the coarse tree until stall, then a refinement pass.

    The stall window starts filled with the bound on entry to each coarse
    phase, so the first comparison is against that entering bound.
    """

    def __init__(self, engine, spec, nu: float, cautious: bool):
        super().__init__(engine, spec)
        self.nu = nu
        self.cautious = cautious
        self.in_original = False
        self.history: Optional[List[float]] = None
        # coarse-tree paths come from their own stream
        self.coarse_sampler = PathSampler(spec.config.rng_seed, stream=1)

    def coarse_path(self, it: int) -> SamplePath:
        parts = self.engine.partitions
        T = self.lattice.horizon
        sizes = [1] + [parts[t].n_clusters for t in range(2, T + 1)]
        probs = [np.ones(1)] + [np.array([c.mass for c in parts[t].clusters]) for t in range(2, T + 1)]
        probs = [p / p.sum() for p in probs]
        return self.coarse_sampler.path(sizes, probs, it)

    def step(self, it):
        eng = self.engine
        if self.in_original or eng.coarse_tree_size() > self.nu:
            self.in_original = True
            for traj in self.trajectories(it):
                eng.backward_pass_fine(traj)
            return "original"
        n = self.spec.config.stall_window
        if self.history is None:
            self.history = [eng.current_lower] * n
        traj = eng.forward_pass(self.coarse_path(it), eng.partitions)
        eng.backward_pass_coarse(traj)
        lb = eng.update_lower_bound()
        self.history.append(lb)
        eps = self.spec.config.stall_tolerance * (1.0 + abs(lb))
        if self.history[-1] - self.history[-1 - n] > eps:
            return "coarse"
        # stalled: refine the partitions along a path of the original tree
        self.history = None
        traj = eng.forward_pass(self.sample(it))
        if self.cautious:
            eng.cautious_pass(traj, "partition")
        else:
            eng.backward_pass(traj, {t: "adaptive" for t in range(2, self.lattice.horizon + 1)})
        return "refine"


def make_driver(engine: SDDPEngine, spec: VariantSpec) -> Tuple[_Driver, Optional[Dict[int, str]]]:
    name = spec.name
    T = engine.T
    if name == "sddp-qp":
        return _QuickDriver(engine, spec), None
    if name == "sddp-cp":
        return _CautiousDriver(engine, spec, "fine"), None
    if name == "apqp":
        return _QuickDriver(engine, spec, {t: "adaptive" for t in range(2, T + 1)}, "adaptive"), None
    if name == "apcp":
        return _CautiousDriver(engine, spec, "partition"), None
    if name == "apep":
        return _RefineOutsideDriver(engine, spec, spec.config.preprocess_threshold, cautious=True), None
    if name == "iter":
        return _RefineOutsideDriver(engine, spec, 1.0, cautious=False), None
    if name == "spap":
        classes = spec.stage_classes
        if classes is None:
            classes, _, _ = classify_stages(engine.lattice, spec.config.importance_threshold)
        modes = {t: ("fine" if classes.get(t) == MORE_IMPORTANT else "adaptive") for t in range(2, T + 1)}
        return _QuickDriver(engine, spec, modes, "structured"), classes
    raise ValueError(name)


def _config_snapshot(cfg: SolverConfig) -> Dict:
    # JSON has no infinities, so non-finite floats are kept as their repr
    d = asdict(cfg)
    return {k: (repr(v) if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def run_variant(
    spec: VariantSpec,
    lattice: ScenarioLattice,
    engine: Optional[SDDPEngine] = None,
    on_iteration: Optional[Callable[[IterationRecord], None]] = None,
    stop_when: Optional[Callable[[ProgressLog], bool]] = None,
    evaluation_samples: int = 0,
    clock: Callable[[], float] = time.perf_counter,
) -> ProgressLog:
    """Run one variant until its time limit, iteration limit or ``stop_when`` fires.

    With ``evaluation_samples > 0`` the final policy is simulated on that many
    sample paths and ``log.final_bounds`` holds the statistical bound. The
    engine (cut pools, partitions, counters) is left on ``log.engine``.
    """
    problems = spec.problems()
    if problems:
        raise ValueError("invalid variant spec: " + "; ".join(problems))
    cfg = spec.config
    start = clock()
    if engine is None:
        engine = SDDPEngine(lattice, cfg)
    driver, classes = make_driver(engine, spec)
    log = ProgressLog(spec.name, cfg.rng_seed, engine.current_lower, _config_snapshot(cfg), stage_classes=classes)
    prev = engine.stats.counts()
    termination = "max_iterations"
    it = 0
    while it < cfg.max_iterations:
        if clock() - start >= cfg.time_limit:
            termination = "time_limit"
            break
        it += 1
        engine.iteration = it
        phase = driver.step(it)
        engine.update_lower_bound()
        now = engine.stats.counts()
        delta = {k: now[k] - prev[k] for k in now}
        prev = now
        rec = IterationRecord(
            iteration=it,
            wall_seconds=clock() - start,
            lower_bound=engine.current_lower,
            coarse_tree_size=engine.coarse_tree_size(),
            phase=phase,
            partition_sizes=engine.partition_sizes(),
            **delta,
        )
        log.records.append(rec)
        if on_iteration is not None:
            on_iteration(rec)
        if stop_when is not None and stop_when(log):
            termination = "converged"
            break
    log.termination = termination
    if evaluation_samples > 0:
        rng = np.random.default_rng([cfg.rng_seed, 99])
        b = engine.statistical_upper_bound(evaluation_samples, rng)
        log.final_bounds = {
            "lower": b.lower,
            "sample_mean": b.sample_mean,
            "sample_var": b.sample_var,
            "statistical_upper": b.statistical_upper,
            "n_samples": b.n_samples,
        }
    log.engine = engine
    return log
