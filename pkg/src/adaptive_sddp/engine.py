"""SDDP machinery shared by every variant.

The engine owns the cut pools (one per stage ``2..T``, approximating the
expected cost-to-go of that stage as a function of the previous state), the
stage partitions and the work counters. Stage ``t`` subproblems carry the
cuts of pool ``t + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cuts import Cut, CutKind, CutPiece, CutPool, cut_from_duals, is_violated
from .lattice import (
    PathSampler,
    SamplePath,
    ScenarioLattice,
    SolverConfig,
    check_lattice,
    mean_value_lattice,
)
from .lp import LinearProgram, LpSolution, LPStatus, build_stage_subproblem, solve_lp
from .partition import (
    DualSignature,
    Partition,
    coarse_tree_size,
    initial_partition,
    refine_absolute,
)


class SubproblemError(RuntimeError):
    """A stage LP was infeasible or unbounded (the instance breaks a modelling assumption)."""


class CautiousPassError(RuntimeError):
    pass


@dataclass
class Trajectory:
    states: List[np.ndarray]
    immediate_costs: List[float]
    path: SamplePath

    @property
    def total_cost(self) -> float:
        return float(sum(self.immediate_costs))


@dataclass
class Bounds:
    lower: float
    sample_mean: float
    sample_var: float
    statistical_upper: float
    n_samples: int = 0


@dataclass
class WorkStats:
    lp_scenario: int = 0
    lp_cluster: int = 0
    cuts_fine: int = 0
    cuts_coarse: int = 0
    cuts_semicoarse: int = 0
    # one entry per coarse-cut attempt: (stage, clusters, realizations, cluster LPs solved)
    coarse_attempts: List[Tuple[int, int, int, int]] = field(default_factory=list)

    def counts(self) -> Dict[str, int]:
        return {
            "cuts_fine": self.cuts_fine,
            "cuts_coarse": self.cuts_coarse,
            "cuts_semicoarse": self.cuts_semicoarse,
            "lp_solves_scenario": self.lp_scenario,
            "lp_solves_cluster": self.lp_cluster,
        }


def _stage_bound_lp(stage, B, b) -> LinearProgram:
    """min c'x_t over x_t >= 0 and the incoming state x_{t-1} >= 0."""
    n_prev = B.shape[1]
    obj = np.concatenate([stage.cost_c, np.zeros(n_prev)])
    eq = np.hstack([stage.recourse_A, B])
    return LinearProgram(obj, eq, b)


def mean_value_bounds(lattice: ScenarioLattice) -> Dict[int, float]:
    """Lower bounds ``L_t`` on the expected cost-to-go of stages ``2..T``.

    Solved backwards on the mean-value lattice with the incoming state as a
    decision variable: ``L_t = min c_t'x_t + L_{t+1}`` subject to
    ``A_t x_t + Bbar_t x_{t-1} = bbar_t``. Averaging data is only a valid
    relaxation when the technology matrix is the same for every realization,
    so stages with random ``B`` use the expectation of per-realization minima.
    """
    check_lattice(lattice)
    mv = mean_value_lattice(lattice)
    T = lattice.horizon
    bounds: Dict[int, float] = {}
    future = 0.0
    for t in range(T, 1, -1):
        st = lattice.stage(t)
        B0 = st.realizations[0].tech_B
        fixed_B = all(np.array_equal(r.tech_B, B0) for r in st.realizations)
        if fixed_B:
            r = mv.stage(t).realizations[0]
            cases = [(1.0, r.tech_B, r.rhs_b)]
        else:
            cases = [(r.probability, r.tech_B, r.rhs_b) for r in st.realizations]
        value = 0.0
        for p, B, b in cases:
            sol = solve_lp(_stage_bound_lp(st, B, b))
            if sol.status == LPStatus.UNBOUNDED:
                raise SubproblemError(f"mean-value problem at stage {t} is unbounded; cost-to-go must be bounded below")
            if sol.status == LPStatus.INFEASIBLE:
                raise SubproblemError(f"mean-value problem at stage {t} is infeasible")
            value += p * sol.objective_value
        future = value + future
        bounds[t] = future
    return bounds


class SDDPEngine:
    """Cut pools, partitions and the forward / backward building blocks."""

    def __init__(
        self,
        lattice: ScenarioLattice,
        config: Optional[SolverConfig] = None,
        initial_bounds: Optional[Dict[int, float]] = None,
        partitions: Optional[Dict[int, Partition]] = None,
    ):
        check_lattice(lattice)
        self.lattice = lattice
        self.config = (config or SolverConfig()).validate()
        self.T = lattice.horizon
        if initial_bounds is None:
            initial_bounds = mean_value_bounds(lattice)
        self.initial_bounds = dict(initial_bounds)
        self.pools: Dict[int, CutPool] = {
            t: CutPool(t, lattice.stage(t - 1).n_vars, self.initial_bounds[t]) for t in range(2, self.T + 1)
        }
        if partitions is None:
            partitions = {t: initial_partition(lattice.stage(t)) for t in range(2, self.T + 1)}
        self.partitions: Dict[int, Partition] = dict(partitions)
        self.stats = WorkStats()
        self.iteration = 0
        self.sampler = PathSampler(self.config.rng_seed)
        self.current_lower = -math.inf
        self.current_lower = self.lower_bound()

    # ------------------------------------------------------------------ LPs

    def _empty_state(self) -> np.ndarray:
        return np.zeros(0)

    def solve_stage(
        self,
        t: int,
        B: np.ndarray,
        b: np.ndarray,
        x_in: np.ndarray,
        weight: float = 1.0,
        cluster: bool = False,
    ) -> LpSolution:
        st = self.lattice.stage(t)
        if t < self.T:
            pool = self.pools[t + 1]
            lp = build_stage_subproblem(st.cost_c, st.recourse_A, B, b, x_in, pool.betas, pool.alphas, weight)
        else:
            lp = build_stage_subproblem(st.cost_c, st.recourse_A, B, b, x_in)
        sol = solve_lp(lp)
        if cluster:
            self.stats.lp_cluster += 1
        else:
            self.stats.lp_scenario += 1
        if sol.status != LPStatus.OPTIMAL:
            raise SubproblemError(
                f"stage {t} subproblem is {sol.status.value}; instances need relatively complete "
                "recourse and bounded costs"
            )
        return sol

    def _x(self, t: int, sol: LpSolution) -> np.ndarray:
        return sol.primal[: self.lattice.stage(t).n_vars].copy()

    def _next_alphas(self, t: int) -> Optional[np.ndarray]:
        return self.pools[t + 1].alphas.copy() if t < self.T else None

    def _cut_duals(self, t: int, sol: LpSolution) -> np.ndarray:
        return sol.ineq_duals if t < self.T else np.zeros(0)

    def eps_cut(self) -> float:
        return self.config.cut_violation_tolerance * (1.0 + abs(self.current_lower))

    # ------------------------------------------------------------ forward

    def forward_pass(self, path: SamplePath, partitions: Optional[Dict[int, Partition]] = None) -> Trajectory:
        """Simulate the current policy along ``path``.

        With ``partitions`` the path indexes clusters and each stage uses the
        cluster's mean data (a forward pass on the coarse tree).
        """
        states: List[np.ndarray] = []
        costs: List[float] = []
        x_prev = self._empty_state()
        for t in range(1, self.T + 1):
            st = self.lattice.stage(t)
            k = path.at(t)
            if partitions is not None and t >= 2:
                B, b = partitions[t].clusters[k].mean_realization()
            else:
                r = st.realizations[k]
                B, b = r.tech_B, r.rhs_b
            sol = self.solve_stage(t, B, b, x_prev)
            x = self._x(t, sol)
            states.append(x)
            costs.append(float(st.cost_c @ x))
            x_prev = x
        return Trajectory(states, costs, path)

    def lower_bound(self) -> float:
        st = self.lattice.stage(1)
        r = st.realizations[0]
        sol = self.solve_stage(1, r.tech_B, r.rhs_b, self._empty_state())
        return sol.objective_value

    def update_lower_bound(self) -> float:
        # the pools only grow, so the best bound seen so far is still valid
        self.current_lower = max(self.current_lower, self.lower_bound())
        return self.current_lower

    # ---------------------------------------------------------- cut steps

    def fine_cut(self, t: int, x: np.ndarray) -> Cut:
        """Cut for pool ``t`` at state ``x`` from every realization of stage ``t``."""
        st = self.lattice.stage(t)
        pieces = []
        for r in st.realizations:
            sol = self.solve_stage(t, r.tech_B, r.rhs_b, x)
            pieces.append(CutPiece(r.probability, 1.0, r.rhs_b, r.tech_B, sol.eq_duals, self._cut_duals(t, sol)))
        return cut_from_duals(t, pieces, self._next_alphas(t), CutKind.FINE, self.iteration)

    def cluster_pieces(self, t: int, x: np.ndarray) -> List[CutPiece]:
        part = self.partitions[t]
        pieces = []
        for cl in part.clusters:
            sol = self.solve_stage(t, cl.agg_B, cl.agg_b, x, weight=cl.multiplicity, cluster=True)
            pieces.append(CutPiece(cl.mass, cl.multiplicity, cl.agg_b, cl.agg_B, sol.eq_duals, self._cut_duals(t, sol)))
        st = self.lattice.stage(t)
        self.stats.coarse_attempts.append((t, part.n_clusters, st.n_realizations, len(pieces)))
        return pieces

    def coarse_cut(self, t: int, x: np.ndarray, pieces: Optional[List[CutPiece]] = None) -> Cut:
        if pieces is None:
            pieces = self.cluster_pieces(t, x)
        return cut_from_duals(t, pieces, self._next_alphas(t), CutKind.COARSE, self.iteration, self.partitions[t].version)

    def try_add(self, t: int, x: np.ndarray, cut: Cut) -> bool:
        pool = self.pools[t]
        if not is_violated(pool, x, cut, self.eps_cut()):
            return False
        pool.append(cut)
        if cut.kind == CutKind.FINE:
            self.stats.cuts_fine += 1
        elif cut.kind == CutKind.COARSE:
            self.stats.cuts_coarse += 1
        else:
            self.stats.cuts_semicoarse += 1
        return True

    def fine_step(self, t: int, x: np.ndarray) -> bool:
        return self.try_add(t, x, self.fine_cut(t, x))

    def coarse_step(self, t: int, x: np.ndarray) -> Tuple[bool, List[CutPiece]]:
        pieces = self.cluster_pieces(t, x)
        return self.try_add(t, x, self.coarse_cut(t, x, pieces)), pieces

    def semicoarse_step(self, t: int, x: np.ndarray, cluster_pieces: Optional[List[CutPiece]] = None) -> bool:
        """Disaggregate clusters one at a time until the mixed cut is violated.

        Processed clusters contribute their member scenario solutions and are
        refined by the absolute rule; unprocessed clusters keep their
        aggregated solution. Refinements persist whether or not a cut is added.
        """
        part = self.partitions[t]
        st = self.lattice.stage(t)
        if cluster_pieces is None:
            cluster_pieces = self.cluster_pieces(t, x)
        next_alphas = self._next_alphas(t)
        scenario: Dict[int, List[CutPiece]] = {}
        signatures: Dict[int, DualSignature] = {}
        processed: List[int] = []
        candidate = None
        violated = False
        for ell, cl in enumerate(part.clusters):
            members = []
            for k in cl.members:
                r = st.realizations[k]
                sol = self.solve_stage(t, r.tech_B, r.rhs_b, x)
                cd = self._cut_duals(t, sol)
                members.append(CutPiece(r.probability, 1.0, r.rhs_b, r.tech_B, sol.eq_duals, cd))
                signatures[k] = DualSignature(sol.eq_duals, cd)
            scenario[ell] = members
            processed.append(ell)
            pieces: List[CutPiece] = []
            for j in range(part.n_clusters):
                pieces.extend(scenario[j] if j in scenario else [cluster_pieces[j]])
            candidate = cut_from_duals(t, pieces, next_alphas, CutKind.SEMI_COARSE, self.iteration, part.version + 1)
            if is_violated(self.pools[t], x, candidate, self.eps_cut()):
                violated = True
                break
        self.partitions[t] = refine_absolute(part, st, signatures, self.config.refine_tolerance, processed)
        if violated:
            return self.try_add(t, x, candidate)
        return False

    def adaptive_step(self, t: int, x: np.ndarray) -> bool:
        """Coarse cut first, semi-coarse cut if the coarse one is not violated."""
        added, pieces = self.coarse_step(t, x)
        if added:
            return True
        return self.semicoarse_step(t, x, pieces)

    # --------------------------------------------------------- backward

    def backward_pass_fine(self, traj: Trajectory) -> int:
        added = 0
        for t in range(self.T, 1, -1):
            added += self.fine_step(t, traj.states[t - 2])
        return added

    def backward_pass_coarse(self, traj: Trajectory) -> Tuple[int, Dict[int, bool]]:
        """Coarse cuts at every stage; ``flags[t]`` is True where the coarse cut was not violated."""
        added = 0
        flags: Dict[int, bool] = {}
        for t in range(self.T, 1, -1):
            ok, _ = self.coarse_step(t, traj.states[t - 2])
            added += ok
            flags[t] = not ok
        return added, flags

    def backward_pass_semicoarse(self, traj: Trajectory, stages: Optional[Sequence[int]] = None) -> int:
        """Semi-coarse cuts at ``stages`` (those whose coarse cut just failed)."""
        stages = range(self.T, 1, -1) if stages is None else sorted(stages, reverse=True)
        return sum(self.semicoarse_step(t, traj.states[t - 2]) for t in stages)

    def backward_pass(self, traj: Trajectory, modes: Optional[Dict[int, str]] = None) -> int:
        """Quick backward pass; ``modes[t]`` is 'fine' (default), 'coarse' or 'adaptive'."""
        added = 0
        for t in range(self.T, 1, -1):
            mode = (modes or {}).get(t, "fine")
            x = traj.states[t - 2]
            if mode == "fine":
                added += self.fine_step(t, x)
            elif mode == "coarse":
                added += self.coarse_step(t, x)[0]
            elif mode == "adaptive":
                added += self.adaptive_step(t, x)
            else:
                raise ValueError(f"unknown cut mode {mode!r}")
        return added

    def cautious_pass(self, traj: Trajectory, mode: str = "fine") -> int:
        """Backward sweep solving the two-stage problem at each boundary ``(t, t+1)`` exactly.

        At boundary ``(t, t+1)`` the stage-``t`` trial state is re-solved after
        every cut added to pool ``t+1`` until no violated cut remains, and only
        then does the sweep move on to ``t-1``. In ``'partition'`` mode each
        inner cut is coarse first and semi-coarse on failure.
        """
        if mode not in ("fine", "partition"):
            raise ValueError(f"unknown cautious mode {mode!r}")
        added = 0
        cap = self.config.cautious_inner_cap
        for t in range(self.T - 1, 0, -1):
            st = self.lattice.stage(t)
            r = st.realizations[traj.path.at(t)]
            x_in = traj.states[t - 2] if t >= 2 else self._empty_state()
            inner = 0
            while True:
                sol = self.solve_stage(t, r.tech_B, r.rhs_b, x_in)
                x = self._x(t, sol)
                traj.states[t - 1] = x
                traj.immediate_costs[t - 1] = float(st.cost_c @ x)
                if mode == "fine":
                    new = self.fine_step(t + 1, x)
                else:
                    new = self.adaptive_step(t + 1, x)
                if not new:
                    break
                added += 1
                inner += 1
                if inner >= cap:
                    raise CautiousPassError(
                        f"cautious pass exceeded {cap} inner iterations at stages ({t}, {t + 1}); "
                        f"last state {x.tolist()}"
                    )
        return added

    # ---------------------------------------------------------- bounds

    def statistical_upper_bound(
        self,
        sample_count: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        paths: Optional[Sequence[SamplePath]] = None,
        weights: Optional[Sequence[float]] = None,
    ) -> Bounds:
        """Policy cost statistics from forward simulations with the pools held fixed.

        Either sample ``sample_count`` paths from ``rng`` or evaluate the given
        ``paths``, optionally with probability ``weights`` (for full
        enumeration). The variance uses the ``1/|J|`` normalisation.
        """
        from .lattice import sample_path

        if paths is None:
            if rng is None:
                rng = np.random.default_rng(self.config.rng_seed)
            paths = [sample_path(self.lattice, rng) for _ in range(int(sample_count or 1))]
        z = np.array([self.forward_pass(p).total_cost for p in paths])
        if weights is None:
            w = np.full(len(z), 1.0 / len(z))
        else:
            w = np.asarray(weights, dtype=float)
            w = w / w.sum()
        mean = float(w @ z)
        var = float(w @ (z - mean) ** 2)
        upper = mean + self.config.confidence_multiplier * math.sqrt(var) / math.sqrt(len(z))
        return Bounds(self.lower_bound(), mean, var, upper, len(z))

    def converged(self, bounds: Bounds, eps: float) -> bool:
        """Stopping predicate: statistical upper bound minus lower bound at most ``eps``."""
        return bounds.statistical_upper - bounds.lower <= eps

    # --------------------------------------------------------- helpers

    def coarse_tree_size(self) -> float:
        return coarse_tree_size([self.partitions[t] for t in range(2, self.T + 1)])

    def partition_sizes(self) -> List[int]:
        return [self.partitions[t].n_clusters for t in range(2, self.T + 1)]

    def all_cuts(self) -> List[Cut]:
        return [c for t in range(2, self.T + 1) for c in self.pools[t].cuts]
