"""Deterministic equivalent (extensive form) of a small lattice, used as the verification oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .lattice import SamplePath, ScenarioLattice, check_lattice
from .lp import LinearProgram, LPStatus, solve_lp

DEFAULT_NODE_CAP = 200_000


class DepError(RuntimeError):
    pass


@dataclass
class ExtensiveForm:
    """Tree expansion of a lattice from ``root_stage`` on, as one sparse LP.

    ``nodes[i] = (stage, realization path, parent index, probability)``;
    variables of node ``i`` start at ``offsets[i]``.
    """

    nodes: List[Tuple[int, Tuple[int, ...], int, float]]
    offsets: np.ndarray
    objective: np.ndarray
    eq_matrix: sp.csr_matrix
    eq_rhs: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def node_count(lattice: ScenarioLattice, root_stage: int = 1) -> int:
    total, width = 0, 1
    for t in range(root_stage, lattice.horizon + 1):
        if t > root_stage:
            width *= lattice.stage(t).n_realizations
        total += width
    return total


def build_extensive_form(
    lattice: ScenarioLattice,
    root_stage: int = 1,
    incoming_state: Optional[np.ndarray] = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> ExtensiveForm:
    """Expand stages ``root_stage..T``.

    With ``root_stage = 1`` this is the full problem. For ``root_stage = s > 1``
    the stage-``s`` nodes are one per realization (probability-weighted) and
    ``incoming_state`` is the fixed state ``x_{s-1}``.
    """
    check_lattice(lattice)
    T = lattice.horizon
    count = node_count(lattice, root_stage)
    if root_stage > 1:
        count = count * lattice.stage(root_stage).n_realizations  # every root realization is its own subtree
    if count > node_cap:
        raise DepError(f"extensive form has {count} nodes, above the cap of {node_cap}")
    x_in = np.zeros(0) if incoming_state is None else np.asarray(incoming_state, dtype=float).ravel()

    nodes: List[Tuple[int, Tuple[int, ...], int, float]] = []
    st0 = lattice.stage(root_stage)
    for r in st0.realizations:
        nodes.append((root_stage, (r.index,), -1, r.probability))
    frontier = list(range(len(nodes)))
    for t in range(root_stage + 1, T + 1):
        st = lattice.stage(t)
        nxt = []
        for parent in frontier:
            _, path, _, prob = nodes[parent]
            for r in st.realizations:
                nodes.append((t, path + (r.index,), parent, prob * r.probability))
                nxt.append(len(nodes) - 1)
        frontier = nxt

    sizes = np.array([lattice.stage(t).n_vars for t, _, _, _ in nodes])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    n_total = int(sizes.sum())
    objective = np.zeros(n_total)
    rows, cols, vals, rhs = [], [], [], []
    row0 = 0
    for i, (t, path, parent, prob) in enumerate(nodes):
        st = lattice.stage(t)
        r = st.realizations[path[-1]]
        off = offsets[i]
        objective[off : off + st.n_vars] = prob * st.cost_c
        A = sp.coo_matrix(st.recourse_A)
        rows.append(A.row + row0)
        cols.append(A.col + off)
        vals.append(A.data)
        b = r.rhs_b.copy()
        if parent >= 0:
            Bm = sp.coo_matrix(r.tech_B)
            rows.append(Bm.row + row0)
            cols.append(Bm.col + offsets[parent])
            vals.append(Bm.data)
        elif x_in.size:
            b = b - r.tech_B @ x_in
        rhs.append(b)
        row0 += st.n_rows
    M = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(row0, n_total)
    )
    return ExtensiveForm(nodes, offsets, objective, M, np.concatenate(rhs))


@dataclass
class DepResult:
    value: float
    first_stage: np.ndarray
    n_nodes: int


def _solve_form(ef: ExtensiveForm, solver: str) -> Tuple[float, np.ndarray]:
    if solver == "highs":
        res = linprog(
            ef.objective,
            A_eq=ef.eq_matrix,
            b_eq=ef.eq_rhs,
            bounds=(0, None),
            method="highs",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        if res.status == 2:
            raise DepError("extensive form is infeasible (relatively complete recourse violated)")
        if res.status == 3:
            raise DepError("extensive form is unbounded")
        if res.status != 0:
            raise DepError(f"HiGHS failed: {res.message}")
        return float(res.fun), res.x
    if solver == "simplex":
        sol = solve_lp(LinearProgram(ef.objective, ef.eq_matrix.toarray(), ef.eq_rhs))
        if sol.status == LPStatus.INFEASIBLE:
            raise DepError("extensive form is infeasible (relatively complete recourse violated)")
        if sol.status == LPStatus.UNBOUNDED:
            raise DepError("extensive form is unbounded")
        return sol.objective_value, sol.primal
    raise ValueError(f"unknown solver {solver!r}")


def solve_dep(lattice: ScenarioLattice, solver: str = "highs", node_cap: int = DEFAULT_NODE_CAP) -> DepResult:
    """Optimal value and first-stage decision of the full multistage problem."""
    ef = build_extensive_form(lattice, 1, node_cap=node_cap)
    value, x = _solve_form(ef, solver)
    n1 = lattice.stage(1).n_vars
    return DepResult(value, x[:n1], ef.n_nodes)


def exact_cost_to_go(
    lattice: ScenarioLattice, t: int, x, solver: str = "highs", node_cap: int = DEFAULT_NODE_CAP
) -> float:
    """Exact expected cost-to-go of stage ``t + 1`` at the stage-``t`` state ``x``.

    Returns 0 for ``t = T``.
    """
    T = lattice.horizon
    if not 1 <= t <= T:
        raise ValueError(f"stage {t} outside 1..{T}")
    if t == T:
        return 0.0
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != lattice.stage(t).n_vars:
        raise ValueError("state dimension does not match stage")
    ef = build_extensive_form(lattice, t + 1, incoming_state=x, node_cap=node_cap)
    value, _ = _solve_form(ef, solver)
    return value


def enumerate_paths(lattice: ScenarioLattice) -> Tuple[List[SamplePath], np.ndarray]:
    """Every sample path of the lattice with its probability."""
    stages = lattice.stages[1:]
    paths, probs = [], []
    for combo in itertools.product(*[range(s.n_realizations) for s in stages]):
        paths.append(SamplePath(tuple(combo)))
        probs.append(float(np.prod([s.realizations[k].probability for s, k in zip(stages, combo)])))
    return paths, np.array(probs)


def policy_value(engine) -> float:
    """Expected cost of the policy induced by ``engine``'s cut pools, by recursion over the tree."""
    lattice = engine.lattice
    T = lattice.horizon

    def visit(t: int, x_prev: np.ndarray) -> float:
        st = lattice.stage(t)
        total = 0.0
        for r in st.realizations:
            sol = engine.solve_stage(t, r.tech_B, r.rhs_b, x_prev)
            x = sol.primal[: st.n_vars]
            cost = float(st.cost_c @ x)
            if t < T:
                cost += visit(t + 1, x)
            total += r.probability * cost
        return total

    return visit(1, np.zeros(0))
