"""Synthetic hydro-thermal planning instances.

Each stage balances water in every reservoir and power against demand:

    storage_t + turbined_t + spilled_t = storage_{t-1} + inflow_t
    sum(coef * turbined_t) + sum(thermal_t) + shortage_t = demand_t

Storage, turbine and thermal limits are equality rows with explicit slack
columns. Only the inflow right-hand side is random, the shortage column keeps
every stage feasible and all costs are nonnegative.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

from .lattice import ScenarioLattice, make_lattice, make_stage, validate_lattice


@dataclass
class HydroConfig:
    n_reservoirs: int = 1
    n_thermal: int = 2
    horizon: int = 25
    realizations: int = 50
    demand: object = 100.0  # scalar or one value per stage
    inflow_mean: object = 60.0  # scalar or one value per reservoir
    inflow_spread: float = 0.5
    seasonal_amplitude: float = 0.5
    season_period: int = 12
    thermal_costs: Sequence[float] = (10.0, 50.0)
    thermal_capacity: object = 50.0
    shortage_penalty: float = 500.0
    reservoir_capacity: object = 200.0
    initial_storage: object = 50.0
    turbine_capacity: object = 120.0
    production_coefficient: object = 1.0
    spill_allowed: bool = True
    seed: int = 7

    def vector(self, name: str, length: int) -> np.ndarray:
        value = np.asarray(getattr(self, name), dtype=float).ravel()
        if value.size == 1:
            return np.full(length, float(value[0]))
        if value.size != length:
            raise ValueError(f"{name} has {value.size} entries, expected {length}")
        return value

    def seasonal_multipliers(self) -> np.ndarray:
        t = np.arange(self.horizon)
        return 1.0 + self.seasonal_amplitude * np.sin(2.0 * np.pi * t / self.season_period)

    def problems(self) -> List[str]:
        out = []
        if self.n_reservoirs < 1:
            out.append("n_reservoirs must be >= 1")
        if self.n_thermal < 1:
            out.append("n_thermal must be >= 1")
        if self.horizon < 2:
            out.append("horizon must be >= 2")
        if self.realizations < 1:
            out.append("realizations must be >= 1")
        try:
            costs = self.vector("thermal_costs", self.n_thermal)
            caps = [self.vector(n, self.n_reservoirs) for n in ("reservoir_capacity", "turbine_capacity")]
            tcap = self.vector("thermal_capacity", self.n_thermal)
            init = self.vector("initial_storage", self.n_reservoirs)
            mean = self.vector("inflow_mean", self.n_reservoirs)
            coef = self.vector("production_coefficient", self.n_reservoirs)
            demand = self.vector("demand", self.horizon)
        except ValueError as exc:
            return out + [str(exc)]
        if np.any(costs <= 0):
            out.append("thermal costs must be positive")
        if np.any(np.diff(costs) < 0):
            out.append("thermal costs must be nondecreasing")
        if not self.shortage_penalty > costs.max():
            out.append("shortage penalty must exceed every thermal cost")
        if any(np.any(c <= 0) for c in caps) or np.any(tcap <= 0):
            out.append("capacities must be positive")
        if np.any(init < 0) or np.any(mean < 0) or np.any(demand < 0):
            out.append("storage, inflow and demand must be nonnegative")
        if self.spill_allowed and np.any(init > caps[0]):
            out.append("initial storage exceeds reservoir capacity")
        if np.any(coef <= 0):
            out.append("production coefficients must be positive")
        if self.inflow_spread < 0:
            out.append("inflow_spread must be nonnegative")
        if not (0 <= self.seasonal_amplitude < 1):
            out.append("seasonal_amplitude must lie in [0, 1)")
        if self.season_period < 1:
            out.append("season_period must be >= 1")
        return out


class HydroLayout:
    """Column and row positions of one hydro stage."""

    def __init__(self, cfg: HydroConfig):
        R, G = cfg.n_reservoirs, cfg.n_thermal
        pos = 0

        def take(k):
            nonlocal pos
            sl = slice(pos, pos + k)
            pos += k
            return sl

        self.storage = take(R)
        self.turbine = take(R)
        self.spill = take(R) if cfg.spill_allowed else slice(pos, pos)
        self.thermal = take(G)
        self.shortage = take(1)
        self.storage_slack = take(R) if cfg.spill_allowed else slice(pos, pos)
        self.turbine_slack = take(R)
        self.thermal_slack = take(G)
        self.n_vars = pos
        row = 0

        def rows(k):
            nonlocal row
            sl = slice(row, row + k)
            row += k
            return sl

        self.water = rows(R)
        self.demand = rows(1)
        self.storage_cap = rows(R) if cfg.spill_allowed else slice(row, row)
        self.turbine_cap = rows(R)
        self.thermal_cap = rows(G)
        self.n_rows = row


def inflow_samples(cfg: HydroConfig) -> List[np.ndarray]:
    """Inflow realizations per stage: ``(|Xi_t|, R)`` arrays; stage 1 has its single mean value.

    Discrete log-normal draws with unit-mean multiplier scaled by the seasonal curve.
    """
    R = cfg.n_reservoirs
    mean = cfg.vector("inflow_mean", R)
    season = cfg.seasonal_multipliers()
    out = [(mean * season[0])[None, :]]
    s = cfg.inflow_spread
    for t in range(2, cfg.horizon + 1):
        rng = np.random.default_rng([int(cfg.seed), t])
        z = rng.standard_normal((cfg.realizations, R))
        out.append(mean * season[t - 1] * np.exp(s * z - 0.5 * s * s))
    return out


def generate_hydro(cfg: HydroConfig) -> ScenarioLattice:
    problems = cfg.problems()
    if problems:
        raise ValueError("invalid hydro config: " + "; ".join(problems))
    L = HydroLayout(cfg)
    R, G = cfg.n_reservoirs, cfg.n_thermal
    n, m = L.n_vars, L.n_rows
    A = np.zeros((m, n))
    A[L.water, L.storage] = np.eye(R)
    A[L.water, L.turbine] = np.eye(R)
    if cfg.spill_allowed:
        A[L.water, L.spill] = np.eye(R)
        A[L.storage_cap, L.storage] = np.eye(R)
        A[L.storage_cap, L.storage_slack] = np.eye(R)
    A[L.demand, L.turbine] = cfg.vector("production_coefficient", R)
    A[L.demand, L.thermal] = 1.0
    A[L.demand, L.shortage] = 1.0
    A[L.turbine_cap, L.turbine] = np.eye(R)
    A[L.turbine_cap, L.turbine_slack] = np.eye(R)
    A[L.thermal_cap, L.thermal] = np.eye(G)
    A[L.thermal_cap, L.thermal_slack] = np.eye(G)

    c = np.zeros(n)
    c[L.thermal] = cfg.vector("thermal_costs", G)
    c[L.shortage] = cfg.shortage_penalty

    demand = cfg.vector("demand", cfg.horizon)
    base = np.zeros(m)
    if cfg.spill_allowed:
        base[L.storage_cap] = cfg.vector("reservoir_capacity", R)
    base[L.turbine_cap] = cfg.vector("turbine_capacity", R)
    base[L.thermal_cap] = cfg.vector("thermal_capacity", G)

    B = np.zeros((m, n))
    B[L.water, L.storage] = -np.eye(R)

    inflows = inflow_samples(cfg)
    stages = []
    for t in range(1, cfg.horizon + 1):
        rhss = []
        for w in inflows[t - 1]:
            b = base.copy()
            b[L.water] = w
            b[L.demand] = demand[t - 1]
            if t == 1:
                b[L.water] += cfg.vector("initial_storage", R)
            rhss.append(b)
        techs = [np.zeros((m, 0)) if t == 1 else B.copy() for _ in rhss]
        stages.append(make_stage(t, c, A, techs, rhss))
    lattice = make_lattice(stages)
    report = hydro_self_check(lattice, cfg)
    if report:
        raise RuntimeError("generator self-check failed: " + "; ".join(report))
    return lattice


def hydro_self_check(lattice: ScenarioLattice, cfg: HydroConfig) -> List[str]:
    """Structural checks: well-formed lattice, shortage column present, costs bounded below."""
    L = HydroLayout(cfg)
    out = list(validate_lattice(lattice))
    for st in lattice.stages:
        if st.cost_c.min() < 0:
            out.append(f"stage {st.stage_index}: negative cost")
        col = st.recourse_A[:, L.shortage].ravel()
        if col[L.demand][0] != 1.0 or np.count_nonzero(col) != 1:
            out.append(f"stage {st.stage_index}: shortage column missing")
        if st.stage_index > 1:
            B0 = st.realizations[0].tech_B
            if any(not np.array_equal(r.tech_B, B0) for r in st.realizations):
                out.append(f"stage {st.stage_index}: technology matrix varies across realizations")
    return out


def hydro_config_dict(cfg: HydroConfig) -> Dict:
    d = asdict(cfg)
    for k, v in d.items():
        if isinstance(v, np.ndarray):
            d[k] = v.tolist()
        elif isinstance(v, tuple):
            d[k] = list(v)
    return d
