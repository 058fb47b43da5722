"""SDDP for multistage stochastic linear programs with adaptive scenario partitions."""

from .cuts import Cut, CutKind, CutPool, evaluate
from .dep import DepError, exact_cost_to_go, policy_value, solve_dep
from .engine import Bounds, CautiousPassError, SDDPEngine, SubproblemError, mean_value_bounds
from .fileio import InstanceParseError, VersionError, read_instance, write_instance, write_log
from .hydro import HydroConfig, generate_hydro
from .lattice import (
    LatticeError,
    Realization,
    SamplePath,
    ScenarioLattice,
    SolverConfig,
    StageData,
    make_lattice,
    make_stage,
    validate_lattice,
)
from .lp import LinearProgram, LPStatus, solve_lp
from .partition import Cluster, Partition, coarse_tree_size, refine_absolute
from .progress import IterationRecord, ProgressLog
from .variants import VARIANTS, VariantSpec, classify_stages, run_variant

__version__ = "0.1.0"

__all__ = [
    "Cut",
    "CutKind",
    "CutPool",
    "evaluate",
    "DepError",
    "exact_cost_to_go",
    "policy_value",
    "solve_dep",
    "Bounds",
    "CautiousPassError",
    "SDDPEngine",
    "SubproblemError",
    "mean_value_bounds",
    "InstanceParseError",
    "VersionError",
    "read_instance",
    "write_instance",
    "write_log",
    "HydroConfig",
    "generate_hydro",
    "LatticeError",
    "Realization",
    "SamplePath",
    "ScenarioLattice",
    "SolverConfig",
    "StageData",
    "make_lattice",
    "make_stage",
    "validate_lattice",
    "LinearProgram",
    "LPStatus",
    "solve_lp",
    "Cluster",
    "Partition",
    "coarse_tree_size",
    "refine_absolute",
    "IterationRecord",
    "ProgressLog",
    "VARIANTS",
    "VariantSpec",
    "classify_stages",
    "run_variant",
]
