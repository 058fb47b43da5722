import math

import numpy as np
import pytest

from adaptive_sddp.dep import solve_dep
from adaptive_sddp.engine import SDDPEngine
from adaptive_sddp.lattice import SolverConfig
from adaptive_sddp.variants import (
    LESS_IMPORTANT,
    MORE_IMPORTANT,
    VARIANTS,
    VariantSpec,
    classify_stages,
    myopic_stage_costs,
    normalize_variant,
    run_variant,
)
from conftest import random_lattice


def _cfg(**kw):
    base = dict(max_iterations=60, time_limit=60.0, cut_violation_tolerance=1e-9, stall_window=3, refine_tolerance=1e-6)
    base.update(kw)
    return SolverConfig(**base)


def test_variant_names():
    assert normalize_variant("APEP-SDDP") == "apep"
    assert normalize_variant("sddp_qp") == "sddp-qp"
    with pytest.raises(ValueError):
        normalize_variant("nope")


@pytest.mark.parametrize("name", VARIANTS)
def test_variants_converge_on_random_lattice(name):
    lat = random_lattice(np.random.default_rng(8), T=3, K=3)
    z = solve_dep(lat).value
    log = run_variant(VariantSpec(name, _cfg()), lat)
    assert log.final_lower_bound == pytest.approx(z, rel=1e-6, abs=1e-6)
    assert log.is_monotone()


@pytest.mark.parametrize("name", ["sddp-qp", "apqp", "apep"])
def test_non_uniform_probabilities(name):
    lat = random_lattice(np.random.default_rng(9), T=3, K=4, uniform=False)
    z = solve_dep(lat).value
    log = run_variant(VariantSpec(name, _cfg(max_iterations=80)), lat)
    assert log.final_lower_bound == pytest.approx(z, rel=1e-6, abs=1e-6)


def test_classification_threshold(reference_lattice):
    zbar = myopic_stage_costs(reference_lattice)
    classes, _, Z = classify_stages(reference_lattice)
    assert Z == pytest.approx(float(np.median(list(zbar.values()))))
    for t, v in zbar.items():
        assert classes[t] == (MORE_IMPORTANT if v <= Z else LESS_IMPORTANT)
    all_fine, _, _ = classify_stages(reference_lattice, math.inf)
    assert set(all_fine.values()) == {MORE_IMPORTANT}


def test_spap_uses_fine_cuts_only_where_important(reference_lattice):
    classes = {2: MORE_IMPORTANT, 3: LESS_IMPORTANT}
    log = run_variant(VariantSpec("spap", _cfg(max_iterations=10), classes), reference_lattice)
    cuts = log.engine.all_cuts()
    assert {c.kind.value for c in cuts if c.stage == 2} <= {"fine"}
    assert {c.kind.value for c in cuts if c.stage == 3} <= {"coarse", "semi_coarse"}
    assert log.stage_classes == classes


def test_iteration_and_time_limits(reference_lattice):
    log = run_variant(VariantSpec("sddp-qp", _cfg(max_iterations=5)), reference_lattice)
    assert len(log.records) == 5 and log.termination == "max_iterations"
    ticks = iter(range(1000))
    log = run_variant(VariantSpec("sddp-qp", _cfg(time_limit=3.0)), reference_lattice, clock=lambda: float(next(ticks)))
    assert log.termination == "time_limit"
    assert log.records[-1].wall_seconds <= 3.0 + 2.0


def test_stop_when(reference_lattice, reference_optimum):
    log = run_variant(
        VariantSpec("sddp-qp", _cfg()),
        reference_lattice,
        stop_when=lambda lg: abs(lg.final_lower_bound - reference_optimum) <= 1e-9 * reference_optimum,
    )
    assert log.termination == "converged"
    assert len(log.records) < 60


def test_records_are_per_iteration_deltas(reference_lattice):
    log = run_variant(VariantSpec("apqp", _cfg(max_iterations=8)), reference_lattice)
    totals = log.totals()
    s = log.engine.stats
    assert totals["lp_solves_cluster"] == s.lp_cluster
    assert totals["cuts_coarse"] + totals["cuts_semicoarse"] == s.cuts_coarse + s.cuts_semicoarse
    assert all(r.partition_sizes == list(r.partition_sizes) for r in log.records)


def test_apep_phases(reference_lattice):
    log = run_variant(VariantSpec("apep", _cfg(preprocess_threshold=0.5, max_iterations=40)), reference_lattice)
    phases = [r.phase for r in log.records]
    assert phases[0] == "coarse"
    assert "refine" in phases
    if "original" in phases:
        first = phases.index("original")
        assert all(p == "original" for p in phases[first:])


def test_evaluation_samples(reference_lattice):
    log = run_variant(VariantSpec("sddp-qp", _cfg(max_iterations=10)), reference_lattice, evaluation_samples=20)
    assert log.final_bounds["n_samples"] == 20
    assert log.final_bounds["statistical_upper"] >= log.final_bounds["sample_mean"]


def test_invalid_spec_rejected(reference_lattice):
    with pytest.raises(ValueError):
        run_variant(VariantSpec("apep", SolverConfig(stall_window=0)), reference_lattice)
    assert VariantSpec("spap", stage_classes={2: "wet"}).problems()


def test_apep_with_zero_threshold_is_sddp_qp(reference_lattice):
    a = run_variant(VariantSpec("apep", _cfg(max_iterations=30, preprocess_threshold=0.0)), reference_lattice)
    b = run_variant(VariantSpec("sddp-qp", _cfg(max_iterations=30)), reference_lattice)
    assert {r.phase for r in a.records} == {"original"}
    assert a.lower_bounds == b.lower_bounds


def test_spap_with_minus_infinite_threshold_is_apqp(reference_lattice):
    a = run_variant(VariantSpec("spap", _cfg(max_iterations=30, importance_threshold=-math.inf)), reference_lattice)
    b = run_variant(VariantSpec("apqp", _cfg(max_iterations=30)), reference_lattice)
    assert a.lower_bounds == b.lower_bounds


def test_apqp_on_singletons_traces_sddp_qp(reference_lattice):
    from adaptive_sddp.partition import singleton_partition

    cfg = _cfg(max_iterations=30, refine_tolerance=0.0)
    parts = {t: singleton_partition(reference_lattice.stage(t)) for t in (2, 3)}
    a = run_variant(VariantSpec("apqp", cfg), reference_lattice, engine=SDDPEngine(reference_lattice, cfg, partitions=parts))
    b = run_variant(VariantSpec("sddp-qp", cfg), reference_lattice)
    assert a.lower_bounds == pytest.approx(b.lower_bounds, rel=1e-12)


def test_iter_and_sddp_qp_reach_optimum_on_mid_instance():
    from adaptive_sddp.hydro import HydroConfig, generate_hydro

    lat = generate_hydro(HydroConfig(horizon=4, realizations=10, seed=7))
    z = solve_dep(lat).value
    for name in ("sddp-qp", "iter"):
        log = run_variant(
            VariantSpec(name, _cfg(max_iterations=2000, stall_window=30, refine_tolerance=1e-4)),
            lat,
            stop_when=lambda lg: lg.final_lower_bound >= z * (1 - 1e-6),
        )
        assert log.termination == "converged", name
        assert log.final_lower_bound <= z + 1e-6 * z
