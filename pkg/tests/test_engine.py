import math

import numpy as np
import pytest

from adaptive_sddp.dep import enumerate_paths, exact_cost_to_go, policy_value
from adaptive_sddp.engine import SDDPEngine, SubproblemError, mean_value_bounds
from adaptive_sddp.lattice import SamplePath, SolverConfig, make_lattice, make_stage
from adaptive_sddp.partition import singleton_partition
from conftest import random_lattice

TIGHT = SolverConfig(cut_violation_tolerance=1e-9)


def test_mean_value_bounds_are_valid(reference_lattice):
    bounds = mean_value_bounds(reference_lattice)
    rng = np.random.default_rng(0)
    for t in (2, 3):
        n_prev = reference_lattice.stage(t - 1).n_vars
        for _ in range(5):
            x = rng.uniform(0, 100, size=n_prev)
            assert bounds[t] <= exact_cost_to_go(reference_lattice, t - 1, x) + 1e-9


def test_mean_value_bounds_random_B_fallback():
    rng = np.random.default_rng(4)
    lat = random_lattice(rng, T=3, K=3, random_B=True)
    bounds = mean_value_bounds(lat)
    for _ in range(5):
        x = rng.uniform(0, 2, size=lat.stage(1).n_vars)
        assert bounds[2] <= exact_cost_to_go(lat, 1, x) + 1e-9


def test_terminal_fine_cut_is_supporting(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    x = eng.forward_pass(SamplePath((0, 1))).states[1]
    cut = eng.fine_cut(3, x)
    assert cut.value(x) == pytest.approx(exact_cost_to_go(reference_lattice, 2, x), abs=1e-7)


def test_coarse_cut_dominated_by_fine(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    for it in range(1, 4):
        traj = eng.forward_pass(eng.sampler.lattice_path(reference_lattice, it))
        for t in (3, 2):
            x = traj.states[t - 2]
            assert eng.fine_cut(t, x).value(x) >= eng.coarse_cut(t, x).value(x) - 1e-9
        eng.backward_pass_fine(traj)


def test_singleton_coarse_cut_equals_fine(reference_lattice):
    parts = {t: singleton_partition(reference_lattice.stage(t)) for t in (2, 3)}
    eng = SDDPEngine(reference_lattice, TIGHT, partitions=parts)
    x = eng.forward_pass(SamplePath((2, 0))).states[1]
    fine, coarse = eng.fine_cut(3, x), eng.coarse_cut(3, x)
    assert coarse.alpha == pytest.approx(fine.alpha, abs=1e-9)
    assert coarse.beta == pytest.approx(fine.beta, abs=1e-9)


def test_only_violated_cuts_are_appended(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    traj = eng.forward_pass(SamplePath((0, 0)))
    eng.backward_pass_fine(traj)
    n = sum(len(p) for p in eng.pools.values())
    eng.backward_pass_fine(traj)
    # the same trial states produce the same cuts, which are no longer violated
    assert sum(len(p) for p in eng.pools.values()) == n


def test_cautious_pass_post_condition(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    traj = eng.forward_pass(SamplePath((1, 2)))
    eng.cautious_pass(traj, "fine")
    x1 = traj.states[0]
    assert not eng.fine_step(2, x1)


def test_semicoarse_refines_processed_clusters(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    for it in range(1, 6):
        traj = eng.forward_pass(eng.sampler.lattice_path(reference_lattice, it))
        eng.backward_pass(traj, {2: "adaptive", 3: "adaptive"})
    assert all(p.problems() == [] for p in eng.partitions.values())
    assert any(p.version > 0 for p in eng.partitions.values())
    assert eng.stats.cuts_coarse + eng.stats.cuts_semicoarse > 0


def test_statistical_bound_from_enumeration_matches_policy_value(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    for it in range(1, 8):
        eng.backward_pass_fine(eng.forward_pass(eng.sampler.lattice_path(reference_lattice, it)))
    paths, probs = enumerate_paths(reference_lattice)
    b = eng.statistical_upper_bound(paths=paths, weights=probs)
    assert b.sample_mean == pytest.approx(policy_value(eng), abs=1e-9)
    z = np.array([eng.forward_pass(p).total_cost for p in paths])
    assert b.sample_var == pytest.approx(float(probs @ (z - b.sample_mean) ** 2))
    assert b.statistical_upper == pytest.approx(b.sample_mean + 1.96 * math.sqrt(b.sample_var) / math.sqrt(len(paths)))


def test_sampled_statistical_bound_uses_population_variance(reference_lattice):
    eng = SDDPEngine(reference_lattice, TIGHT)
    b = eng.statistical_upper_bound(25, np.random.default_rng(3))
    assert b.n_samples == 25
    assert b.sample_var >= 0
    assert eng.converged(b, b.statistical_upper - b.lower)
    assert not eng.converged(b, b.statistical_upper - b.lower - 1.0)


def test_infeasible_stage_raises():
    s1 = make_stage(1, [1.0], [[1.0]], [np.zeros((1, 0))], [[1.0]])
    # x2 = b - x1 with x2 >= 0 fails for b = 0 and x1 = 1
    s2 = make_stage(2, [1.0], [[1.0]], [np.ones((1, 1)), np.ones((1, 1))], [[0.0], [5.0]])
    with pytest.raises(SubproblemError):
        eng = SDDPEngine(make_lattice([s1, s2]), TIGHT, initial_bounds={2: 0.0})
        eng.backward_pass_fine(eng.forward_pass(SamplePath((0,))))
