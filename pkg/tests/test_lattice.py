import numpy as np
import pytest

from adaptive_sddp.lattice import (
    LatticeError,
    PathSampler,
    SamplePath,
    SolverConfig,
    check_lattice,
    make_lattice,
    make_stage,
    mean_value_lattice,
    sample_path,
    validate_lattice,
)
from conftest import random_lattice


def _two_stage(b2=((1.0,), (3.0,)), probs=None):
    s1 = make_stage(1, [1.0], [[1.0]], [np.zeros((1, 0))], [[1.0]])
    s2 = make_stage(2, [1.0, 0.0], [[1.0, -1.0]], [np.eye(1)] * len(b2), b2, probs)
    return make_lattice([s1, s2])


def test_well_formed_lattice_has_no_problems():
    lat = _two_stage()
    assert validate_lattice(lat) == []
    assert lat.horizon == 2
    assert lat.sizes() == [1, 2]


def test_dimension_mismatch_is_reported():
    s1 = make_stage(1, [1.0], [[1.0]], [np.zeros((1, 0))], [[1.0]])
    s2 = make_stage(2, [1.0, 0.0], [[1.0, -1.0]], [np.eye(1), np.ones((1, 2))], [[1.0], [2.0]])
    problems = validate_lattice(make_lattice([s1, s2]))
    assert any("realization 1" in p and "dimension" in p for p in problems)
    with pytest.raises(LatticeError):
        check_lattice(make_lattice([s1, s2]))


def test_probabilities_must_sum_to_one():
    lat = _two_stage(probs=[0.5, 0.4])
    assert any("probability sum" in p for p in validate_lattice(lat))


def test_random_first_stage_rejected():
    s1 = make_stage(1, [1.0], [[1.0]], [np.zeros((1, 0))] * 2, [[1.0], [2.0]])
    s2 = make_stage(2, [1.0], [[1.0]], [np.eye(1)], [[1.0]])
    assert any("deterministic" in p for p in validate_lattice(make_lattice([s1, s2])))


def test_mean_value_lattice_averages_with_probabilities():
    lat = _two_stage(probs=[0.25, 0.75])
    mv = mean_value_lattice(lat)
    assert mv.stage(2).n_realizations == 1
    assert mv.stage(2).realizations[0].rhs_b[0] == pytest.approx(0.25 * 1 + 0.75 * 3)
    assert mv.stage(1) is lat.stage(1) or mv.stage(1) == lat.stage(1)


def test_sample_path_indexing():
    p = SamplePath((2, 0, 1))
    assert p.at(1) == 0
    assert [p.at(t) for t in (2, 3, 4)] == [2, 0, 1]
    lat = random_lattice(np.random.default_rng(0), T=4, K=5)
    path = sample_path(lat, np.random.default_rng(1))
    assert len(path.indices) == 3
    assert all(0 <= k < 5 for k in path.indices)


def test_path_sampler_is_counter_keyed():
    lat = random_lattice(np.random.default_rng(0), T=5, K=7)
    a = PathSampler(3)
    b = PathSampler(3)
    forward = [a.lattice_path(lat, i) for i in range(1, 20)]
    backward = [b.lattice_path(lat, i) for i in reversed(range(1, 20))][::-1]
    assert forward == backward
    assert PathSampler(4).lattice_path(lat, 1) != a.lattice_path(lat, 1) or PathSampler(4).lattice_path(lat, 2) != a.lattice_path(lat, 2)


def test_path_sampler_respects_probabilities():
    s = PathSampler(0)
    counts = np.zeros(2)
    for i in range(4000):
        counts[s.path([1, 2], [np.ones(1), np.array([0.9, 0.1])], i).at(2)] += 1
    assert counts[0] / counts.sum() == pytest.approx(0.9, abs=0.03)


def test_solver_config_validation():
    assert SolverConfig().problems() == []
    bad = SolverConfig(stall_window=0, sample_paths_per_iter=0, preprocess_threshold=1.5)
    assert len(bad.problems()) >= 3
    with pytest.raises(ValueError):
        bad.validate()
