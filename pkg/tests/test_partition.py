import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_sddp.lattice import make_stage
from adaptive_sddp.lp import build_stage_subproblem, solve_lp
from adaptive_sddp.partition import (
    Cluster,
    DualSignature,
    Partition,
    coarse_tree_size,
    group_by_signature,
    initial_partition,
    refine_absolute,
    singleton_partition,
)


def _stage(rng, K, n_prev=2, m=2, n=5, probs=None):
    A = np.hstack([np.eye(m), -np.eye(m), rng.uniform(-1, 1, size=(m, n - 2 * m))])
    c = rng.uniform(0.5, 2.0, size=n)
    B = rng.uniform(-1, 1, size=(m, n_prev))
    return make_stage(2, c, A, [B] * K, [rng.uniform(-3, 3, size=m) for _ in range(K)], probs)


def _cluster_value(stage, cl, x):
    return solve_lp(build_stage_subproblem(stage.cost_c, stage.recourse_A, cl.agg_B, cl.agg_b, x)).objective_value


def _scenario_solutions(stage, x):
    out = {}
    for r in stage.realizations:
        out[r.index] = solve_lp(build_stage_subproblem(stage.cost_c, stage.recourse_A, r.tech_B, r.rhs_b, x))
    return out


def test_cluster_of_two_sums_data():
    s = make_stage(2, [1.0], [[1.0]], [np.eye(1), np.eye(1)], [[1.0], [3.0]])
    cl = Cluster.build(s, [0, 1])
    assert cl.agg_b == pytest.approx([4.0])
    assert cl.agg_B == pytest.approx(np.array([[2.0]]))
    assert cl.multiplicity == 2 and cl.mass == pytest.approx(1.0)
    B, b = cl.mean_realization()
    assert b == pytest.approx([2.0])


def test_coarse_tree_size_values():
    rng = np.random.default_rng(0)
    stages = [_stage(rng, 50) for _ in range(4)]
    assert coarse_tree_size([initial_partition(s) for s in stages]) == pytest.approx(0.02)
    assert coarse_tree_size([singleton_partition(s) for s in stages]) == pytest.approx(1.0)
    s4 = _stage(rng, 4)
    halves = Partition(2, (Cluster.build(s4, [0, 1]), Cluster.build(s4, [2, 3])), 4)
    assert coarse_tree_size([halves, initial_partition(s4)]) == pytest.approx(0.375)


def test_singleton_cluster_subproblem_matches_scenario():
    rng = np.random.default_rng(1)
    s = _stage(rng, 4)
    x = rng.uniform(0, 1, size=2)
    sols = _scenario_solutions(s, x)
    for cl in singleton_partition(s).clusters:
        assert _cluster_value(s, cl, x) == pytest.approx(sols[cl.members[0]].objective_value, abs=1e-12)


def test_group_by_signature_first_fit():
    vecs = {0: np.array([0.0]), 1: np.array([10.0]), 2: np.array([0.05]), 3: np.array([10.04])}
    assert group_by_signature([3, 2, 1, 0], vecs, 0.005) == [[0, 2], [1, 3]]
    assert group_by_signature([0, 1, 2, 3], vecs, 0.0) == [[0], [1], [2], [3]]


def test_refine_requires_signatures():
    rng = np.random.default_rng(2)
    s = _stage(rng, 3)
    with pytest.raises(KeyError):
        refine_absolute(initial_partition(s), s, {0: DualSignature(np.zeros(2), np.zeros(0))}, 0.0)


def test_refine_leaves_untargeted_clusters():
    rng = np.random.default_rng(3)
    s = _stage(rng, 6)
    part = Partition(2, (Cluster.build(s, [0, 1, 2]), Cluster.build(s, [3, 4, 5])), 6)
    sigs = {k: DualSignature(np.array([float(k)]), np.zeros(0)) for k in range(6)}
    new = refine_absolute(part, s, sigs, 0.0, clusters=[1])
    assert [c.members for c in new.clusters] == [(0, 1, 2), (3,), (4,), (5,)]
    assert new.version == part.version + 1


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    K=st.integers(2, 9),
    eps=st.sampled_from([0.0, 1e-6, 0.1, 1.0, 10.0]),
    uniform=st.booleans(),
)
def test_refinement_is_a_finer_partition(seed, K, eps, uniform):
    rng = np.random.default_rng(seed)
    probs = None if uniform else rng.dirichlet(np.ones(K))
    s = _stage(rng, K, probs=probs)
    x = rng.uniform(0, 1, size=2)
    sols = _scenario_solutions(s, x)
    sigs = {k: DualSignature(v.eq_duals, np.zeros(0)) for k, v in sols.items()}
    part = initial_partition(s)
    new = refine_absolute(part, s, sigs, eps)
    assert new.problems() == []
    assert sum(c.mass for c in new.clusters) == pytest.approx(1.0)
    for cl in new.clusters:
        assert any(set(cl.members) <= set(old.members) for old in part.clusters)
    # relaxation chain at the trial point
    coarse = sum(_cluster_value(s, c, x) * c.mass / c.multiplicity for c in part.clusters)
    finer = sum(_cluster_value(s, c, x) * c.mass / c.multiplicity for c in new.clusters)
    fine = sum(r.probability * sols[r.index].objective_value for r in s.realizations)
    assert coarse <= finer + 1e-7
    assert finer <= fine + 1e-7
    if eps == 0.0:
        assert finer == pytest.approx(fine, abs=1e-6)
