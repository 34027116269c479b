"""Tests for the gap nearest-neighbor reduction and its brute-force oracles."""

import math

import numpy as np
import pytest

from linhop.errors import (
    CostCapExceeded,
    DegreeExhausted,
    InfeasiblePlant,
    InvalidParams,
)
from linhop.reduction import (
    AConvention,
    AnnsInstance,
    brute_force_anns,
    build_ahop_instance,
    classify_queries,
    compute_params,
    generate_balanced_instance,
    generate_clustered_case2_instance,
    scenario1_brute_force,
    score_matrix,
    solve_gap_anns_via_ahop,
    verify_reduction,
)


def small_instance():
    a = np.array([[0, 0], [1, 1]])
    b = np.array([[0, 1], [1, 0]])
    return AnnsInstance(a, b, t=1.5, delta=0.05)


def test_instance_validation():
    with pytest.raises(ValueError):
        AnnsInstance(np.array([[0, 2]]), np.array([[0, 1]]), t=1.0, delta=0.05)
    with pytest.raises(ValueError):
        AnnsInstance(np.array([[0, 1]]), np.array([[0, 1]]), t=0.0, delta=0.05)
    with pytest.raises(ValueError):
        AnnsInstance(np.array([[0, 1]]), np.array([[0, 1]]), t=1.0, delta=0.5)


def test_instance_save_load(tmp_path):
    inst = small_instance()
    a, b, meta = tmp_path / "A.csv", tmp_path / "B.csv", tmp_path / "meta.json"
    inst.save(a, b, meta)
    back = AnnsInstance.load(a, b, meta)
    assert np.array_equal(back.set_a, inst.set_a)
    assert np.array_equal(back.set_b, inst.set_b)
    assert back.t == inst.t and back.delta == inst.delta


def test_brute_force_identical_sets():
    a = np.array([[0, 1, 0, 1], [1, 1, 0, 0]])
    inst = AnnsInstance(a, a.copy(), t=1.0, delta=0.05)
    i, j, dist = brute_force_anns(inst)
    assert dist == 0.0 and i == j == 0


def test_brute_force_hand_checked():
    i, j, dist = brute_force_anns(small_instance())
    assert dist == 1.0
    assert (i, j) == (0, 0)  # lexicographic tie-break among distance-1 pairs


def test_brute_force_single_pair():
    inst = AnnsInstance(np.array([[0, 1]]), np.array([[1, 1]]), t=1.0, delta=0.05)
    assert brute_force_anns(inst) == (0, 0, 1.0)


def test_scenario1_radius_zero():
    # t = 1 means distance < 1, i.e. exact membership
    a = np.array([[0, 1, 0, 1], [1, 0, 1, 0]])
    b = np.array([[0, 1, 0, 1], [1, 1, 0, 0]])
    inst = AnnsInstance(a, b, t=1.0, delta=0.05)
    assert scenario1_brute_force(inst) == ["case1", "case2"]


def test_scenario1_planted_flip():
    rng = np.random.default_rng(0)
    inst = generate_balanced_instance(4, 8, t=3.0, delta=0.05, planted=2, rng_seed=1)
    verdicts = scenario1_brute_force(inst)
    d2 = inst.distance_sq()
    for i, verdict in enumerate(verdicts):
        expected = "case1" if d2[i].min() < inst.t else "case2"
        assert verdict == expected


def test_scenario1_matches_distance_oracle():
    inst = generate_balanced_instance(8, 10, t=3.0, delta=0.05, rng_seed=2)
    verdicts = scenario1_brute_force(inst)
    d2 = inst.distance_sq()
    for i, verdict in enumerate(verdicts):
        assert verdict == ("case1" if d2[i].min() < inst.t else "case2")


def test_scenario1_cost_cap():
    inst = generate_balanced_instance(8, 10, t=9.0, delta=0.05, rng_seed=3)
    with pytest.raises(CostCapExceeded):
        scenario1_brute_force(inst, cost_cap=10)


def test_compute_params_invariants():
    p = compute_params(16, 10, 4.0, 0.09)
    log_n = math.log(16)
    assert p.C == pytest.approx(10 / log_n)
    assert p.C0 == pytest.approx(4 / log_n)
    assert p.beta == pytest.approx(1.0 / 20)
    assert p.B == pytest.approx(p.C_beta * math.sqrt(log_n))
    assert p.C_beta > 2 * math.sqrt(p.C / (p.C0 * p.delta))
    assert p.C_alpha > (p.C_beta**2 / 4) * (3 + p.C0 / p.C) + 1
    assert p.t_tilde >= p.delta_h
    # the separation value restated from its definition
    expected = (
        math.exp(0.25 * p.B**2 * (1 - p.t / p.d)) / (3 * 2 * p.n)
    ) * math.exp(-p.B**2)
    assert p.t_tilde == pytest.approx(expected, rel=1e-9)


def test_compute_params_rejects_weak_constants():
    with pytest.raises(InvalidParams):
        compute_params(16, 10, 4.0, 0.09, C_beta=1.0)


def test_build_instance_block_structure():
    inst = generate_balanced_instance(4, 8, t=3.0, delta=0.09, rng_seed=4)
    memory, queries, params = build_ahop_instance(inst)
    n, d, b = inst.n, inst.d, params.B
    assert memory.data.shape == (2 * d, 2 * n)
    assert queries.data.shape == (2 * d, 2 * n)
    assert memory.max_norm <= b + 1e-12
    assert queries.max_norm <= b + 1e-12
    # literal bottom-left block entries are all exp(0) = 1
    literal = score_matrix(memory, queries, params, AConvention.LITERAL)
    assert np.allclose(literal[n:, :n], 1.0, atol=1e-12)
    # the declared convention patches the right half to a constant and zeroes
    # the bottom-left block
    patched = score_matrix(memory, queries, params, AConvention.AS_WRITTEN)
    assert np.allclose(patched[:, n:], math.exp(b**2))
    assert np.all(patched[n:, :n] == 0.0)


def test_build_instance_row_sum_bounds():
    inst = generate_balanced_instance(4, 8, t=3.0, delta=0.09, rng_seed=5)
    memory, queries, params = build_ahop_instance(inst)
    n = inst.n
    a = score_matrix(memory, queries, params, AConvention.AS_WRITTEN)
    top_sums = a[:n].sum(axis=1)
    block = math.exp(params.B**2)
    assert np.all(top_sums >= n * block)
    assert np.all(top_sums <= 2 * n * block)


def test_solve_planted_case1():
    inst = generate_balanced_instance(8, 8, t=3.0, delta=0.09, planted=2, rng_seed=6)
    oracle = classify_queries(inst)
    decision = solve_gap_anns_via_ahop(inst)
    assert "case1" in oracle
    for j, truth in enumerate(oracle):
        if truth != "indeterminate":
            assert decision.verdicts[j] == truth


def test_solve_all_case2():
    inst = generate_clustered_case2_instance(8, 8, t=3.0, delta=0.09, rng_seed=7)
    assert classify_queries(inst) == ["case2"] * 8
    decision = solve_gap_anns_via_ahop(inst)
    assert decision.verdicts == ["case2"] * 8
    assert np.all(decision.statistic < decision.threshold_used)


def test_solve_duplicate_row_case1():
    a = np.array([[1, 0, 1, 0, 1, 0], [0, 1, 0, 1, 0, 1]])
    b = np.array([[1, 0, 1, 0, 1, 0], [1, 1, 1, 0, 0, 0]])
    inst = AnnsInstance(a, b, t=2.0, delta=0.09)
    decision = solve_gap_anns_via_ahop(inst)
    assert decision.verdicts[0] == "case1"


def test_lowrank_solver_degree_exhausted():
    # the valid reduction constants force an exp fit interval of B^2, far
    # beyond what the degree cap can certify at the required relative error
    inst = generate_balanced_instance(8, 8, t=3.0, delta=0.09, rng_seed=8)
    with pytest.raises(DegreeExhausted):
        solve_gap_anns_via_ahop(inst, solver="lowrank")


def test_generate_balanced_rows():
    inst = generate_balanced_instance(4, 8, t=3.0, delta=0.09, rng_seed=9)
    assert inst.is_balanced()


def test_generate_planted_zero_duplicates_row():
    inst = generate_balanced_instance(4, 8, t=1.0, delta=0.09, planted=0, rng_seed=10)
    assert inst.distance_sq().min() == 0


def test_generate_planted_two():
    inst = generate_balanced_instance(4, 8, t=3.0, delta=0.09, planted=2, rng_seed=11)
    assert inst.distance_sq().min() <= 2
    assert inst.is_balanced()


def test_generate_rejects_bad_plants():
    with pytest.raises(InfeasiblePlant):
        generate_balanced_instance(4, 8, t=3.0, delta=0.09, planted=3)
    with pytest.raises(InfeasiblePlant):
        generate_balanced_instance(4, 7, t=3.0, delta=0.09)


def test_generate_deterministic():
    a = generate_balanced_instance(4, 8, t=3.0, delta=0.09, planted=2, rng_seed=12)
    b = generate_balanced_instance(4, 8, t=3.0, delta=0.09, planted=2, rng_seed=12)
    assert np.array_equal(a.set_a, b.set_a)
    assert np.array_equal(a.set_b, b.set_b)


def test_verify_reduction_agreement():
    report = verify_reduction(8, 8, 3.0, 0.09, trials=6, rng_seed=0)
    assert report["agreement_fraction"] == 1.0
    assert report["promised_queries"] > 0
    assert report["disagreements"] == []


def test_verify_reduction_empty():
    report = verify_reduction(8, 8, 3.0, 0.09, trials=0)
    assert report["per_trial"] == []
    assert report["promised_queries"] == 0
