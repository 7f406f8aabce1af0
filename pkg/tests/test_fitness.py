import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import labeled
from econfit import (
    FitnessComplexity,
    FitnessConfig,
    UnprunedMatrixError,
    compute_fitness,
    generate_nested,
    iterate_once,
    prune,
    rank_countries,
    triangular_order,
)
from econfit.fitness import is_lower_staircase, rank_products
from econfit.synthetic import make_rng
from oracles import fc_fixed_point_loops, fc_sweep_loops

# 10**4 sweeps of the loop oracle on [[1, 1], [1, 0]] from Q = (1, 1); the
# weaker country's fitness decays like 1/n, so the tolerance never fires.
TWO_BY_TWO_F = (1.9999000049997497, 9.9995000249994e-05)
TWO_BY_TWO_Q = (9.999000099990652e-05, 1.999900009999)


def random_pruned(seed, n=20, density=0.3):
    A = (make_rng(seed).random((n, n)) < density).astype(float)
    return prune(labeled(A))[0]


def test_single_sweep_by_hand():
    F, Q = iterate_once([[1, 1], [1, 0]], [1, 1], [1, 1])
    np.testing.assert_allclose(F, [4 / 3, 2 / 3], rtol=1e-15)
    np.testing.assert_allclose(Q, [1 / 2, 3 / 2], rtol=1e-15)


def test_all_ones_is_symmetric():
    F, Q = iterate_once(np.ones((4, 4)), np.ones(4), np.full(4, 3.0))
    np.testing.assert_allclose(F, 1, rtol=1e-15)
    np.testing.assert_allclose(Q, 1, rtol=1e-15)


def test_one_by_one():
    F, Q = iterate_once([[1]], [1], [1])
    assert F.tolist() == [1.0] and Q.tolist() == [1.0]


def test_unpruned_matrix():
    with pytest.raises(UnprunedMatrixError):
        iterate_once([[1, 0], [0, 0]], [1, 1], [1, 1])
    with pytest.raises(UnprunedMatrixError):
        compute_fitness(labeled([[1, 0], [1, 0]]))


def test_synchronous_variant_uses_previous_fitness():
    M = [[1, 1], [1, 0]]
    F_prev, Q_prev = [2.0, 0.5], [1.0, 1.0]
    F, Q = iterate_once(M, F_prev, Q_prev, update="synchronous")
    Fo, Qo = fc_sweep_loops(M, F_prev, Q_prev, sequential=False)
    np.testing.assert_allclose(F, Fo, rtol=1e-14)
    np.testing.assert_allclose(Q, Qo, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 20), st.integers(2, 20))
def test_sweep_matches_loop_oracle(seed, nc, np_):
    rng = make_rng(seed)
    A = (rng.random((nc, np_)) < 0.4).astype(float)
    A[:, 0] = 1
    A[0, :] = 1
    f = rng.uniform(0.1, 3, nc)
    q = rng.uniform(0.1, 3, np_)
    F, Q = iterate_once(A, f, q)
    Fo, Qo = fc_sweep_loops(A.tolist(), f.tolist(), q.tolist())
    np.testing.assert_allclose(F, Fo, rtol=1e-12)
    np.testing.assert_allclose(Q, Qo, rtol=1e-12)
    assert abs(F.mean() - 1) < 1e-12 and abs(Q.mean() - 1) < 1e-12


def test_two_by_two_frozen_constants(two_by_two):
    cfg = FitnessConfig(max_iterations=10_000, value_tolerance=1e-12, rank_stability_window=None)
    res = compute_fitness(two_by_two, cfg)
    assert res.converged_by == "max_iterations"
    np.testing.assert_allclose(res.fitness, TWO_BY_TWO_F, rtol=0, atol=1e-9)
    np.testing.assert_allclose(res.complexity, TWO_BY_TWO_Q, rtol=0, atol=1e-9)


def test_loop_oracle_reproduces_frozen_constants():
    F, Q = fc_fixed_point_loops([[1, 1], [1, 0]], 10_000, 1e-12)
    assert tuple(F) == TWO_BY_TWO_F and tuple(Q) == TWO_BY_TWO_Q


def test_containment_dominance(two_by_two):
    res = compute_fitness(two_by_two)
    assert res.fitness[0] > res.fitness[1]
    assert res.converged_by == "rank"


def test_all_ones_converges_in_one_sweep():
    res = compute_fitness(labeled(np.ones((5, 5))))
    assert res.iterations_run == 1 and res.converged_by == "value"
    np.testing.assert_array_equal(res.fitness, np.ones(5))


def test_max_iterations_is_not_an_error(two_by_two):
    res = compute_fitness(two_by_two, FitnessConfig(max_iterations=3, rank_stability_window=None))
    assert res.iterations_run == 3 and not res.converged
    assert len(res.trace.delta_fitness) == 3


def test_unit_sum_start_gives_same_result():
    m = random_pruned(3)
    cfg = dict(max_iterations=5000, value_tolerance=1e-13, rank_stability_window=None)
    a = compute_fitness(m, FitnessConfig(**cfg))
    b = compute_fitness(m, FitnessConfig(initial_q="unit_sum", **cfg))
    np.testing.assert_allclose(a.fitness, b.fitness, rtol=1e-9)


@pytest.mark.parametrize("bad", [dict(max_iterations=0), dict(value_tolerance=-1.0), dict(initial_q="zeros"),
                                 dict(update="jacobi")])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        FitnessConfig(**bad)


def test_normalization_every_sweep():
    m = random_pruned(11)
    f, q = np.ones(m.shape[0]), np.ones(m.shape[1])
    for _ in range(50):
        f, q = iterate_once(m, f, q)
        assert abs(f.mean() - 1) < 1e-12
        assert abs(q.mean() - 1) < 1e-12


def test_permutation_equivariance():
    m = random_pruned(5)
    rng = make_rng(99)
    rows, cols = rng.permutation(m.shape[0]), rng.permutation(m.shape[1])
    cfg = FitnessConfig(max_iterations=200, rank_stability_window=None)
    a = compute_fitness(m, cfg)
    b = compute_fitness(m.take(rows, cols), cfg)
    np.testing.assert_allclose(b.fitness, a.fitness[rows], rtol=1e-12)
    np.testing.assert_allclose(b.complexity, a.complexity[cols], rtol=1e-12)


def test_floor_is_counted(two_by_two):
    # a subnormal start pushes the weak country's fitness under the floor
    cfg = FitnessConfig(max_iterations=3, rank_stability_window=None, initial_q=[1e-310, 1.0])
    res = compute_fitness(two_by_two, cfg)
    assert res.trace.floored >= 1
    assert res.fitness[1] == 1e-300
    assert np.all(np.isfinite(res.complexity))


def test_rank_countries():
    r = rank_countries(compute_fitness(labeled([[1, 1], [1, 0]])))
    assert r.order == ("C0", "C1")
    assert r.norm_rank.tolist() == [1.0, 0.0]
    assert not r.tied


def test_rank_ties_by_code():
    res = compute_fitness(labeled(np.ones((3, 2))))
    r = rank_countries(res)
    assert r.tied
    assert r.norm_rank.tolist() == [1.0, 0.5, 0.0]
    assert r.order == ("C0", "C1", "C2")


def test_rank_single_country():
    r = rank_countries(compute_fitness(labeled([[1, 1]])))
    assert r.norm_rank.tolist() == [1.0]


def test_rank_kinds():
    r = rank_countries(compute_fitness(labeled([[1, 1], [1, 0]])))
    assert r.values("raw").tolist() == [1.0, 2.0]
    np.testing.assert_allclose(r.values("log_fitness"), np.log(r.fitness))


def test_product_ranks():
    res = compute_fitness(labeled([[1, 1], [1, 0]]))
    assert rank_products(res).tolist() == [2, 1]


def test_triangular_identity():
    m = labeled([[1, 0], [1, 1]])
    res = compute_fitness(m)
    assert res.fitness[1] > res.fitness[0]
    assert triangular_order(m, res) == m


def test_triangular_swaps_rows(two_by_two):
    out = triangular_order(two_by_two, compute_fitness(two_by_two))
    assert out.countries == ("C1", "C0")
    np.testing.assert_array_equal(out.values, [[1, 0], [1, 1]])


@pytest.mark.parametrize("seed", range(5))
def test_triangular_permutation_invariant(seed):
    m = generate_nested(8, 12, seed=seed)
    base = triangular_order(m, compute_fitness(m))
    rng = make_rng(seed + 100)
    p = m.take(rng.permutation(8), rng.permutation(12))
    again = triangular_order(p, compute_fitness(p))
    np.testing.assert_array_equal(again.values, base.values)


def test_triangular_shape_mismatch(two_by_two):
    with pytest.raises(ValueError):
        triangular_order(labeled([[1]]), compute_fitness(two_by_two))


def test_lower_staircase_predicate():
    assert is_lower_staircase([[1, 0, 0], [1, 1, 0], [1, 1, 1]])
    assert not is_lower_staircase([[1, 1, 0], [1, 0, 0]])
    assert not is_lower_staircase([[0, 1]])


def test_initial_condition_independence():
    m = random_pruned(2024, n=30)
    rng = make_rng(1)
    cfg = dict(max_iterations=100_000, value_tolerance=1e-12, rank_stability_window=None)
    fits = [compute_fitness(m, FitnessConfig(initial_q=rng.uniform(0.01, 10, m.shape[1]), **cfg)).fitness
            for _ in range(20)]
    worst = max(np.max(np.abs(a - b) / np.abs(b)) for a in fits for b in fits)
    assert worst < 1e-6


def test_estimator_api(two_by_two):
    est = FitnessComplexity(max_iterations=50)
    out = est.fit_transform(two_by_two.values)
    assert out.shape == (2, 1)
    assert est.n_iter_ >= 1 and est.converged_by_ in ("value", "rank", "max_iterations")
    assert est.get_params()["max_iterations"] == 50
    # transform is one more fitness half-step from the fitted complexities
    q = est.complexity_
    raw = two_by_two.values @ q
    np.testing.assert_allclose(est.transform(two_by_two.values).ravel(), raw / raw.mean(), rtol=1e-14)
    np.testing.assert_allclose(est.transform([[1, 1]]).ravel(), [q.sum() / raw.mean()], rtol=1e-14)
