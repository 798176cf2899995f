import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wedgetc.tensor_core import (
    BudgetExceededError,
    CPModel,
    cp_entries,
    cp_entry,
    cp_incoherence_check,
    cp_to_dense,
    fold,
    incoherence_of_matrix,
    incoherence_report,
    matrix_norms,
    mode_product,
    random_cp_model,
    unfold,
    unfolding_entries,
    unfolding_svd,
)


def loop_dense(model):
    T = np.zeros(model.shape)
    for idx in itertools.product(*(range(n) for n in model.shape)):
        total = 0.0
        for i in range(model.rank):
            term = model.weights[i]
            for j, a in enumerate(idx):
                term *= model.factor(j)[a, i]
            total += term
        T[idx] = total
    return T


def test_spike_and_ones():
    spike = CPModel.symmetric_from(np.array([[1.0], [0.0]]))
    T = cp_to_dense(spike)
    assert T[0, 0, 0] == 1 and T.sum() == 1
    assert cp_entry(spike, (0, 0, 0)) == 1.0
    assert cp_entry(spike, (1, 0, 0)) == 0.0
    ones = CPModel.symmetric_from(np.ones((2, 1)))
    np.testing.assert_array_equal(cp_to_dense(ones), np.ones((2, 2, 2)))


def test_dense_matches_triple_loop(gen):
    for symmetric in (True, False):
        model = random_cp_model(4, 2, rng=gen, symmetric=symmetric, normalize=False)
        np.testing.assert_allclose(cp_to_dense(model), loop_dense(model), rtol=1e-12, atol=1e-14)


def test_cp_entry_bit_identical(gen):
    model = random_cp_model(5, 3, order=4, rng=gen, symmetric=False, dims=(3, 4, 5, 2))
    T = cp_to_dense(model)
    all_idx = np.array(list(itertools.product(*(range(n) for n in model.shape)))).T
    np.testing.assert_array_equal(cp_entries(model, all_idx), T[tuple(all_idx)])
    for _ in range(100):
        idx = tuple(int(gen.integers(n)) for n in model.shape)
        assert cp_entry(model, idx) == T[idx]


def test_cp_entry_out_of_range():
    model = CPModel.symmetric_from(np.ones((2, 1)))
    with pytest.raises(IndexError):
        cp_entry(model, (2, 0, 0))
    with pytest.raises(IndexError):
        cp_entry(model, (0, 0))


def test_budget_cap():
    model = CPModel.symmetric_from(np.ones((10, 1)))
    with pytest.raises(BudgetExceededError):
        cp_to_dense(model, cap=999)


def test_model_validation():
    with pytest.raises(ValueError):
        CPModel.symmetric_from(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        CPModel(factors=(np.ones((2, 1)), np.ones((3, 2))), order=2)
    with pytest.raises(ValueError):
        CPModel.symmetric_from(np.ones((2, 1)), order=1)


def test_unfold_hand_example():
    model = CPModel.symmetric_from(np.array([[1.0], [2.0]]))
    A = unfold(model, 0)
    np.testing.assert_array_equal(A, [[1, 2, 2, 4], [2, 4, 4, 8]])
    np.testing.assert_array_equal(unfold(np.ones((3, 2, 4)), 1), np.ones((2, 12)))


def test_unfold_column_formula(gen):
    T = gen.standard_normal((3, 4, 5))
    for mode in range(3):
        A = unfold(T, mode)
        rest = [d for d in range(3) if d != mode]
        for idx in itertools.product(*(range(n) for n in T.shape)):
            col = idx[rest[0]] + idx[rest[1]] * T.shape[rest[0]]
            assert A[idx[mode], col] == T[idx]


def test_lazy_unfolding_entries(gen):
    model = random_cp_model(4, 2, rng=gen, symmetric=False, dims=(3, 4, 5))
    for mode in range(3):
        A = unfold(model, mode)
        rows = gen.integers(0, A.shape[0], 50)
        cols = gen.integers(0, A.shape[1], 50)
        np.testing.assert_array_equal(unfolding_entries(model, mode, rows, cols), A[rows, cols])


@given(
    arrays(np.float64, st.lists(st.integers(1, 4), min_size=2, max_size=4).map(tuple),
           elements=st.floats(-1e6, 1e6, allow_nan=False)),
    st.data(),
)
def test_fold_unfold_roundtrip(T, data):
    mode = data.draw(st.integers(0, T.ndim - 1))
    np.testing.assert_array_equal(fold(unfold(T, mode), mode, T.shape), T)


def test_fold_errors_and_zero():
    np.testing.assert_array_equal(fold(np.zeros((3, 20)), 1, (4, 3, 5)), np.zeros((4, 3, 5)))
    with pytest.raises(ValueError):
        fold(np.zeros((3, 19)), 1, (4, 3, 5))
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 2)), 2)


def test_mode_product(gen):
    T = gen.standard_normal((3, 4, 5))
    np.testing.assert_array_equal(mode_product(T, 1, np.eye(4)[2]), T[:, 2, :])
    np.testing.assert_array_equal(mode_product(np.ones((2, 2, 2)), 2, np.ones(2)), 2 * np.ones((2, 2)))
    u, v, w = gen.standard_normal(3), gen.standard_normal(4), gen.standard_normal(5)
    chained = mode_product(mode_product(mode_product(T, 2, w), 1, v), 0, u)
    loop = sum(T[a, b, c] * u[a] * v[b] * w[c] for a in range(3) for b in range(4) for c in range(5))
    assert abs(chained - loop) <= 1e-12 * abs(loop)
    with pytest.raises(ValueError):
        mode_product(T, 0, np.ones(4))


def test_unfolding_rank(gen):
    model = random_cp_model(6, 3, rng=gen)
    for mode in range(3):
        s = np.linalg.svd(unfold(model, mode), compute_uv=False)
        assert np.all(s[3:] < 1e-8 * s[0])


def test_matrix_norms(gen):
    d = matrix_norms(np.eye(5))
    assert d["frobenius"] == pytest.approx(np.sqrt(5)) and d["operator"] == pytest.approx(1) and d["two_inf"] == 1
    u, v = gen.standard_normal(6), gen.standard_normal(9)
    assert matrix_norms(np.outer(u, v))["operator"] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))
    assert matrix_norms(np.zeros((0, 3)))["operator"] == 0.0
    M = gen.standard_normal((4, 7))
    d = matrix_norms(M)
    assert d["inf_two"] == pytest.approx(np.linalg.norm(M, axis=0).max())
    assert d["max_abs"] == np.abs(M).max()


def test_max_norm_bound_on_incoherent_matrices(gen):
    # ||A||_max <= sqrt(mu1 mu2 / (mn)) r ||A||
    for _ in range(10):
        A = gen.standard_normal((30, 3)) @ gen.standard_normal((3, 50))
        mu1, mu2, r = incoherence_of_matrix(A)
        d = matrix_norms(A)
        assert d["max_abs"] <= np.sqrt(mu1 * mu2 / (30 * 50)) * r * d["operator"] * (1 + 1e-12)


def test_incoherence_of_matrix_extremes():
    n, m, r = 8, 6, 2
    M = np.zeros((n, m))
    M[0, 0], M[1, 1] = 2.0, 1.0
    assert incoherence_of_matrix(M)[0] == pytest.approx(n / r)
    mu1, mu2, rank = incoherence_of_matrix(np.ones((n, m)) / np.sqrt(n * m))
    assert rank == 1 and mu1 == pytest.approx(1) and mu2 == pytest.approx(1)
    with pytest.raises(ValueError):
        incoherence_of_matrix(np.zeros((3, 3)))


def test_cp_incoherence_extremes():
    n = 7
    assert cp_incoherence_check(CPModel.symmetric_from(np.ones((n, 1)) / np.sqrt(n))) == pytest.approx(1)
    assert cp_incoherence_check(CPModel.symmetric_from(np.eye(n)[:, :1])) == pytest.approx(n)
    with pytest.raises(ValueError):
        cp_incoherence_check(CPModel.symmetric_from(np.zeros((3, 1))))


def test_unfolding_svd_matches_dense(gen):
    model = random_cp_model(5, 2, rng=gen, symmetric=False, dims=(4, 5, 6))
    for mode in range(3):
        U, s, V = unfolding_svd(model, mode)
        A = unfold(model, mode)
        np.testing.assert_allclose(U * s @ V.T, A, atol=1e-12)
        np.testing.assert_allclose(s, np.linalg.svd(A, compute_uv=False)[:2], rtol=1e-10)


def test_incoherence_bound_chain(gen):
    # mu1 <= 2 mu and mu2 <= 2 mu^(k-1) for every unfolding when r mu <= n/2
    for order, n, r in [(3, 200, 3), (3, 60, 2), (4, 30, 2)]:
        model = random_cp_model(n, r, order=order, rng=gen)
        rep = incoherence_report(model)
        assert rep.bounds_applicable
        assert rep.incoherence_bounds_hold(order)
        A = unfold(model, 0) if model.size <= 1 << 22 else None
        if A is not None:
            mu1, mu2, _ = incoherence_of_matrix(A)
            assert mu1 == pytest.approx(rep.mu1[0], rel=1e-6)
            assert mu2 == pytest.approx(rep.mu2[0], rel=1e-6)


def test_bound_flag_when_inapplicable():
    rep = incoherence_report(CPModel.symmetric_from(np.eye(4)[:, :2]))
    assert not rep.bounds_applicable


def test_json_roundtrip(gen):
    model = random_cp_model(4, 2, rng=gen, symmetric=False, dims=(2, 3, 4))
    back = CPModel.from_json_dict(model.to_json_dict())
    np.testing.assert_array_equal(cp_to_dense(back), cp_to_dense(model))
    assert back.symmetric == model.symmetric
