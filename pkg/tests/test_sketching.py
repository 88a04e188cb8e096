import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchlm.sketching import (
    KINDS,
    SketchOperator,
    canonical_kind,
    draw,
    ensemble_params,
    operator_norm_bound,
    recommended_ell,
)

RANDOM_KINDS = ["gaussian", "s-hashing", "stable-1-hashing", "sampling"]


def test_one_hashing_columns_have_single_unit_entry():
    M = draw("s-hashing", 2, 4, seed=7).todense()
    assert np.all(np.count_nonzero(M, axis=0) == 1)
    np.testing.assert_array_equal(np.abs(M[M != 0]), 1.0)


def test_identity_apply_is_identity():
    M = draw("identity", 3, 3)
    y = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(M.apply(y), y)
    np.testing.assert_array_equal(M.apply_transpose(y), y)


def test_hashing_permutation_sign_action():
    import scipy.sparse as sp

    csr = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    M = SketchOperator("s-hashing", 2, 2, rows=np.array([[0], [1]]), signs=np.array([[1.0], [-1.0]]), _csr=csr)
    np.testing.assert_array_equal(M.apply(np.array([3.0, 4.0])), [3.0, -4.0])


@pytest.mark.parametrize("s", [1, 2, 3, 5])
def test_s_hashing_structure(s):
    M = draw("s-hashing", 10, 40, seed=s, s=s)
    D = M.todense()
    assert np.all(np.count_nonzero(D, axis=0) == s)
    np.testing.assert_allclose(np.abs(D[D != 0]), 1 / math.sqrt(s), rtol=0, atol=1e-15)
    assert abs(np.linalg.norm(D, "fro") ** 2 - 40) <= 1e-12
    assert M.nnz == 40 * s


def test_stable_hashing_structure_and_occupancy():
    n, ell = 50, 7
    for seed in range(20):
        M = draw("stable-1-hashing", ell, n, seed=seed)
        D = M.todense()
        assert np.all(np.count_nonzero(D, axis=0) == 1)
        np.testing.assert_array_equal(np.abs(D[D != 0]), 1.0)
        counts = np.bincount(M.rows, minlength=ell)
        c = math.ceil(n / ell)
        assert counts.max() <= c
        assert counts.min() >= c - (c * ell - n)


def test_stable_hashing_exact_division_is_balanced():
    M = draw("stable-1-hashing", 5, 20, seed=3)
    np.testing.assert_array_equal(np.bincount(M.rows, minlength=5), 4)


def test_sampling_structure():
    n, ell = 30, 8
    M = draw("sampling", ell, n, seed=1)
    D = M.todense()
    assert np.all(np.count_nonzero(D, axis=1) == 1)
    np.testing.assert_allclose(D[D != 0], math.sqrt(n / ell), rtol=1e-15)
    assert len(set(M.cols.tolist())) == ell


def test_gaussian_entry_mean():
    ell = n = 1000
    D = draw("gaussian", ell, n, seed=0).todense()
    assert abs(D.mean()) <= 3 * (1 / math.sqrt(ell)) / math.sqrt(ell * n)


@pytest.mark.parametrize("kind", RANDOM_KINDS)
def test_draw_is_deterministic(kind):
    a = draw(kind, 6, 20, seed=11).todense()
    b = draw(kind, 6, 20, seed=11).todense()
    c = draw(kind, 6, 20, seed=12).todense()
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seed_sequence_seeds_are_reproducible():
    ss = np.random.SeedSequence(5, spawn_key=(3,))
    a = draw("gaussian", 4, 9, seed=ss).todense()
    b = draw("gaussian", 4, 9, seed=np.random.SeedSequence(5, spawn_key=(3,))).todense()
    np.testing.assert_array_equal(a, b)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(RANDOM_KINDS), n=st.integers(1, 64), frac=st.floats(0.01, 1.0),
       seed=st.integers(0, 2**32 - 1), s=st.integers(1, 4))
def test_apply_matches_dense_product(kind, n, frac, seed, s):
    ell = max(1, int(frac * n))
    s = min(s, ell)
    M = draw(kind, ell, n, seed=seed, s=s)
    D = M.todense()
    rng = np.random.Generator(np.random.Philox(seed))
    y = rng.standard_normal(n)
    z = rng.standard_normal(ell)
    Y = rng.standard_normal((n, 3))
    np.testing.assert_allclose(M.apply(y), D @ y, rtol=0, atol=1e-14 * (1 + np.abs(D).sum() * np.abs(y).max()))
    np.testing.assert_allclose(M.apply_transpose(z), D.T @ z, rtol=0, atol=1e-14 * (1 + np.abs(D).sum() * np.abs(z).max()))
    np.testing.assert_allclose(M.apply(Y), D @ Y, rtol=0, atol=1e-13 * (1 + np.abs(D).sum() * np.abs(Y).max()))


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(["stable-1-hashing", "sampling", "s-hashing"]), n=st.integers(2, 64),
       frac=st.floats(0.05, 1.0), seed=st.integers(0, 2**32 - 1))
def test_operator_norm_within_deterministic_bound(kind, n, frac, seed):
    # s = 1 only: for s > 1 the sqrt(n/s) value is not a sure bound
    ell = max(1, int(frac * n))
    M = draw(kind, ell, n, seed=seed)
    assert np.linalg.norm(M.todense(), 2) <= operator_norm_bound(M) * (1 + 1e-12)


def test_operator_norm_bound_values():
    assert operator_norm_bound(draw("s-hashing", 10, 100, seed=0, s=4)) == 5.0
    assert operator_norm_bound(draw("stable-1-hashing", 30, 100, seed=0)) == 2.0
    assert operator_norm_bound(draw("identity", 5, 5)) == 1.0
    assert operator_norm_bound(draw("sampling", 25, 100, seed=0)) == 2.0
    G = draw("gaussian", 4, 16, seed=0)
    assert operator_norm_bound(G, delta2=math.exp(-2)) == pytest.approx(1 + 2 + 1)
    with pytest.raises(ValueError):
        operator_norm_bound(G)


def test_recommended_ell_values():
    assert recommended_ell("gaussian", 0.5, math.exp(-1)) == 16
    assert recommended_ell("gaussian", 1 - 1e-12, math.exp(-1)) == 4
    assert recommended_ell("s-hashing", 0.5, math.exp(-1), C1=4) == 16
    assert recommended_ell("gaussian", 0.5, 0.05) == math.ceil(16 * math.log(20)) == 48
    assert recommended_ell("stable-1-hashing", 0.5, math.exp(-1)) == 64
    assert recommended_ell("sampling", 0.5, math.exp(-1), n=10) == 80


def test_recommended_ell_rejects_bad_parameters():
    with pytest.raises(ValueError):
        recommended_ell("gaussian", 1.5, 0.1)
    with pytest.raises(ValueError):
        recommended_ell("gaussian", 0.5, 1.0)
    with pytest.raises(ValueError):
        recommended_ell("stable-1-hashing", 0.2, 0.1)
    with pytest.raises(ValueError):
        recommended_ell("sampling", 0.5, 0.1)


def test_ensemble_params():
    p = ensemble_params("gaussian", 16, 100, 0.5, delta2=0.01)
    assert p.delta1 == pytest.approx(math.exp(-1))
    assert p.delta == pytest.approx(math.exp(-1) + 0.01)
    h = ensemble_params("s-hashing", 16, 100, 0.5, s=4)
    assert h.m_max == 5.0 and h.delta2 == 0.0


def test_draw_errors():
    with pytest.raises(ValueError):
        draw("stable-1-hashing", 5, 4, seed=0)
    with pytest.raises(ValueError):
        draw("sampling", 5, 4, seed=0)
    with pytest.raises(ValueError):
        draw("identity", 3, 4)
    with pytest.raises(ValueError):
        draw("s-hashing", 3, 4, seed=0, s=4)
    with pytest.raises(ValueError):
        draw("srht", 3, 4)
    M = draw("gaussian", 3, 4, seed=0)
    with pytest.raises(ValueError):
        M.apply(np.ones(3))
    with pytest.raises(ValueError):
        M.apply_transpose(np.ones(4))


def test_gaussian_may_have_more_rows_than_columns():
    assert draw("gaussian", 8, 4, seed=0).shape == (8, 4)


def test_aliases():
    assert canonical_kind("Scaled-Gaussian") == "gaussian"
    assert canonical_kind("1-hashing") == "s-hashing"
    assert set(KINDS) >= set(RANDOM_KINDS)


def test_sparse_kinds_store_no_dense_matrix():
    for kind in ["s-hashing", "stable-1-hashing", "sampling"]:
        assert draw(kind, 100, 10000, seed=0).dense is None


def test_one_sided_jl_monte_carlo():
    eps, delta = 0.5, 0.05
    ell = recommended_ell("gaussian", eps, delta)
    y = np.ones(60) / math.sqrt(60)
    fails = 0
    trials = 2000
    for i in range(trials):
        My = draw("gaussian", ell, 60, seed=np.random.SeedSequence(1, spawn_key=(i,))).apply(y)
        fails += float(My @ My) < 1 - eps
    assert fails / trials <= delta + 3 * math.sqrt(delta / trials)
