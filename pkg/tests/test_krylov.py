import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchlm.krylov import (
    DensificationError,
    StackedOperator,
    exact_solve,
    identity_stack,
    lsmr_solve,
    sketched_gram,
    spectral_extremes,
    stacked_rhs,
)
from sketchlm.sketching import draw


def random_system(seed, m=None, n=None, ell=None, kind="gaussian", mu=None):
    rng = np.random.Generator(np.random.Philox(seed))
    m = m or int(rng.integers(2, 41))
    n = n or int(rng.integers(2, 41))
    ell = ell or int(rng.integers(1, n + 1))
    J = rng.standard_normal((m, n))
    F = rng.standard_normal(m)
    mu = mu if mu is not None else float(10 ** rng.uniform(-4, 0))
    M = draw(kind, ell, n, seed=np.random.SeedSequence(seed, spawn_key=(1,)))
    return StackedOperator(J, M, mu), stacked_rhs(F, ell), J, F, M


def test_transpose_consistency(rng):
    for seed in range(10):
        G, _, *_ = random_system(seed)
        s = rng.standard_normal(G.ell)
        w = rng.standard_normal(G.m + G.ell)
        lhs, rhs = G.matvec(s) @ w, s @ G.rmatvec(w)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_gram_identity():
    G, _, J, _, M = random_system(3)
    Gd = G.todense()
    B = M.todense() @ J.T @ J @ M.todense().T + G.mu * np.eye(G.ell)
    np.testing.assert_allclose(Gd.T @ Gd, B, rtol=1e-12, atol=1e-12 * np.abs(B).max())
    np.testing.assert_allclose(sketched_gram(J, M), B - G.mu * np.eye(G.ell), atol=1e-12 * np.abs(B).max())


def test_zero_jacobian_gives_zero_step_without_iterations():
    G = identity_stack(np.zeros((3, 2)), 1.0)
    rhs = stacked_rhs(np.array([1.0, 2.0, 3.0]), 2)
    r = lsmr_solve(G, rhs, eta=0.5, max_iters=5)
    assert r.iterations == 0 and r.converged
    np.testing.assert_array_equal(r.s_hat, 0.0)
    np.testing.assert_array_equal(exact_solve(G, rhs).s_hat, 0.0)


def test_scalar_case():
    G = identity_stack(np.ones((1, 1)), 1.0)
    rhs = stacked_rhs(np.ones(1), 1)
    assert lsmr_solve(G, rhs, eta=0.0, max_iters=5).s_hat[0] == pytest.approx(-0.5, rel=1e-14)
    assert exact_solve(G, rhs).s_hat[0] == pytest.approx(-0.5, rel=1e-14)


def test_random_20_by_10_matches_qr():
    rng = np.random.Generator(np.random.Philox(0))
    J = rng.standard_normal((20, 10))
    G = identity_stack(J, 1e-2)
    rhs = stacked_rhs(rng.standard_normal(20), 10)
    a = lsmr_solve(G, rhs, eta=0.0, max_iters=30).s_hat
    b = exact_solve(G, rhs).s_hat
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(b)


def test_large_mu_limit():
    rng = np.random.Generator(np.random.Philox(2))
    J = rng.standard_normal((6, 4))
    F = rng.standard_normal(6)
    M = draw("gaussian", 3, 4, seed=2)
    mu = 1e8
    s = exact_solve(StackedOperator(J, M, mu), stacked_rhs(F, 3)).s_hat
    ref = -M.apply(J.T @ F) / mu
    assert np.linalg.norm(s - ref) <= 1e-6 * np.linalg.norm(ref)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), eta=st.sampled_from([0.5, 0.1, 1e-3, 1e-8]),
       kind=st.sampled_from(["gaussian", "s-hashing", "sampling", "stable-1-hashing"]))
def test_lsmr_contract_and_galerkin(seed, eta, kind):
    G, rhs, *_ = random_system(seed, kind=kind)
    r = lsmr_solve(G, rhs, eta=eta)
    true_rho = G.rmatvec(G.matvec(r.s_hat) - rhs)
    assert r.rho_norm == pytest.approx(np.linalg.norm(true_rho), rel=1e-12, abs=1e-300)
    if r.converged:
        assert r.rho_norm <= eta * r.rho0_norm
    ns = np.linalg.norm(r.s_hat)
    g = np.linalg.norm(G.rmatvec(rhs))
    # one-sided: LSMR iterates are not Galerkin, but s_hat^T rho never goes positive
    assert r.s_hat @ true_rho <= 1e-10 * ns * np.linalg.norm(true_rho) + 1e-13 * ns * g


def test_default_iteration_cap_is_min_m_ell():
    G, rhs, *_ = random_system(5, m=3, n=30, ell=20)
    r = lsmr_solve(G, rhs, eta=1e-300)
    assert r.iterations <= 3


def test_unconverged_flag():
    G, rhs, *_ = random_system(8, m=40, n=40, ell=40, mu=1e-6)
    r = lsmr_solve(G, rhs, eta=1e-14, max_iters=2)
    assert r.iterations == 2 and not r.converged


def test_lsmr_matches_qr_on_many_systems():
    for seed in range(100):
        G, rhs, *_ = random_system(seed)
        a = lsmr_solve(G, rhs, eta=1e-12, max_iters=10 * G.ell).s_hat
        b = exact_solve(G, rhs).s_hat
        assert np.linalg.norm(a - b) <= 1e-8 * max(np.linalg.norm(b), 1e-300)


def test_step_norm_bound():
    from sketchlm.subproblem import step_norm_bound

    for seed in range(30):
        G, rhs, J, F, M = random_system(seed)
        g_M = M.apply(J.T @ F)
        ext = spectral_extremes(sketched_gram(J, M))
        for eta in (0.0, 0.3):
            r = lsmr_solve(G, rhs, eta=eta, max_iters=200) if eta else exact_solve(G, rhs)
            bound = step_norm_bound(ext.lam_min_nonzero, G.mu, eta, np.linalg.norm(g_M))
            assert np.linalg.norm(r.s_hat) <= bound * (1 + 1e-10)


def test_errors():
    J = np.ones((2, 3))
    M = draw("gaussian", 2, 3, seed=0)
    with pytest.raises(ValueError):
        StackedOperator(J, M, 0.0)
    with pytest.raises(ValueError):
        StackedOperator(J, draw("gaussian", 2, 4, seed=0), 1.0)
    with pytest.raises(DensificationError):
        exact_solve(StackedOperator(J, M, 1.0), stacked_rhs(np.ones(2), 2), cap=1)
    with pytest.raises(DensificationError):
        spectral_extremes(np.eye(3), cap=2)


def test_spectral_extremes_examples():
    assert spectral_extremes(np.eye(3)) == (1.0, 1.0, 3)
    assert spectral_extremes(np.diag([4.0, 1.0, 0.0])) == (4.0, 1.0, 2)
    assert spectral_extremes(np.zeros((2, 2))) == (0.0, 0.0, 0)


def test_spectral_extremes_match_svd(rng):
    J = rng.standard_normal((7, 5))
    sv = np.linalg.svd(J, compute_uv=False)
    ext = spectral_extremes(sketched_gram(J, draw("identity", 5, 5)))
    assert ext.rank == 5
    assert ext.lam_max == pytest.approx(sv[0] ** 2, rel=1e-10)
    assert ext.lam_min_nonzero == pytest.approx(sv[-1] ** 2, rel=1e-10)


def test_sparse_jacobian_operator(rng):
    import scipy.sparse as sp

    Jd = rng.standard_normal((8, 6))
    Js = sp.csr_matrix(Jd)
    M = draw("s-hashing", 4, 6, seed=1)
    a = StackedOperator(Js, M, 0.1).todense()
    b = StackedOperator(Jd, M, 0.1).todense()
    np.testing.assert_allclose(a, b, atol=1e-14)
