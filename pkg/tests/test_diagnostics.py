import math

import numpy as np
import pytest

from sketchlm.diagnostics import (
    binomial_margin,
    check_subspace_embedding,
    check_vector_embedding,
    coherence,
    gaussian_subspace_ell,
    monte_carlo_failure_rate,
    write_diagnostics_csv,
)
from sketchlm.sketching import SketchOperator, draw, recommended_ell


def zero_sketch(ell, n):
    return SketchOperator("gaussian", ell, n, dense=np.zeros((ell, n)))


def sketch_seed(seed):
    return np.random.SeedSequence(seed, spawn_key=(1,))


def test_vector_embedding_examples(rng):
    y = rng.standard_normal(6)
    assert check_vector_embedding(draw("identity", 6, 6), y, 0.1)
    assert not check_vector_embedding(zero_sketch(3, 6), y, 0.5)
    assert check_vector_embedding(draw("identity", 6, 6), np.zeros(6), 0.1) is None


def test_subspace_identity_and_zero(rng):
    Jt = rng.standard_normal((8, 3))
    rep = check_subspace_embedding(draw("identity", 8, 8), Jt, 0.1)
    assert rep.subspace_ok and rep.norm_ok and rep.true_iteration
    assert rep.min_distortion == pytest.approx(1.0) and rep.max_distortion == pytest.approx(1.0)
    rep0 = check_subspace_embedding(zero_sketch(4, 8), Jt, 0.9)
    assert not rep0.subspace_ok and rep0.rank_mjt == 0


def test_interval_test_agrees_with_sampled_directions():
    eps = 0.5
    for seed in range(50):
        rng = np.random.Generator(np.random.Philox(seed))
        Jt = rng.standard_normal((30, 3))
        M = draw("gaussian", 20, 30, seed=sketch_seed(seed))
        rep = check_subspace_embedding(M, Jt, eps)
        Z = rng.standard_normal((3, 200))
        a = np.sum((Jt @ Z) ** 2, axis=0)
        b = np.sum((M.apply(Jt @ Z)) ** 2, axis=0)
        ratio = b / a
        assert np.all(ratio >= rep.min_distortion * (1 - 1e-10))
        assert np.all(ratio <= rep.max_distortion * (1 + 1e-10))
        if rep.subspace_ok:
            assert np.all((1 - eps) * a <= b * (1 + 1e-12)) and np.all(b <= (1 + eps) * a * (1 + 1e-12))


def test_subspace_implies_gradient_embedding():
    eps = 0.5
    hits = 0
    for seed in range(60):
        rng = np.random.Generator(np.random.Philox(seed))
        J = rng.standard_normal((3, 40))
        g = J.T @ rng.standard_normal(3)
        rep = check_subspace_embedding(draw("gaussian", 30, 40, seed=sketch_seed(seed)), J.T, eps, grad=g)
        if rep.subspace_ok:
            hits += 1
            assert rep.gradient_ok
    assert hits > 10


def test_embedding_consequences():
    eps = 0.5
    passed = 0
    for seed in range(100):
        rng = np.random.Generator(np.random.Philox(seed))
        r = 2 + seed % 3
        Jt = rng.standard_normal((40, r)) @ rng.standard_normal((r, 5))
        M = draw("gaussian", 30, 40, seed=sketch_seed(seed))
        rep = check_subspace_embedding(M, Jt, eps)
        if not rep.subspace_ok:
            continue
        passed += 1
        assert rep.rank_mjt == rep.rank_jt == r
        assert rep.sigma_max_mjt <= math.sqrt(1 + eps) * rep.sigma_max_jt * (1 + 1e-10)
        assert rep.sigma_min_mjt >= math.sqrt(1 - eps) * rep.sigma_min_jt * (1 - 1e-10)
        kappa = (rep.sigma_max_mjt / rep.sigma_min_mjt) ** 2
        kappa0 = (rep.sigma_max_jt / rep.sigma_min_jt) ** 2
        assert kappa <= (1 + eps) / (1 - eps) * kappa0 + 1e-8
    assert passed >= 20


def test_norm_flag():
    Jt = np.eye(10)[:, :2]
    assert check_subspace_embedding(draw("s-hashing", 5, 10, seed=0), Jt, 0.5).norm_ok
    assert check_subspace_embedding(draw("gaussian", 5, 10, seed=0), Jt, 0.5).norm_ok is None
    assert check_subspace_embedding(draw("gaussian", 5, 10, seed=0), Jt, 0.5, delta2=0.01).norm_ok is not None


def test_cap():
    with pytest.raises(ValueError):
        check_subspace_embedding(draw("identity", 10, 10), np.ones((10, 1)), 0.5, cap=5)


def test_coherence_examples(rng):
    assert coherence(np.eye(6)[:, :2]) == pytest.approx(1.0)
    n = 8
    H = np.array([[1, 1], [1, -1]], dtype=float)
    for _ in range(2):
        H = np.kron(H, np.array([[1, 1], [1, -1]]))
    Jt = H[:, :3] / math.sqrt(n)
    assert coherence(Jt) == pytest.approx(math.sqrt(3 / n))
    A = rng.standard_normal((8, 3))
    U, _, _ = np.linalg.svd(A, full_matrices=False)
    assert coherence(A) == pytest.approx(np.max(np.linalg.norm(U, axis=1)), abs=1e-12)
    assert coherence(np.zeros((4, 2))) is None


def test_coherence_bounds(rng):
    for _ in range(30):
        n, r = int(rng.integers(3, 20)), int(rng.integers(1, 3))
        A = rng.standard_normal((n, r))
        mu = coherence(A)
        assert math.sqrt(r / n) - 1e-12 <= mu <= 1 + 1e-12


def test_monte_carlo_identity_and_gaussian():
    y = np.ones(20) / math.sqrt(20)
    assert monte_carlo_failure_rate("identity", 20, 20, 0.5, 1000, y=y) == 0.0
    p = math.exp(-1)
    rate = monte_carlo_failure_rate("gaussian", 16, 20, 0.5, 2000, y=y)
    assert rate <= p + binomial_margin(p, 2000)


def test_monte_carlo_vector_test_at_recommended_size():
    ell = recommended_ell("gaussian", 0.5, 0.01)
    y = np.zeros(80)
    y[0] = 1.0
    rate = monte_carlo_failure_rate("gaussian", ell, 80, 0.5, 2000, y=y, seed=5)
    assert 1 - rate >= 0.985


def test_monte_carlo_hashing_on_coherent_vector():
    # a single-coordinate vector keeps full norm under any hashing sketch
    y = np.zeros(50)
    y[3] = 1.0
    assert monte_carlo_failure_rate("s-hashing", 5, 50, 0.5, 1000, y=y) == 0.0


def test_monte_carlo_argument_checks():
    with pytest.raises(ValueError):
        monte_carlo_failure_rate("gaussian", 5, 10, 0.5, 100, y=np.ones(10))
    with pytest.raises(ValueError):
        monte_carlo_failure_rate("gaussian", 5, 10, 0.5, 1000)


def test_gaussian_subspace_ell_meets_the_target():
    ell = gaussian_subspace_ell(2, 0.9, 0.1)
    Jt = np.random.Generator(np.random.Philox(1)).standard_normal((ell + 20, 2))
    rate = monte_carlo_failure_rate("gaussian", ell, ell + 20, 0.9, 1000, Jt=Jt)
    assert rate <= 0.2
    with pytest.raises(ValueError):
        gaussian_subspace_ell(0, 0.5, 0.1)


def test_diagnostics_csv(tmp_path, rng):
    Jt = rng.standard_normal((10, 2))
    reps = [check_subspace_embedding(draw("s-hashing", 6, 10, seed=i), Jt, 0.5) for i in range(3)]
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(reps, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("eps,gradient_ok,subspace_ok")
    assert len(lines) == 4
