import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from delaystab.dataset import Dataset, synth_quadratic
from delaystab.problem import EXPLICIT_MAX_DIM, QuadraticProblem, ridge_for_condition


@pytest.fixture
def tiny():
    # d=1, samples (x=2, y=1), (x=0, y=3)
    return Dataset.from_dense([[2.0], [0.0]], [1.0, 3.0])


def test_constants(tiny):
    p = QuadraticProblem(tiny)
    assert p.A.tolist() == [[2.0]] and p.b.tolist() == [-1.0] and p.c == 2.5
    assert QuadraticProblem(tiny, 0.1).A.tolist() == [[2.1]]


def test_empty_and_negative_ridge(tiny):
    with pytest.raises(ValueError):
        QuadraticProblem(Dataset(sp.csr_matrix((0, 2)), np.zeros(0)))
    with pytest.raises(ValueError):
        QuadraticProblem(tiny, -1.0)


def test_sample_loss_and_gradient(tiny):
    p = QuadraticProblem(tiny)
    assert p.sample_loss(np.array([1.0]), 0) == 0.5
    assert p.sample_loss(np.zeros(1), 1) == 4.5
    assert p.sample_gradient(np.array([1.0]), 0).tolist() == [2.0]
    assert p.sample_gradient(np.zeros(1), 0).tolist() == [-2.0]
    with pytest.raises(IndexError):
        p.sample_loss(np.zeros(1), 2)


def test_full_loss_examples(tiny):
    p = QuadraticProblem(tiny)
    assert p.full_loss(np.zeros(1)) == p.c
    assert p.full_gradient(np.zeros(1)).tolist() == p.b.tolist()
    assert p.full_loss(np.array([1.0])) == 2.5
    assert p.full_gradient(np.array([1.0])).tolist() == [1.0]


def test_zero_loss_at_w_star_noiseless():
    from delaystab.dataset import make_distribution

    dist = make_distribution(5, ["uniform", 0.2, 1.0], 0.0, 4)
    p = QuadraticProblem(dist.draw(30, np.random.default_rng(1)))
    assert max(p.sample_loss(dist.w_star, i) for i in range(p.n)) < 1e-25


@pytest.fixture(params=[0.0, 0.3])
def random_problem(request):
    return QuadraticProblem(synth_quadratic(6, 40, ["uniform", 0.1, 2.0], 0.5, 11), request.param)


def test_mean_sample_gradient_is_full_gradient(random_problem):
    p = random_problem
    w = np.random.default_rng(0).standard_normal(p.d)
    mean = np.mean([p.sample_gradient(w, i) for i in range(p.n)], axis=0)
    assert np.allclose(mean, p.full_gradient(w), atol=1e-12, rtol=0)


def test_finite_differences(random_problem):
    p, eps = random_problem, 1e-5
    w = np.random.default_rng(1).standard_normal(p.d)
    g = p.full_gradient(w)
    for j in range(p.d):
        e = np.zeros(p.d)
        e[j] = eps
        fd = (p.full_loss(w + e) - p.full_loss(w - e)) / (2 * eps)
        assert abs(fd - g[j]) < 1e-6


def test_quadratic_form_matches_loss(random_problem):
    p = random_problem
    for w in np.random.default_rng(2).standard_normal((5, p.d)):
        assert p.quadratic_form_loss(w) == pytest.approx(p.full_loss(w), rel=1e-12, abs=1e-12)


def test_gradient_lipschitz(random_problem):
    p = random_problem
    mu = p.estimate_spectral().mu
    rng = np.random.default_rng(3)
    for _ in range(20):
        w, v = rng.standard_normal((2, p.d))
        assert np.linalg.norm(p.full_gradient(w) - p.full_gradient(v)) <= mu * 1.05 * np.linalg.norm(w - v)


def test_spectral_examples(tiny):
    s = QuadraticProblem(tiny).estimate_spectral()
    assert (s.mu, s.lam) == (2.0, 2.0)
    big = QuadraticProblem(synth_quadratic(3, 20_000, [1.0, 0.5, 0.1], 0.0, 0))
    assert abs(big.estimate_spectral().mu - 1.0) < 0.1
    deficient = QuadraticProblem(synth_quadratic(8, 4, ["uniform", 0.5, 1.0], 0.0, 0), 0.3)
    assert deficient.estimate_spectral().lam == pytest.approx(0.3)


def test_implicit_regime_power_iteration():
    rng = np.random.default_rng(0)
    d, n = EXPLICIT_MAX_DIM + 50, 3000
    X = sp.random(n, d, density=0.002, random_state=1, format="csr")
    ds = Dataset(X, rng.standard_normal(n))
    p = QuadraticProblem(ds, 0.05)
    assert not p.explicit
    s = p.estimate_spectral(tol=1e-7)
    ref = sp.linalg.eigsh(sp.linalg.LinearOperator((d, d), matvec=p.matvec), k=1, which="LA")[0][0]
    assert s.mu == pytest.approx(ref, rel=1e-4)
    assert s.lam >= 0.05 - 1e-12
    with pytest.raises(RuntimeError):
        p.A
    w = rng.standard_normal(d)
    mean = np.mean([p.sample_gradient(w, i) for i in range(n)], axis=0)
    assert np.allclose(mean, p.full_gradient(w), atol=1e-12)


def test_replace_sample(tiny):
    p = QuadraticProblem(tiny)
    q = p.replace_sample(1, (np.array([1.0]), 2.0))
    assert q.A.tolist() == [[2.5]] and q.b.tolist() == [-2.0]
    assert p.A.tolist() == [[2.0]]
    with pytest.raises(ValueError):
        p.replace_sample(0, (np.zeros(2), 0.0))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.9))
def test_ridge_for_condition(ratio):
    ds = synth_quadratic(6, 30, ["uniform", 0.01, 1.0], 0.1, 2)
    p = QuadraticProblem(ds, ridge_for_condition(ds, ratio))
    s = p.estimate_spectral()
    assert s.lam / s.mu >= ratio - 1e-9
