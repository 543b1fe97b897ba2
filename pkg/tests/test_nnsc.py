import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from multifacet import nnsc
from multifacet.errors import ConfigError, NonFiniteError, ShapeError

from _support import grid_er, grid_minimum, kkt_violation


def col(*xs):
    return np.array(xs, dtype=float).reshape(-1, 1)


def test_exact_reconstruction_without_penalty():
    F = np.eye(2)
    M = nnsc.solve_coefficients(F, col(1, 0), nnsc.SolverConfig(lam=0))
    np.testing.assert_allclose(M, col(1, 0), atol=1e-9)
    assert nnsc.er(F, col(1, 0), nnsc.SolverConfig(lam=0)) < 1e-12


def test_penalty_shrinks_coefficient():
    # 1-d: minimise (m - 1)^2 + 0.4 m  ->  m = 0.8
    M = nnsc.solve_coefficients(np.eye(2), col(1, 0), nnsc.SolverConfig(lam=0.4))
    np.testing.assert_allclose(M, col(0.8, 0), atol=1e-9)


def test_upper_box_is_active():
    M = nnsc.solve_coefficients(np.eye(2), col(3, 0), nnsc.SolverConfig(lam=0))
    np.testing.assert_allclose(M, col(1, 0), atol=1e-9)


def test_diagonal_target_half_error():
    # codebook {e1}, target (e1+e2)/sqrt2 -> best m = 1/sqrt2, residual 0.5
    w = col(1, 1) / np.sqrt(2)
    assert nnsc.er(col(1, 0), w, nnsc.SolverConfig(lam=0)) == pytest.approx(0.5, abs=1e-9)


def test_objective_never_above_zero_start():
    rng = np.random.default_rng(0)
    for _ in range(50):
        F = rng.standard_normal((6, 3))
        W = rng.standard_normal((6, 4))
        M = nnsc.solve_coefficients(F, W)
        assert nnsc.penalized_objective(F, W, M, 0.4) <= np.sum(W * W) + 1e-12


def test_matches_grid_oracle_on_small_instances():
    rng = np.random.default_rng(11)
    for lam in (0.0, 0.4):
        for _ in range(10):
            F = rng.standard_normal((4, 2))
            W = rng.standard_normal((4, 2))
            M = nnsc.solve_coefficients(F, W, nnsc.SolverConfig(lam=lam))
            assert nnsc.penalized_objective(F, W, M, lam) <= grid_minimum(F, W, lam) + 1e-9


def test_er_matches_grid_er_on_well_conditioned_instance():
    F = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    W = np.array([[0.5, 0.2], [0.1, 0.9], [0.3, 0.0]])
    assert nnsc.er(F, W, nnsc.SolverConfig(lam=0.0)) == pytest.approx(grid_er(F, W, 0.0), abs=1e-9)


def test_plain_rmsprop_is_approximate():
    rng = np.random.default_rng(2)
    F = rng.standard_normal((5, 3))
    W = rng.standard_normal((5, 3))
    cfg = nnsc.SolverConfig(polish_iters=0)
    M = nnsc.solve_coefficients(F, W, cfg)
    assert M.min() >= 0 and M.max() <= 1
    exact = nnsc.penalized_objective(F, W, nnsc.solve_coefficients(F, W), 0.4)
    assert nnsc.penalized_objective(F, W, M, 0.4) >= exact - 1e-12


def test_kmeans_assignment_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(20):
        F = rng.standard_normal((5, 3))
        W = rng.standard_normal((5, 6))
        M = nnsc.kmeans_assign(F, W)
        for j in range(W.shape[1]):
            d = [np.sum((F[:, k] - W[:, j]) ** 2) for k in range(3)]
            assert M[:, j].tolist() == [1.0 if k == int(np.argmin(d)) else 0.0 for k in range(3)]


def test_kmeans_ties_go_to_lowest_center():
    F = np.array([[1.0, -1.0], [0.0, 0.0]])
    M = nnsc.kmeans_assign(F, col(0, 1))
    assert M[:, 0].tolist() == [1.0, 0.0]


def test_kmeans_mode_ignores_lambda():
    F = np.eye(3)[:, :2]
    W = np.array([[1.0, 0.1], [0.2, 1.0], [0.0, 0.0]])
    a = nnsc.er(F, W, nnsc.SolverConfig(mode="kmeans", lam=0.0))
    b = nnsc.er(F, W, nnsc.SolverConfig(mode="kmeans", lam=5.0))
    assert a == b


def test_codebook_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    F = rng.standard_normal((5, 3))
    Wp = rng.standard_normal((5, 4))
    Wn = rng.standard_normal((5, 2))
    _, Mp, Mn = nnsc.contrastive_loss(F, Wp, Wn)
    G = nnsc.loss_gradient_wrt_codebook(F, Wp, Wn, Mp, Mn)

    def loss(F):
        return nnsc.reconstruction_error(F, Wp, Mp) - nnsc.reconstruction_error(F, Wn, Mn)

    num = np.zeros_like(F)
    h = 1e-6
    for idx in np.ndindex(F.shape):
        Fp, Fm = F.copy(), F.copy()
        Fp[idx] += h
        Fm[idx] -= h
        num[idx] = (loss(Fp) - loss(Fm)) / (2 * h)
    np.testing.assert_allclose(G, num, rtol=1e-6, atol=1e-7)


def test_zero_coefficients_give_zero_gradient_contribution():
    F = np.eye(2)
    W = col(-1, 0)
    M = nnsc.solve_coefficients(F, W)
    assert not M.any()
    G = nnsc.loss_gradient_wrt_codebook(F, W, W, M, M)
    assert not G.any()


def test_contrastive_loss_sign():
    F = np.eye(3)[:, :2]
    W_pos = np.eye(3)[:, :2]
    W_neg = np.eye(3)[:, 2:]
    loss, _, _ = nnsc.contrastive_loss(F, W_pos, W_neg, nnsc.SolverConfig(lam=0))
    assert loss == pytest.approx(-1.0, abs=1e-9)


@pytest.mark.parametrize("F,W,exc", [
    (np.zeros((3, 2)), np.zeros((4, 1)), ShapeError),
    (np.zeros((3, 0)), np.zeros((3, 1)), ShapeError),
    (np.full((3, 2), np.nan), np.zeros((3, 1)), NonFiniteError),
])
def test_invalid_inputs(F, W, exc):
    with pytest.raises(exc):
        nnsc.solve_coefficients(F, W)


@pytest.mark.parametrize("kwargs", [dict(lam=-1), dict(decay=1.0), dict(step_size=0),
                                    dict(max_iters=0), dict(mode="lasso")])
def test_solver_config_validation(kwargs):
    with pytest.raises(ConfigError):
        nnsc.SolverConfig(**kwargs)


# -- properties ----------------------------------------------------------------

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@st.composite
def problems(draw):
    E = draw(st.integers(2, 6))
    K = draw(st.integers(1, 4))
    n = draw(st.integers(1, 5))
    F = draw(arrays(np.float64, (E, K), elements=finite))
    W = draw(arrays(np.float64, (E, n), elements=finite))
    lam = draw(st.sampled_from([0.0, 0.1, 0.4, 1.0]))
    return F, W, lam


@settings(max_examples=60, deadline=None)
@given(problems())
def test_solution_in_box_and_not_worse_than_zero(p):
    F, W, lam = p
    M = nnsc.solve_coefficients(F, W, nnsc.SolverConfig(lam=lam))
    assert M.shape == (F.shape[1], W.shape[1])
    assert M.min() >= 0.0 and M.max() <= 1.0
    assert nnsc.penalized_objective(F, W, M, lam) <= np.sum(W * W) + 1e-9


@settings(max_examples=60, deadline=None)
@given(problems())
def test_solution_satisfies_first_order_conditions(p):
    F, W, lam = p
    M = nnsc.solve_coefficients(F, W, nnsc.SolverConfig(lam=lam))
    if np.any(np.abs(np.diag(F.T @ F)) < 1e-8):
        return  # a zero column leaves its coefficient free
    scale = 1.0 + np.abs(F.T @ W).max() + np.abs(F.T @ F).max()
    assert kkt_violation(F, W, M, lam) <= 1e-6 * scale


@settings(max_examples=40, deadline=None)
@given(problems(), st.randoms(use_true_random=False))
def test_er_invariant_to_codebook_column_order(p, rnd):
    F, W, lam = p
    perm = list(range(F.shape[1]))
    rnd.shuffle(perm)
    cfg = nnsc.SolverConfig(lam=lam)
    assert abs(nnsc.er(F, W, cfg) - nnsc.er(F[:, perm], W, cfg)) <= 1e-6 * max(np.sum(W * W), 1e-12)


@settings(max_examples=40, deadline=None)
@given(problems())
def test_er_nonnegative_and_bounded_by_target_energy(p):
    F, W, lam = p
    e = nnsc.er(F, W, nnsc.SolverConfig(lam=lam))
    # the penalised optimum is no worse than M = 0, so its error part cannot be either
    assert 0.0 <= e <= np.sum(W * W) + 1e-9


def test_orthonormal_soft_threshold_example():
    M = nnsc.solve_coefficients(np.eye(2), col(0.6, 0.8), nnsc.SolverConfig(lam=0.4))
    np.testing.assert_allclose(M, col(0.4, 0.6), atol=1e-9)


def test_large_penalty_gives_zero_coefficients():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((4, 3))
    W /= np.linalg.norm(W, axis=0)
    F = rng.standard_normal((4, 2))
    cfg = nnsc.SolverConfig(lam=1000.0)
    assert not nnsc.solve_coefficients(F, W, cfg).any()
    assert nnsc.er(F, W, cfg) == pytest.approx(3.0)


def test_skewed_codebook_example():
    # codebook {e1, (e1+e2)/sqrt2}, target e2: best m2 = 1/sqrt2 with residual 0.5
    F = np.array([[1.0, 1 / np.sqrt(2)], [0.0, 1 / np.sqrt(2)]])
    W = col(0, 1)
    assert nnsc.er(F, W, nnsc.SolverConfig(lam=0)) == pytest.approx(0.5, abs=1e-9)
    assert nnsc.er(F, W, nnsc.SolverConfig(lam=0)) == pytest.approx(grid_er(F, W, 0.0, 0.001), abs=1e-5)


def test_reconstruction_error_trivial_cases():
    rng = np.random.default_rng(1)
    F = rng.standard_normal((3, 2))
    M = rng.uniform(size=(2, 4))
    assert nnsc.reconstruction_error(F, F @ M, M) == pytest.approx(0.0, abs=1e-20)
    W = rng.standard_normal((3, 4))
    assert nnsc.reconstruction_error(F, W, np.zeros((2, 4))) == pytest.approx(np.sum(W * W))


def test_exact_center_match_is_one_hot():
    F = np.eye(4)[:, :3]
    M = nnsc.kmeans_assign(F, F[:, 2:3])
    assert M[:, 0].tolist() == [0.0, 0.0, 1.0]


def test_equal_sets_cancel():
    rng = np.random.default_rng(3)
    F = rng.standard_normal((5, 2))
    W = rng.standard_normal((5, 3))
    loss, Mp, Mn = nnsc.contrastive_loss(F, W, W)
    assert loss == 0.0
    assert not nnsc.loss_gradient_wrt_codebook(F, W, W, Mp, Mn).any()


def test_loss_equals_independent_recomputation():
    rng = np.random.default_rng(9)
    F = rng.standard_normal((5, 3))
    Wp = rng.standard_normal((5, 4))
    Wn = rng.standard_normal((5, 2))
    loss, _, _ = nnsc.contrastive_loss(F, Wp, Wn)
    assert loss == pytest.approx(nnsc.er(F, Wp) - nnsc.er(F, Wn), abs=1e-12)


def test_negative_set_outside_span():
    F = np.eye(3)[:, :2]
    W_neg = np.eye(3)[:, 2:] * 2.0
    loss, _, _ = nnsc.contrastive_loss(F, F.copy(), W_neg, nnsc.SolverConfig(lam=0))
    assert loss == pytest.approx(-4.0, abs=1e-9)
