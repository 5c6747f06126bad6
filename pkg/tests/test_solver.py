import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bregman_vi.exceptions import ConfigurationError, DomainError, LineSearchError, StageError
from bregman_vi.geometry import Ball, bregman, euclidean_setup, max_bregman_over_set
from bregman_vi.oracle import OperatorOracle, exact_oracle
from bregman_vi.solver import (EXPLICIT_FORMULA, SUM_THRESHOLD, RadiusClampWarning, RestartConfig,
                               UmpConfig, UmpTrace, acceptance_excess, line_search_step,
                               restart_solve, ump_solve)

EUC = euclidean_setup()


def affine(A, b, mu=0.0, L=None):
    L = float(np.linalg.norm(A, 2)) if L is None else L
    return exact_oracle(lambda x: A @ x + b, mu=mu, L_rel=L)


def zero_oracle():
    return exact_oracle(lambda x: np.zeros_like(x))


class Counting:
    def __init__(self, g):
        self.g, self.calls = g, 0

    def __call__(self, x):
        self.calls += 1
        return self.g(x)


# -- line search --------------------------------------------------------------


def test_zero_operator_accepts_immediately():
    ball = Ball(np.zeros(2), 1.0)
    z = np.array([0.3, -0.1])
    step = line_search_step(zero_oracle(), EUC, ball, z, 4.0, 0.0)
    assert step.i == 0 and step.L_next == 2.0
    np.testing.assert_array_equal(step.w, z)
    np.testing.assert_array_equal(step.z_next, z)


def test_generous_L_accepts_at_first_trial():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((5, 5))
    norm = np.linalg.norm(A, 2)
    ball = Ball(np.zeros(5), 1.0)
    oracle = affine(A, rng.standard_normal(5))
    for z in ball.sample(rng, 20):
        step = line_search_step(oracle, EUC, ball, z, 2 * norm, 0.0)
        assert step.i == 0 and step.L_next == norm


@given(seed=st.integers(0, 10**6))
def test_doubling_never_overshoots_twice_the_norm(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4))
    norm = np.linalg.norm(A, 2)
    ball = Ball(np.zeros(4), 1.0)
    z = ball.sample(rng, 1)[0]
    step = line_search_step(affine(A, rng.standard_normal(4)), EUC, ball, z, norm / 16, 0.0)
    assert step.L_next <= 2 * norm
    assert step.L_next >= norm / 32


def test_operator_at_z_is_evaluated_once():
    rng = np.random.default_rng(1)
    A = 10 * rng.standard_normal((3, 3))
    g = Counting(lambda x: A @ x)
    oracle = OperatorOracle(g, g, 0.0, 0.0, 1.0)
    step = line_search_step(oracle, EUC, Ball(np.zeros(3), 1.0), np.array([0.5, 0.0, 0.0]), 1e-3, 0.0)
    assert step.i > 0
    assert g.calls == step.oracle_calls == 1 + (step.i + 1)


def test_accepted_step_satisfies_written_inequality():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3)) + 2 * np.eye(3)
    oracle = affine(A, np.ones(3))
    ball = Ball(np.zeros(3), 1.0)
    z = ball.sample(rng, 1)[0]
    s = line_search_step(oracle, EUC, ball, z, 0.1, 0.0)
    gz, gw = oracle(z), oracle(s.w)
    lhs = gz @ (s.z_next - z)
    rhs = gw @ (s.z_next - s.w) + gz @ (s.w - z) + s.L_next * (
        bregman(EUC, s.w, z) + bregman(EUC, s.z_next, s.w))
    assert lhs <= rhs + 1e-12
    assert acceptance_excess(EUC, z, s.w, s.z_next, gz, gw, s.L_next, 0.0) <= 0


def test_cap_exceeded_raises_with_state():
    A = 100 * np.eye(2)
    with pytest.raises(LineSearchError) as info:
        line_search_step(affine(A, np.zeros(2)), EUC, Ball(np.zeros(2), 1.0), np.array([0.5, 0.5]),
                         1e-6, 0.0, cap=3)
    err = info.value
    assert err.i == 3 and err.L_trial == math.ldexp(1e-6, 2) and err.excess > 0


# -- ump_solve ----------------------------------------------------------------


def test_interior_affine_solution():
    ball = Ball(np.zeros(2), 1.0)
    trace = ump_solve(affine(np.eye(2), np.array([-0.5, 0.0])), EUC, ball, UmpConfig(1e-4, 1.0, np.zeros(2)))
    assert trace.converged
    assert np.linalg.norm(trace.averaged_w - [0.5, 0.0]) <= 1e-4


def test_zero_operator_stays_put():
    ball = Ball(np.zeros(2), 1.0)
    z0 = np.array([0.1, 0.2])
    trace = ump_solve(zero_oracle(), EUC, ball, UmpConfig(1e-3, 1.0, z0))
    assert trace.converged
    assert np.all(trace.z == z0)
    np.testing.assert_array_equal(trace.L, [2.0 ** -(k + 1) for k in range(trace.N)])
    assert trace.S_N >= trace.threshold > trace.S[-2]


def test_epsilon_equal_to_radius_stops_after_one_step():
    ball = Ball(np.zeros(2), 1.0)
    D = max_bregman_over_set(EUC, ball, np.zeros(2))
    trace = ump_solve(zero_oracle(), EUC, ball, UmpConfig(D, 1.0, np.zeros(2)))
    assert trace.threshold == 1.0
    assert trace.N == 1 and trace.S_N == 2.0


def test_iteration_cap_marks_nonconverged():
    ball = Ball(np.zeros(3), 1.0)
    trace = ump_solve(affine(np.eye(3), np.ones(3)), EUC, ball, UmpConfig(1e-8, 1.0, np.zeros(3), max_outer_iters=3))
    assert not trace.converged and trace.N == 3


def test_sum_threshold_mode():
    ball = Ball(np.zeros(3), 1.0)
    cfg = UmpConfig(1.0, 1.0, np.zeros(3), SUM_THRESHOLD, threshold=7.5)
    trace = ump_solve(affine(np.eye(3), np.ones(3)), EUC, ball, cfg)
    assert trace.epsilon is None
    assert trace.S_N >= 7.5 > trace.S[-2]


@given(seed=st.integers(0, 10**6))
def test_trace_invariants(seed):
    rng = np.random.default_rng(seed)
    n = 3
    A = rng.standard_normal((n, n)) + 2 * np.eye(n)
    ball = Ball(np.zeros(n), 1.0)
    L0 = 10.0 ** rng.uniform(-2, 2)
    trace = ump_solve(affine(A, rng.standard_normal(n)), EUC, ball, UmpConfig(1e-2, L0, np.zeros(n)))
    assert np.all(np.diff(trace.S) > 0)
    prev = np.r_[L0, trace.L[:-1]]
    assert np.all(trace.L >= prev / 2)
    assert ball.contains(trace.averaged_w, tol=1e-12)


def test_trace_roundtrip_and_determinism():
    ball = Ball(np.zeros(3), 1.0)
    run = lambda: ump_solve(affine(np.diag([1.0, 2.0, 3.0]), np.ones(3)), EUC, ball,
                            UmpConfig(1e-2, 0.3, np.zeros(3)))
    a, b = run(), run()
    assert a.to_dict() == b.to_dict()
    c = UmpTrace.from_dict(a.to_dict())
    for key in ("z", "w", "L", "i", "S"):
        np.testing.assert_array_equal(getattr(a, key), getattr(c, key))
    np.testing.assert_array_equal(a.averaged_w, c.averaged_w)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        UmpConfig(0.0, 1.0, np.zeros(2))
    with pytest.raises(ConfigurationError):
        UmpConfig(1.0, -1.0, np.zeros(2))
    with pytest.raises(ConfigurationError):
        UmpConfig(1.0, 1.0, np.zeros(2), SUM_THRESHOLD)
    with pytest.raises(DomainError):
        ump_solve(zero_oracle(), EUC, Ball(np.zeros(2), 1.0), UmpConfig(1.0, 1.0, np.array([2.0, 0.0])))


# -- restart_solve ------------------------------------------------------------


def scaled_identity_problem(n=5):
    A, b = 2 * np.eye(n), np.zeros(n)
    b[0] = -1.0
    x_star = np.zeros(n)
    x_star[0] = 0.5
    return affine(A, b, mu=2.0, L=2.0), Ball(np.zeros(n), 1.0), x_star


def test_stage_count_from_stop_rule():
    oracle, ball, _ = scaled_identity_problem()
    state = restart_solve(oracle, EUC, ball, RestartConfig(0.5, 2.0, 1.0, np.zeros(5), 1.0, 1.0))
    assert state.p == 3 == state.config.max_stages


def test_halving_guarantee_per_stage():
    oracle, ball, x_star = scaled_identity_problem()
    R0_sq = max_bregman_over_set(EUC, ball, np.zeros(5))
    state = restart_solve(oracle, EUC, ball, RestartConfig(1e-6, 2.0, 1.0, np.zeros(5), R0_sq, 1.0))
    for p, c in enumerate(state.centers):
        assert bregman(EUC, x_star, c) <= R0_sq / 2 ** p + 1e-9
    bound = math.ceil(2 * 2.0 * 1.0 / 2.0) * state.p
    assert state.total_inner <= bound


def test_recursive_halving_radii_without_noise():
    oracle, ball, _ = scaled_identity_problem()
    state = restart_solve(oracle, EUC, ball, RestartConfig(1e-6, 2.0, 1.0, np.zeros(5), 0.5, 1.0))
    for a, b, clamped in zip(state.radii_sq, state.radii_sq[1:], state.clamped):
        if not clamped:
            assert b <= a / 2 + 1e-12


def test_zero_stages_when_epsilon_is_large():
    oracle, ball, _ = scaled_identity_problem()
    state = restart_solve(oracle, EUC, ball, RestartConfig(1.01, 2.0, 1.0, np.zeros(5), 0.5, 1.0))
    assert state.p == 0 and np.array_equal(state.final_point, np.zeros(5))


def test_negative_radius_is_clamped_with_warning():
    oracle, ball, _ = scaled_identity_problem()
    R0_sq = 0.5
    noisy = OperatorOracle(oracle.eval_inexact, oracle.eval_exact, delta=2.0 * R0_sq, mu=2.0, L_rel=2.0)
    cfg = RestartConfig(1e-2, 2.0, 1.0, np.zeros(5), R0_sq, 1.0, radius_rule=EXPLICIT_FORMULA)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        state = restart_solve(noisy, EUC, ball, cfg)
    assert any(issubclass(w.category, RadiusClampWarning) for w in caught)
    assert state.clamped[0] and state.raw_radii_sq[0] <= 0
    assert min(state.radii_sq) >= cfg.epsilon / 2
    assert state.complete


def test_inner_failure_reports_stage():
    oracle, ball, _ = scaled_identity_problem()
    cfg = RestartConfig(1e-3, 2.0, 1.0, np.zeros(5), 0.5, 1e-3, max_outer_iters=1)
    with pytest.raises(StageError) as info:
        restart_solve(oracle, EUC, ball, cfg)
    assert info.value.stage == 0 and info.value.trace is not None


def test_restart_config_validation():
    with pytest.raises(ConfigurationError):
        RestartConfig(1e-3, 0.0, 1.0, np.zeros(2), 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        RestartConfig(1e-3, 1.0, 1.0, np.zeros(2), 1.0, 1.0, radius_rule="nope")
