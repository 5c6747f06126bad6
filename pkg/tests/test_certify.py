import json
import math

import numpy as np
import pytest
from dataclasses import replace

from bregman_vi.certify import (SampledGap, grid_solution, minty_certificate, minty_gap, theorem2_accuracy_bound,
                                verify_halving, verify_lemma1, verify_linesearch, verify_theorem1,
                                verify_theorem2)
from bregman_vi.exceptions import ConfigurationError, DomainError
from bregman_vi.geometry import Ball, bregman, euclidean_setup, max_bregman_over_set
from bregman_vi.oracle import OperatorOracle, exact_oracle
from bregman_vi.problems import perturbed, start_point
from bregman_vi.solver import RestartConfig, RestartState, UmpConfig, restart_solve, ump_solve

EUC = euclidean_setup()


def solve(pr, eps=1e-3, L0=1.0, **kw):
    return ump_solve(pr.oracle, pr.setup, pr.set, UmpConfig(eps, L0, start_point(pr), **kw))


def restart(pr, eps, rule="recursive_halving"):
    x0 = start_point(pr)
    cfg = RestartConfig(eps, pr.mu, pr.setup.omega, x0, max_bregman_over_set(pr.setup, pr.set, x0), 1.0, rule)
    return restart_solve(pr.oracle, pr.setup, pr.set, cfg)


# -- stepwise decrease ---------------------------------------------------------


def test_stepwise_decrease_on_exact_run(problems):
    pr = problems["affine_ball_10"]
    cert = verify_lemma1(solve(pr), pr.x_star, pr.setup, 0.0)
    assert cert.holds and cert.margin >= -1e-9
    assert cert.details["aggregate"].holds


def test_stepwise_slack_for_stationary_iterates():
    zero = exact_oracle(lambda x: np.zeros_like(x))
    ball = Ball(np.zeros(2), 1.0)
    trace = ump_solve(zero, EUC, ball, UmpConfig(1e-2, 1.0, np.array([0.2, 0.0])))
    delta = 0.01
    cert = verify_lemma1(trace, np.zeros(2), EUC, delta)
    assert cert.margin == pytest.approx(delta / trace.L.max(), rel=1e-14)
    assert cert.holds


def test_stepwise_check_detects_divergent_trace(problems):
    pr = problems["affine_ball_2"]
    trace = solve(pr, eps=1e-2)
    away = pr.x_star + np.outer(np.linspace(0, 1, trace.N + 1), [0.3, 0.3])
    bad = replace(trace, z=away)
    cert = verify_lemma1(bad, pr.x_star, pr.setup, 0.0)
    assert not cert.holds and cert.margin < 0


def test_empty_trace_is_rejected(problems):
    pr = problems["affine_ball_2"]
    trace = solve(pr)
    empty = replace(trace, z=trace.z[:1], w=trace.w[:0], L=trace.L[:0], i=trace.i[:0], S=trace.S[:0])
    with pytest.raises(DomainError):
        verify_lemma1(empty, pr.x_star, pr.setup, 0.0)


# -- rate certificate and line search ---------------------------------------


@pytest.mark.parametrize("name", ["affine_ball_2", "affine_box_2", "affine_product_4", "saddle_random_3x4"])
def test_rate_certificate_on_bundled(problems, name):
    pr = problems[name]
    trace = solve(pr, eps=1e-2)
    cert = verify_theorem1(trace, pr.oracle, pr.x_star, pr.setup, pr.set)
    assert cert.holds
    assert trace.N <= cert.details["iteration_bound"]
    assert verify_linesearch(trace, pr.oracle, pr.setup).holds


def test_rate_single_iteration_bound(problems):
    pr = problems["affine_ball_2"]
    trace = solve(pr, max_outer_iters=1)
    cert = verify_theorem1(trace, pr.oracle, pr.x_star, pr.setup, pr.set)
    D = max_bregman_over_set(pr.setup, pr.set, trace.z[0])
    assert cert.details["bound"] == pytest.approx(trace.L[0] * D, rel=1e-14)
    g = pr.oracle.exact(trace.w[0])
    assert cert.details["weighted_gap"] == pytest.approx(-g @ (pr.x_star - trace.w[0]), rel=1e-12)


def test_rate_needs_exact_oracle(problems):
    pr = problems["affine_ball_2"]
    trace = solve(pr, eps=1e-1)
    blind = OperatorOracle(pr.oracle.eval_inexact)
    with pytest.raises(ConfigurationError):
        verify_theorem1(trace, blind, pr.x_star, pr.setup, pr.set)


def test_linesearch_certificate_catches_tampering(problems):
    pr = problems["affine_ball_2"]
    trace = solve(pr, eps=1e-1)
    bad = replace(trace, L=trace.L * 1e-3)
    assert not verify_linesearch(bad, pr.oracle, pr.setup).holds


# -- restart certificate ---------------------------------------------------------


def test_restart_certificate_exact(problems):
    pr = problems["affine_ball_2"]
    state = restart(pr, 1e-4)
    cert = verify_theorem2(state, pr.x_star, pr.mu, pr.setup.omega, pr.L, 0.0, 1e-4)
    assert cert.holds and cert.details["V_final"] <= 1e-4
    assert cert.details["itercount"].holds
    assert verify_halving(state, pr.x_star).holds


def test_restart_certificate_inexact(problems):
    pr = perturbed(problems["affine_ball_10"], 1e-3, 3)
    state = restart(pr, 1e-2)
    cert = verify_theorem2(state, pr.x_star, pr.mu, pr.setup.omega, pr.L, pr.delta, 1e-2)
    assert cert.holds
    assert cert.details["bound"] == pytest.approx(theorem2_accuracy_bound(pr.mu, 1.0, pr.L, 1e-3, 1e-2))


def test_restart_certificate_with_no_stages(problems):
    pr = problems["affine_ball_2"]
    x0 = start_point(pr)
    R0_sq = max_bregman_over_set(pr.setup, pr.set, x0)
    eps = 2.5 * R0_sq
    state = restart(pr, eps)
    assert state.p == 0 and np.array_equal(state.final_point, x0)
    cert = verify_theorem2(state, pr.x_star, pr.mu, pr.setup.omega, pr.L, 0.0, eps)
    assert cert.holds and bregman(pr.setup, pr.x_star, x0) <= R0_sq <= eps


def test_restart_certificate_requires_finished_state(problems):
    pr = problems["affine_ball_2"]
    cfg = RestartConfig(1e-3, pr.mu, 1.0, start_point(pr), 0.5, 1.0)
    state = RestartState(cfg, pr.setup, centers=[cfg.x0], radii_sq=[0.5])
    with pytest.raises(DomainError):
        verify_theorem2(state, pr.x_star, pr.mu, 1.0, pr.L, 0.0, 1e-3)


def test_certificates_serialize(problems):
    pr = problems["affine_ball_2"]
    state = restart(pr, 1e-3)
    cert = verify_theorem2(state, pr.x_star, pr.mu, 1.0, pr.L, 0.0, 1e-3)
    d = json.loads(json.dumps(cert.to_dict()))
    assert d["claim"] == "theorem2_accuracy"
    assert d["details"]["itercount"]["claim"] == "theorem2_itercount"


# -- minty gap ----------------------------------------------------------------


def test_gap_at_solution_on_grid(problems):
    pr = problems["affine_ball_2"]
    coarse = minty_gap(pr.oracle, pr.set, pr.x_star, grid_resolution=1e-2)
    fine = minty_gap(pr.oracle, pr.set, pr.x_star, grid_resolution=1e-3)
    assert fine <= 1e-5 and fine <= coarse


def test_gap_at_far_point_is_positive(problems):
    pr = problems["affine_ball_2"]
    far = -pr.x_star / np.linalg.norm(pr.x_star)
    # strong monotonicity makes the midpoint a strict witness
    mid = 0.5 * (far + pr.x_star)
    expected = float(pr.oracle.exact(mid) @ (far - mid))
    assert expected > 0
    assert minty_gap(pr.oracle, pr.set, far, grid_resolution=1e-2) >= 0.5 * expected


def test_gap_of_zero_operator():
    zero = exact_oracle(lambda x: np.zeros_like(x))
    assert minty_gap(zero, Ball(np.zeros(2), 1.0), np.array([0.3, 0.3]), grid_resolution=1e-2) == 0.0


def test_grid_mode_rejects_high_dimension(problems):
    pr = problems["affine_ball_10"]
    with pytest.raises(DomainError, match="sampled"):
        minty_gap(pr.oracle, pr.set, pr.x_star, grid_resolution=0.1)
    assert minty_gap(pr.oracle, pr.set, pr.x_star, n_samples=10**4) <= 1e-8


def test_simplex_grid():
    from bregman_vi.geometry import Simplex

    g = exact_oracle(lambda x: x - 1.0 / 3)
    assert minty_gap(g, Simplex(3), np.full(3, 1 / 3), grid_resolution=1e-2) <= 1e-12


def test_sampled_gap_matches_sampled_mode(problems):
    pr = problems["affine_ball_10"]
    point = pr.set.default_point()
    assert SampledGap(pr.oracle, pr.set, 5000, seed=4)(point) == pytest.approx(
        minty_gap(pr.oracle, pr.set, point, n_samples=5000, seed=4), rel=1e-12)


def test_minty_certificate(problems):
    pr = problems["affine_ball_2"]
    assert minty_certificate(pr.oracle, pr.set, pr.x_star, 1e-4, grid_resolution=1e-2).holds
    assert not minty_certificate(pr.oracle, pr.set, -pr.x_star, 1e-4, grid_resolution=1e-2).holds


@pytest.mark.parametrize("name", ["affine_ball_2_boundary", "affine_box_2"])
def test_grid_solution_near_reference(problems, name):
    pr = problems[name]
    x = grid_solution(pr.oracle, pr.set, 1e-2, pr.mu / pr.L**2)
    assert np.linalg.norm(x - pr.x_star) <= 1e-2
