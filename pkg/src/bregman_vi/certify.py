"""Post-hoc certificates recomputed from raw traces and the oracle.

Nothing computed inside the solver is trusted here: divergences, inner
products and partial sums are all rebuilt from the stored iterates and the
stored ``L_{k+1}`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .geometry import Ball, Box, Product, Simplex, bregman, max_bregman_over_set
from .solver import acceptance_excess

TOL = 1e-9

LEMMA1_STEPWISE = "lemma1_stepwise"
LEMMA1_AGGREGATE = "lemma1_aggregate"
THEOREM1_RATE = "theorem1_rate"
THEOREM2_ACCURACY = "theorem2_accuracy"
THEOREM2_ITERCOUNT = "theorem2_itercount"
MINTY_GAP = "minty_gap"


@dataclass
class Certificate:
    """Outcome of one check; ``margin`` is right minus left side at the worst point."""

    claim: str
    holds: bool
    margin: float
    tolerance: float = TOL
    details: dict = field(default_factory=dict)

    def to_dict(self):
        def clean(v):
            if isinstance(v, Certificate):
                return v.to_dict()
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return {"claim": self.claim, "holds": bool(self.holds), "margin": float(self.margin),
                "tolerance": self.tolerance, "details": clean(self.details)}


def _make(claim, margin, tolerance=TOL, **details):
    return Certificate(claim, bool(margin >= -tolerance), float(margin), tolerance, details)


def _partial_sums(trace):
    return np.cumsum(1.0 / np.asarray(trace.L, dtype=float))


def verify_lemma1(trace, x_star, setup, delta):
    """Check ``V(x*, z_{k+1}) <= V(x*, z_k) + delta / L_{k+1}`` at every step.

    The aggregate form ``V(x*, z_N) <= V(x*, z_0) + delta S_N`` is attached
    under ``details["aggregate"]``; ``holds`` requires both.
    """
    if trace.N == 0:
        raise DomainError("cannot certify an empty trace")
    V = np.array([bregman(setup, x_star, z) for z in trace.z])
    L = np.asarray(trace.L, dtype=float)
    slack = V[:-1] + delta / L - V[1:]
    k_worst = int(np.argmin(slack))
    S_N = float(_partial_sums(trace)[-1])
    aggregate = _make(LEMMA1_AGGREGATE, V[0] + delta * S_N - V[-1], V0=float(V[0]), VN=float(V[-1]), S_N=S_N)
    cert = _make(LEMMA1_STEPWISE, float(slack[k_worst]), worst_k=k_worst, aggregate=aggregate,
                 steps=int(trace.N))
    cert.holds = cert.holds and aggregate.holds
    return cert


def verify_linesearch(trace, oracle, setup):
    """Re-evaluate the acceptance inequality at every accepted step."""
    if trace.N == 0:
        raise DomainError("cannot certify an empty trace")
    worst = math.inf
    k_worst = -1
    for k in range(trace.N):
        z, w, z_next = trace.z[k], trace.w[k], trace.z[k + 1]
        excess = acceptance_excess(setup, z, w, z_next, oracle(z), oracle(w), trace.L[k], oracle.delta)
        if -excess < worst:
            worst, k_worst = -excess, k
    return _make("linesearch_acceptance", worst, worst_k=k_worst)


def verify_theorem1(trace, oracle, x_star, setup, fset):
    """Weighted-gap bound of the plain solve, plus its iteration count.

    Checks ``-(1/S_N) sum <g(w_k), x* - w_k> / L_{k+1} <= D / S_N`` with
    ``D = max_x V(x, z_0)``, that ``<g(x*), avg_w - x*>`` obeys the same
    bound, and (for epsilon-target runs) ``N <= ceil(2 L_obs D / epsilon)``.
    ``<g(x*), z_N - x*>`` is recorded as well.
    """
    if oracle.eval_exact is None:
        raise ConfigurationError("verify_theorem1 needs an exact oracle")
    if trace.N == 0:
        raise DomainError("cannot certify an empty trace")
    L = np.asarray(trace.L, dtype=float)
    S_N = float(np.sum(1.0 / L))
    inner = np.array([np.dot(oracle.exact(w), x_star - w) for w in trace.w])
    weighted = -float(np.sum(inner / L)) / S_N
    D = max_bregman_over_set(setup, fset, trace.z[0])
    bound = D / S_N
    weights = 1.0 / L
    avg_w = weights @ trace.w / weights.sum()
    g_star = oracle.exact(x_star)
    avg_gap = float(np.dot(g_star, avg_w - x_star))
    last_z_gap = float(np.dot(g_star, trace.z[-1] - x_star))
    margin = min(bound - weighted, bound - avg_gap)
    details = dict(weighted_gap=weighted, bound=bound, averaged_point_gap=avg_gap,
                   last_z_gap=last_z_gap, S_N=S_N, D=D, N=int(trace.N))
    itercount_ok = True
    if trace.epsilon is not None:
        L_obs = float(L.max())
        n_bound = math.ceil(2.0 * L_obs * D / trace.epsilon)
        itercount_ok = trace.N <= n_bound
        details.update(L_obs=L_obs, iteration_bound=n_bound)
    cert = _make(THEOREM1_RATE, margin, **details)
    cert.holds = cert.holds and itercount_ok
    return cert


def theorem2_accuracy_bound(mu, omega, L, delta, epsilon):
    return epsilon + (delta / mu) * (1.0 + 2.0 * omega * L / mu)


def theorem2_iteration_bound(mu, omega, L, R0_sq, epsilon, slack=2.0):
    return slack * math.ceil((2.0 * L * omega / mu) * math.log2(R0_sq / epsilon))


def verify_theorem2(state, x_star, mu, omega, L, delta, epsilon):
    """Final accuracy of the restarted solve and its total inner iteration count.

    Accuracy: ``V(x*, x_p) <= epsilon + (delta/mu)(1 + 2 omega L / mu)``.
    Iterations: ``total <= 2 ceil((2 L omega / mu) log2(R0^2 / epsilon))``,
    the factor 2 absorbing line-search overshoot. The iteration certificate
    sits under ``details["itercount"]``; ``holds`` requires both.
    """
    if not state.complete:
        raise DomainError("restart state has not terminated")
    setup = state.base_setup
    V_final = bregman(setup, x_star, state.final_point)
    bound = theorem2_accuracy_bound(mu, omega, L, delta, epsilon)
    R0_sq = state.radii_sq[0]
    total = state.total_inner
    if state.p == 0:
        n_bound = 0.0
    else:
        n_bound = theorem2_iteration_bound(mu, omega, L, R0_sq, epsilon)
    itercount = _make(THEOREM2_ITERCOUNT, n_bound - total, tolerance=0.0, total_inner=total,
                      iteration_bound=n_bound, stages=state.p)
    per_stage = [bregman(setup, x_star, c) for c in state.centers]
    cert = _make(THEOREM2_ACCURACY, bound - V_final, V_final=V_final, bound=bound,
                 stage_divergences=per_stage, itercount=itercount)
    cert.holds = cert.holds and itercount.holds
    return cert


def verify_halving(state, x_star, tol=TOL):
    """``V(x*, x_{p+1}) <= V(x*, x_p) / 2`` for every stage."""
    V = np.array([bregman(state.base_setup, x_star, c) for c in state.centers])
    if len(V) < 2:
        return _make("stage_halving", 0.0, tol)
    slack = V[:-1] / 2.0 - V[1:]
    return _make("stage_halving", float(slack.min()), tol, worst_stage=int(np.argmin(slack)),
                 divergences=V)


# ---------------------------------------------------------------------------
# Minty gap
# ---------------------------------------------------------------------------


GRID_CHUNK = 1 << 18


def grid_points(fset, resolution):
    """Yield chunks of a regular grid over a set of dimension <= 3."""
    if isinstance(fset, Product) or fset.dim > 3:
        raise DomainError("grid mode needs a ball, box or simplex of dimension <= 3; use sampled mode")
    if isinstance(fset, Simplex):
        # barycentric lattice on the first dim-1 coordinates
        m = max(1, int(round(1.0 / resolution)))
        axes = [np.arange(m + 1) / m] * (fset.dim - 1)
        lo, hi = None, None
    else:
        if isinstance(fset, Ball):
            lo, hi = fset.center - fset.radius, fset.center + fset.radius
        else:
            lo, hi = fset.lower, fset.upper
        axes = [np.linspace(a, b, max(2, int(math.ceil((b - a) / resolution)) + 1)) for a, b in zip(lo, hi)]
    if not axes:
        yield np.ones((1, 1))
        return
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    for start in range(0, total, GRID_CHUNK):
        idx = np.unravel_index(np.arange(start, min(start + GRID_CHUNK, total)), sizes)
        pts = np.stack([a[i] for a, i in zip(axes, idx)], axis=1)
        if isinstance(fset, Simplex):
            last = 1.0 - pts.sum(axis=1)
            keep = last >= -1e-12
            pts = np.hstack([pts[keep], np.maximum(last[keep], 0.0)[:, None]])
        elif isinstance(fset, Ball):
            pts = pts[np.linalg.norm(pts - fset.center, axis=1) <= fset.radius]
        if len(pts):
            yield pts


def minty_gap(oracle, fset, candidate, grid_resolution=None, n_samples=10**5, seed=0):
    """``max(0, max_x <g(x), candidate - x>)`` over a grid or a random sample.

    Grid mode (``grid_resolution`` given) works for sets of dimension at
    most 3; otherwise ``n_samples`` seeded random points are used. The exact
    operator is used when the oracle has one.
    """
    candidate = np.asarray(candidate, dtype=float)
    if grid_resolution is not None:
        if not grid_resolution > 0:
            raise DomainError("grid_resolution must be positive")
        chunks = grid_points(fset, grid_resolution)
    else:
        rng = np.random.default_rng(seed)
        chunks = (fset.sample(rng, min(GRID_CHUNK, n_samples - s)) for s in range(0, n_samples, GRID_CHUNK))
    best = 0.0
    for X in chunks:
        G = oracle.exact_rows(X)
        best = max(best, float(np.max(np.einsum("ij,ij->i", G, candidate - X))))
    return best


def minty_certificate(oracle, fset, candidate, tol, grid_resolution=None, n_samples=10**5, seed=0):
    gap = minty_gap(oracle, fset, candidate, grid_resolution, n_samples, seed)
    return _make(MINTY_GAP, tol - gap, 0.0, gap=gap, threshold=tol,
                 mode="grid" if grid_resolution is not None else "sampled")


class SampledGap:
    """Minty gap against a fixed point sample, cheap to evaluate per iterate."""

    def __init__(self, oracle, fset, n_samples, seed=0):
        self.X = fset.sample(np.random.default_rng(seed), n_samples)
        self.G = oracle.exact_rows(self.X)
        self._offset = np.einsum("ij,ij->i", self.G, self.X)

    def __call__(self, candidate):
        return max(0.0, float(np.max(self.G @ candidate - self._offset)))


def grid_solution(oracle, fset, resolution, step):
    """Brute-force VI solution: the grid point with the smallest natural residual.

    The residual is ``||x - P(x - step g(x))||`` with euclidean projection ``P``.
    """
    if not isinstance(fset, (Ball, Box)):
        raise ConfigurationError("grid_solution supports euclidean balls and boxes")
    best, best_r = None, math.inf
    for X in grid_points(fset, resolution):
        Y = X - step * oracle.exact_rows(X)
        if isinstance(fset, Ball):
            d = Y - fset.center
            r = np.linalg.norm(d, axis=1, keepdims=True)
            P = fset.center + d * np.minimum(1.0, fset.radius / np.maximum(r, 1e-300))
        else:
            P = np.clip(Y, fset.lower, fset.upper)
        res = np.linalg.norm(X - P, axis=1)
        j = int(np.argmin(res))
        if res[j] < best_r:
            best, best_r = X[j], float(res[j])
    return best
