"""Adaptive mirror prox with a doubling line search, and its restarted variant."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigurationError, DomainError, LineSearchError, StageError
from .geometry import as_vector, bregman, max_bregman_over_set, prox_map, rescale

EPSILON_TARGET = "epsilon_target"
SUM_THRESHOLD = "sum_threshold"

EXPLICIT_FORMULA = "explicit_formula"
RECURSIVE_HALVING = "recursive_halving"

MAX_LINESEARCH_ITERS = 60
MAX_OUTER_ITERS = 10**6


class RadiusClampWarning(UserWarning):
    """The radius update produced a non-positive value and was clamped."""


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------


@dataclass
class UmpConfig:
    epsilon: float
    L0: float
    z0: np.ndarray
    stop_mode: str = EPSILON_TARGET
    threshold: float | None = None
    max_outer_iters: int = MAX_OUTER_ITERS
    max_linesearch_iters: int = MAX_LINESEARCH_ITERS

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not self.L0 > 0:
            raise ConfigurationError("L0 must be positive")
        self.z0 = as_vector(self.z0, name="z0")
        if self.stop_mode not in (EPSILON_TARGET, SUM_THRESHOLD):
            raise ConfigurationError(f"unknown stop_mode {self.stop_mode!r}")
        if self.stop_mode == SUM_THRESHOLD and not (self.threshold is not None and self.threshold > 0):
            raise ConfigurationError("sum_threshold stop mode needs a positive threshold")
        if self.max_outer_iters < 1 or self.max_linesearch_iters < 0:
            raise ConfigurationError("iteration caps must be positive")


class LineSearchStep(NamedTuple):
    w: np.ndarray
    z_next: np.ndarray
    L_next: float
    i: int
    g_w: np.ndarray
    oracle_calls: int


def acceptance_excess(setup, z, w, z_next, g_z, g_w, L, delta):
    """Left minus right side of the line-search test; accepted iff ``<= 0``.

    The test ``<g(z), z+ - z> <= <g(w), z+ - w> + <g(z), w - z> + L (V(w, z) +
    V(z+, w)) + delta`` is evaluated in the equivalent form
    ``<g(w) - g(z), w - z+> <= L (V(w, z) + V(z+, w)) + delta``, which avoids
    cancelling large inner products near convergence.
    """
    lhs = np.dot(g_w - g_z, w - z_next)
    rhs = L * (bregman(setup, w, z) + bregman(setup, z_next, w)) + delta
    return float(lhs - rhs)


def line_search_step(oracle, setup, fset, z_k, L_k, delta, cap=MAX_LINESEARCH_ITERS, g_z=None):
    """One extragradient step with the smallest accepted ``L = 2^(i-1) L_k``.

    ``g_z`` may be passed in when ``g_delta(z_k)`` is already known; it is
    evaluated once per step and reused across trials.
    """
    calls = 0
    if g_z is None:
        g_z = oracle(z_k)
        calls += 1
    for i in range(cap + 1):
        L = math.ldexp(L_k, i - 1)
        w = prox_map(setup, fset, z_k, g_z, L)
        g_w = oracle(w)
        calls += 1
        z_next = prox_map(setup, fset, z_k, g_w, L)
        excess = acceptance_excess(setup, z_k, w, z_next, g_z, g_w, L, delta)
        if excess <= 0:
            return LineSearchStep(w, z_next, L, i, g_w, calls)
    raise LineSearchError(
        f"line search exceeded {cap} doublings (last L={L:g}, excess={excess:g}); "
        "declared L or delta does not match the oracle",
        z=z_k, w=w, z_next=z_next, L_trial=L, i=i, excess=excess,
    )


@dataclass
class UmpTrace:
    """Per-iteration record of one adaptive mirror prox run.

    Row ``k`` of ``w``, ``L``, ``i``, ``S`` belongs to iteration ``k``;
    ``z`` has one extra leading row for ``z_0``.
    """

    z: np.ndarray
    w: np.ndarray
    L: np.ndarray
    i: np.ndarray
    S: np.ndarray
    L0: float
    threshold: float
    epsilon: float | None
    converged: bool
    oracle_calls: int

    @property
    def N(self):
        return len(self.L)

    @property
    def last_z(self):
        return self.z[-1]

    @property
    def last_w(self):
        return self.w[-1] if self.N else None

    @property
    def averaged_w(self):
        if not self.N:
            return None
        weights = 1.0 / self.L
        return weights @ self.w / weights.sum()

    @property
    def S_N(self):
        return float(self.S[-1]) if self.N else 0.0

    @property
    def L_final(self):
        return float(self.L[-1]) if self.N else self.L0

    def records(self):
        for k in range(self.N):
            yield {"k": k, "i_k": int(self.i[k]), "L_next": float(self.L[k]), "S_k": float(self.S[k]),
                   "z_k": self.z[k], "w_k": self.w[k], "z_next": self.z[k + 1]}

    def to_dict(self):
        return {
            "z": self.z.tolist(), "w": self.w.tolist(), "L": self.L.tolist(),
            "i": self.i.tolist(), "S": self.S.tolist(), "L0": self.L0,
            "threshold": self.threshold, "epsilon": self.epsilon,
            "converged": self.converged, "oracle_calls": self.oracle_calls,
        }

    @classmethod
    def from_dict(cls, d):
        n = len(d["z"][0])
        return cls(
            z=np.asarray(d["z"], dtype=float), w=np.asarray(d["w"], dtype=float).reshape(-1, n),
            L=np.asarray(d["L"], dtype=float), i=np.asarray(d["i"], dtype=int),
            S=np.asarray(d["S"], dtype=float), L0=float(d["L0"]), threshold=float(d["threshold"]),
            epsilon=d["epsilon"], converged=bool(d["converged"]), oracle_calls=int(d["oracle_calls"]),
        )


def ump_solve(oracle, setup, fset, config):
    """Run adaptive mirror prox until ``S_N`` reaches the stop threshold.

    With ``epsilon_target`` the threshold is ``max_x V(x, z_0) / epsilon``.
    Hitting ``max_outer_iters`` first returns the trace with
    ``converged=False``.
    """
    z = config.z0
    if not fset.contains(z):
        raise DomainError("z0 is not feasible")
    if config.stop_mode == EPSILON_TARGET:
        threshold = max_bregman_over_set(setup, fset, z) / config.epsilon
    else:
        threshold = float(config.threshold)

    zs, ws, Ls, its, Ss = [z], [], [], [], []
    L, S, calls = float(config.L0), 0.0, 0
    converged = False
    for _ in range(config.max_outer_iters):
        step = line_search_step(oracle, setup, fset, z, L, oracle.delta,
                                cap=config.max_linesearch_iters)
        calls += step.oracle_calls
        L = step.L_next
        S += 1.0 / L
        z = step.z_next
        zs.append(z)
        ws.append(step.w)
        Ls.append(L)
        its.append(step.i)
        Ss.append(S)
        if S >= threshold:
            converged = True
            break

    dim = config.z0.size
    return UmpTrace(
        z=np.array(zs), w=np.array(ws).reshape(-1, dim), L=np.array(Ls), i=np.array(its, dtype=int),
        S=np.array(Ss), L0=float(config.L0), threshold=threshold,
        epsilon=config.epsilon if config.stop_mode == EPSILON_TARGET else None,
        converged=converged, oracle_calls=calls,
    )


# ---------------------------------------------------------------------------
# Restarts
# ---------------------------------------------------------------------------


@dataclass
class RestartConfig:
    """Settings for the restarted solver.

    ``R0_sq`` must bound ``V(x_*, x0)``.
    """

    epsilon: float
    mu: float
    omega: float
    x0: np.ndarray
    R0_sq: float
    L0: float
    radius_rule: str = RECURSIVE_HALVING
    max_outer_iters: int = MAX_OUTER_ITERS
    max_linesearch_iters: int = MAX_LINESEARCH_ITERS

    def __post_init__(self):
        for name in ("epsilon", "mu", "omega", "R0_sq", "L0"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.radius_rule not in (EXPLICIT_FORMULA, RECURSIVE_HALVING):
            raise ConfigurationError(f"unknown radius_rule {self.radius_rule!r}")
        self.x0 = as_vector(self.x0, name="x0")

    @property
    def stage_limit(self):
        """Stages run while ``p <= log2(2 R0^2 / epsilon)``."""
        return math.log2(2.0 * self.R0_sq / self.epsilon)

    @property
    def max_stages(self):
        limit = self.stage_limit
        return 0 if limit < 0 else math.floor(limit) + 1


@dataclass
class RestartState:
    config: RestartConfig
    base_setup: object
    centers: list = field(default_factory=list)
    radii_sq: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    raw_radii_sq: list = field(default_factory=list)

    @property
    def p(self):
        return len(self.traces)

    @property
    def final_point(self):
        return self.centers[-1]

    @property
    def inner_counts(self):
        return [t.N for t in self.traces]

    @property
    def total_inner(self):
        return sum(self.inner_counts)

    @property
    def complete(self):
        return self.p == self.config.max_stages

    def to_dict(self):
        cfg = self.config
        return {
            "epsilon": cfg.epsilon, "mu": cfg.mu, "omega": cfg.omega, "R0_sq": cfg.R0_sq,
            "L0": cfg.L0, "radius_rule": cfg.radius_rule,
            "stages": [
                {"p": p, "center": self.centers[p].tolist(), "R_sq": self.radii_sq[p],
                 "N_p": t.N, "S_Np": t.S_N, "L_final": t.L_final,
                 "R_next_sq_raw": self.raw_radii_sq[p], "clamped": self.clamped[p]}
                for p, t in enumerate(self.traces)
            ],
            "final_point": self.final_point.tolist(),
            "final_R_sq": self.radii_sq[-1],
            "total_inner_iterations": self.total_inner,
            "stage_count": self.p,
        }


def next_radius_sq(config, p, R_sq, S_N, delta, L):
    """Unclamped radius for stage ``p + 1``."""
    mu, omega = config.mu, config.omega
    if config.radius_rule == EXPLICIT_FORMULA:
        return omega * config.R0_sq / (2.0 ** (p + 1) * mu * S_N) - delta / mu
    return R_sq / 2.0 + (delta / mu) * (1.0 + 2.0 * omega * L / mu)


def restart_solve(oracle, base_setup, fset, config):
    """Restarted mirror prox.

    Each stage runs :func:`ump_solve` from the current center with the
    prox setup recentered there and stops once ``S_N >= omega / mu``; the
    last ``w`` becomes the next center. Radii are clamped below at
    ``epsilon / 2``.
    """
    if not fset.contains(config.x0):
        raise DomainError("x0 is not feasible")
    state = RestartState(config, base_setup, centers=[config.x0], radii_sq=[float(config.R0_sq)])
    x, R_sq, L = config.x0, float(config.R0_sq), float(config.L0)
    p = 0
    while p <= config.stage_limit:
        setup_p = rescale(base_setup, x, R_sq)
        inner = UmpConfig(config.epsilon, L, x, SUM_THRESHOLD, config.omega / config.mu,
                          config.max_outer_iters, config.max_linesearch_iters)
        try:
            trace = ump_solve(oracle, setup_p, fset, inner)
        except LineSearchError as exc:
            raise StageError(f"stage {p}: {exc}", stage=p, state=state) from exc
        if not trace.converged:
            raise StageError(f"stage {p}: inner solve did not reach S_N >= omega/mu",
                             stage=p, state=state, trace=trace)
        raw = next_radius_sq(config, p, R_sq, trace.S_N, oracle.delta, oracle.L_rel)
        if raw <= 0:
            warnings.warn(f"stage {p}: radius update gave R^2 = {raw:g} <= 0, clamped to epsilon/2",
                          RadiusClampWarning, stacklevel=2)
        R_sq = max(raw, config.epsilon / 2.0)
        x, L = trace.last_w, trace.L_final
        state.traces.append(trace)
        state.centers.append(x)
        state.radii_sq.append(R_sq)
        state.raw_radii_sq.append(raw)
        state.clamped.append(raw < config.epsilon / 2.0)
        p += 1
    return state
