"""Operator oracles and empirical checkers for the three operator assumptions.

The checked inequalities, for sampled feasible points and the declared
constants ``(delta, mu, L)``:

* inexactness: ``<g(y), x - y> <= <g_delta(y), x - y> + delta``
* relative strong monotonicity:
  ``<g_delta(y), x - y> + <g_delta(x), y - x> + mu V(x, y) <= delta``
* relative smoothness:
  ``<g_delta(y) - g_delta(z), x - z> <= L V(x, z) + L V(z, y) + delta``

Each checker reports the largest left-minus-right value seen, so a positive
``max_violation`` means the declared constants are wrong.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .geometry import bregman, default_setup, dual_norm, set_diameter

VIOLATION_TOL = 1e-9

INEXACTNESS = "inexactness"
REL_STRONG_MONOTONICITY = "rel_strong_monotonicity"
REL_SMOOTHNESS = "rel_smoothness"


@dataclass(frozen=True)
class OperatorOracle:
    """An operator ``g_delta`` with its declared constants.

    ``eval_exact`` is optional and only needed by verification code.
    ``vectorized`` declares that ``eval_exact`` maps a stack of points
    (one per row) to the stack of their images.
    """

    eval_inexact: Callable[[np.ndarray], np.ndarray]
    eval_exact: Callable[[np.ndarray], np.ndarray] | None = None
    delta: float = 0.0
    mu: float = 0.0
    L_rel: float = 1.0
    vectorized: bool = False

    def __post_init__(self):
        if self.delta < 0 or self.mu < 0:
            raise ConfigurationError("delta and mu must be non-negative")
        if not self.L_rel > 0:
            raise ConfigurationError("L_rel must be positive")

    def __call__(self, x):
        return self.eval_inexact(x)

    def exact(self, x):
        if self.eval_exact is None:
            raise ConfigurationError("oracle has no exact evaluation")
        return self.eval_exact(x)

    def exact_rows(self, X):
        """Exact (else inexact) operator applied to each row of ``X``."""
        if self.eval_exact is not None and self.vectorized:
            return np.asarray(self.eval_exact(X), dtype=float)
        g = self.eval_exact if self.eval_exact is not None else self.eval_inexact
        return np.array([g(x) for x in X])


def exact_oracle(g, mu=0.0, L_rel=1.0):
    """Wrap an exactly known operator (``g_delta = g``, ``delta = 0``)."""
    return OperatorOracle(g, g, 0.0, mu, L_rel)


@dataclass
class PropertyReport:
    property: str
    samples_checked: int
    max_violation: float
    worst_witness: tuple

    @property
    def holds(self):
        return self.max_violation <= VIOLATION_TOL

    def to_dict(self):
        return {
            "property": self.property,
            "samples_checked": self.samples_checked,
            "max_violation": self.max_violation,
            "holds": self.holds,
            "worst_witness": [np.asarray(v).tolist() for v in self.worst_witness],
        }


# ---------------------------------------------------------------------------
# Pointwise gaps
# ---------------------------------------------------------------------------


def inexactness_gap(oracle, x, y):
    gy = oracle.exact(y)
    return float(np.dot(gy - oracle(y), x - y) - oracle.delta)


def monotonicity_gap(oracle, setup, x, y):
    return float(np.dot(oracle(y), x - y) + np.dot(oracle(x), y - x)
                 + oracle.mu * bregman(setup, x, y) - oracle.delta)


def smoothness_gap(oracle, setup, x, y, z):
    L = oracle.L_rel
    return float(np.dot(oracle(y) - oracle(z), x - z)
                 - L * bregman(setup, x, z) - L * bregman(setup, z, y) - oracle.delta)


def _check_samples(n_samples):
    if int(n_samples) != n_samples or n_samples < 1:
        raise DomainError(f"n_samples must be a positive integer, got {n_samples}")
    return int(n_samples)


def _worst(property_name, values, witnesses):
    j = int(np.argmax(values))
    return PropertyReport(property_name, len(values), float(values[j]), witnesses(j))


def check_inexactness(oracle, fset, n_samples, seed):
    n = _check_samples(n_samples)
    if oracle.eval_exact is None:
        raise ConfigurationError("check_inexactness needs an exact oracle")
    rng = np.random.default_rng(seed)
    X = fset.sample(rng, n)
    Y = fset.sample(rng, n)
    vals = np.array([inexactness_gap(oracle, x, y) for x, y in zip(X, Y)])
    return _worst(INEXACTNESS, vals, lambda j: (X[j], Y[j]))


def check_rel_strong_monotonicity(oracle, setup, fset, n_samples, seed):
    n = _check_samples(n_samples)
    rng = np.random.default_rng(seed)
    X = fset.sample(rng, n)
    Y = fset.sample(rng, n)
    vals = np.array([monotonicity_gap(oracle, setup, x, y) for x, y in zip(X, Y)])
    return _worst(REL_STRONG_MONOTONICITY, vals, lambda j: (X[j], Y[j]))


def check_rel_smoothness(oracle, setup, fset, n_samples, seed):
    """Sample triples; every third one has ``x = y``, the tight direction for linear maps."""
    n = _check_samples(n_samples)
    rng = np.random.default_rng(seed)
    X = fset.sample(rng, n)
    Y = fset.sample(rng, n)
    Z = fset.sample(rng, n)
    Y[::3] = X[::3]
    vals = np.array([smoothness_gap(oracle, setup, x, y, z) for x, y, z in zip(X, Y, Z)])
    return _worst(REL_SMOOTHNESS, vals, lambda j: (X[j], Y[j], Z[j]))


def check_all(oracle, setup, fset, n_samples, seed):
    """Run every applicable checker; inexactness only when an exact oracle exists."""
    reports = []
    if oracle.eval_exact is not None:
        reports.append(check_inexactness(oracle, fset, n_samples, seed))
    reports.append(check_rel_strong_monotonicity(oracle, setup, fset, n_samples, seed + 1))
    reports.append(check_rel_smoothness(oracle, setup, fset, n_samples, seed + 2))
    return reports


# ---------------------------------------------------------------------------
# Inexactness wrapper
# ---------------------------------------------------------------------------


def _point_rng(x, seed):
    digest = hashlib.blake2b(np.ascontiguousarray(x, dtype=float).tobytes(), digest_size=16).digest()
    words = np.frombuffer(digest, dtype=np.uint64)
    return np.random.default_rng([int(seed), *(int(w) for w in words)])


def noise_vector(x, seed, size, setup):
    """Deterministic pseudo-random direction of unit dual norm, keyed on ``x`` and ``seed``."""
    v = _point_rng(x, seed).standard_normal(size)
    return v / dual_norm(setup, v)


def make_inexact(oracle, delta, fset, noise_seed, setup=None):
    """Return ``g_delta(x) = g(x) + zeta(x)`` with ``||zeta(x)||_* = delta / diam(fset)``.

    By Hoelder, ``|<zeta, x - y>| <= delta`` for feasible ``x, y``, so the
    wrapped oracle satisfies the inexactness inequality with this ``delta``.
    """
    if oracle.eval_exact is None:
        raise ConfigurationError("make_inexact needs an exact oracle")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    setup = default_setup(fset) if setup is None else setup
    diam = set_diameter(fset, setup)
    if not (np.isfinite(diam) and diam > 0):
        raise ConfigurationError("make_inexact needs a bounded set with positive diameter")
    magnitude = delta / diam
    g = oracle.eval_exact
    dim = fset.dim

    def g_delta(x):
        x = np.asarray(x, dtype=float)
        return g(x) + magnitude * noise_vector(x, noise_seed, dim, setup)

    return replace(oracle, eval_inexact=g_delta, delta=float(delta))
