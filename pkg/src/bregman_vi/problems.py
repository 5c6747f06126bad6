"""Bundled problem families with certified constants and reference solutions.

Problem files are JSON objects::

    {"family": "affine_vi", "matrix": [[...], ...], "b": [...],
     "set": {"type": "ball", "center": [...], "radius": 1.0},
     "delta": 0.0, "seed": 0}

    {"family": "regularized_bilinear_saddle", "matrix": [[...]], "mu_reg": 0.1,
     "delta": 0.0, "seed": 0}

``matrix`` is row-major (a list of rows). Optional fields: ``name``, ``x0``
and ``L``/``mu`` overrides of the declared constants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .exceptions import ConfigurationError, DomainError
from .geometry import (Ball, Box, Product, Simplex, as_vector, default_setup, entropy_setup,
                       prox_gradient, product_setup)
from .oracle import OperatorOracle, make_inexact

AFFINE_VI = "affine_vi"
BILINEAR_SADDLE = "regularized_bilinear_saddle"


class ProblemFileError(ValueError):
    """A problem file is malformed; the message names the offending field."""


@dataclass(frozen=True)
class ProblemInstance:
    oracle: OperatorOracle
    set: object
    setup: object
    x_star: np.ndarray | None
    provenance: str
    family: str = ""
    params: dict = field(default_factory=dict)

    @property
    def mu(self):
        return self.oracle.mu

    @property
    def L(self):
        return self.oracle.L_rel

    @property
    def delta(self):
        return self.oracle.delta

    def with_constants(self, mu=None, L=None):
        oracle = replace(self.oracle,
                         mu=self.oracle.mu if mu is None else float(mu),
                         L_rel=self.oracle.L_rel if L is None else float(L))
        return replace(self, oracle=oracle)


# ---------------------------------------------------------------------------
# Reference solutions
# ---------------------------------------------------------------------------


def projected_fixed_point(g, fset, mu, L, x0=None, tol=1e-12, max_iter=10**6):
    """Solve the VI for a strongly monotone Lipschitz ``g`` by ``x <- P(x - gamma g(x))``.

    With ``gamma = mu / L^2`` the map contracts with factor
    ``q = sqrt(1 - mu^2 / L^2)``; iteration stops once the step bounds the
    distance to the solution by ``tol``.
    """
    gamma = mu / L**2
    q = np.sqrt(max(1.0 - (mu / L) ** 2, 0.0))
    x = fset.default_point() if x0 is None else np.asarray(x0, dtype=float)
    for _ in range(max_iter):
        x_new = fset.project(x - gamma * g(x))
        step = np.linalg.norm(x_new - x)
        x = x_new
        if step * q / (1.0 - q) <= tol:
            return x
    raise RuntimeError("projected fixed-point iteration did not converge")


def _softmax(s):
    s = s - s.max()
    e = np.exp(s)
    return e / e.sum()


def entropic_equilibrium(M, mu_reg, tol=1e-10):
    """Solve ``x = softmax(-M^T y / mu)``, ``y = softmax(M x / mu)`` by a root finder.

    Those are the interior optimality conditions of the entropy-regularized
    game, whose solution is unique.
    """
    m, n = M.shape

    def residual(v):
        x, y = v[:n], v[n:]
        return np.concatenate([x - _softmax(-M.T @ y / mu_reg), y - _softmax(M @ x / mu_reg)])

    v = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    sol = optimize.root(residual, v, method="hybr", options={"xtol": 1e-15})
    v = sol.x
    for _ in range(10):
        # polish with the exact map; contractive near the solution only if the
        # root finder got there, hence the residual check below
        x, y = v[:n], v[n:]
        if np.max(np.abs(residual(v))) <= tol * 1e-2:
            break
        v = np.concatenate([_softmax(-M.T @ y / mu_reg), _softmax(M @ x / mu_reg)])
    res = float(np.max(np.abs(residual(v))))
    if not res <= tol:
        raise RuntimeError(f"equilibrium solve stalled at residual {res:g}")
    return v


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def affine_vi(A, b, fset, seed=0):
    """``g(x) = A x + b`` over a ball, box or product of those, euclidean setup.

    ``mu`` is the smallest eigenvalue of the symmetric part (V is half the
    squared distance) and ``L`` the spectral norm of ``A``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = as_vector(b, name="b")
    n = b.size
    if A.shape != (n, n):
        raise DomainError(f"A must be {n}x{n}, got {A.shape}")
    if fset.dim != n:
        raise DomainError(f"set dimension {fset.dim} does not match b ({n})")
    blocks = fset.blocks if isinstance(fset, Product) else (fset,)
    if not all(isinstance(s, (Ball, Box)) for s in blocks):
        raise ConfigurationError("affine_vi supports balls, boxes and products of those")
    sym = 0.5 * (A + A.T)
    mu = float(np.linalg.eigvalsh(sym)[0])
    if not mu > 0:
        raise DomainError("symmetric part of A is not positive definite")
    L = float(np.linalg.norm(A, 2))

    def g(x):
        # row-vector form so a stack of points evaluates in one call
        return x @ A.T + b

    x_star = projected_fixed_point(g, fset, mu, L)
    setup = default_setup(fset)
    return ProblemInstance(
        oracle=OperatorOracle(g, g, 0.0, mu, L, vectorized=True), set=fset, setup=setup, x_star=x_star,
        provenance=(f"affine operator, mu = lambda_min(sym A) = {mu:.6g}, L = ||A||_2 = {L:.6g}; "
                    "x_star by projected fixed-point iteration with step mu/L^2"),
        family=AFFINE_VI, params={"A": A, "b": b, "seed": seed},
    )


def regularized_bilinear_saddle(M, mu_reg):
    """Entropy-regularized matrix game over ``Simplex(n) x Simplex(m)``.

    ``g(x, y) = (M^T y + mu grad d(x), -M x + mu grad d(y))`` for an ``m x n``
    payoff ``M``. ``mu = mu_reg``; ``L = max |M_ij| + mu_reg``, where the
    bilinear part is bounded by Hoelder and Pinsker and the entropy part by
    the three-point identity of the Bregman divergence.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not mu_reg > 0:
        raise DomainError("mu_reg must be positive")
    if not np.all(np.isfinite(M)):
        raise DomainError("payoff matrix has non-finite entries")
    m, n = M.shape
    fset = Product((Simplex(n), Simplex(m)))
    setup = product_setup([entropy_setup(n), entropy_setup(m)], (n, m))
    base_x, base_y = entropy_setup(n), entropy_setup(m)
    mu_reg = float(mu_reg)

    def g(v):
        x, y = v[..., :n], v[..., n:]
        return np.concatenate([y @ M + mu_reg * prox_gradient(base_x, x),
                               -(x @ M.T) + mu_reg * prox_gradient(base_y, y)], axis=-1)

    L = float(np.abs(M).max() + mu_reg)
    x_star = entropic_equilibrium(M, mu_reg)
    return ProblemInstance(
        oracle=OperatorOracle(g, g, 0.0, mu_reg, L, vectorized=True), set=fset, setup=setup, x_star=x_star,
        provenance=(f"entropy-regularized game, mu = mu_reg = {mu_reg:g}, "
                    f"L = max|M| + mu_reg = {L:.6g}; x_star from the softmax fixed-point "
                    "equations solved by scipy.optimize.root"),
        family=BILINEAR_SADDLE, params={"M": M, "mu_reg": mu_reg},
    )


def perturbed(problem, delta, seed):
    """Wrap the oracle with a deterministic ``delta``-inexact perturbation."""
    if delta == 0:
        return problem
    oracle = make_inexact(problem.oracle, delta, problem.set, seed, setup=problem.setup)
    params = dict(problem.params, delta=float(delta), noise_seed=int(seed))
    return replace(problem, oracle=oracle, params=params,
                   provenance=problem.provenance + f"; delta={delta:g} perturbation (seed {seed})")


# ---------------------------------------------------------------------------
# Random instances and bundled set
# ---------------------------------------------------------------------------


def random_affine_matrix(n, seed, eig_range=(1.0, 3.0), skew=0.5):
    """``Q diag(eigs) Q^T`` plus a skew part of spectral norm ``skew``."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = rng.uniform(*eig_range, n)
    S = (Q * eigs) @ Q.T
    K = rng.standard_normal((n, n))
    K = K - K.T
    if skew > 0 and n > 1:
        K *= skew / np.linalg.norm(K, 2)
    else:
        K[:] = 0.0
    return S + K


def random_affine_definition(n, seed, target_norm=0.6, name=None):
    """Problem-file dict for a random affine VI on the unit ball.

    ``b`` is chosen so that ``A x + b`` vanishes at a point of norm
    ``target_norm``; a value above 1 pushes the solution onto the sphere.
    """
    rng = np.random.default_rng(seed + 10_000)
    A = random_affine_matrix(n, seed)
    t = rng.standard_normal(n)
    t *= target_norm / np.linalg.norm(t)
    b = -A @ t
    return {
        "name": name or f"affine_ball_{n}",
        "family": AFFINE_VI, "matrix": A.tolist(), "b": b.tolist(),
        "set": {"type": "ball", "center": [0.0] * n, "radius": 1.0},
        "delta": 0.0, "seed": seed,
    }


def bundled_definitions():
    """Problem-file dicts for the bundled instances, keyed by name."""
    definitions = [
        {"name": "affine_ball_2_identity", "family": AFFINE_VI, "matrix": [[1.0, 0.0], [0.0, 1.0]],
         "b": [-0.5, 0.0], "set": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
         "delta": 0.0, "seed": 0},
        {"name": "affine_ball_2_boundary", "family": AFFINE_VI, "matrix": [[1.0, 0.0], [0.0, 1.0]],
         "b": [-3.0, 0.0], "set": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
         "delta": 0.0, "seed": 0},
        random_affine_definition(2, seed=2),
        random_affine_definition(10, seed=10),
        random_affine_definition(50, seed=50),
        random_affine_definition(2, seed=3, target_norm=1.5, name="affine_ball_2_rotated_boundary"),
        {"name": "affine_box_2", "family": AFFINE_VI,
         "matrix": random_affine_matrix(2, 7).tolist(), "b": [1.5, -0.2],
         "set": {"type": "box", "lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
         "delta": 0.0, "seed": 7},
        {"name": "affine_product_4", "family": AFFINE_VI,
         "matrix": random_affine_matrix(4, 8).tolist(), "b": [0.3, -0.9, 0.4, 0.1],
         "set": {"type": "product", "blocks": [
             {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
             {"type": "box", "lower": [0.0, 0.0], "upper": [1.0, 1.0]}]},
         "delta": 0.0, "seed": 8},
        {"name": "saddle_matching_pennies", "family": BILINEAR_SADDLE,
         "matrix": [[1.0, -1.0], [-1.0, 1.0]], "mu_reg": 0.1, "delta": 0.0, "seed": 0,
         "x0": [0.8, 0.2, 0.3, 0.7]},
        {"name": "saddle_random_3x4", "family": BILINEAR_SADDLE,
         "matrix": np.random.default_rng(34).uniform(-1, 1, (3, 4)).round(3).tolist(),
         "mu_reg": 0.2, "delta": 0.0, "seed": 0,
         "x0": [0.1, 0.2, 0.3, 0.4, 0.6, 0.3, 0.1]},
    ]
    return {s["name"]: s for s in definitions}


def bundled_problems(names=None):
    definitions = bundled_definitions()
    names = list(definitions) if names is None else names
    return {name: problem_from_dict(definitions[name]) for name in names}


# ---------------------------------------------------------------------------
# Problem files
# ---------------------------------------------------------------------------


def _field(d, key, where="problem"):
    if key not in d:
        raise ProblemFileError(f"{where}: missing field '{key}'")
    return d[key]


def _vector_field(d, key, where="problem"):
    value = _field(d, key, where)
    try:
        return as_vector(value, name=key)
    except (DomainError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"{where}: field '{key}': {exc}") from None


def _matrix_field(d, key="matrix"):
    value = _field(d, key)
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"problem: field '{key}' is not a numeric matrix: {exc}") from None
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise ProblemFileError(f"problem: field '{key}' must be a finite row-major matrix (list of rows)")
    return M


def set_from_dict(d, where="set"):
    if not isinstance(d, dict):
        raise ProblemFileError(f"{where}: set descriptor must be an object")
    kind = _field(d, "type", where)
    try:
        if kind == "ball":
            return Ball(_vector_field(d, "center", where), float(_field(d, "radius", where)))
        if kind == "box":
            return Box(_vector_field(d, "lower", where), _vector_field(d, "upper", where))
        if kind == "simplex":
            return Simplex(_field(d, "dim", where))
        if kind == "product":
            blocks = _field(d, "blocks", where)
            return Product(tuple(set_from_dict(b, f"{where}.blocks[{j}]") for j, b in enumerate(blocks)))
    except DomainError as exc:
        raise ProblemFileError(f"{where}: {exc}") from None
    raise ProblemFileError(f"{where}: field 'type' must be one of ball, box, simplex, product; got {kind!r}")


def set_to_dict(fset):
    if isinstance(fset, Ball):
        return {"type": "ball", "center": fset.center.tolist(), "radius": fset.radius}
    if isinstance(fset, Box):
        return {"type": "box", "lower": fset.lower.tolist(), "upper": fset.upper.tolist()}
    if isinstance(fset, Simplex):
        return {"type": "simplex", "dim": fset.dim}
    return {"type": "product", "blocks": [set_to_dict(b) for b in fset.blocks]}


def problem_from_dict(desc):
    """Build a :class:`ProblemInstance` from a problem-file dict."""
    if not isinstance(desc, dict):
        raise ProblemFileError("problem: top level must be a JSON object")
    family = _field(desc, "family")
    delta = float(desc.get("delta", 0.0))
    seed = int(desc.get("seed", 0))
    if delta < 0:
        raise ProblemFileError("problem: field 'delta' must be non-negative")
    try:
        if family == AFFINE_VI:
            problem = affine_vi(_matrix_field(desc), _vector_field(desc, "b"),
                                set_from_dict(_field(desc, "set")), seed=seed)
        elif family == BILINEAR_SADDLE:
            mu_reg = _field(desc, "mu_reg")
            if not isinstance(mu_reg, (int, float)) or not mu_reg > 0:
                raise ProblemFileError("problem: field 'mu_reg' must be a positive number")
            problem = regularized_bilinear_saddle(_matrix_field(desc), float(mu_reg))
        else:
            raise ProblemFileError(f"problem: field 'family' must be {AFFINE_VI!r} or {BILINEAR_SADDLE!r}")
    except (DomainError, ConfigurationError) as exc:
        raise ProblemFileError(f"problem: {exc}") from None
    if "mu" in desc or "L" in desc:
        problem = problem.with_constants(mu=desc.get("mu"), L=desc.get("L"))
    problem = perturbed(problem, delta, seed)
    if "x0" in desc:
        x0 = _vector_field(desc, "x0")
        if x0.size != problem.set.dim or not problem.set.contains(x0):
            raise ProblemFileError("problem: field 'x0' is not a feasible point")
        problem = replace(problem, params=dict(problem.params, x0=x0))
    return replace(problem, params=dict(problem.params, name=desc.get("name", "")))


def read_problem_file(path):
    """Parse a problem file into a dict without building the instance."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_problem(path):
    """Read a JSON problem file; malformed input raises :class:`ProblemFileError`."""
    return problem_from_dict(read_problem_file(path))


def start_point(problem):
    """``x0`` from the problem file, else a canonical interior point of the set."""
    x0 = problem.params.get("x0")
    return problem.set.default_point() if x0 is None else np.asarray(x0, dtype=float)
