"""Feasible sets, prox setups, Bregman divergences and closed-form prox-mappings.

Supported (setup, set) pairs:

* euclidean prox ``d(x) = 1/2 ||x||^2`` over a :class:`Ball` or a :class:`Box`
* negative entropy ``d(x) = sum x_i ln x_i + ln n`` over a :class:`Simplex`
* any of the above componentwise over a :class:`Product`

The euclidean kind pairs the l2 norm with itself, the entropy kind pairs the
l1 norm with l-infinity. A product setup uses ``sqrt(sum ||x_i||^2)`` over
its blocks, under which the summed prox function stays 1-strongly convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DomainError

ENTROPY_FLOOR = 1e-300
SIMPLEX_TOL = 1e-12

EUCLIDEAN = "euclidean"
ENTROPY = "entropy"
PRODUCT = "product"


def as_vector(x, dim=None, name="x"):
    """Return ``x`` as a finite 1-D float array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise DomainError(f"{name} has dimension {v.size}, expected {dim}")
    return v


# ---------------------------------------------------------------------------
# Feasible sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, name="center"))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise DomainError(f"ball radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def contains(self, x, tol=1e-12):
        return bool(np.linalg.norm(np.asarray(x) - self.center) <= self.radius + tol)

    def project(self, x):
        d = x - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return np.array(x, dtype=float)
        return self.center + d * (self.radius / r)

    def sample(self, rng, size):
        # uniform in the ball: gaussian direction, radius * U^(1/n)
        g = rng.standard_normal((size, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.random(size) ** (1.0 / self.dim)
        return self.center + g * r[:, None]

    def default_point(self):
        return self.center.copy()


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lower, name="lower")
        hi = as_vector(self.upper, dim=lo.size, name="upper")
        if np.any(lo > hi):
            raise DomainError("box requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    def contains(self, x, tol=1e-12):
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng, size):
        return self.lower + (self.upper - self.lower) * rng.random((size, self.dim))

    def default_point(self):
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True, eq=False)
class Simplex:
    """Probability simplex ``{x >= 0, sum x = 1}`` in ``dim`` coordinates."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"simplex dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    def contains(self, x, tol=SIMPLEX_TOL):
        x = np.asarray(x)
        return bool(x.size == self.dim and np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)

    def sample(self, rng, size):
        return rng.dirichlet(np.ones(self.dim), size)

    def default_point(self):
        return np.full(self.dim, 1.0 / self.dim)


@dataclass(frozen=True, eq=False)
class Product:
    """Cartesian product of feasible sets, coordinates concatenated."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise DomainError("product needs at least one block")
        object.__setattr__(self, "blocks", blocks)

    @property
    def sizes(self):
        return tuple(b.dim for b in self.blocks)

    @property
    def dim(self):
        return sum(self.sizes)

    def split(self, x):
        return np.split(np.asarray(x), np.cumsum(self.sizes)[:-1])

    def contains(self, x, tol=1e-12):
        x = np.asarray(x)
        if x.size != self.dim:
            return False
        return all(b.contains(xi, tol) for b, xi in zip(self.blocks, self.split(x)))

    def project(self, x):
        return np.concatenate([b.project(xi) for b, xi in zip(self.blocks, self.split(x))])

    def sample(self, rng, size):
        return np.hstack([b.sample(rng, size) for b in self.blocks])

    def default_point(self):
        return np.concatenate([b.default_point() for b in self.blocks])


FeasibleSet = Ball | Box | Simplex | Product


# ---------------------------------------------------------------------------
# Prox setups
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProxSetup:
    """A prox function together with its norm pairing.

    ``center``/``scale`` describe the restart-time variant
    ``d_p(x) = R^2 d((x - c) / R)``; ``center=None`` is the origin-centered
    base setup. Entropy setups are only ever recentered (``scale`` stays 1),
    since rescaling would leave the entropy domain. ``omega`` bounds ``2 d``
    on the unit ball around the center.
    """

    kind: str
    omega: float
    center: np.ndarray | None = None
    scale: float = 1.0
    blocks: tuple = field(default_factory=tuple)
    sizes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, ENTROPY, PRODUCT):
            raise ConfigurationError(f"unknown prox kind {self.kind!r}")
        if not self.omega > 0:
            raise ConfigurationError("omega must be positive")
        if self.kind == PRODUCT and len(self.blocks) != len(self.sizes):
            raise ConfigurationError("product setup needs one size per block")

    @property
    def is_base(self):
        if self.kind == PRODUCT:
            return all(b.is_base for b in self.blocks)
        return self.center is None and self.scale == 1.0

    def split(self, x):
        return np.split(np.asarray(x), np.cumsum(self.sizes)[:-1])


def euclidean_setup():
    """Base setup ``d(x) = 1/2 ||x||_2^2``, for which ``omega = 1``."""
    return ProxSetup(EUCLIDEAN, omega=1.0)


def entropy_setup(n):
    """Base entropy setup on the ``n``-simplex, ``omega = 2 ln n``."""
    omega = 2.0 * math.log(n) if n > 1 else 1.0
    return ProxSetup(ENTROPY, omega=omega)


def product_setup(blocks, sizes):
    blocks = tuple(blocks)
    return ProxSetup(PRODUCT, omega=sum(b.omega for b in blocks), blocks=blocks,
                     sizes=tuple(int(s) for s in sizes))


def default_setup(fset):
    """The natural setup for a set: entropy on simplices, euclidean otherwise."""
    if isinstance(fset, Simplex):
        return entropy_setup(fset.dim)
    if isinstance(fset, Product):
        return product_setup([default_setup(b) for b in fset.blocks], fset.sizes)
    return euclidean_setup()


def _check_entropy_point(x, name="x"):
    if np.any(x < ENTROPY_FLOOR):
        raise DomainError(f"entropy setup needs {name} with coordinates >= {ENTROPY_FLOOR:g}")


def _xlogx(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def _kl_terms(y, x):
    """``y ln(y/x) - y + x`` computed as ``x h(y/x - 1)``, stable when ``y ~ x``."""
    r = (y - x) / x
    small = np.abs(r) < 1e-2
    h = np.empty_like(r)
    rs = r[small]
    # (1 + r) log1p(r) - r = r^2/2 - r^3/6 + r^4/12 - r^5/20 + r^6/30 - r^7/42 + ...
    h[small] = rs * rs * (0.5 + rs * (-1 / 6 + rs * (1 / 12 + rs * (-1 / 20 + rs * (1 / 30 - rs / 42)))))
    rl = r[~small]
    hl = -rl  # y = 0 gives h = 1
    inside = rl > -1.0
    hl[inside] += (1.0 + rl[inside]) * np.log1p(rl[inside])
    h[~small] = hl
    return x * h


def prox_function(setup, x):
    """Evaluate ``d(x)`` (or its recentered/rescaled variant)."""
    x = np.asarray(x, dtype=float)
    if setup.kind == PRODUCT:
        return float(sum(prox_function(s, xi) for s, xi in zip(setup.blocks, setup.split(x))))
    if setup.kind == EUCLIDEAN:
        c = 0.0 if setup.center is None else setup.center
        u = (x - c) / setup.scale
        return float(setup.scale ** 2 * 0.5 * np.dot(u, u))
    if setup.center is None:
        return float(_xlogx(x).sum() + math.log(x.size))
    return bregman(ProxSetup(ENTROPY, setup.omega), x, setup.center)


def prox_gradient(setup, x):
    """Gradient of :func:`prox_function`."""
    x = np.asarray(x, dtype=float)
    if setup.kind == PRODUCT:
        return np.concatenate([prox_gradient(s, xi) for s, xi in zip(setup.blocks, setup.split(x))])
    if setup.kind == EUCLIDEAN:
        c = 0.0 if setup.center is None else setup.center
        # R * grad d((x - c)/R) with grad d = identity
        return x - c
    _check_entropy_point(x)
    if setup.center is None:
        return np.log(x) + 1.0
    return np.log(x) - np.log(setup.center)


def bregman(setup, y, x):
    """Bregman divergence ``V(y, x) = d(y) - d(x) - <grad d(x), y - x>``."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if setup.kind == PRODUCT:
        return float(sum(bregman(s, yi, xi)
                         for s, yi, xi in zip(setup.blocks, setup.split(y), setup.split(x))))
    if setup.kind == EUCLIDEAN:
        # invariant under recentering and rescaling
        d = y - x
        return float(0.5 * np.dot(d, d))
    _check_entropy_point(x)
    if np.any(y < 0):
        raise DomainError("entropy setup needs y >= 0")
    # recentering adds an affine term to d, which leaves V unchanged
    return max(float(np.sum(_kl_terms(y, x))), 0.0)


def primal_norm(setup, v):
    v = np.asarray(v, dtype=float)
    if setup.kind == PRODUCT:
        return float(math.sqrt(sum(primal_norm(s, vi) ** 2 for s, vi in zip(setup.blocks, setup.split(v)))))
    if setup.kind == EUCLIDEAN:
        return float(np.linalg.norm(v))
    return float(np.abs(v).sum())


def dual_norm(setup, v):
    v = np.asarray(v, dtype=float)
    if setup.kind == PRODUCT:
        return float(math.sqrt(sum(dual_norm(s, vi) ** 2 for s, vi in zip(setup.blocks, setup.split(v)))))
    if setup.kind == EUCLIDEAN:
        return float(np.linalg.norm(v))
    return float(np.abs(v).max())


def set_diameter(fset, setup=None):
    """Diameter of ``fset`` under the setup's primal norm."""
    setup = default_setup(fset) if setup is None else setup
    if isinstance(fset, Product):
        if setup.kind != PRODUCT or len(setup.blocks) != len(fset.blocks):
            raise ConfigurationError("product set needs a product setup with matching blocks")
        return math.sqrt(sum(set_diameter(b, s) ** 2 for b, s in zip(fset.blocks, setup.blocks)))
    if isinstance(fset, Ball):
        if setup.kind == EUCLIDEAN:
            return 2.0 * fset.radius
        return 2.0 * fset.radius * math.sqrt(fset.dim)
    if isinstance(fset, Box):
        span = fset.upper - fset.lower
        return float(np.linalg.norm(span) if setup.kind == EUCLIDEAN else span.sum())
    if isinstance(fset, Simplex):
        if fset.dim == 1:
            return 0.0
        return 2.0 if setup.kind == ENTROPY else math.sqrt(2.0)
    raise ConfigurationError(f"unsupported set {type(fset).__name__}")


# ---------------------------------------------------------------------------
# Prox mapping
# ---------------------------------------------------------------------------


def _entropy_prox(z, g, L):
    _check_entropy_point(z, "z")
    s = np.log(z) - g / L
    s -= s.max()
    u = np.exp(s)
    return np.maximum(u / u.sum(), ENTROPY_FLOOR)


def prox_map(setup, fset, z, g, L):
    """Exact minimizer of ``<g, x - z> + L V(x, z)`` over ``fset``."""
    if not L > 0:
        raise DomainError(f"prox_map needs L > 0, got {L}")
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if isinstance(fset, Product):
        if setup.kind != PRODUCT or len(setup.blocks) != len(fset.blocks):
            raise ConfigurationError("product set needs a product setup with matching blocks")
        return np.concatenate([
            prox_map(s, b, zi, gi, L)
            for s, b, zi, gi in zip(setup.blocks, fset.blocks, fset.split(z), fset.split(g))
        ])
    if setup.kind == EUCLIDEAN and isinstance(fset, (Ball, Box)):
        return fset.project(z - g / L)
    if setup.kind == ENTROPY and isinstance(fset, Simplex):
        return _entropy_prox(z, g, L)
    raise ConfigurationError(f"no closed-form prox for {setup.kind} over {type(fset).__name__}")


def rescale(base, center, radius_sq):
    """Setup for ``d_p(x) = R^2 d((x - center) / R)`` with ``R^2 = radius_sq``.

    Entropy blocks are recentered at ``center`` without rescaling.
    """
    if not radius_sq > 0:
        raise DomainError(f"radius_sq must be positive, got {radius_sq}")
    if not base.is_base:
        raise ConfigurationError("rescale expects an origin-centered unit-scale base setup")
    center = as_vector(center, name="center")
    if base.kind == PRODUCT:
        blocks = [rescale(s, ci, radius_sq) for s, ci in zip(base.blocks, base.split(center))]
        return ProxSetup(PRODUCT, base.omega, center=center, blocks=tuple(blocks), sizes=base.sizes)
    if base.kind == EUCLIDEAN:
        return ProxSetup(EUCLIDEAN, base.omega, center=center, scale=math.sqrt(radius_sq))
    _check_entropy_point(center, "center")
    return ProxSetup(ENTROPY, base.omega, center=center)


def max_bregman_over_set(setup, fset, x0):
    """Upper bound on ``max_{x in fset} V(x, x0)`` (exact for every supported pair)."""
    x0 = np.asarray(x0, dtype=float)
    if isinstance(fset, Product):
        if setup.kind != PRODUCT or len(setup.blocks) != len(fset.blocks):
            raise ConfigurationError("product set needs a product setup with matching blocks")
        return float(sum(max_bregman_over_set(s, b, xi)
                         for s, b, xi in zip(setup.blocks, fset.blocks, fset.split(x0))))
    if setup.kind == EUCLIDEAN and isinstance(fset, Ball):
        return 0.5 * (fset.radius + float(np.linalg.norm(x0 - fset.center))) ** 2
    if setup.kind == EUCLIDEAN and isinstance(fset, Box):
        far = np.maximum(np.abs(x0 - fset.lower), np.abs(x0 - fset.upper))
        return float(0.5 * np.dot(far, far))
    if setup.kind == ENTROPY and isinstance(fset, Simplex):
        _check_entropy_point(x0, "x0")
        # KL(x || x0) is convex in x, so the max sits at a vertex: -ln x0_i
        return float(-np.log(x0.min()))
    raise ConfigurationError(f"no Bregman radius for {setup.kind} over {type(fset).__name__}")
