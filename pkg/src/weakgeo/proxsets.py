"""Prox-regular sets on the model manifolds.

Each set variant knows its analytic metric projection (a coordinate clamp),
its boundary strata and the unit generator of the proximal normal cone on
each stratum.  All variants have smooth boundaries, so intrinsic cones have at
most one generator; cones with a linear part only arise from the ambient
normal space of an embedding.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .manifolds import (AmbientSphere, Euclidean, GeometryError, HalfPlane,
                        Manifold, Sphere2)

DEFAULT_BOUNDARY_TOL = 1e-7


class AmbiguousProjectionError(GeometryError):
    """The point lies outside the tube on which the metric projection is unique."""


class NotInSetError(GeometryError):
    pass


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


# ---------------------------------------------------------------------------
# Cones

@dataclass(eq=False)
class ConeRep:
    """Closed convex cone ``span(subspace) + cone(generators)`` at ``apex``.

    ``metric`` is the Gram matrix of the coordinate frame at the apex (the
    identity for ambient cones).
    """

    apex: np.ndarray
    generators: np.ndarray
    subspace: np.ndarray
    metric: np.ndarray

    def __post_init__(self):
        d = self.metric.shape[0]
        self.generators = np.asarray(self.generators, dtype=float).reshape(-1, d)
        self.subspace = np.asarray(self.subspace, dtype=float).reshape(-1, d)

    @property
    def is_zero(self):
        return len(self.generators) == 0 and len(self.subspace) == 0

    def inner(self, u, v):
        return float(np.asarray(u) @ self.metric @ np.asarray(v))

    def to_dict(self):
        return {"apex": self.apex.tolist(), "generators": self.generators.tolist(),
                "subspace": self.subspace.tolist()}


def cone_project(C: ConeRep, v):
    """Metric projection of ``v`` onto the cone ``C``."""
    v = np.asarray(v, dtype=float)
    if C.is_zero:
        return np.zeros_like(v)
    L = np.linalg.cholesky(C.metric)
    to_on = lambda w: w @ L            # rows -> orthonormal coordinates (L^T w)
    vt = L.T @ v
    r = vt.copy()
    out = np.zeros_like(vt)
    G = to_on(C.generators) if len(C.generators) else np.zeros((0, len(v)))
    if len(C.subspace):
        Q, svals, _ = np.linalg.svd(to_on(C.subspace).T, full_matrices=False)
        Q = Q[:, svals > 1e-12 * max(svals.max(), 1.0)]
        out += Q @ (Q.T @ vt)
        r = vt - out
        G = G - (G @ Q) @ Q.T
    if len(G):
        coef, _ = nnls(G.T, r)
        out += G.T @ coef
    return np.linalg.solve(L.T, out)


def cone_distance(C: ConeRep, v):
    v = np.asarray(v, dtype=float)
    w = v - cone_project(C, v)
    return math.sqrt(max(C.inner(w, w), 0.0))


def cone_distance_single(M: Manifold, x, a, g):
    """Batched distance of ``a`` to ``cone{g}`` with ``g`` unit or zero (the solver fast path)."""
    lam = np.maximum(M.inner(x, a, g), 0.0)
    w = a - lam[..., None] * g
    return M.norm(x, w), lam[..., None] * g


# ---------------------------------------------------------------------------
# Set variants

@dataclass(frozen=True)
class PhiEstimate:
    value: float
    raw_max: float
    center: tuple
    radius: float
    samples: int
    safety: float

    def to_dict(self):
        return {"value": self.value, "raw_max": self.raw_max, "center": list(self.center),
                "radius": self.radius, "samples": self.samples, "safety": self.safety}


class ProxSet:
    """Shared behaviour of the set variants.

    Subclasses provide ``_distance_to``, ``_project``, ``_generator`` and
    ``_snap`` on ``(n, d)`` batches.
    """

    variant = "abstract"
    manifold: Manifold
    boundary_tol: float

    # membership --------------------------------------------------------------
    def distance_to(self, x):
        x, single = _as_batch(self.manifold.check(x))
        d = self._distance_to(x)
        return d[0] if single else d

    def contains(self, x, tol=0.0):
        d = self.distance_to(x)
        return d <= tol

    def require_member(self, x, what="point"):
        d = np.atleast_1d(self.distance_to(x))
        if np.any(d > self.boundary_tol):
            i = int(np.argmax(d))
            raise NotInSetError(f"{what} {i} lies at distance {d[i]:.3g} outside {self.variant}")

    # projection ----------------------------------------------------------------
    def project(self, x):
        x, single = _as_batch(self.manifold.check(x))
        y = self._project(x)
        return y[0] if single else y

    # normal cone ---------------------------------------------------------------
    def normal_generator(self, x):
        """Unit generator of the proximal normal cone at each point (zero inside)."""
        xb, single = _as_batch(self.manifold.check(x))
        self.require_member(xb)
        g = self._generator(xb)
        return g[0] if single else g

    def proximal_normal_cone(self, x) -> ConeRep:
        x = np.asarray(x, dtype=float)
        g = self.normal_generator(x)
        gens = g[None, :] if np.any(g != 0) else np.zeros((0, len(x)))
        return ConeRep(x.copy(), gens, np.zeros((0, len(x))), self.manifold.metric_matrix(x))

    def ambient_normal_cone(self, x) -> ConeRep:
        M = self.manifold
        x = np.asarray(x, dtype=float)
        g = self.normal_generator(x)
        N = M.ambient_normal_space(x)
        X = M.embed(x)
        gens = np.zeros((0, len(X)))
        if np.any(g != 0):
            w = M.tangent_push(x, g)
            gens = (w / np.linalg.norm(w))[None, :]
        return ConeRep(X, gens, N, np.eye(len(X)))

    def interior_direction(self, x):
        return -self.normal_generator(x)

    def snap_to_boundary(self, x):
        x, single = _as_batch(self.manifold.check(x))
        y = self._snap(x)
        return y[0] if single else y

    def phi_region(self):
        raise NotImplementedError

    # serialization ---------------------------------------------------------------
    def params(self):
        raise NotImplementedError

    def to_dict(self):
        d = {"variant": self.variant}
        d.update(self.params())
        d["boundary_tol"] = self.boundary_tol
        return d


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class HyperbolicStrip(ProxSet):
    """``{(x, y) : y_lo <= y <= y_hi}`` in the half-plane."""

    y_lo: float = 1.0
    y_hi: float = 2.0
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    manifold: Manifold = field(default_factory=HalfPlane, compare=False)
    variant = "HyperbolicStrip"

    def __post_init__(self):
        if not 0 < self.y_lo < self.y_hi:
            raise ValueError("HyperbolicStrip needs 0 < y_lo < y_hi")
        if self.boundary_tol <= 0:
            raise ValueError("boundary_tol must be positive")

    def params(self):
        return {"y_lo": self.y_lo, "y_hi": self.y_hi}

    def _distance_to(self, x):
        y = x[:, 1]
        # the vertical drop is the shortest path to a horizontal line
        return np.where(y > self.y_hi, np.log(y / self.y_hi),
                        np.where(y < self.y_lo, np.log(self.y_lo / y), 0.0))

    def _project(self, x):
        out = x.copy()
        out[:, 1] = np.clip(x[:, 1], self.y_lo, self.y_hi)
        return out

    def _generator(self, x):
        g = np.zeros_like(x)
        top = np.abs(x[:, 1] - self.y_hi) <= self.boundary_tol
        bot = np.abs(x[:, 1] - self.y_lo) <= self.boundary_tol
        g[top, 1] = x[top, 1]
        g[bot & ~top, 1] = -x[bot & ~top, 1]
        return g

    def _snap(self, x):
        out = x.copy()
        mid = math.sqrt(self.y_lo * self.y_hi)
        out[:, 1] = np.where(x[:, 1] >= mid, self.y_hi, self.y_lo)
        return out

    def phi_region(self):
        return (0.0, self.y_hi), 0.5


class _Cap(ProxSet):
    """Geodesic cap around ``axis`` on either sphere model."""

    variant = "abstract-cap"
    sign = 1.0  # +1: theta <= theta0 (outward normal +grad theta); -1: theta >= theta0

    def _check_params(self):
        if not 0 < self.theta0 < math.pi:
            raise ValueError("cap angle must lie in (0, pi)")
        if self.boundary_tol <= 0:
            raise ValueError("boundary_tol must be positive")
        if not isinstance(self.manifold, (Sphere2, AmbientSphere)):
            raise ValueError("caps live on Sphere2 or its ambient model")
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-12:
            object.__setattr__(self, "axis", tuple(_unit(self.axis).tolist()))

    def params(self):
        d = {"theta0": self.theta0}
        if tuple(self.axis) != (0.0, 0.0, 1.0):
            d["axis"] = list(self.axis)
        if isinstance(self.manifold, AmbientSphere):
            d["model"] = "ambient"
        return d

    @property
    def _chart_fast(self):
        return isinstance(self.manifold, Sphere2) and tuple(self.axis) == (0.0, 0.0, 1.0)

    def _ambient(self, x):
        if isinstance(self.manifold, Sphere2):
            return Sphere2._embed(x)
        return x

    def _from_ambient(self, X):
        if isinstance(self.manifold, Sphere2):
            return self.manifold.from_ambient(X)
        return X / np.linalg.norm(X, axis=-1, keepdims=True)

    def polar_angle(self, x):
        if self._chart_fast:
            return x[:, 0]
        X = self._ambient(x)
        a = np.asarray(self.axis)
        return np.arctan2(np.linalg.norm(np.cross(X, a), axis=-1), X @ a)

    def _distance_to(self, x):
        th = self.polar_angle(x)
        return np.maximum(self.sign * (th - self.theta0), 0.0)

    def _tube(self):
        return math.pi - self.theta0 if self.sign > 0 else self.theta0

    def _move_to_angle(self, x, mask):
        out = x.copy()
        if not np.any(mask):
            return out
        if self._chart_fast:
            out[mask, 0] = self.theta0
            return out
        X = self._ambient(x[mask])
        a = np.asarray(self.axis)
        P = X - (X @ a)[:, None] * a
        pn = np.linalg.norm(P, axis=-1)
        if np.any(pn < 1e-12):
            raise AmbiguousProjectionError("point on the cap axis has no unique meridian")
        Y = math.cos(self.theta0) * a + math.sin(self.theta0) * P / pn[:, None]
        out[mask] = self._from_ambient(Y)
        return out

    def _project(self, x):
        d = self._distance_to(x)
        if np.any(d >= self._tube() - 1e-9):
            raise AmbiguousProjectionError(
                f"distance {d.max():.6g} to {self.variant} leaves the uniqueness tube")
        return self._move_to_angle(x, d > 0)

    def _snap(self, x):
        return self._move_to_angle(x, np.ones(len(x), dtype=bool))

    def _grad_theta(self, x):
        if self._chart_fast:
            g = np.zeros_like(x)
            g[:, 0] = 1.0
            return g
        X = self._ambient(x)
        a = np.asarray(self.axis)
        c = X @ a
        W = -(a - c[:, None] * X)
        W /= np.linalg.norm(W, axis=-1, keepdims=True)
        if isinstance(self.manifold, Sphere2):
            return self.manifold._pull(x, W)
        return W

    def _generator(self, x):
        on = np.abs(self.polar_angle(x) - self.theta0) <= self.boundary_tol
        g = np.zeros_like(x)
        if np.any(on):
            g[on] = self.sign * self._grad_theta(x[on])
        return g

    def phi_region(self):
        a = np.asarray(self.axis)
        ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e = _unit(ref - (ref @ a) * a)
        X = math.cos(self.theta0) * a + math.sin(self.theta0) * e
        c = self.manifold.from_ambient(X) if isinstance(self.manifold, Sphere2) else X
        return tuple(np.asarray(c).tolist()), 0.5


@dataclass(frozen=True)
class SphericalCapLe(_Cap):
    """``{theta <= theta0}``: the large cap containing the north pole for theta0 > pi/2."""

    theta0: float = 2 * math.pi / 3
    axis: tuple = (0.0, 0.0, 1.0)
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    manifold: Manifold = field(default_factory=Sphere2)
    variant = "SphericalCapLe"
    sign = 1.0

    def __post_init__(self):
        self._check_params()


@dataclass(frozen=True)
class SphericalCapGe(_Cap):
    """``{theta >= theta0}``; geodesically convex when theta0 > pi/2."""

    theta0: float = 2 * math.pi / 3
    axis: tuple = (0.0, 0.0, 1.0)
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    manifold: Manifold = field(default_factory=Sphere2)
    variant = "SphericalCapGe"
    sign = -1.0

    def __post_init__(self):
        self._check_params()
        if not math.pi / 2 < self.theta0 < math.pi:
            raise ValueError("SphericalCapGe needs pi/2 < theta0 < pi")


def _radial(x, center):
    r = x - center
    return r, np.linalg.norm(r, axis=-1)


@dataclass(frozen=True)
class EuclideanBall(ProxSet):
    center: tuple = (0.0, 0.0)
    r: float = 1.0
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    variant = "EuclideanBall"

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def manifold(self):
        return Euclidean(len(self.center))

    def params(self):
        return {"center": list(self.center), "r": self.r}

    def _distance_to(self, x):
        _, n = _radial(x, np.asarray(self.center))
        return np.maximum(n - self.r, 0.0)

    def _project(self, x):
        c = np.asarray(self.center)
        v, n = _radial(x, c)
        out = x.copy()
        far = n > self.r
        out[far] = c + v[far] * (self.r / n[far])[:, None]
        return out

    def _generator(self, x):
        v, n = _radial(x, np.asarray(self.center))
        g = np.zeros_like(x)
        on = n >= self.r - self.boundary_tol
        g[on] = v[on] / n[on, None]
        return g

    def _snap(self, x):
        c = np.asarray(self.center)
        v, n = _radial(x, c)
        n = np.where(n > 0, n, 1.0)
        return c + v * (self.r / n)[:, None]

    def phi_region(self):
        c = np.asarray(self.center, dtype=float).copy()
        c[0] += self.r
        return tuple(c.tolist()), 0.5 * self.r


@dataclass(frozen=True)
class EuclideanAnnulus(ProxSet):
    r1: float = 1.0
    r2: float = 2.0
    center: tuple = (0.0, 0.0)
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    variant = "EuclideanAnnulus"

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError("EuclideanAnnulus needs 0 < r1 < r2")

    @property
    def manifold(self):
        return Euclidean(len(self.center))

    def params(self):
        d = {"r1": self.r1, "r2": self.r2}
        if any(self.center):
            d["center"] = list(self.center)
        return d

    def _distance_to(self, x):
        _, n = _radial(x, np.asarray(self.center))
        return np.maximum(np.maximum(self.r1 - n, n - self.r2), 0.0)

    def _project(self, x):
        c = np.asarray(self.center)
        v, n = _radial(x, c)
        if np.any(n <= self.r1 / 2):
            raise AmbiguousProjectionError(
                f"radius {n.min():.6g} is inside the inner tube r1/2 = {self.r1 / 2:.6g}")
        target = np.clip(n, self.r1, self.r2)
        return c + v * (target / n)[:, None]

    def _generator(self, x):
        v, n = _radial(x, np.asarray(self.center))
        g = np.zeros_like(x)
        inner = np.abs(n - self.r1) <= self.boundary_tol
        outer = np.abs(n - self.r2) <= self.boundary_tol
        g[inner] = -v[inner] / n[inner, None]
        g[outer] = v[outer] / n[outer, None]
        return g

    def _snap(self, x):
        c = np.asarray(self.center)
        v, n = _radial(x, c)
        n = np.where(n > 0, n, 1.0)
        target = np.where(n < 0.5 * (self.r1 + self.r2), self.r1, self.r2)
        return c + v * (target / n)[:, None]

    def phi_region(self):
        c = np.asarray(self.center, dtype=float).copy()
        c[0] += self.r1
        return tuple(c.tolist()), 0.5 * self.r1


@dataclass(frozen=True)
class EuclideanHalfSpace(ProxSet):
    """``{x : <normal, x> <= offset}``."""

    normal: tuple = (0.0, 1.0)
    offset: float = 0.0
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    variant = "EuclideanHalfSpace"

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn == 0:
            raise ValueError("half-space normal must be nonzero")
        if abs(nn - 1.0) > 1e-15:
            object.__setattr__(self, "normal", tuple((n / nn).tolist()))
            object.__setattr__(self, "offset", self.offset / nn)

    @property
    def manifold(self):
        return Euclidean(len(self.normal))

    def params(self):
        return {"normal": list(self.normal), "offset": self.offset}

    def _distance_to(self, x):
        return np.maximum(x @ np.asarray(self.normal) - self.offset, 0.0)

    def _project(self, x):
        n = np.asarray(self.normal)
        s = np.maximum(x @ n - self.offset, 0.0)
        return x - s[:, None] * n

    def _generator(self, x):
        n = np.asarray(self.normal)
        g = np.zeros_like(x)
        on = x @ n - self.offset >= -self.boundary_tol
        g[on] = n
        return g

    def _snap(self, x):
        n = np.asarray(self.normal)
        return x - (x @ n - self.offset)[:, None] * n

    def phi_region(self):
        return tuple((self.offset * np.asarray(self.normal)).tolist()), 0.5


SET_VARIANTS = {cls.variant: cls for cls in (HyperbolicStrip, SphericalCapLe, SphericalCapGe,
                                             EuclideanBall, EuclideanAnnulus,
                                             EuclideanHalfSpace)}


def set_from_dict(d, manifold=None):
    d = dict(d)
    variant = d.pop("variant", None)
    if variant not in SET_VARIANTS:
        raise ValueError(f"unknown set variant {variant!r}")
    cls = SET_VARIANTS[variant]
    if issubclass(cls, _Cap):
        model = d.pop("model", None)
        if manifold is None:
            manifold = AmbientSphere() if model == "ambient" else Sphere2()
        if "axis" in d:
            d["axis"] = tuple(float(a) for a in d["axis"])
        return cls(manifold=manifold, **d)
    for key in ("center", "normal"):
        if key in d:
            d[key] = tuple(float(a) for a in d[key])
    if cls is HyperbolicStrip:
        return cls(**d)
    S = cls(**d)
    if manifold is not None and manifold != S.manifold:
        raise ValueError(f"{variant} does not live on {manifold!r}")
    return S


# ---------------------------------------------------------------------------
# Functional surface

def contains(S, x, tol=0.0):
    return S.contains(x, tol)


def project(S, x):
    return S.project(x)


def proximal_normal_cone(S, x):
    return S.proximal_normal_cone(x)


def ambient_normal_cone(S, x):
    return S.ambient_normal_cone(x)


def _sample_ball(M, rng, center, radius, n):
    center = np.asarray(center, dtype=float)
    C = np.broadcast_to(center, (n, len(center)))
    dim = 2 if isinstance(M, AmbientSphere) else M.dim
    r = radius * rng.random(n) ** (1.0 / dim)
    V = M.random_tangent(rng, C) * r[:, None]
    Y = M.exp_endpoint(C, V)
    return Y[M.in_domain(Y)]


def phi_ratios(S, X, G, Y):
    """``<g, log_x y> / d^2(x, y)`` for matched rows."""
    M = S.manifold
    d = M.dist(X, Y)
    return M.inner(X, G, M.log(X, Y)) / d**2


def sample_phi_pairs(S, rng, n, center, radius):
    """Boundary points with unit normals and members of ``S`` near them."""
    M = S.manifold
    P = _sample_ball(M, rng, center, radius, n)
    X = S.snap_to_boundary(P)
    X = X[M.dist(np.broadcast_to(np.asarray(center, float), X.shape), X) <= radius]
    G = S.normal_generator(X)
    X, G = X[np.any(G != 0, axis=1)], G[np.any(G != 0, axis=1)]
    m = len(X)
    # half local (log-uniform radii, to reach the d -> 0 limit), half from the region
    half = m // 2
    r_loc = radius * 10 ** (-3 * rng.random(half))
    Y_loc = M.exp_endpoint(X[:half], M.random_tangent(rng, X[:half]) * r_loc[:, None])
    Y_reg = _sample_ball(M, rng, center, radius, m - half)
    n_pair = min(m, half + len(Y_reg))
    X, G, Y = X[:n_pair], G[:n_pair], np.concatenate([Y_loc, Y_reg])[:n_pair]
    keep = M.in_domain(Y) & (M.dist(X, Y) > 1e-12)
    keep[keep] = S.contains(Y[keep], 0.0)
    return X[keep], G[keep], Y[keep]


def phi_estimate(S, region=None, n_samples=4000, rng_seed=0, safety=1.1):
    """Sampled upper estimate of the phi-convexity modulus of ``S`` over a region.

    ``region`` is ``(center, radius)``; it defaults to a ball around a
    boundary point.  The returned value is ``safety`` times the largest
    observed ratio, clamped at zero.
    """
    center, radius = region if region is not None else S.phi_region()
    rng = np.random.default_rng(rng_seed)
    X, G, Y = sample_phi_pairs(S, rng, n_samples, center, radius)
    if len(X) < 10:
        raise GeometryError(f"only {len(X)} admissible phi samples in the region")
    raw = float(np.max(phi_ratios(S, X, G, Y)))
    return PhiEstimate(value=safety * max(raw, 0.0), raw_max=raw,
                       center=tuple(np.asarray(center, float).tolist()), radius=float(radius),
                       samples=len(X), safety=safety)


@functools.lru_cache(maxsize=64)
def certified_phi(S) -> PhiEstimate:
    """The regional phi constant attached to a set (deterministic, cached)."""
    return phi_estimate(S, n_samples=10000, rng_seed=0)
