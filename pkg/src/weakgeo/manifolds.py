"""Model Riemannian manifolds in chart coordinates.

Points and tangent vectors are plain numpy arrays of chart coordinates.  Every
operation accepts a single point of shape ``(d,)`` or a batch of shape
``(n, d)`` and returns arrays of the matching shape.  Tangent components are
always interpreted in the coordinate frame of the base point passed alongside
them.

Four models are provided:

* :class:`Euclidean` -- flat ``R^n``.
* :class:`HalfPlane` -- the hyperbolic plane, metric ``(dx^2 + dy^2) / y^2``.
* :class:`Sphere2` -- the unit sphere in the slit chart ``(theta, phi)``,
  metric ``dtheta^2 + sin^2(theta) dphi^2``.
* :class:`AmbientSphere` -- the same sphere with points stored as unit
  vectors of ``R^3``; used wherever a curve has to cross the chart slit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Convexity radius of manifolds whose balls are convex at every radius.
UNBOUNDED = math.inf


class GeometryError(ValueError):
    """Base class for refusals raised by the geometric kernels."""


class ChartDomainError(GeometryError):
    pass


class ConvexityRadiusError(GeometryError):
    def __init__(self, measured, radius):
        self.measured = float(measured)
        self.radius = float(radius)
        super().__init__(
            f"distance {self.measured:.6g} is not below the convexity radius {self.radius:.6g}")


class NoEmbeddingError(GeometryError):
    pass


@dataclass(frozen=True)
class CurvatureBounds:
    delta: float
    Delta: float

    def __post_init__(self):
        if self.delta > self.Delta:
            raise ValueError("lower curvature bound exceeds the upper bound")


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _unbatch(y, single):
    return y[0] if single else y


def _sinc_ratio(d):
    """sin(d) / d, accurate near zero."""
    return np.sinc(d / np.pi)


class Manifold:
    """Common surface of the model manifolds.

    Subclasses implement the ``_batch`` methods on ``(n, d)`` arrays; the
    public methods handle single points.
    """

    name = "abstract"
    dim = 0
    curvature = CurvatureBounds(0.0, 0.0)
    coord_names: tuple = ()

    # --- descriptors -----------------------------------------------------
    def to_dict(self):
        return {"variant": self.name}

    def __repr__(self):
        return f"{type(self).__name__}()"

    # --- domain ------------------------------------------------------------
    def in_domain(self, x):
        x, single = _as_batch(x)
        return _unbatch(self._in_domain(x), single)

    def _in_domain(self, x):
        return np.all(np.isfinite(x), axis=-1)

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ChartDomainError(
                f"{self.name} points have {self.dim} coordinates, got {x.shape[-1]}")
        ok = self.in_domain(x)
        if not np.all(ok):
            bad = np.atleast_2d(x)[~np.atleast_1d(ok)][0]
            raise ChartDomainError(f"point {bad.tolist()} lies outside the {self.name} chart")
        return x

    # --- metric ------------------------------------------------------------
    def metric_matrix(self, x):
        x, single = _as_batch(x)
        return _unbatch(self._metric_matrix(x), single)

    def _metric_matrix(self, x):
        return np.broadcast_to(np.eye(self.dim), (len(x), self.dim, self.dim)).copy()

    def inner(self, x, u, v):
        G = self.metric_matrix(x)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.einsum("...i,...ij,...j->...", u, G, v)

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def to_tangent(self, x, w):
        """Project raw coordinates ``w`` onto the tangent space at ``x``."""
        return np.asarray(w, dtype=float)

    # --- geodesics -----------------------------------------------------------
    def exp(self, x, v):
        x, single = _as_batch(self.check(x))
        v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
        y = self._exp(x, v)
        if not np.all(self._in_domain(y)):
            raise ChartDomainError(f"exp leaves the {self.name} chart")
        return _unbatch(y, single)

    def exp_endpoint(self, x, v):
        """Endpoint of ``exp`` when only the point matters, not the path (random sampling)."""
        return self.exp(x, v)

    def log(self, x, y):
        x = self.check(x)
        y = self.check(y)
        x, y = np.broadcast_arrays(x, y)
        xb, single = _as_batch(x)
        yb, _ = _as_batch(y)
        r = self.convexity_radius(xb[0])
        if r is not UNBOUNDED and math.isfinite(r):
            d = self._dist(xb, yb)
            if np.any(d >= r):
                raise ConvexityRadiusError(np.max(d), r)
        return _unbatch(self._log(xb, yb), single)

    def dist(self, x, y):
        x = self.check(x)
        y = self.check(y)
        x, y = np.broadcast_arrays(x, y)
        xb, single = _as_batch(x)
        yb, _ = _as_batch(y)
        return _unbatch(self._dist(xb, yb), single)

    def transport(self, x, y, v):
        """Parallel transport of ``v`` from ``x`` to ``y`` along the minimizing geodesic."""
        x = self.check(x)
        y = self.check(y)
        x, y = np.broadcast_arrays(x, y)
        xb, single = _as_batch(x)
        yb, _ = _as_batch(y)
        vb = np.broadcast_to(np.asarray(v, dtype=float), xb.shape)
        r = self.injectivity_radius()
        if math.isfinite(r):
            d = self._dist(xb, yb)
            if np.any(d >= r - 1e-9):
                raise GeometryError(
                    f"no unique minimizing geodesic: distance {np.max(d):.6g} is near {r:.6g}")
        return _unbatch(self._transport(xb, yb, vb), single)

    def convexity_radius(self, x=None):
        return UNBOUNDED

    def injectivity_radius(self):
        return self.convexity_radius() * 2

    def geodesic_point(self, x, y, s):
        """Point at fraction ``s`` along the minimizing geodesic from x to y."""
        s = np.asarray(s, dtype=float)
        v = self.log(x, y)
        return self.exp(x, s[..., None] * v if s.ndim else s * v)

    # --- embedding -----------------------------------------------------------
    ambient_dim = None

    def embed(self, x):
        raise NoEmbeddingError(f"{self.name} has no registered embedding")

    def tangent_push(self, x, v):
        raise NoEmbeddingError(f"{self.name} has no registered embedding")

    def tangent_project(self, x, w):
        raise NoEmbeddingError(f"{self.name} has no registered embedding")

    def ambient_normal_space(self, x):
        raise NoEmbeddingError(f"{self.name} has no registered embedding")

    def christoffel(self, x):
        """Christoffel symbols ``G[k, i, j]`` at a single point."""
        return np.zeros((self.dim,) * 3)

    # --- sampling helpers ------------------------------------------------------
    def random_tangent(self, rng, x, scale=1.0):
        """Tangent at ``x`` with metric norm ``scale`` in a uniformly random direction."""
        x = np.asarray(x, dtype=float)
        z = rng.standard_normal(x.shape)
        # chart metrics here are diagonal, so scaling by 1/sqrt(g_ii) gives isotropic directions
        g = np.diagonal(self.metric_matrix(x), axis1=-2, axis2=-1)
        w = self.to_tangent(x, z / np.sqrt(g))
        n = self.norm(x, w)
        n = np.maximum(n, 1e-300)
        return scale * w / (n[..., None] if np.ndim(n) else n)


# ---------------------------------------------------------------------------
class Euclidean(Manifold):
    name = "EuclideanN"

    def __init__(self, dim=2):
        if int(dim) < 1:
            raise ValueError("Euclidean dimension must be positive")
        self.dim = int(dim)
        self.ambient_dim = self.dim
        self.coord_names = ("x", "y", "z")[: self.dim] if self.dim <= 3 else tuple(
            f"x{i}" for i in range(self.dim))

    def __eq__(self, other):
        return type(other) is Euclidean and other.dim == self.dim

    def __hash__(self):
        return hash(("EuclideanN", self.dim))

    def __repr__(self):
        return f"Euclidean({self.dim})"

    def to_dict(self):
        return {"variant": self.name, "dim": self.dim}

    def _exp(self, x, v):
        return x + v

    def _log(self, x, y):
        return y - x

    def _dist(self, x, y):
        return np.linalg.norm(y - x, axis=-1)

    def _transport(self, x, y, v):
        return v.copy()

    def embed(self, x):
        return np.asarray(x, dtype=float).copy()

    def tangent_push(self, x, v):
        return np.asarray(v, dtype=float).copy()

    def tangent_project(self, x, w):
        return np.asarray(w, dtype=float).copy()

    def ambient_normal_space(self, x):
        return np.zeros((0, self.dim))


# ---------------------------------------------------------------------------
class HalfPlane(Manifold):
    """Upper half-plane model of the hyperbolic plane.

    Exp and log go through the Cayley map to the disk, where geodesics through
    the origin are diameters; this avoids the cancellation of the semicircle
    formulas for nearly vertical geodesics.
    """

    name = "HalfPlaneH2"
    dim = 2
    curvature = CurvatureBounds(-1.0, -1.0)
    coord_names = ("x", "y")

    def __eq__(self, other):
        return type(other) is HalfPlane

    def __hash__(self):
        return hash("HalfPlaneH2")

    def _in_domain(self, x):
        return np.all(np.isfinite(x), axis=-1) & (x[..., 1] > 0)

    def _metric_matrix(self, x):
        G = np.zeros((len(x), 2, 2))
        G[:, 0, 0] = G[:, 1, 1] = 1.0 / x[:, 1] ** 2
        return G

    def _dist(self, x, y):
        chord = np.hypot(y[:, 0] - x[:, 0], y[:, 1] - x[:, 1])
        return 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(x[:, 1] * y[:, 1])))

    def _exp(self, x, v):
        z = x[:, 0] + 1j * x[:, 1]
        V = (v[:, 0] + 1j * v[:, 1]) / x[:, 1]
        d = np.abs(V)
        with np.errstate(invalid="ignore", divide="ignore"):
            tau = np.where(d > 1e-8, np.tanh(d / 2) / np.where(d > 0, d, 1.0), 0.5 - d**2 / 24)
        k = V * tau
        w = z + 2.0 * x[:, 1] * k / (1.0 + 1j * k)
        return np.stack([w.real, w.imag], axis=-1)

    def _log(self, x, y):
        delta = (y[:, 0] - x[:, 0]) + 1j * (y[:, 1] - x[:, 1])
        d = self._dist(x, y)
        k = delta / (delta + 2j * x[:, 1])
        ak = np.abs(k)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(ak > 0, 1j * k / np.where(ak > 0, ak, 1.0), 0.0)
        V = x[:, 1] * d * u
        return np.stack([V.real, V.imag], axis=-1)

    def _unit_direction(self, x, y):
        v = self._log(x, y)
        n = np.sqrt(np.einsum("ni,ni->n", v, v)) / x[:, 1]
        out = np.zeros_like(v)
        nz = n > 0
        out[nz] = v[nz] / n[nz, None]
        return out

    def _transport(self, x, y, v):
        # In two dimensions transport along a geodesic keeps the angle to the
        # geodesic's velocity, so rotate relative to the start and end tangents.
        T1 = self._unit_direction(x, y)
        T2 = -self._unit_direction(y, x)
        t1 = T1[:, 0] + 1j * T1[:, 1]
        t2 = T2[:, 0] + 1j * T2[:, 1]
        vc = v[:, 0] + 1j * v[:, 1]
        same = np.abs(t1) == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(same, vc, vc / np.where(same, 1.0, t1) * t2)
        return np.stack([out.real, out.imag], axis=-1)

    def christoffel(self, x):
        y = float(x[1])
        G = np.zeros((2, 2, 2))
        G[0, 0, 1] = G[0, 1, 0] = -1.0 / y
        G[1, 0, 0] = 1.0 / y
        G[1, 1, 1] = -1.0 / y
        return G


# ---------------------------------------------------------------------------
def _sphere_exp_ambient(X, V):
    n = np.linalg.norm(V, axis=-1)
    Y = np.cos(n)[:, None] * X + _sinc_ratio(n)[:, None] * V
    return Y / np.linalg.norm(Y, axis=-1, keepdims=True)


def _sphere_dist_ambient(X, Y):
    cross = np.linalg.norm(np.cross(X, Y), axis=-1)
    dot = np.einsum("ni,ni->n", X, Y)
    return np.arctan2(cross, dot)


def _sphere_log_ambient(X, Y):
    d = _sphere_dist_ambient(X, Y)
    P = Y - np.einsum("ni,ni->n", X, Y)[:, None] * X
    pn = np.linalg.norm(P, axis=-1)
    out = np.zeros_like(X)
    nz = pn > 0
    out[nz] = P[nz] * (d[nz] / pn[nz])[:, None]
    return out


def _sphere_transport_ambient(X, Y, V):
    d = _sphere_dist_ambient(X, Y)
    L = _sphere_log_ambient(X, Y)
    out = V.copy()
    nz = d > 0
    if np.any(nz):
        u = L[nz] / d[nz, None]
        c = np.einsum("ni,ni->n", V[nz], u)
        out[nz] = V[nz] + c[:, None] * ((np.cos(d[nz]) - 1.0)[:, None] * u
                                        - np.sin(d[nz])[:, None] * X[nz])
    return out


class Sphere2(Manifold):
    """Unit sphere in the chart ``(theta, phi)``, ``0 < theta < pi``, ``-pi < phi < pi``.

    Geodesic computations go through the embedding in ``R^3``.  Results landing
    on a pole or on the slit ``phi = +-pi`` are refused; nothing wraps.
    """

    name = "Sphere2"
    dim = 2
    ambient_dim = 3
    curvature = CurvatureBounds(1.0, 1.0)
    coord_names = ("theta", "phi")

    def __eq__(self, other):
        return type(other) is Sphere2

    def __hash__(self):
        return hash("Sphere2")

    def _in_domain(self, x):
        th, ph = x[..., 0], x[..., 1]
        return (np.isfinite(th) & np.isfinite(ph) & (th > 0) & (th < np.pi)
                & (ph > -np.pi) & (ph < np.pi))

    def _metric_matrix(self, x):
        G = np.zeros((len(x), 2, 2))
        G[:, 0, 0] = 1.0
        G[:, 1, 1] = np.sin(x[:, 0]) ** 2
        return G

    def convexity_radius(self, x=None):
        return math.pi / 2

    @staticmethod
    def _embed(x):
        th, ph = x[:, 0], x[:, 1]
        s = np.sin(th)
        return np.stack([s * np.cos(ph), s * np.sin(ph), np.cos(th)], axis=-1)

    @staticmethod
    def _frame(x):
        th, ph = x[:, 0], x[:, 1]
        ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
        e_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_ph = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        return e_th, e_ph

    @staticmethod
    def _chart(X):
        th = np.arctan2(np.hypot(X[:, 0], X[:, 1]), X[:, 2])
        ph = np.arctan2(X[:, 1], X[:, 0])
        return np.stack([th, ph], axis=-1)

    def _push(self, x, v):
        e_th, e_ph = self._frame(x)
        return v[:, :1] * e_th + v[:, 1:2] * e_ph

    def _pull(self, x, w):
        e_th, e_ph = self._frame(x)
        s2 = np.sin(x[:, 0]) ** 2
        return np.stack([np.einsum("ni,ni->n", w, e_th),
                         np.einsum("ni,ni->n", w, e_ph) / s2], axis=-1)

    def _exp(self, x, v):
        X, V = self._embed(x), self._push(x, v)
        if np.any(self._crosses_slit(X, V)):
            raise ChartDomainError("exp crosses the slit meridian phi = +-pi")
        return self._chart(_sphere_exp_ambient(X, V))

    def exp_endpoint(self, x, v):
        """Endpoint read back in the chart; the great-circle arc itself may cross the slit."""
        x, single = _as_batch(self.check(x))
        v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
        return _unbatch(self._chart(_sphere_exp_ambient(self._embed(x), self._push(x, v))), single)

    @staticmethod
    def _crosses_slit(X, V):
        """Whether the great-circle arc ``t -> exp_X(t V)``, t in [0, 1], meets the slit."""
        n = np.linalg.norm(V, axis=-1)
        U = V / np.where(n > 0, n, 1.0)[:, None]
        # Y-coordinate along the arc is R sin(t + alpha)
        alpha = np.arctan2(X[:, 1], U[:, 1])
        hit = np.zeros(len(X), dtype=bool)
        for k in range(4):
            t = k * np.pi - alpha
            inside = (t > 0) & (t <= n)
            xt = X[:, 0] * np.cos(t) + U[:, 0] * np.sin(t)
            hit |= inside & (xt < 0)
        return hit

    def _log(self, x, y):
        return self._pull(x, _sphere_log_ambient(self._embed(x), self._embed(y)))

    def _dist(self, x, y):
        return _sphere_dist_ambient(self._embed(x), self._embed(y))

    def _transport(self, x, y, v):
        X, Y = self._embed(x), self._embed(y)
        return self._pull(y, _sphere_transport_ambient(X, Y, self._push(x, v)))

    def embed(self, x):
        x, single = _as_batch(self.check(x))
        return _unbatch(self._embed(x), single)

    def tangent_push(self, x, v):
        x, single = _as_batch(self.check(x))
        v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
        return _unbatch(self._push(x, v), single)

    def tangent_project(self, x, w):
        x, single = _as_batch(self.check(x))
        w = np.broadcast_to(np.asarray(w, dtype=float), (len(x), 3))
        return _unbatch(self._pull(x, w), single)

    def ambient_normal_space(self, x):
        return self.embed(x)[..., None, :]

    def christoffel(self, x):
        th = float(x[0])
        G = np.zeros((2, 2, 2))
        G[0, 1, 1] = -math.sin(th) * math.cos(th)
        G[1, 0, 1] = G[1, 1, 0] = math.cos(th) / math.sin(th)
        return G

    def from_ambient(self, X):
        X, single = _as_batch(X)
        y = self._chart(X / np.linalg.norm(X, axis=-1, keepdims=True))
        if not np.all(self._in_domain(y)):
            raise ChartDomainError("ambient point maps onto a pole or the chart slit")
        return _unbatch(y, single)


class AmbientSphere(Manifold):
    """Unit sphere with points stored as unit vectors of ``R^3``.

    Tangent vectors are ambient 3-vectors orthogonal to the base point and the
    metric is the ambient dot product.
    """

    name = "EmbeddedSubmanifold"
    dim = 3
    ambient_dim = 3
    curvature = CurvatureBounds(1.0, 1.0)
    coord_names = ("X", "Y", "Z")
    unit_tol = 1e-9

    def __eq__(self, other):
        return type(other) is AmbientSphere

    def __hash__(self):
        return hash("AmbientSphere")

    def to_dict(self):
        return {"variant": self.name, "base": "Sphere2", "ambient_dim": 3, "embedding": "spherical"}

    def _in_domain(self, x):
        return np.all(np.isfinite(x), axis=-1) & (np.abs(np.linalg.norm(x, axis=-1) - 1.0) < self.unit_tol)

    def to_tangent(self, x, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        return w - np.sum(w * x, axis=-1, keepdims=True) * x

    def convexity_radius(self, x=None):
        return math.pi / 2

    def _exp(self, x, v):
        return _sphere_exp_ambient(x, self.to_tangent(x, v))

    def _log(self, x, y):
        return _sphere_log_ambient(x, y)

    def _dist(self, x, y):
        return _sphere_dist_ambient(x, y)

    def _transport(self, x, y, v):
        return _sphere_transport_ambient(x, y, self.to_tangent(x, v))

    def embed(self, x):
        return self.check(x).copy()

    def tangent_push(self, x, v):
        return self.to_tangent(x, v)

    def tangent_project(self, x, w):
        return self.to_tangent(x, w)

    def ambient_normal_space(self, x):
        return self.check(x)[..., None, :].copy()

    def from_chart(self, x):
        X, single = _as_batch(np.asarray(x, dtype=float))
        return _unbatch(Sphere2._embed(X), single)


def manifold_from_dict(d):
    d = dict(d)
    variant = d.pop("variant", None)
    if variant == "EuclideanN":
        return Euclidean(d.pop("dim", 2))
    if variant == "HalfPlaneH2":
        return HalfPlane()
    if variant == "Sphere2":
        return Sphere2()
    if variant == "EmbeddedSubmanifold":
        if d.get("base") == "Sphere2":
            return AmbientSphere()
        raise ValueError(f"unknown embedded base {d.get('base')!r}")
    raise ValueError(f"unknown manifold variant {variant!r}")


# ---------------------------------------------------------------------------
# Functional surface.

def metric_inner(M, x, u, v):
    return M.inner(x, u, v)


def exp_map(M, x, v):
    return M.exp(x, v)


def log_map(M, x, y):
    return M.log(x, y)


def distance(M, x, y):
    return M.dist(x, y)


def parallel_transport(M, x, y, v):
    return M.transport(x, y, v)


def convexity_radius(M, x=None):
    return M.convexity_radius(x)


def embed(M, x):
    return M.embed(x)


def tangent_push(M, x, v):
    return M.tangent_push(x, v)


def tangent_project(M, x, w):
    return M.tangent_project(x, w)


def ambient_normal_space(M, x):
    return M.ambient_normal_space(x)


def covariant_accel_fd(M, p_prev, p, p_next, h):
    """Second covariant difference ``(log_p p_next + log_p p_prev) / h^2``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    return (M.log(p, p_next) + M.log(p, p_prev)) / h**2


def comparison_factor(Delta, d):
    """``2 sqrt(Delta) d cot(sqrt(Delta) d)``, the curvature comparison coefficient."""
    if Delta < 0 or d < 0:
        raise ValueError("comparison_factor needs Delta >= 0 and d >= 0")
    x = math.sqrt(Delta) * d
    if x >= math.pi:
        raise GeometryError(f"sqrt(Delta)*d = {x:.6g} reaches the cotangent pole")
    if x < 1e-4:
        q = Delta * d * d
        return 2.0 * (1.0 - q / 3.0 - q * q / 45.0)
    return 2.0 * x / math.tan(x)
