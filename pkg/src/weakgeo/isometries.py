"""Registered isometries of the model manifolds and their action on sets and cones."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifolds import AmbientSphere, Euclidean, HalfPlane, Sphere2
from .proxsets import (ConeRep, EuclideanAnnulus, EuclideanBall, EuclideanHalfSpace,
                       HyperbolicStrip, _Cap)


class UnregisteredIsometryError(TypeError):
    pass


def rotation_matrix(axis, angle):
    """Rodrigues rotation about ``axis`` by ``angle``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


class Isometry:
    def apply(self, x):
        raise NotImplementedError

    def push(self, x, v):
        """Differential at ``x`` applied to ``v``."""
        raise NotImplementedError

    def image_set(self, S):
        raise NotImplementedError

    def image_manifold(self, M):
        return M


@dataclass(frozen=True)
class HalfPlaneTranslation(Isometry):
    c: float

    def apply(self, x):
        y = np.array(x, dtype=float, copy=True)
        y[..., 0] += self.c
        return y

    def push(self, x, v):
        return np.array(v, dtype=float, copy=True)

    def image_set(self, S):
        if not isinstance(S, HyperbolicStrip):
            raise UnregisteredIsometryError(f"no image rule for {S.variant}")
        return S


@dataclass(frozen=True)
class HalfPlaneDilation(Isometry):
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("dilation factor must be positive")

    def apply(self, x):
        return self.lam * np.asarray(x, dtype=float)

    def push(self, x, v):
        return self.lam * np.asarray(v, dtype=float)

    def image_set(self, S):
        if not isinstance(S, HyperbolicStrip):
            raise UnregisteredIsometryError(f"no image rule for {S.variant}")
        return HyperbolicStrip(self.lam * S.y_lo, self.lam * S.y_hi, S.boundary_tol)


@dataclass(frozen=True, eq=False)
class EuclideanRigidMotion(Isometry):
    Q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if not np.allclose(Q.T @ Q, np.eye(len(Q)), atol=1e-12):
            raise ValueError("rigid motion needs an orthogonal matrix")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    def apply(self, x):
        return np.asarray(x, dtype=float) @ self.Q.T + self.b

    def push(self, x, v):
        return np.asarray(v, dtype=float) @ self.Q.T

    def image_set(self, S):
        Q, b = self.Q, self.b
        if isinstance(S, EuclideanBall):
            return EuclideanBall(tuple((Q @ np.asarray(S.center) + b).tolist()), S.r, S.boundary_tol)
        if isinstance(S, EuclideanAnnulus):
            return EuclideanAnnulus(S.r1, S.r2, tuple((Q @ np.asarray(S.center) + b).tolist()),
                                    S.boundary_tol)
        if isinstance(S, EuclideanHalfSpace):
            n = Q @ np.asarray(S.normal)
            return EuclideanHalfSpace(tuple(n.tolist()), S.offset + float(n @ b), S.boundary_tol)
        raise UnregisteredIsometryError(f"no image rule for {S.variant}")


@dataclass(frozen=True, eq=False)
class SphereRotation(Isometry):
    """Rotation of the unit sphere, acting on either sphere model."""

    R: np.ndarray
    model: object = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if not (np.allclose(R.T @ R, np.eye(3), atol=1e-12) and np.linalg.det(R) > 0):
            raise ValueError("sphere rotation needs a proper orthogonal 3x3 matrix")
        object.__setattr__(self, "R", R)
        if self.model is None:
            object.__setattr__(self, "model", AmbientSphere())

    @classmethod
    def about(cls, axis, angle, model=None):
        return cls(rotation_matrix(axis, angle), model)

    def apply(self, x):
        M = self.model
        if isinstance(M, Sphere2):
            return M.from_ambient(M.embed(x) @ self.R.T)
        return np.asarray(x, dtype=float) @ self.R.T

    def push(self, x, v):
        M = self.model
        if isinstance(M, Sphere2):
            y = self.apply(x)
            return M.tangent_project(y, M.tangent_push(x, v) @ self.R.T)
        return np.asarray(v, dtype=float) @ self.R.T

    def image_set(self, S):
        if not isinstance(S, _Cap):
            raise UnregisteredIsometryError(f"no image rule for {S.variant}")
        axis = tuple((self.R @ np.asarray(S.axis)).tolist())
        return type(S)(theta0=S.theta0, axis=axis, boundary_tol=S.boundary_tol, manifold=S.manifold)


def check_registered(iso, M):
    ok = ((isinstance(iso, (HalfPlaneTranslation, HalfPlaneDilation)) and isinstance(M, HalfPlane))
          or (isinstance(iso, EuclideanRigidMotion) and isinstance(M, Euclidean)
              and iso.Q.shape[0] == M.dim)
          or (isinstance(iso, SphereRotation) and type(iso.model) is type(M)))
    if not ok:
        raise UnregisteredIsometryError(f"{type(iso).__name__} is not registered on {M!r}")


def pushforward_cone(iso, C: ConeRep, M) -> ConeRep:
    """Image of an intrinsic cone under the differential of ``iso``."""
    if not isinstance(iso, Isometry):
        raise UnregisteredIsometryError(f"{type(iso).__name__} is not a registered isometry")
    check_registered(iso, M)
    apex = iso.apply(C.apex)
    gens = iso.push(C.apex, C.generators) if len(C.generators) else C.generators.copy()
    sub = iso.push(C.apex, C.subspace) if len(C.subspace) else C.subspace.copy()
    return ConeRep(apex, gens, sub, M.metric_matrix(apex))


def pushforward_curve(iso, gamma):
    from .curves import DiscreteCurve
    check_registered(iso, gamma.manifold)
    nodes = iso.apply(gamma.nodes)
    if gamma.closed:
        nodes[-1] = nodes[0]
    return DiscreteCurve(gamma.manifold, nodes, gamma.closed)
