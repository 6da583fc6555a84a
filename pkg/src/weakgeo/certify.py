"""Numerical certificates for weak geodesics and the surrounding inequalities."""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .curves import (energy, length, local_perturbation, speed_profile, speed_variation,
                     sup_distance, transported_gap)
from .isometries import pushforward_curve
from .manifolds import AmbientSphere, GeometryError, Sphere2
from .proxsets import certified_phi, cone_distance
from .solver import discrete_accelerations, movable_indices, residual_vectors


@dataclass(frozen=True)
class CertifyTolerances:
    residual: float = 1e-5
    containment: float = 1e-9
    accel: float = 1e-6
    speed: float = 1e-3
    dtnorm: float = 1e-5
    velocity: float = 1e-6

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    location: object = None

    def to_dict(self):
        return {"name": self.name, "pass": bool(self.passed), "measured": float(self.measured),
                "tolerance": float(self.tolerance), "location": self.location}


@dataclass
class CertificateReport:
    entries: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def overall(self):
        return bool(self.entries) and all(e.passed for e in self.entries)

    def add(self, name, measured, tolerance, passed=None, location=None):
        measured = float(measured)
        if not math.isfinite(measured):
            raise ValueError(f"check {name}: measured value must be finite, got {measured}")
        if passed is None:
            passed = measured <= tolerance
        self.entries.append(Check(name, bool(passed), measured, float(tolerance), location))
        return self.entries[-1]

    def extend(self, other, prefix=""):
        for e in other.entries:
            self.entries.append(Check(prefix + e.name, e.passed, e.measured, e.tolerance,
                                      e.location))

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self):
        return {"overall": self.overall, "checks": [e.to_dict() for e in self.entries]}

    def table(self):
        w = max([len(e.name) for e in self.entries] + [5])
        rows = [f"{'check':<{w}}  {'pass':<5} {'measured':>13} {'tolerance':>13}  location"]
        for e in self.entries:
            loc = "" if e.location is None else str(e.location)
            rows.append(f"{e.name:<{w}}  {('yes' if e.passed else 'NO'):<5} "
                        f"{e.measured:>13.6g} {e.tolerance:>13.6g}  {loc}")
        rows.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(rows)


def _argmax(values, idx=None):
    k = int(np.argmax(values))
    return int(idx[k]) if idx is not None else k


def _node_speeds(gamma):
    """Speed attached to each stencil node: the larger of its two edge speeds."""
    s = speed_profile(gamma)
    idx = movable_indices(gamma)
    prev = (idx - 1) % gamma.N
    return idx, np.maximum(s[prev], s[idx % gamma.N])


def certify_weak_geodesic(gamma, S, tols=None, phi=None):
    tols = tols or CertifyTolerances()
    rep = CertificateReport()
    M = gamma.manifold
    dist_out = np.atleast_1d(S.distance_to(gamma.nodes))
    rep.add("containment", dist_out.max(), tols.containment, location=_argmax(dist_out))
    if dist_out.max() > S.boundary_tol:
        rep.add("stencil", 1.0, 0.0, passed=False, location="nodes outside the set")
        return rep
    phi = certified_phi(S).value if phi is None else phi
    rep.details["phi"] = phi
    try:
        idx, A, proj, dist = residual_vectors(gamma, S)
    except GeometryError as exc:
        rep.add("stencil", 1.0, 0.0, passed=False, location=str(exc))
        return rep
    X = gamma.nodes[idx]
    acc = M.norm(X, A)
    s = speed_profile(gamma)
    bound = 2 * phi * s.max() ** 2 + tols.accel
    rep.add("acceleration_bound", acc.max(), bound, location=_argmax(acc, idx))
    rep.add("residual", dist.max(), tols.residual, location=_argmax(dist, idx))
    rep.add("constant_speed", speed_variation(gamma), tols.speed)
    _, s_node = _node_speeds(gamma)
    excess = M.norm(X, proj) - 2 * phi * s_node**2
    rep.add("dtnorm_bound", excess.max(), tols.dtnorm, location=_argmax(excess, idx))
    rep.details["mean_acceleration"] = A[len(A) // 4: 3 * len(A) // 4 + 1].mean(axis=0).tolist()
    rep.details["max_acceleration_norm"] = float(acc.max())
    return rep


# coefficients of the fourth-order one-sided first derivative
_ONE_SIDED = np.array([-25 / 12, 4.0, -3.0, 4 / 3, -1 / 4])


def endpoint_velocities(gamma):
    """One-sided velocity estimates at t = 0+ and t = 1- in normal coordinates at node 0."""
    M = gamma.manifold
    P = gamma.nodes
    N = gamma.N
    base = np.broadcast_to(P[0], (5, P.shape[1]))
    fwd = M.log(base, P[:5])
    bwd = M.log(base, P[N - np.arange(5)])
    return N * _ONE_SIDED @ fwd, -N * _ONE_SIDED @ bwd


def certify_closed_weak_geodesic(gamma, S, tols=None, phi=None):
    tols = tols or CertifyTolerances()
    if not gamma.closed:
        rep = CertificateReport()
        rep.add("closed_structure", 1.0, 0.0, passed=False, location="curve is open")
        return rep
    rep = certify_weak_geodesic(gamma, S, tols, phi)
    gap = float(np.max(np.abs(gamma.nodes[0] - gamma.nodes[-1])))
    rep.add("closure_exact", gap, 0.0, passed=gap == 0.0, location=0)
    try:
        vp, vm = endpoint_velocities(gamma)
    except GeometryError as exc:
        rep.add("velocity_match", 1.0, tols.velocity, passed=False, location=str(exc))
        return rep
    mismatch = float(gamma.manifold.norm(gamma.nodes[0], vp - vm))
    rep.add("velocity_match", mismatch, tols.velocity, location=0)
    return rep


def probe_local_minimality(gamma, S, trials=500, h=0.05, amplitude=1e-2, rng_seed=0,
                           tol=1e-9):
    """Monte-Carlo search for windowed admissible variations that lower the energy."""
    rng = np.random.default_rng(rng_seed)
    E0 = energy(gamma)
    gaps, t0s, skipped = [], [], 0
    for _ in range(trials):
        t0 = float(rng.random())
        seed = int(rng.integers(2**63))
        try:
            eta = local_perturbation(gamma, S, t0, h, amplitude, seed)
        except GeometryError:
            skipped += 1
            continue
        gaps.append(energy(eta) - E0)
        t0s.append(t0)
    rep = CertificateReport()
    executed = (trials - skipped) / trials if trials else 0.0
    rep.add("trials_executed", executed, 0.9, passed=executed >= 0.9)
    if gaps:
        k = int(np.argmin(gaps))
        rep.add("min_energy_gap", gaps[k], -tol, passed=gaps[k] >= -tol,
                location=round(t0s[k], 6))
        rep.details.update(min_gap=float(gaps[k]), t0=t0s[k], executed=trials - skipped)
    else:
        rep.add("min_energy_gap", 0.0, -tol, passed=False, location="no trial executed")
    return rep


# ---------------------------------------------------------------------------
# Embedded checks

def _ambient_model(S):
    M = S.manifold
    if isinstance(M, Sphere2):
        return M, M.embed, M.from_ambient
    if isinstance(M, AmbientSphere):
        return M, (lambda x: np.asarray(x, float)), (lambda X: np.asarray(X, float))
    M.embed(np.zeros(M.dim))  # Euclidean identity embedding or NoEmbeddingError
    return M, (lambda x: np.asarray(x, float)), (lambda X: np.asarray(X, float))


def project_ambient(S, Z):
    """Nearest point of ``S`` in the ambient space (sphere sets: project the radial image)."""
    M, _, from_amb = _ambient_model(S)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if isinstance(M, (Sphere2, AmbientSphere)):
        U = Z / np.linalg.norm(Z, axis=-1, keepdims=True)
        return M.embed(S.project(from_amb(U))) if isinstance(M, Sphere2) else S.project(U)
    return S.project(Z)


def _chord_factor(eta):
    """Bound on geodesic over chord distance on the unit sphere for chords up to ``eta``."""
    return 2 * math.asin(eta / 2) / eta


def _sample_near(S, rng, x, radius, n):
    M = S.manifold
    X = np.broadcast_to(np.asarray(x, float), (n, len(x)))
    r = radius * np.sqrt(rng.random(n))
    Y = M.exp_endpoint(X, M.random_tangent(rng, X) * r[:, None])
    Y = Y[M.in_domain(Y)]
    return Y[S.contains(Y, 0.0) & (M.dist(X[:len(Y)], Y) > 1e-9)]


@functools.lru_cache(maxsize=8)
def normal_sum_second_order_constant(eta=0.5, seed=20240601, n=4000):
    """Fitted sup of ``||D^2 exp^{-1}||`` over chords up to ``eta`` on the unit sphere.

    Measured once as ``2 ||y - x - log_x y|| / d^2 - kappa`` with ``kappa = 1``,
    padded by 10 percent and a small floor, then reused for every check.
    """
    M = AmbientSphere()
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    d = 2 * math.asin(eta / 2) * np.sqrt(rng.random(len(X)))
    d = np.maximum(d, 1e-3)
    Y = M.exp(X, M.random_tangent(rng, X) * d[:, None])
    R = np.linalg.norm(Y - X - M.log(X, Y), axis=1)
    fitted = float(np.max(2 * R / d**2 - 1.0))
    return 1.1 * max(fitted, 0.0) + 1e-3


def check_normal_sum(S, n_points=100, samples=1000, rng_seed=0, tol=1e-6, eta=0.5,
                     intrinsic_sign=1.0):
    """Both inclusions of the ambient proximal normal cone decomposition.

    Forward: ``v = a g + b n`` with ``a >= 0`` (``a <= 0`` when ``intrinsic_sign``
    is negative, the negative control) obeys the ambient proximal inequality
    with the frozen constant.  Reverse: ambient proximal normals realised as
    ``z - P(z)`` have tangential parts inside the intrinsic cone.
    """
    M, emb, from_amb = _ambient_model(S)
    rng = np.random.default_rng(rng_seed)
    center, radius = S.phi_region()
    P = S.snap_to_boundary(
        M.exp(np.broadcast_to(np.asarray(center, float), (n_points, len(center))),
              M.random_tangent(rng, np.broadcast_to(np.asarray(center, float),
                                                    (n_points, len(center)))) *
              rng.uniform(0, 2.0, n_points)[:, None]))
    phi = certified_phi(S).value
    K = _chord_factor(eta)
    kappa = 1.0 if isinstance(M, (Sphere2, AmbientSphere)) else 0.0
    C = normal_sum_second_order_constant(eta) if kappa else 0.0
    geo_radius = 2 * math.asin(eta / 2) if kappa else eta
    violations, checked, worst = 0, 0, -math.inf
    worst_loc = None
    rev_worst, rev_loc, rev_count = 0.0, None, 0
    for k, x in enumerate(P):
        cone = S.ambient_normal_cone(x)
        X = cone.apex
        Y = _sample_near(S, rng, x, geo_radius, samples)
        Ya = emb(Y)
        keep = np.linalg.norm(Ya - X, axis=1) <= eta
        Ya = Ya[keep]
        a = intrinsic_sign * rng.random()
        g = cone.generators[0] if len(cone.generators) else np.zeros_like(X)
        v = a * g
        for nvec in cone.subspace:
            v = v + rng.uniform(-1, 1) * nvec
        delta = phi * abs(a)
        sigma = K**2 * (delta + np.linalg.norm(v) * (kappa + C) / 2)
        diff = Ya - X
        lhs = diff @ v
        rhs = sigma * np.sum(diff**2, axis=1)
        excess = lhs - rhs
        checked += len(excess)
        bad = int(np.sum(excess > 1e-14))
        violations += bad
        if len(excess) and excess.max() > worst:
            worst, worst_loc = float(excess.max()), k
        # reverse inclusion from exterior and interior ambient points near x
        Z = X + 0.2 * rng.standard_normal((20, len(X)))
        Z = Z[np.linalg.norm(Z, axis=1) > 0.3] if kappa else Z
        try:
            proj = project_ambient(S, Z)
        except GeometryError:
            continue
        for z, p in zip(Z, proj):
            lam = rng.uniform(0.1, 10.0)
            w = lam * (z - p)
            p_int = from_amb(p[None, :])[0] if isinstance(M, Sphere2) else p
            C_int = S.proximal_normal_cone(p_int)
            wt = M.tangent_project(p_int, w) if kappa else w
            if isinstance(M, AmbientSphere):
                wt = M.to_tangent(p_int, w)
            dcone = cone_distance(C_int, wt)
            rev_count += 1
            if dcone > rev_worst:
                rev_worst, rev_loc = dcone, k
    rep = CertificateReport()
    rep.add("forward_violations", violations, 0, passed=violations == 0 and checked > 0,
            location=worst_loc)
    rep.add("reverse_tangential_distance", rev_worst, tol, location=rev_loc)
    rep.details.update(forward_samples=checked, worst_excess=worst, reverse_samples=rev_count,
                       K=K, C=C, kappa=kappa)
    if checked < 10 * n_points:
        rep.add("sampling", checked, 10 * n_points, passed=False)
    return rep


def check_extrinsic(gamma, S, tol=1e-3):
    """Tangential part of the ambient second difference versus the intrinsic acceleration."""
    M = gamma.manifold
    rep = CertificateReport()
    idx = movable_indices(gamma)
    N = gamma.N
    E = M.embed(gamma.nodes)
    prev = (idx - 1) % N if gamma.closed else idx - 1
    D2 = N**2 * (E[idx + 1] - 2 * E[idx] + E[prev])
    try:
        A = discrete_accelerations(gamma, idx)
    except GeometryError as exc:
        rep.add("stencil", 1.0, 0.0, passed=False, location=str(exc))
        return rep
    X = gamma.nodes[idx]
    T = M.tangent_project(X, D2)
    # both stencils are second order; their gap is |a| times the squared chord length
    _, s_node = _node_speeds(gamma)
    allowance = M.norm(X, A) * (s_node / N) ** 2
    mismatch = M.norm(X, T - A) - allowance
    rep.add("tangential_match", mismatch.max(), tol, location=_argmax(mismatch, idx))
    out = np.atleast_1d(S.distance_to(X))
    if out.max() > S.boundary_tol:
        rep.add("containment", out.max(), S.boundary_tol, location=_argmax(out, idx))
        return rep
    cone_d = np.array([cone_distance(S.ambient_normal_cone(x), d2) for x, d2 in zip(X, D2)])
    rep.add("ambient_cone_residual", cone_d.max(), tol, location=_argmax(cone_d, idx))
    return rep


def check_isometry_invariance(iso, gamma, S, tols=None):
    from .solver import residual
    rep = CertificateReport()
    gamma2 = pushforward_curve(iso, gamma)
    S2 = iso.image_set(S)
    r1 = residual(gamma, S)
    r2 = residual(gamma2, S2)
    rep.add("residual_ratio", r2, 2 * r1 + 1e-12)
    cert = (certify_closed_weak_geodesic if gamma.closed else certify_weak_geodesic)(
        gamma2, S2, tols)
    rep.extend(cert, prefix="image.")
    rep.details.update(original_residual=r1, image_residual=r2)
    return rep


# ---------------------------------------------------------------------------
# Scalar and curve inequalities

def sup_sobolev_slack(t, g):
    """``sqrt((b - a)/2) ||g'||_2 - sup |g|`` for a piecewise-linear g vanishing at the ends."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    dg = np.diff(g)
    dt = np.diff(t)
    l2 = math.sqrt(float(np.sum(dg**2 / dt)))
    return math.sqrt((t[-1] - t[0]) / 2) * l2 - float(np.max(np.abs(g)))


def uniform_gap_slack(gamma, eta, h):
    """``h * transported_gap - sup_distance^2`` for a pair differing inside a window of half-width h."""
    return h * transported_gap(gamma, eta) - sup_distance(gamma, eta) ** 2


def energy_length_defect(gamma):
    """``2 E - L^2`` (nonnegative, zero exactly at constant speed)."""
    return 2 * energy(gamma) - length(gamma) ** 2


def dtnorm_excess(gamma, S, phi=None):
    """Nodewise ``|P_N(a_i)| - 2 phi s_i^2``."""
    phi = certified_phi(S).value if phi is None else phi
    idx, A, proj, _ = residual_vectors(gamma, S)
    _, s_node = _node_speeds(gamma)
    return gamma.manifold.norm(gamma.nodes[idx], proj) - 2 * phi * s_node**2
