"""Uniformly sampled curves, their functionals and admissible variations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .manifolds import GeometryError, Manifold, manifold_from_dict


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Nodes ``nodes[i]`` at parameters ``t_i = i/N``; closed curves repeat node 0 as node N."""

    manifold: Manifold
    nodes: np.ndarray
    closed: bool = False

    def __post_init__(self):
        nodes = np.array(self.manifold.check(self.nodes), dtype=float, copy=True)
        if nodes.ndim != 2 or len(nodes) < 3:
            raise ValueError("a discrete curve needs N >= 2, i.e. at least 3 nodes")
        if self.closed and not np.array_equal(nodes[0], nodes[-1]):
            raise ValueError("closed curve must repeat node 0 exactly as node N")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def N(self):
        return len(self.nodes) - 1

    @property
    def t(self):
        return np.arange(self.N + 1) / self.N

    def with_nodes(self, nodes):
        nodes = np.array(nodes, dtype=float)
        if self.closed:
            nodes[-1] = nodes[0]
        return DiscreteCurve(self.manifold, nodes, self.closed)

    def edge_velocities(self):
        """``N log_{x_i} x_{i+1}`` for i = 0..N-1."""
        P = self.nodes
        return self.N * self.manifold.log(P[:-1], P[1:])

    def __eq__(self, other):
        return (isinstance(other, DiscreteCurve) and self.manifold == other.manifold
                and self.closed == other.closed and np.array_equal(self.nodes, other.nodes))

    __hash__ = None


def closed_curve(M, pts):
    """Closed curve from N distinct points (node N is appended as a copy of node 0)."""
    pts = np.asarray(pts, dtype=float)
    return DiscreteCurve(M, np.vstack([pts, pts[:1]]), closed=True)


# ---------------------------------------------------------------------------
# Functionals

def speed_profile(gamma):
    P = gamma.nodes
    return gamma.N * gamma.manifold.dist(P[:-1], P[1:])


def energy(gamma):
    s = speed_profile(gamma)
    return float(np.sum(s**2) / (2 * gamma.N))


def length(gamma):
    return float(np.sum(speed_profile(gamma)) / gamma.N)


def speed_variation(gamma):
    s = speed_profile(gamma)
    m = s.mean()
    return float((s.max() - s.min()) / m) if m > 0 else 0.0


def _check_pair(gamma, eta):
    if gamma.N != eta.N or gamma.manifold != eta.manifold:
        raise ValueError("curves must share the manifold and node count")


def sup_distance(gamma, eta):
    _check_pair(gamma, eta)
    return float(np.max(gamma.manifold.dist(gamma.nodes, eta.nodes)))


def transported_gap(gamma, eta):
    """Discrete ``int |L_{eta->gamma} eta' - gamma'|^2``."""
    _check_pair(gamma, eta)
    M = gamma.manifold
    Ve = M.transport(eta.nodes[:-1], gamma.nodes[:-1], eta.edge_velocities())
    W = Ve - gamma.edge_velocities()
    return float(np.sum(M.inner(gamma.nodes[:-1], W, W)) / gamma.N)


# ---------------------------------------------------------------------------
# Construction

def seed_curve(M, S, x, y, N):
    """Projection onto ``S`` of the geodesic samples from x to y."""
    if N < 2:
        raise ValueError("N must be at least 2")
    x = np.asarray(M.check(x), dtype=float)
    y = np.asarray(M.check(y), dtype=float)
    S.require_member(np.vstack([x, y]), "endpoint")
    s = np.arange(N + 1) / N
    v = M.log(x, y)
    P = M.exp(np.broadcast_to(x, (N + 1, len(x))), s[:, None] * v)
    P = S.project(P)
    P[0], P[-1] = x, y
    return DiscreteCurve(M, P)


def sample_curve(M, fn, N, closed=False):
    """Curve from a parametrization ``fn(t) -> coords`` evaluated at ``t_i = i/N``."""
    t = np.arange(N + 1) / N
    P = np.array([fn(ti) for ti in t], dtype=float)
    if closed:
        P[-1] = P[0]
    return DiscreteCurve(M, P, closed)


def _locate(sigma, tau):
    """Segment index and fraction for arclength positions ``tau`` in the table ``sigma``."""
    k = np.clip(np.searchsorted(sigma, tau, side="right") - 1, 0, len(sigma) - 2)
    seg = sigma[k + 1] - sigma[k]
    frac = np.where(seg > 0, (tau - sigma[k]) / np.where(seg > 0, seg, 1.0), 0.0)
    return k, np.clip(frac, 0.0, 1.0)


def _nodes_at(gamma, sigma, tau):
    M = gamma.manifold
    P = gamma.nodes
    k, f = _locate(sigma, tau)
    V = M.log(P[k], P[k + 1])
    return M.exp(P[k], f[:, None] * V)


def reparametrize_constant_speed(gamma, refine_iters=200):
    """Constant-speed curve tracing the same polyline.

    The arclength table of the polyline is inverted at equispaced targets and
    nodes are placed by geodesic interpolation inside segments.  On a curved
    polyline the new chords cut corners, so a short fixed-point pass then
    redistributes the arclength positions until all chords are equal.
    """
    M = gamma.manifold
    N = gamma.N
    chords = M.dist(gamma.nodes[:-1], gamma.nodes[1:])
    sigma = np.concatenate([[0.0], np.cumsum(chords)])
    L = sigma[-1]
    if not L > 0:
        raise GeometryError("cannot reparametrize a zero-length curve")
    gaps = np.full(N, L / N)
    P = None
    relax, spread_prev = 1.0, math.inf
    for _ in range(refine_iters + 1):
        tau = np.concatenate([[0.0], np.cumsum(gaps)])
        tau[-1] = L
        P = _nodes_at(gamma, sigma, tau)
        P[0], P[-1] = gamma.nodes[0], gamma.nodes[-1]
        ch = M.dist(P[:-1], P[1:])
        spread = (ch.max() - ch.min()) / ch.mean()
        if spread <= 1e-13:
            break
        if spread > spread_prev:
            # near sharp corners a chord responds sublinearly to its gap; damp the update
            relax = max(relax / 2, 1 / 16)
        spread_prev = spread
        gaps = gaps * (ch.mean() / np.maximum(ch, 1e-300)) ** relax
        gaps *= L / gaps.sum()
    return DiscreteCurve(M, P, gamma.closed)


def bump(u):
    """Smooth bump ``exp(1 - 1/(1 - u^2))`` on |u| < 1, zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def window_weights(gamma, t0, h):
    t = gamma.t
    if gamma.closed:
        dt = (t - t0 + 0.5) % 1.0 - 0.5
    else:
        dt = t - t0
    w = bump(dt / h)
    if gamma.closed:
        w[-1] = w[0]
    else:
        w[0] = w[-1] = 0.0
    return w


def transported_field(gamma, k0, w0):
    """Parallel field along the node sequence, equal to ``w0`` at node ``k0``."""
    M = gamma.manifold
    P = gamma.nodes
    n = gamma.N + 1 if not gamma.closed else gamma.N
    W = np.zeros((len(P), P.shape[1]))
    W[k0] = w0
    if gamma.closed:
        # walk half the loop each way so the seam sits opposite to k0
        half = n // 2
        for step in range(1, half + 1):
            i, j = (k0 + step) % n, (k0 + step - 1) % n
            W[i] = M.transport(P[j], P[i], W[j])
        for step in range(1, n - half):
            i, j = (k0 - step) % n, (k0 - step + 1) % n
            W[i] = M.transport(P[j], P[i], W[j])
        W[-1] = W[0]
        return W
    for i in range(k0 + 1, len(P)):
        W[i] = M.transport(P[i - 1], P[i], W[i - 1])
    for i in range(k0 - 1, -1, -1):
        W[i] = M.transport(P[i + 1], P[i], W[i + 1])
    return W


def local_perturbation(gamma, S, t0, h, amplitude, rng_seed):
    """Projected variation ``P_S(exp(amplitude b((t - t0)/h) W))`` supported near ``t0``."""
    if h <= 0:
        raise ValueError("window half-width must be positive")
    w = window_weights(gamma, t0, h)
    if amplitude == 0 or not np.any(w > 0):
        return gamma
    M = gamma.manifold
    rng = np.random.default_rng(rng_seed)
    t = gamma.t
    dt = (t - t0 + 0.5) % 1.0 - 0.5 if gamma.closed else t - t0
    k0 = int(np.argmin(np.abs(dt[:-1] if gamma.closed else dt)))
    w0 = M.random_tangent(rng, gamma.nodes[k0])
    active = np.flatnonzero(w > 0)
    if gamma.closed:
        active = active[active < gamma.N]
    P = np.array(gamma.nodes)
    # direct transport from the seed node; the window is short, so this stays well inside
    # the injectivity radius and matches transport along the curve to O(h^2)
    W = M.transport(np.broadcast_to(P[k0], P[active].shape), P[active], w0)
    moved = M.exp(P[active], amplitude * w[active, None] * W)
    P[active] = S.project(moved)
    return gamma.with_nodes(P)


def random_bent_curve(M, S, gamma, rng, amplitude, n_modes=3):
    """A smooth admissible deformation of ``gamma`` with fixed endpoints (test generator)."""
    t = gamma.t
    V = np.zeros_like(gamma.nodes)
    for _ in range(n_modes):
        k = rng.integers(1, 5)
        coef = rng.standard_normal(gamma.nodes.shape[1]) / k**2
        V += np.sin(k * math.pi * t)[:, None] * coef
    V = M.to_tangent(gamma.nodes, V)
    n = M.norm(gamma.nodes, V).max()
    if n > 0:
        V *= amplitude / n
    P = S.project(M.exp(gamma.nodes, V))
    P[0], P[-1] = gamma.nodes[0], gamma.nodes[-1]
    return DiscreteCurve(M, P, gamma.closed)


# ---------------------------------------------------------------------------
# Serialization

def curve_to_dict(gamma, residual=None):
    meta = {"energy": energy(gamma), "length": length(gamma)}
    if residual is not None:
        meta["residual"] = float(residual)
    return {"manifold": gamma.manifold.to_dict(), "N": gamma.N, "closed": bool(gamma.closed),
            "nodes": gamma.nodes.tolist(), "meta": meta}


def curve_from_dict(d):
    for key in ("manifold", "N", "closed", "nodes"):
        if key not in d:
            raise ValueError(f"curve document is missing {key!r}")
    M = manifold_from_dict(d["manifold"])
    nodes = np.asarray(d["nodes"], dtype=float)
    if len(nodes) != int(d["N"]) + 1:
        raise ValueError(f"curve document has {len(nodes)} nodes but N = {d['N']}")
    return DiscreteCurve(M, nodes, bool(d["closed"]))


def curve_to_json(gamma, residual=None):
    return json.dumps(curve_to_dict(gamma, residual), indent=2) + "\n"


def curve_from_json(text):
    return curve_from_dict(json.loads(text))


def curve_to_csv(gamma):
    names = gamma.manifold.coord_names
    lines = ["t," + ",".join(names)]
    for t, row in zip(gamma.t, gamma.nodes):
        lines.append(",".join(format(v, ".17g") for v in (t, *row)))
    return "\n".join(lines) + "\n"
