"""Projected energy descent for endpoint and closed weak geodesics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import spsolve

from .curves import DiscreteCurve, energy, length, seed_curve
from .manifolds import AmbientSphere, GeometryError
from .proxsets import cone_distance_single

CONVERGED = "converged"
MAX_ITERS = "max_iters"
STEP_UNDERFLOW = "step_underflow"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 10_000
    residual_tol: float = 1e-6
    initial_step: float | None = None   # None means 1e-2 / N^2
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    min_step: float = 1e-14
    precondition: bool = True
    shift: float = 1.0                  # mass shift of the periodic preconditioner
    degenerate_ratio: float = 1e-3

    def __post_init__(self):
        for name in ("max_iters", "residual_tol", "armijo_c", "min_step", "shift",
                     "degenerate_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"solver option {name} must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("solver option initial_step must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class SolveResult:
    curve: DiscreteCurve
    status: str
    residual_history: list = field(default_factory=list)
    final_energy: float = float("nan")
    iterations: int = 0
    energy_history: list = field(default_factory=list)

    @property
    def residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")


# ---------------------------------------------------------------------------
# Discrete acceleration and residual

def movable_indices(gamma):
    N = gamma.N
    return np.arange(N) if gamma.closed else np.arange(1, N)


def discrete_accelerations(gamma, idx=None):
    """``N^2 (log_{x_i} x_{i+1} + log_{x_i} x_{i-1})`` at the stencil nodes."""
    M = gamma.manifold
    P = gamma.nodes
    N = gamma.N
    idx = movable_indices(gamma) if idx is None else np.asarray(idx)
    prev = (idx - 1) % N if gamma.closed else idx - 1
    return N**2 * (M.log(P[idx], P[idx + 1]) + M.log(P[idx], P[prev]))


def residual_vectors(gamma, S, xi=None):
    """Per-node accelerations, cone components and cone distances."""
    M = gamma.manifold
    idx = movable_indices(gamma)
    X = gamma.nodes[idx]
    A = discrete_accelerations(gamma, idx)
    if xi is not None:
        A = A + np.asarray(xi, dtype=float)[idx]
    G = S.normal_generator(X)
    dist, proj = cone_distance_single(M, X, A, G)
    return idx, A, proj, dist


def residual(gamma, S, xi=None):
    """Largest distance of the (shifted) discrete acceleration to the normal cone."""
    return float(np.max(residual_vectors(gamma, S, xi)[3]))


# ---------------------------------------------------------------------------
# Descent

class _Preconditioner:
    """Inverse of the discrete H1 operator ``N^2 tridiag(-1, 2, -1)`` (periodic + shift for loops).

    With per-node linear constraints (active contacts, the radial direction of
    an ambient sphere) the system is solved on the constraint null space, so
    the direction never pushes a node into the obstacle it is resting on.
    """

    def __init__(self, N, closed, shift, dim):
        m = N if closed else N - 1
        T = 2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
        if closed:
            T[0, -1] = T[-1, 0] = -1.0
            T = T + (shift / N**2) * np.eye(m)
        self.factor = cho_factor(N**2 * T)
        self.dim = dim
        self.H = sparse.kron(sparse.csr_matrix(N**2 * T), sparse.identity(dim), format="csr")

    def __call__(self, V, constraints=None):
        if constraints is None or not any(len(c) for c in constraints):
            return cho_solve(self.factor, V)
        d = self.dim
        rows, cols, vals = [], [], []
        col = 0
        for j, C in enumerate(constraints):
            if len(C):
                basis = np.linalg.svd(np.atleast_2d(C))[2][len(C):]
            else:
                basis = np.eye(d)
            for b in basis:
                rows.extend(range(j * d, (j + 1) * d))
                cols.extend([col] * d)
                vals.extend(b)
                col += 1
        Z = sparse.csr_matrix((vals, (rows, cols)), shape=(len(constraints) * d, col))
        K = (Z.T @ self.H @ Z).tocsc()
        u = spsolve(K, Z.T @ V.ravel())
        return (Z @ u).reshape(V.shape)


def _constraints(gamma, S, idx, proj):
    """Covectors that a preconditioned direction must annihilate at each movable node."""
    M = gamma.manifold
    X = gamma.nodes[idx]
    out = [[] for _ in idx]
    active = np.flatnonzero(np.any(proj != 0, axis=1))
    if len(active):
        G = S.normal_generator(X[active])
        cov = np.einsum("nij,nj->ni", M.metric_matrix(X[active]), G)
        for j, c in zip(active, cov):
            out[j].append(c)
    if isinstance(M, AmbientSphere):
        for j, x in enumerate(X):
            out[j].append(x)
    return [np.array(c) for c in out]


def descent_step(gamma, S, step, direction=None):
    """Move every movable node to ``P_S(exp(step * d_i))``; ``d`` defaults to the acceleration."""
    M = gamma.manifold
    idx = movable_indices(gamma)
    D = discrete_accelerations(gamma, idx) if direction is None else direction
    P = np.array(gamma.nodes)
    P[idx] = S.project(M.exp(P[idx], step * D))
    return gamma.with_nodes(P)


# relative size below which an energy change is indistinguishable from rounding
_ENERGY_RESOLUTION = 64 * np.finfo(float).eps


def _try_direction(gamma, S, E, A, D, step, opts, res=None, max_trials=None):
    """Armijo backtracking along ``D``; returns (curve, energy, step) or None.

    Once the predicted decrease falls below the resolution of the energy, a
    candidate is accepted if its energy is unchanged to rounding and its cone
    residual is strictly smaller than ``res``.
    """
    M = gamma.manifold
    idx = movable_indices(gamma)
    N = gamma.N
    floor = _ENERGY_RESOLUTION * max(E, 1.0)
    trials = 0
    while step >= opts.min_step:
        trials += 1
        try:
            cand = descent_step(gamma, S, step, D)
            disp = M.log(gamma.nodes[idx], cand.nodes[idx])
            pred = float(np.sum(M.inner(gamma.nodes[idx], A, disp)) / N)
            E_new = energy(cand)
            if pred > 0 and E_new < E and E_new <= E - opts.armijo_c * pred:
                return cand, E_new, step
            if (res is not None and 0 < pred <= floor and abs(E_new - E) <= floor
                    and residual(cand, S) < res):
                return cand, min(E_new, E), step
        except GeometryError:
            pass
        if max_trials is not None and trials >= max_trials:
            return None
        step *= opts.backtrack_factor
    return None


def _nudge(gamma, S):
    """Deterministic 1e-8 push of the middle node toward the interior of ``S``."""
    M = gamma.manifold
    idx = movable_indices(gamma)
    k = int(idx[len(idx) // 2])
    g = S.normal_generator(gamma.nodes[k])
    if not np.any(g != 0):
        return None
    P = np.array(gamma.nodes)
    try:
        P[k] = S.project(M.exp(P[k], -1e-8 * g))
    except GeometryError:
        return None
    return gamma.with_nodes(P)


def _descend(gamma, S, opts, closed, callback=None):
    N = gamma.N
    S.require_member(gamma.nodes, "seed node")
    precond = None
    if opts.precondition:
        precond = _Preconditioner(N, closed, opts.shift, gamma.nodes.shape[1])
    raw_step = opts.initial_step if opts.initial_step is not None else 1e-2 / N**2
    raw_cap = 0.5 / N**2
    L0 = length(gamma)
    E = energy(gamma)
    history, energies = [], [E]
    nudged = False
    status = MAX_ITERS
    it = 0
    for it in range(opts.max_iters):
        idx, A, proj, dist = residual_vectors(gamma, S)
        history.append(float(np.max(dist)))
        if history[-1] <= opts.residual_tol:
            status = CONVERGED
            break
        free = A - proj
        out = None
        if precond is not None:
            D = precond(free, _constraints(gamma, S, idx, proj))
            out = _try_direction(gamma, S, E, A, D, 1.0, opts, history[-1])
        if out is None:
            out = _try_direction(gamma, S, E, A, free, raw_step, opts, history[-1])
            if out is not None:
                raw_step = min(2 * out[2], raw_cap)
        if out is None:
            cand = None if nudged else _nudge(gamma, S)
            if cand is None:
                status = STEP_UNDERFLOW
                break
            nudged = True
            gamma, E = cand, energy(cand)
            energies.append(E)
            if callback is not None:
                callback(gamma)
            continue
        gamma, E, _ = out
        energies.append(E)
        if callback is not None:
            callback(gamma)
        if closed and length(gamma) < opts.degenerate_ratio * L0:
            status = DEGENERATE
            break
    else:
        idx, A, proj, dist = residual_vectors(gamma, S)
        history.append(float(np.max(dist)))
        if history[-1] <= opts.residual_tol:
            status = CONVERGED
    return SolveResult(gamma, status, history, E, it, energies)


def solve_endpoint(M, S, x, y, N, opts=None, callback=None):
    """Projected descent from the seed curve; ``callback`` sees every accepted iterate."""
    opts = opts or SolverOptions()
    gamma = seed_curve(M, S, x, y, N)
    if np.array_equal(np.asarray(x, float), np.asarray(y, float)):
        E = energy(gamma)
        return SolveResult(gamma, CONVERGED, [residual(gamma, S)], E, 0, [E])
    return _descend(gamma, S, opts, closed=False, callback=callback)


def solve_closed(M, S, seed, opts=None, callback=None):
    opts = opts or SolverOptions()
    if not seed.closed:
        raise ValueError("solve_closed needs a closed seed curve")
    if seed.manifold != M:
        raise ValueError("seed curve lives on a different manifold")
    if not length(seed) > 0:
        raise GeometryError("closed seed is a point")
    return _descend(seed, S, opts, closed=True, callback=callback)
