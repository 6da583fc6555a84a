"""Scene files: a manifold, a set, a problem and the solver/certifier/probe blocks."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .certify import CertifyTolerances
from .curves import DiscreteCurve, closed_curve
from .manifolds import AmbientSphere, Euclidean, Sphere2, manifold_from_dict
from .proxsets import SET_VARIANTS, set_from_dict
from .solver import SolverOptions


class SceneError(ValueError):
    """Invalid scene document; the message names the offending field."""


@dataclass(frozen=True)
class ProbeConfig:
    trials: int = 500
    window: float = 0.05
    amplitude: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1 or not self.window > 0 or not self.amplitude >= 0 or self.seed < 0:
            raise ValueError("probe needs trials >= 1, window > 0, amplitude >= 0, seed >= 0")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Problem:
    kind: str
    N: int
    endpoints: tuple = ()
    seed_loop: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"kind": self.kind, "N": self.N}
        if self.kind == "endpoint":
            d["endpoints"] = [list(p) for p in self.endpoints]
        else:
            d["seed_loop"] = copy.deepcopy(self.seed_loop)
        return d


@dataclass(frozen=True, eq=False)
class Scene:
    manifold: object
    set: object
    problem: Problem
    solver: SolverOptions = SolverOptions()
    certify: CertifyTolerances = CertifyTolerances()
    probe: ProbeConfig = ProbeConfig()

    def to_dict(self):
        S = self.set.to_dict()
        S.pop("model", None)
        return {"manifold": self.manifold.to_dict(), "set": S, "problem": self.problem.to_dict(),
                "solver": self.solver.to_dict(), "certify": self.certify.to_dict(),
                "probe": self.probe.to_dict()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def __eq__(self, other):
        return isinstance(other, Scene) and self.to_dict() == other.to_dict()

    def with_nodes(self, N):
        return Scene(self.manifold, self.set, Problem(self.problem.kind, N, self.problem.endpoints,
                                                      self.problem.seed_loop),
                     self.solver, self.certify, self.probe)

    def seed_loop_curve(self):
        return build_seed_loop(self.manifold, self.problem.seed_loop, self.problem.N)


# ---------------------------------------------------------------------------
# Parsing

_TOP = {"manifold", "set", "problem", "solver", "certify", "probe"}
_PROBLEM = {"kind", "N", "endpoints", "seed_loop"}


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise SceneError(f"{where}: expected an object, got {type(d).__name__}")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise SceneError(f"{where}: unknown key {extra[0]!r}")


def _dataclass_block(cls, d, where):
    if d is None:
        return cls()
    _reject_unknown(d, {f.name for f in fields(cls)}, where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise SceneError(f"{where}: {exc}") from None


def _point(p, M, where):
    try:
        arr = np.asarray(p, dtype=float)
    except (TypeError, ValueError):
        raise SceneError(f"{where}: not a numeric point") from None
    if arr.shape != (M.dim,):
        raise SceneError(f"{where}: expected {M.dim} coordinates")
    if not bool(M.in_domain(arr)):
        raise SceneError(f"{where}: point lies outside the {M.name} chart")
    return tuple(float(v) for v in arr)


def build_seed_loop(M, spec, N):
    """Closed curve with N edges described by a seed-loop block."""
    kind = spec.get("type")
    s = 2 * math.pi * np.arange(N) / N
    if kind == "circle":
        c = np.asarray(spec.get("center", [0.0, 0.0]), dtype=float)
        r = float(spec["radius"])
        pts = c + r * np.column_stack([np.cos(s), np.sin(s)])
    elif kind == "latitude":
        th = float(spec["theta"])
        pts = np.column_stack([np.sin(th) * np.cos(s), np.sin(th) * np.sin(s),
                               np.full(N, math.cos(th))])
    elif kind == "nodes":
        pts = np.asarray(spec["nodes"], dtype=float)
        if len(pts) != N:
            raise SceneError(f"problem.seed_loop.nodes: expected {N} nodes, got {len(pts)}")
    else:
        raise SceneError(f"problem.seed_loop.type: unknown loop type {kind!r}")
    return closed_curve(M, pts)


_LOOP_KEYS = {"circle": {"type", "center", "radius"}, "latitude": {"type", "theta"},
              "nodes": {"type", "nodes"}}


def scene_from_dict(d):
    _reject_unknown(d, _TOP, "scene")
    for key in ("manifold", "set", "problem"):
        if key not in d:
            raise SceneError(f"scene: missing required field {key!r}")
    try:
        M = manifold_from_dict(d["manifold"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"manifold: {exc}") from None

    sd = d["set"]
    if not isinstance(sd, dict) or sd.get("variant") not in SET_VARIANTS:
        raise SceneError(f"set.variant: unknown set variant "
                         f"{sd.get('variant') if isinstance(sd, dict) else sd!r}")
    cls = SET_VARIANTS[sd["variant"]]
    allowed = {f.name for f in fields(cls)} - {"manifold"} | {"variant"}
    _reject_unknown(sd, allowed, "set")
    try:
        S = set_from_dict(sd, manifold=M if isinstance(M, (Sphere2, AmbientSphere)) else None)
    except (TypeError, ValueError) as exc:
        raise SceneError(f"set: {exc}") from None
    if S.manifold != M:
        raise SceneError(f"set: {sd['variant']} does not live on {M.name}")

    pd = d["problem"]
    _reject_unknown(pd, _PROBLEM, "problem")
    kind = pd.get("kind")
    if kind not in ("endpoint", "closed"):
        raise SceneError(f"problem.kind: expected 'endpoint' or 'closed', got {kind!r}")
    N = pd.get("N")
    if not isinstance(N, int) or isinstance(N, bool) or N < 8:
        raise SceneError(f"problem.N: expected an integer >= 8, got {N!r}")
    if kind == "endpoint":
        if "seed_loop" in pd:
            raise SceneError("problem.seed_loop: only valid for closed problems")
        ends = pd.get("endpoints")
        if not isinstance(ends, list) or len(ends) != 2:
            raise SceneError("problem.endpoints: expected a list of two points")
        pts = tuple(_point(p, M, f"problem.endpoints[{i}]") for i, p in enumerate(ends))
        for i, p in enumerate(pts):
            if not bool(S.contains(np.asarray(p), S.boundary_tol)):
                raise SceneError(f"problem.endpoints[{i}]: point is not in the set")
        problem = Problem(kind, N, endpoints=pts)
    else:
        if "endpoints" in pd:
            raise SceneError("problem.endpoints: only valid for endpoint problems")
        loop = pd.get("seed_loop")
        if not isinstance(loop, dict) or loop.get("type") not in _LOOP_KEYS:
            raise SceneError("problem.seed_loop: expected an object with type "
                             "'circle', 'latitude' or 'nodes'")
        _reject_unknown(loop, _LOOP_KEYS[loop["type"]], "problem.seed_loop")
        if loop["type"] == "circle" and not isinstance(M, Euclidean):
            raise SceneError("problem.seed_loop.type: circle loops need a Euclidean manifold")
        if loop["type"] == "latitude" and not isinstance(M, AmbientSphere):
            raise SceneError("problem.seed_loop.type: latitude loops run in ambient "
                             "coordinates (EmbeddedSubmanifold)")
        problem = Problem(kind, N, seed_loop=copy.deepcopy(loop))
        try:
            seed = build_seed_loop(M, loop, N)
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"problem.seed_loop: {exc}") from None
        if np.any(~np.atleast_1d(S.contains(seed.nodes, S.boundary_tol))):
            raise SceneError("problem.seed_loop: seed loop leaves the set")

    return Scene(M, S, problem,
                 solver=_dataclass_block(SolverOptions, d.get("solver"), "solver"),
                 certify=_dataclass_block(CertifyTolerances, d.get("certify"), "certify"),
                 probe=_dataclass_block(ProbeConfig, d.get("probe"), "probe"))


def parse_scene(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scene_from_dict(d)


# ---------------------------------------------------------------------------
# Built-in scenes for the worked examples

STRIP_SCENE = {
    "manifold": {"variant": "HalfPlaneH2"},
    "set": {"variant": "HyperbolicStrip", "y_lo": 1.0, "y_hi": 2.0},
    "problem": {"kind": "endpoint", "N": 64, "endpoints": [[0.0, 2.0], [2.0, 2.0]]},
    "solver": {"residual_tol": 1e-6},
    "probe": {"trials": 500, "window": 0.05, "amplitude": 1e-2, "seed": 0},
}

ANNULUS_SCENE = {
    "manifold": {"variant": "EuclideanN", "dim": 2},
    "set": {"variant": "EuclideanAnnulus", "r1": 1.0, "r2": 2.0},
    "problem": {"kind": "closed", "N": 256,
                "seed_loop": {"type": "circle", "center": [0.0, 0.0], "radius": 1.3}},
}

CAP_SCENE = {
    "manifold": {"variant": "Sphere2"},
    "set": {"variant": "SphericalCapGe", "theta0": 2 * math.pi / 3},
    "problem": {"kind": "endpoint", "N": 64,
                "endpoints": [[2 * math.pi / 3, -0.8], [2 * math.pi / 3, 0.8]]},
}

CAP_LOOP_SCENE = {
    "manifold": {"variant": "EmbeddedSubmanifold", "base": "Sphere2", "ambient_dim": 3,
                 "embedding": "spherical"},
    "set": {"variant": "SphericalCapLe", "theta0": 2 * math.pi / 3},
    "problem": {"kind": "closed", "N": 256,
                "seed_loop": {"type": "latitude", "theta": 2 * math.pi / 3}},
    "solver": {"residual_tol": 1e-4},
    "certify": {"residual": 1e-4},
}

BUILTIN_SCENES = {"strip": STRIP_SCENE, "annulus": ANNULUS_SCENE, "cap": CAP_SCENE,
                  "cap-loop": CAP_LOOP_SCENE}


def builtin_scene(name):
    return scene_from_dict(copy.deepcopy(BUILTIN_SCENES[name]))


def boundary_arc(theta0=2 * math.pi / 3, N=256, model=None):
    """Unit-speed arc of the latitude circle ``theta = theta0`` on ``[0, 1]``, centred at phi = 0."""
    M = model or Sphere2()
    t = np.arange(N + 1) / N
    phi = (t - 0.5) / math.sin(theta0)
    P = np.column_stack([np.full(N + 1, theta0), phi])
    if isinstance(M, AmbientSphere):
        P = Sphere2._embed(P)
    return DiscreteCurve(M, P)
