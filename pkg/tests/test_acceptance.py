"""End-to-end acceptance criteria.

Each criterion is a plain function returning a list of ``(name, ok, info)`` checks, so
the file also runs as a script: ``python3 tests/test_acceptance.py``.
"""
import math
import pathlib
import subprocess
import sys
import tempfile
import time

import numpy as np
import pytest

from weakgeo.certify import (CertifyTolerances, certify_closed_weak_geodesic,
                             certify_weak_geodesic, check_extrinsic, check_isometry_invariance,
                             check_normal_sum, dtnorm_excess, energy_length_defect,
                             probe_local_minimality, sup_sobolev_slack, uniform_gap_slack)
from weakgeo.cli import run_caps_demo, run_strip_demo
from weakgeo.curves import (DiscreteCurve, energy, length, local_perturbation, random_bent_curve,
                            reparametrize_constant_speed, sample_curve, sup_distance)
from weakgeo.isometries import HalfPlaneTranslation, SphereRotation
from weakgeo.manifolds import AmbientSphere, Euclidean, HalfPlane, Sphere2, covariant_accel_fd
from weakgeo.proxsets import (EuclideanAnnulus, EuclideanBall, HyperbolicStrip, SphericalCapGe,
                              SphericalCapLe, certified_phi)
from weakgeo.scene import boundary_arc, build_seed_loop
from weakgeo.solver import CONVERGED, DEGENERATE, discrete_accelerations, solve_closed, solve_endpoint

E2, H2, S2, AS = Euclidean(2), HalfPlane(), Sphere2(), AmbientSphere()
STRIP = HyperbolicStrip(1.0, 2.0)
TH0 = 2 * math.pi / 3
S1, S2CAP = SphericalCapLe(TH0), SphericalCapGe(TH0)
S1A = SphericalCapLe(TH0, manifold=AS)
ANN = EuclideanAnnulus(1.0, 2.0)
TOL4 = CertifyTolerances(residual=1e-4)
CAP_TARGET = -math.cos(TH0) / math.sin(TH0)        # 1/sqrt(3)


def _strip_solve(N=64, x=(0.0, 2.0), y=(2.0, 2.0)):
    return solve_endpoint(H2, STRIP, np.array(x), np.array(y), N)


def _annulus_loop(N=256, r=1.3):
    return build_seed_loop(E2, {"type": "circle", "radius": r}, N)


def _latitude(N=256):
    return build_seed_loop(AS, {"type": "latitude", "theta": TH0}, N)


def _timed(checks, t0, limit):
    dt = time.perf_counter() - t0
    checks.append(("runtime", dt < limit, f"{dt:.1f}s < {limit}s"))
    return checks


# --- criteria -------------------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    res = _strip_solve()
    g = res.curve
    yerr = float(np.max(np.abs(g.nodes[:, 1] - 2.0)))
    # metric norm of A - (0, 2) at y = 2 over the metric norm of (0, 2), which is 1
    A = discrete_accelerations(g)
    aerr = float(np.max(np.linalg.norm(A - [0.0, 2.0], axis=1) / 2.0))
    cert = certify_weak_geodesic(g, STRIP)
    probe = probe_local_minimality(g, STRIP, trials=500, h=0.05, amplitude=1e-2, rng_seed=0)
    gap = probe.details["min_gap"]
    checks = [
        ("solve", res.status == CONVERGED, f"status={res.status}"),
        ("nodes on y=2", yerr <= 1e-6, f"{yerr:.1e}"),
        ("accel ~ (0,2)", aerr <= 0.05, f"{aerr:.1e}"),
        ("residual", res.residual < 1e-6, f"{res.residual:.1e}"),
        ("energy", abs(res.final_energy - 0.5) <= 1e-3, f"{res.final_energy:.6f}"),
        ("certify", cert.overall, ""),
        ("probe", probe.overall and gap >= -1e-9, f"min gap {gap:.1e}"),
    ]
    return _timed(checks, t0, 10)


def criterion_2():
    t0 = time.perf_counter()
    g = boundary_arc(TH0, 256)
    c1 = certify_weak_geodesic(g, S1, TOL4)
    c2 = certify_weak_geodesic(g, S2CAP, TOL4)
    A = discrete_accelerations(g)
    target = np.array([CAP_TARGET, 0.0])
    aerr = float(np.max(S2.norm(g.nodes[1:-1], A - target)) / CAP_TARGET)
    r1, r2 = c1["residual"].measured, c2["residual"].measured
    p2 = probe_local_minimality(g, S2CAP, trials=500, h=0.25, amplitude=1e-3, rng_seed=0)
    checks = [
        ("S1 certifies", c1.overall and r1 < 1e-4, f"residual {r1:.1e}"),
        ("S1 accel ~ 0.57735 d/dtheta", aerr <= 0.01, f"{aerr:.1e}"),
        ("S2 fails", not c2.overall, ""),
        ("S2 residual", abs(r2 - 0.577) <= 1e-3, f"{r2:.5f}"),
        ("S2 probe finds better curve", not p2.overall and p2.details["min_gap"] < 0,
         f"min gap {p2.details['min_gap']:.1e}"),
    ]
    return _timed(checks, t0, 30)


def criterion_3():
    ns = check_normal_sum(S1, n_points=100, samples=1000, rng_seed=0, tol=1e-6)
    fwd = ns["forward_violations"].measured
    rev = ns["reverse_tangential_distance"].measured
    ex = check_extrinsic(_latitude(256), S1A, tol=1e-3)
    return [
        ("forward violations", fwd == 0, f"{fwd:g} of {ns.details['forward_samples']}"),
        ("reverse distance", rev <= 1e-6, f"{rev:.1e}"),
        ("normal sum", ns.overall, ""),
        ("extrinsic N=256", ex.overall, ""),
    ]


def criterion_4():
    t0 = time.perf_counter()
    res = solve_closed(E2, ANN, _annulus_loop(256, 1.3))
    g = res.curve
    rerr = float(np.max(np.abs(np.linalg.norm(g.nodes, axis=1) - 1.0)))
    E = res.final_energy
    cert = certify_closed_weak_geodesic(g, ANN)
    vel = cert["velocity_match"].measured
    ball = solve_closed(E2, EuclideanBall((0.0, 0.0), 2.0), _annulus_loop(64, 1.3))
    checks = [
        ("solve", res.status == CONVERGED, f"status={res.status}"),
        ("on unit circle", rerr <= 1e-6, f"{rerr:.1e}"),
        ("energy", abs(E - 0.5 * (2 * math.pi) ** 2) <= 1e-2, f"{E:.5f}"),
        ("certify_closed", cert.overall, ""),
        ("velocity match", vel <= 1e-6, f"{vel:.1e}"),
        ("ball seed", ball.status == DEGENERATE, f"status={ball.status}"),
    ]
    return _timed(checks, t0, 30)


def _certified_geodesics():
    """Every curve used as a certified geodesic in the criteria above."""
    return [
        (_strip_solve().curve, STRIP, None, certify_weak_geodesic),
        (_strip_solve(64, (0.0, 1.2), (3.0, 1.9)).curve, STRIP, None, certify_weak_geodesic),
        (boundary_arc(TH0, 256), S1, TOL4, certify_weak_geodesic),
        (solve_closed(E2, ANN, _annulus_loop(256)).curve, ANN, None, certify_closed_weak_geodesic),
        (_latitude(256), S1A, TOL4, certify_closed_weak_geodesic),
    ]


def criterion_5():
    rng = np.random.default_rng(2024)
    # uniform distance bound, 10^3 pairs per manifold
    bases = [(sample_curve(H2, lambda t: (2 * t, 2.0), 64), STRIP),
             (boundary_arc(TH0, 64), S1),
             (_annulus_loop(64, 1.5), ANN)]
    dinf = []
    for g, S in bases:
        worst = math.inf
        for _ in range(1000):
            h = rng.uniform(0.03, 0.3)
            eta = local_perturbation(g, S, rng.random(), h, rng.uniform(0, 0.05),
                                     int(rng.integers(2**31)))
            worst = min(worst, uniform_gap_slack(g, eta, h))
        dinf.append(worst)

    sob = math.inf
    for _ in range(1000):
        a = rng.uniform(-2, 2)
        b = a + rng.uniform(0.1, 3)
        t = np.sort(np.concatenate([[a, b], rng.uniform(a, b, int(rng.integers(3, 40)))]))
        f = rng.standard_normal(len(t))
        f[0] = f[-1] = 0
        sob = min(sob, sup_sobolev_slack(t, f))

    dt_ok, dt_worst = True, -math.inf
    for g, S, tols, cert in _certified_geodesics():
        tol = (tols or CertifyTolerances()).residual
        ex = dtnorm_excess(g, S, certified_phi(S).value)
        dt_ok &= cert(g, S, tols).overall and bool(np.all(ex <= tol))
        dt_worst = max(dt_worst, float(np.max(ex)))

    # energy-length: L^2 <= 2E always, equality after constant-speed reparametrization
    el_ok, el_worst = True, 0.0
    pops = [(H2, STRIP, bases[0][0]), (S2, S1, bases[1][0]),
            (E2, EuclideanBall((0.0, 0.0), 100.0),
             sample_curve(E2, lambda t: (3 * t, math.sin(2 * t)), 64))]
    for k in range(1000):
        M, S, g = pops[k % 3]
        c = random_bent_curve(M, S, g, rng, 0.02 + 0.1 * rng.random())
        el_ok &= length(c) ** 2 <= 2 * energy(c) * (1 + 1e-12)
        r = reparametrize_constant_speed(c)
        d = abs(energy_length_defect(r)) / length(r) ** 2
        el_worst = max(el_worst, d)
    el_ok &= el_worst <= 1e-6

    return [
        ("uniform distance bound", min(dinf) >= -1e-6, f"min slack {min(dinf):.1e}"),
        ("sup-Sobolev", sob >= -1e-8, f"min slack {sob:.1e}"),
        ("normal accel bound", dt_ok, f"max excess {dt_worst:.1e}"),
        ("energy-length", el_ok, f"max rel defect {el_worst:.1e}"),
    ]


def _reparam_geodesic_error(M, x, v, h, t=0.4):
    """FD error on the geodesic through x traced with the parameter s = t + 0.3 sin 2t."""
    s = lambda u: u + 0.3 * math.sin(2 * u)
    path = lambda u: M.exp(x, s(u) * v)
    p = path(t)
    # D_t (s' c'(s)) = s'' c'(s), and c'(s) = -log_p(x) / s
    exact = -1.2 * math.sin(2 * t) * (-M.log(p, x) / s(t))
    a = covariant_accel_fd(M, path(t - h), p, path(t + h), h)
    return float(M.norm(p, a - exact))


def _latitude_error(th, h, t=0.4):
    """FD error on the unit-rate latitude (th, t), whose acceleration is (-sin th cos th, 0)."""
    path = lambda u: np.array([th, u])
    a = covariant_accel_fd(S2, path(t - h), path(t), path(t + h), h)
    return float(S2.norm(path(t), a - [-math.sin(th) * math.cos(th), 0.0]))


def _order(hs, errs):
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


def criterion_6():
    rng = np.random.default_rng(6)
    hs = np.array([1e-1, 3e-2, 1e-2])
    orders, flat = [], 0.0
    for M in (H2, S2):
        for _ in range(3):
            if M is H2:
                x = np.array([rng.uniform(-3, 3), rng.uniform(0.3, 3)])
            else:
                x = np.array([rng.uniform(0.6, math.pi - 0.6), rng.uniform(-1.5, 1.5)])
            v = M.random_tangent(rng, x, 0.8)
            orders.append(_order(hs, [_reparam_geodesic_error(M, x, v, h) for h in hs]))
            # affinely traced geodesics make the stencil vanish
            g = lambda u: M.exp(x, u * v)
            for h in hs:
                a = covariant_accel_fd(M, g(0.5 - h), g(0.5), g(0.5 + h), h)
                flat = max(flat, float(M.norm(g(0.5), a)))
    lat = min(_order(hs, [_latitude_error(th, h) for h in hs]) for th in (0.7, 1.2, 2.3))

    grid = []
    for ends in [((0.0, 2.0), (2.0, 2.0)), ((0.0, 1.2), (3.0, 1.9))]:
        curves = [_strip_solve(N, *ends).curve for N in (32, 64, 128)]
        e = [sup_distance(a, DiscreteCurve(H2, b.nodes[::2])) for a, b in zip(curves, curves[1:])]
        grid.append(math.log2(e[0] / e[1]))
    return [
        ("FD order on geodesics", min(orders) >= 1.9, f"min order {min(orders):.2f}"),
        ("FD vanishes at affine speed", flat <= 1e-8, f"{flat:.1e}"),
        ("FD order on latitudes", lat >= 1.9, f"min order {lat:.2f}"),
        ("grid order", min(grid) >= 1.8, "orders " + ", ".join(f"{o:.2f}" for o in grid)),
    ]


def criterion_7():
    checks = []
    rep = check_isometry_invariance(HalfPlaneTranslation(1.0), _strip_solve().curve, STRIP)
    d = rep.details
    checks.append(("H2 translation", rep.overall and d["image_residual"] <= 2 * d["original_residual"],
                   f"{d['image_residual']:.1e} vs {d['original_residual']:.1e}"))
    arc = DiscreteCurve(AS, Sphere2._embed(boundary_arc(TH0, 256).nodes))
    for axis in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
        for g, name in [(arc, "arc"), (_latitude(256), "loop")]:
            rep = check_isometry_invariance(SphereRotation.about(axis, 1.1), g, S1A, TOL4)
            d = rep.details
            ok = rep.overall and d["image_residual"] <= 2 * d["original_residual"]
            checks.append((f"cap {name} about {axis}", ok,
                           f"{d['image_residual']:.1e} vs {d['original_residual']:.1e}"))
    return checks


def criterion_8(tmp):
    checks = []
    for name, fn in [("strip", run_strip_demo), ("caps", run_caps_demo)]:
        a, b = fn(seed=7)[1], fn(seed=7)[1]
        checks.append((f"{name} in-process", a == b, ""))
    outs = []
    for k in range(2):
        path = tmp / f"run{k}.json"
        subprocess.run([sys.executable, "-m", "weakgeo.cli", "demo-strip", "--seed", "7",
                        "--out", str(path)], check=True, capture_output=True)
        outs.append(path.read_bytes())
    checks.append(("strip across processes", outs[0] == outs[1], ""))
    return checks


CRITERIA = {
    1: ("strip demo", criterion_1),
    2: ("caps demo", criterion_2),
    3: ("embedding consistency", criterion_3),
    4: ("closed geodesic", criterion_4),
    5: ("inequality suites", criterion_5),
    6: ("order checks", criterion_6),
    7: ("isometry invariance", criterion_7),
    8: ("determinism", lambda: criterion_8(pathlib.Path(tempfile.mkdtemp()))),
}


def summarize(n):
    title, fn = CRITERIA[n]
    checks = fn()
    ok = all(c[1] for c in checks)
    parts = [f"{name}{' ' + info if info else ''}{'' if good else ' FAILED'}"
             for name, good, info in checks]
    return ok, f"[{'PASS' if ok else 'FAIL'}] criterion {n} ({title}): " + "; ".join(parts)


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, acceptance_log):
    ok, line = summarize(n)
    print(line)
    acceptance_log.append(line)
    assert ok, line


if __name__ == "__main__":
    results = []
    for n in sorted(CRITERIA):
        ok, line = summarize(n)
        print(line, flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
