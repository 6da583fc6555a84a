import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import sphere_embed
from weakgeo.certify import (CertifyTolerances, certify_closed_weak_geodesic,
                             certify_weak_geodesic, dtnorm_excess)
from weakgeo.curves import (DiscreteCurve, closed_curve, energy, sample_curve, seed_curve,
                            speed_variation, sup_distance)
from weakgeo.manifolds import AmbientSphere, Euclidean, HalfPlane, Sphere2
from weakgeo.proxsets import (EuclideanAnnulus, EuclideanBall, HyperbolicStrip, SphericalCapGe,
                              SphericalCapLe, certified_phi)
from weakgeo.scene import boundary_arc
from weakgeo.solver import (CONVERGED, DEGENERATE, SolverOptions, descent_step,
                            discrete_accelerations, residual, solve_closed, solve_endpoint)

E2, H2, S2 = Euclidean(2), HalfPlane(), Sphere2()
STRIP = HyperbolicStrip(1.0, 2.0)
TH0 = 2 * math.pi / 3
ANN = EuclideanAnnulus(1.0, 2.0)


def circle(r, N):
    s = 2 * math.pi * np.arange(N) / N
    return closed_curve(E2, r * np.column_stack([np.cos(s), np.sin(s)]))


def ambient_latitude(theta, N):
    s = 2 * math.pi * np.arange(N) / N
    pts = np.column_stack([math.sin(theta) * np.cos(s), math.sin(theta) * np.sin(s),
                           np.full(N, math.cos(theta))])
    return closed_curve(AmbientSphere(), pts)


def run_with_iterates(fn, *args, **kw):
    iterates = []
    res = fn(*args, callback=iterates.append, **kw)
    return res, iterates


# --- options ----------------------------------------------------------------------

def test_solver_options_validation():
    SolverOptions()
    for bad in [dict(max_iters=0), dict(residual_tol=0), dict(initial_step=-1.0),
                dict(backtrack_factor=1.0), dict(backtrack_factor=0.0), dict(armijo_c=-1)]:
        with pytest.raises(ValueError):
            SolverOptions(**bad)


# --- residual ------------------------------------------------------------------------

def test_residual_straight_segment_in_convex_set():
    g = sample_curve(E2, lambda t: (0.5 * t - 0.2, 0.3 * t), 64)
    assert residual(g, EuclideanBall((0.0, 0.0), 1.0)) <= 1e-10


def test_residual_cap_boundary_circle(frozen):
    g = boundary_arc(TH0, 256)
    assert residual(g, SphericalCapLe(TH0)) <= 1e-4
    assert residual(g, SphericalCapGe(TH0)) == pytest.approx(frozen["cap_boundary_accel"], abs=1e-3)
    A = discrete_accelerations(g)
    assert np.allclose(A[:, 0], frozen["cap_boundary_accel"], rtol=1e-3)


def test_residual_with_forcing_field():
    # straight segment with a constant xi: the shifted acceleration is xi itself
    g = sample_curve(E2, lambda t: (t, 0.0), 32)
    xi = np.tile([0.0, 3.0], (33, 1))
    assert residual(g, EuclideanBall((0.0, 0.0), 10.0), xi) == pytest.approx(3.0, abs=1e-9)
    # on the boundary of a half-plane the same field points along the outer normal
    from weakgeo.proxsets import EuclideanHalfSpace
    H = EuclideanHalfSpace((0.0, 1.0), 0.0)
    assert residual(g, H, xi) <= 1e-9
    assert residual(g, H, -xi) == pytest.approx(3.0, abs=1e-9)


# --- descent_step ----------------------------------------------------------------------

def test_descent_step_is_stationary_on_weak_geodesic():
    g = boundary_arc(TH0, 256)
    S = SphericalCapLe(TH0)
    assert residual(g, S) <= 1e-8
    g2 = descent_step(g, S, 1e-2 / 256**2)
    assert float(np.max(S2.dist(g.nodes, g2.nodes))) <= 1e-8


def test_descent_step_decreases_energy_against_line_search():
    # three nodes: the middle one moves along a = N^2 (x0 + x2 - 2 x1)
    g = DiscreteCurve(E2, [[0.0, 0.0], [0.3, 0.8], [1.0, 0.0]])
    S = EuclideanBall((0.0, 0.0), 5.0)
    E0 = energy(g)
    steps = np.linspace(0.0, 0.25, 2501)
    Es = np.array([energy(descent_step(g, S, s)) for s in steps[1:]])
    best = steps[1:][np.argmin(Es)]
    assert best == pytest.approx(1 / 8, abs=1e-4)      # exact minimizer moves x1 to the midpoint
    assert Es.min() == pytest.approx(0.5, abs=1e-9)     # straight: L^2 / 2 with L = 1
    for s in [1e-4, 1e-2, 0.1, 0.2]:
        assert energy(descent_step(g, S, s)) < E0


def test_descent_step_keeps_strip_nodes_on_upper_boundary():
    # unprojected geodesic samples bulge above y = 2; one step clamps them back
    x, y = np.array([0.0, 2.0]), np.array([2.0, 2.0])
    s = np.arange(65) / 64
    P = H2.exp(np.broadcast_to(x, (65, 2)), s[:, None] * H2.log(x, y))
    g = DiscreteCurve(H2, P)
    assert P[1:-1, 1].min() > 2.0
    g2 = descent_step(g, STRIP, 1e-2 / 64**2)
    assert np.all(np.abs(g2.nodes[:, 1] - 2.0) <= 1e-12)
    seed = seed_curve(H2, STRIP, x, y, 64)
    g3 = descent_step(seed, STRIP, 1e-2 / 64**2)
    assert np.all(np.abs(g3.nodes[:, 1] - 2.0) <= 1e-12)


def test_descent_step_pins_endpoints_and_closure():
    g = seed_curve(H2, STRIP, np.array([0.0, 1.5]), np.array([1.0, 1.2]), 16)
    g2 = descent_step(g, STRIP, 1e-3)
    assert np.array_equal(g2.nodes[0], g.nodes[0]) and np.array_equal(g2.nodes[-1], g.nodes[-1])
    loop = descent_step(circle(1.3, 32), ANN, 1e-4)
    assert loop.closed and np.array_equal(loop.nodes[0], loop.nodes[-1])
    assert not np.array_equal(loop.nodes[0], circle(1.3, 32).nodes[0])


# --- solve_endpoint ----------------------------------------------------------------------

def test_solve_strip_example():
    res = solve_endpoint(H2, STRIP, np.array([0.0, 2.0]), np.array([2.0, 2.0]), 64)
    assert res.status == CONVERGED
    g = res.curve
    assert np.max(np.abs(g.nodes[:, 1] - 2.0)) <= 1e-6
    A = discrete_accelerations(g)
    assert np.max(np.linalg.norm(A - [0.0, 2.0], axis=1)) <= 0.05 * 2.0
    assert res.residual < 1e-6
    assert res.final_energy == pytest.approx(0.5, abs=1e-3)


def test_solve_convex_cap_gives_interior_great_circle_arc():
    S = SphericalCapGe(TH0)
    x, y = np.array([TH0, -0.8]), np.array([TH0, 0.8])
    res = solve_endpoint(S2, S, x, y, 64)
    assert res.status == CONVERGED and res.residual < 1e-6
    g = res.curve
    assert np.all(g.nodes[1:-1, 0] > TH0)
    assert np.max(np.linalg.norm(discrete_accelerations(g), axis=1)) <= 1e-6
    # ambient slerp oracle
    a, b = sphere_embed(x), sphere_embed(y)
    om = math.acos(a @ b)
    t = g.t[:, None]
    ref = (np.sin((1 - t) * om) * a + np.sin(t * om) * b) / math.sin(om)
    assert np.max(np.linalg.norm(S2.embed(g.nodes) - ref, axis=1)) <= 1e-8


def test_solve_coincident_endpoints_gives_constant_curve():
    x = np.array([0.5, 1.5])
    res = solve_endpoint(H2, STRIP, x, x, 16)
    assert res.status == CONVERGED and res.final_energy == 0
    assert np.all(res.curve.nodes == x)


def test_solve_wraps_annulus_hole():
    S = ANN
    res = solve_endpoint(E2, S, np.array([-1.5, 0.7]), np.array([1.5, 0.7]), 64)
    assert res.status == CONVERGED and res.residual <= 1e-6
    r = np.linalg.norm(res.curve.nodes, axis=1)
    assert r.min() >= 1 - 1e-9
    assert np.sum(r < 1 + 1e-6) >= 3        # a contact arc on the inner circle
    assert certify_weak_geodesic(res.curve, S, CertifyTolerances(residual=1e-5)).overall


def test_solve_refuses_ambiguous_seed():
    # the seed chord runs through the centre, where the projection onto the annulus is not unique
    from weakgeo.proxsets import AmbiguousProjectionError
    with pytest.raises(AmbiguousProjectionError):
        solve_endpoint(E2, ANN, np.array([-1.5, 0.0]), np.array([1.5, 0.0]), 16)


def test_solve_refuses_endpoint_outside():
    from weakgeo.proxsets import NotInSetError
    with pytest.raises(NotInSetError):
        solve_endpoint(H2, STRIP, np.array([0.0, 3.0]), np.array([1.0, 1.5]), 16)


# --- solve_closed ------------------------------------------------------------------------------

def test_solve_closed_annulus(frozen):
    res = solve_closed(E2, ANN, circle(1.3, 256))
    assert res.status == CONVERGED
    g = res.curve
    assert np.max(np.abs(np.linalg.norm(g.nodes, axis=1) - 1.0)) <= 1e-6
    assert res.final_energy == pytest.approx(frozen["annulus_inner_energy"], abs=1e-2)
    A = discrete_accelerations(g)
    radial = g.nodes[:-1] / np.linalg.norm(g.nodes[:-1], axis=1)[:, None]
    assert np.allclose(A, -(2 * math.pi) ** 2 * radial, rtol=0, atol=1e-2)
    assert certify_closed_weak_geodesic(g, ANN).overall


def test_solve_closed_cap_boundary_stays():
    S = SphericalCapLe(TH0, manifold=AmbientSphere())
    seed = ambient_latitude(TH0, 256)
    res = solve_closed(AmbientSphere(), S, seed, SolverOptions(residual_tol=1e-4))
    assert res.status == CONVERGED and res.residual < 1e-4
    assert sup_distance(res.curve, seed) <= 1e-6


def test_solve_closed_ball_degenerates():
    res = solve_closed(E2, EuclideanBall((0.0, 0.0), 2.0), circle(1.3, 64))
    assert res.status == DEGENERATE


def test_solve_closed_needs_closed_seed():
    g = sample_curve(E2, lambda t: (t, 1.5), 16)
    with pytest.raises(ValueError):
        solve_closed(E2, ANN, g)


# --- invariants ---------------------------------------------------------------------------------

def _check_run(res, iterates, S, tol):
    E = res.energy_history
    assert all(b <= a + 1e-14 * max(a, 1.0) for a, b in zip(E, E[1:]))
    for g in iterates:
        assert np.all(np.atleast_1d(S.contains(g.nodes, 1e-9)))
    if res.status == CONVERGED:
        assert res.residual <= tol
        fn = certify_closed_weak_geodesic if res.curve.closed else certify_weak_geodesic
        rep = fn(res.curve, S, CertifyTolerances(residual=10 * tol))
        assert rep.overall, rep.table()
        assert np.max(dtnorm_excess(res.curve, S)) <= 10 * tol


@settings(max_examples=25)
@given(x0=st.floats(-1, 1), y0=st.floats(1.0, 2.0), dx=st.floats(0.3, 3), y1=st.floats(1.0, 2.0))
def test_strip_solves_satisfy_invariants(x0, y0, dx, y1):
    opts = SolverOptions()
    res, its = run_with_iterates(solve_endpoint, H2, STRIP, np.array([x0, y0]),
                                 np.array([x0 + dx, y1]), 64, opts)
    assert res.status == CONVERGED
    _check_run(res, its, STRIP, opts.residual_tol)
    assert speed_variation(res.curve) <= 1e-3


@settings(max_examples=15)
@given(phi=st.floats(-0.8, 0.8), ph=st.floats(0.1, 0.6), th=st.floats(1.6, 2.09))
def test_cap_solves_satisfy_invariants(phi, ph, th):
    S = SphericalCapLe(TH0)
    opts = SolverOptions()
    x, y = np.array([th, phi - ph]), np.array([TH0, phi + ph])
    res, its = run_with_iterates(solve_endpoint, S2, S, x, y, 64, opts)
    assert res.status == CONVERGED
    _check_run(res, its, S, opts.residual_tol)
    assert speed_variation(res.curve) <= 1e-3


@settings(max_examples=15)
@given(h=st.floats(0.55, 0.95), w=st.floats(1.0, 1.6))
def test_annulus_solves_satisfy_invariants(h, w):
    opts = SolverOptions()
    res, its = run_with_iterates(solve_endpoint, E2, ANN, np.array([-w, h]), np.array([w, h]),
                                 64, opts)
    assert res.status == CONVERGED
    _check_run(res, its, ANN, opts.residual_tol)
    assert speed_variation(res.curve) <= 1e-3


def test_closed_solve_invariants():
    opts = SolverOptions()
    res, its = run_with_iterates(solve_closed, E2, ANN, circle(1.3, 256), opts)
    _check_run(res, its, ANN, opts.residual_tol)


def test_dtnorm_bound_uses_certified_phi():
    res = solve_endpoint(H2, STRIP, np.array([0.0, 2.0]), np.array([2.0, 2.0]), 64)
    phi = certified_phi(STRIP).value
    assert phi > 0
    assert np.max(dtnorm_excess(res.curve, STRIP, phi)) <= 10 * SolverOptions().residual_tol


@pytest.mark.parametrize("ends", [((0.0, 2.0), (2.0, 2.0)), ((0.0, 1.2), (3.0, 1.9))])
def test_grid_refinement_order(ends):
    x, y = (np.array(e) for e in ends)
    curves = [solve_endpoint(H2, STRIP, x, y, N).curve for N in (32, 64, 128)]
    e = [sup_distance(a, DiscreteCurve(H2, b.nodes[::2])) for a, b in zip(curves, curves[1:])]
    assert math.log2(e[0] / e[1]) >= 1.8


def test_solver_is_deterministic():
    a = solve_endpoint(H2, STRIP, np.array([0.0, 1.2]), np.array([3.0, 1.9]), 64)
    b = solve_endpoint(H2, STRIP, np.array([0.0, 1.2]), np.array([3.0, 1.9]), 64)
    assert a.curve == b.curve and a.residual_history == b.residual_history
