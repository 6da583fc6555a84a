"""Recompute the reference values used by the tests and freeze them to JSON.

Only the independent oracles in tests/oracles.py are used, except for the
sampled phi constants, which are regression values of the estimator itself.
Run from the repository root: python3 scripts/freeze_oracles.py
"""

import json
import math
import pathlib
import sys

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles as O  # noqa: E402

TH0 = 2 * math.pi / 3


def main():
    out = {}
    end, _ = O.geodesic_rk4(O.christoffel_halfplane, [0.0, 1.0], [0.0, 1.0])
    out["h2_exp_vertical"] = end.tolist()
    out["h2_log_vertical"] = O.shoot_log(O.christoffel_halfplane, np.array([0.0, 1.0]),
                                         np.array([0.0, math.e]), [0.0, 0.9]).tolist()
    end, _ = O.geodesic_rk4(O.christoffel_sphere, [math.pi / 2, 0.0], [0.0, 0.7])
    out["s2_exp_equator_0.7"] = end.tolist()
    _, w = O.transport_rk4(O.christoffel_sphere, [math.pi / 2, 0.0], [0.0, math.pi / 2],
                           [1.0, 0.0])
    out["s2_transport_dtheta_quarter"] = w.tolist()
    out["h2_distance_02_22"] = O.halfplane_distance((0, 2), (2, 2))

    rng = np.random.default_rng(7)
    pairs = []
    for _ in range(20):
        a = [rng.uniform(-2, 2), rng.uniform(0.2, 3)]
        b = [rng.uniform(-2, 2), rng.uniform(0.2, 3)]
        pairs.append({"x": a, "y": b, "d": O.halfplane_distance(a, b)})
    out["h2_distance_pairs"] = pairs

    p, _ = O.grid_project(lambda c: O.halfplane_distance((1.5, 3.7), c),
                          O.strip_grid(1.5, 1.0, 2.0))
    out["strip_projection_1.5_3.7"] = p.tolist()
    p, _ = O.grid_project(lambda c: O.great_circle_distance((2.5, 0.3), c),
                          O.cap_grid(TH0, 0.3))
    out["cap_projection_2.5_0.3"] = p.tolist()

    proj, dist = O.cone_project_enum(np.eye(3), [[1, 0, 0]], [[0, 0, 1]], [-1, 2, 5])
    out["cone_enum_example"] = {"projection": proj.tolist(), "distance": dist}

    out["comparison_factor_1_pi4"] = (math.pi / 2) * (1 / math.tan(math.pi / 4))
    out["cap_boundary_accel"] = -math.cos(TH0) / math.sin(TH0)
    # two-speed polyline: speed 1 on [0, 1/2] and 3 on [1/2, 1]; arclength 1/2 + 3/2
    out["two_speed_breakpoint_fraction"] = 0.5 / (0.5 + 1.5)
    out["annulus_inner_energy"] = 0.5 * (2 * math.pi) ** 2
    out["ineqq_sine_sup"] = 1.0
    out["ineqq_sine_rhs"] = math.sqrt(0.5) * math.sqrt(math.pi**2 / 2)

    from weakgeo.proxsets import HyperbolicStrip, phi_estimate
    out["strip_phi_regression"] = phi_estimate(HyperbolicStrip(1.0, 2.0), n_samples=10000,
                                               rng_seed=0).value

    path = ROOT / "tests" / "data" / "oracle_values.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
