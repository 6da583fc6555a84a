"""Grid-refinement study for the solver and the acceleration stencil.

Prints a table of successive sup-distance differences and observed orders for the
strip endpoint problems and the annulus loop, plus the stencil error on a latitude
circle of the sphere. Differences near the solver residual tolerance (1e-6 by
default, i.e. sup differences around 1e-9) are solver noise, not discretization error.

    python3 scripts/order_study.py [--levels 32 64 128 256]
"""
import argparse
import math

import numpy as np

from weakgeo.curves import DiscreteCurve, closed_curve, sup_distance
from weakgeo.manifolds import Euclidean, HalfPlane, Sphere2, covariant_accel_fd
from weakgeo.proxsets import EuclideanAnnulus, HyperbolicStrip
from weakgeo.solver import solve_closed, solve_endpoint

H2, E2, S2 = HalfPlane(), Euclidean(2), Sphere2()
STRIP = HyperbolicStrip(1.0, 2.0)


def strip_family(x, y, levels):
    return [solve_endpoint(H2, STRIP, np.array(x), np.array(y), N).curve for N in levels]


def annulus_family(levels):
    out = []
    for N in levels:
        s = 2 * math.pi * np.arange(N) / N
        seed = closed_curve(E2, 1.3 * np.column_stack([np.cos(s), np.sin(s)]))
        out.append(solve_closed(E2, EuclideanAnnulus(1.0, 2.0), seed).curve)
    return out


def refinement_table(name, curves):
    print(f"\n{name}")
    print(f"{'N':>6} {'diff to 2N':>12} {'order':>7}")
    diffs = []
    for a, b in zip(curves, curves[1:]):
        sub = DiscreteCurve(b.manifold, b.nodes[::2], closed=b.closed)
        diffs.append(sup_distance(a, sub))
    for k, d in enumerate(diffs):
        order = math.log2(diffs[k - 1] / d) if k and d > 0 else math.nan
        print(f"{curves[k].N:>6} {d:>12.3e} {order:>7.2f}")


def stencil_table(th=1.2, t=0.4):
    print(f"\nstencil on latitude theta={th}")
    print(f"{'h':>8} {'error':>12} {'order':>7}")
    exact = np.array([-math.sin(th) * math.cos(th), 0.0])
    prev = None
    for h in [1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3]:
        a = covariant_accel_fd(S2, np.array([th, t - h]), np.array([th, t]),
                               np.array([th, t + h]), h)
        err = float(S2.norm(np.array([th, t]), a - exact))
        order = math.log2(prev / err) if prev else math.nan
        print(f"{h:>8.4f} {err:>12.3e} {order:>7.2f}")
        prev = err


def main():
    ap = argparse.ArgumentParser(description="grid refinement study")
    ap.add_argument("--levels", type=int, nargs="+", default=[32, 64, 128, 256])
    args = ap.parse_args()
    refinement_table("strip (0,2) -> (2,2)", strip_family((0.0, 2.0), (2.0, 2.0), args.levels))
    refinement_table("strip (0,1.2) -> (3,1.9)", strip_family((0.0, 1.2), (3.0, 1.9), args.levels))
    refinement_table("annulus loop", annulus_family(args.levels))
    print("\nnote: differences below ~1e-8 are at the solver tolerance floor")
    stencil_table()


if __name__ == "__main__":
    main()
