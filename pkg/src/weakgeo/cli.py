"""Command-line front end.

Exit codes: 0 success, 2 scene or argument error, 3 solver did not converge,
4 certificate failed (1 for I/O errors).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .certify import (certify_closed_weak_geodesic, certify_weak_geodesic,
                      probe_local_minimality)
from .curves import curve_from_json, curve_to_csv, curve_to_json
from .scene import SceneError, boundary_arc, builtin_scene, parse_scene
from .solver import CONVERGED, discrete_accelerations, residual, solve_closed, solve_endpoint
from .proxsets import SphericalCapGe, SphericalCapLe

EXIT_OK, EXIT_IO, EXIT_PARSE, EXIT_SOLVE, EXIT_CERT = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def solve_scene(scene):
    p = scene.problem
    if p.kind == "endpoint":
        x, y = (np.asarray(e) for e in p.endpoints)
        return solve_endpoint(scene.manifold, scene.set, x, y, p.N, scene.solver)
    return solve_closed(scene.manifold, scene.set, scene.seed_loop_curve(), scene.solver)


def certify_curve(scene, gamma):
    fn = certify_closed_weak_geodesic if scene.problem.kind == "closed" else certify_weak_geodesic
    return fn(gamma, scene.set, scene.certify)


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None


def _load_scene(args):
    if args.scene is None:
        raise CliError(EXIT_PARSE, f"{args.command} needs --scene")
    try:
        with open(args.scene, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.scene}: {exc}") from None
    try:
        scene = parse_scene(text)
    except SceneError as exc:
        raise CliError(EXIT_PARSE, f"{args.scene}: {exc}") from None
    if args.nodes is not None:
        if args.nodes < 8:
            raise CliError(EXIT_PARSE, "--nodes must be at least 8")
        scene = scene.with_nodes(args.nodes)
    return scene


def _curve_for(args, scene):
    if args.curve:
        try:
            with open(args.curve, encoding="utf-8") as fh:
                gamma = curve_from_json(fh.read())
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {args.curve}: {exc}") from None
        except (ValueError, KeyError) as exc:
            raise CliError(EXIT_PARSE, f"{args.curve}: {exc}") from None
        if gamma.manifold != scene.manifold:
            raise CliError(EXIT_PARSE, f"{args.curve}: curve manifold differs from the scene")
        return gamma
    result = solve_scene(scene)
    if result.status != CONVERGED:
        raise CliError(EXIT_SOLVE, f"solver stopped with status {result.status}")
    return result.curve


def _report_json(rep):
    return json.dumps(rep.to_dict(), indent=2) + "\n"


def cmd_solve(args):
    scene = _load_scene(args)
    result = solve_scene(scene)
    print(f"status {result.status} after {result.iterations} iterations, "
          f"residual {result.residual:.3e}, energy {result.final_energy:.12g}", file=sys.stderr)
    if result.status != CONVERGED:
        return EXIT_SOLVE
    _write(args.out, curve_to_json(result.curve, result.residual))
    return EXIT_OK


def cmd_certify(args):
    scene = _load_scene(args)
    gamma = _curve_for(args, scene)
    rep = certify_curve(scene, gamma)
    print(rep.table())
    if args.out:
        _write(args.out, _report_json(rep))
    return EXIT_OK if rep.overall else EXIT_CERT


def cmd_probe(args):
    scene = _load_scene(args)
    gamma = _curve_for(args, scene)
    pc = scene.probe
    seed = pc.seed if args.seed is None else args.seed
    rep = probe_local_minimality(gamma, scene.set, pc.trials, pc.window, pc.amplitude, seed)
    print(rep.table())
    if args.out:
        _write(args.out, _report_json(rep))
    return EXIT_OK if rep.overall else EXIT_CERT


def cmd_export(args):
    scene = _load_scene(args)
    gamma = _curve_for(args, scene)
    _write(args.out, curve_to_csv(gamma))
    return EXIT_OK


def run_strip_demo(seed=0, N=None):
    """The hyperbolic strip example end to end; returns (ok, curve_json, lines)."""
    scene = builtin_scene("strip")
    if N is not None:
        scene = scene.with_nodes(N)
    lines = []
    result = solve_scene(scene)
    gamma = result.curve
    A = discrete_accelerations(gamma)
    yerr = float(np.max(np.abs(gamma.nodes[:, 1] - 2.0)))
    aerr = float(np.max(np.linalg.norm(A - [0.0, 2.0], axis=1)) / 2.0)
    cert = certify_curve(scene, gamma)
    pc = scene.probe
    probe = probe_local_minimality(gamma, scene.set, pc.trials, pc.window, pc.amplitude, seed)
    checks = [
        ("converged", result.status == CONVERGED, result.status),
        ("nodes on y = 2", yerr <= 1e-6, f"{yerr:.2e}"),
        ("acceleration ~ (0, 2)", aerr <= 0.05, f"relative error {aerr:.2e}"),
        ("residual", result.residual < 1e-6, f"{result.residual:.2e}"),
        ("energy ~ 1/2", abs(result.final_energy - 0.5) <= 1e-3, f"{result.final_energy:.9f}"),
        ("certificate", cert.overall, "pass" if cert.overall else "fail"),
        ("minimality probe", probe.overall, f"min gap {probe.details.get('min_gap', math.nan):.3e}"),
    ]
    for name, ok, info in checks:
        lines.append(f"[{'ok' if ok else 'FAIL'}] {name}: {info}")
    return all(ok for _, ok, _ in checks), curve_to_json(gamma, result.residual), lines


def run_caps_demo(seed=0, N=256, theta0=2 * math.pi / 3):
    """Boundary arc of the two caps: weak geodesic on S1, counterexample on S2."""
    gamma = boundary_arc(theta0, N)
    S1, S2 = SphericalCapLe(theta0), SphericalCapGe(theta0)
    from .certify import CertifyTolerances
    tols = CertifyTolerances(residual=1e-4)
    c1 = certify_weak_geodesic(gamma, S1, tols)
    c2 = certify_weak_geodesic(gamma, S2, tols)
    target = -math.cos(theta0) / math.sin(theta0)
    A = discrete_accelerations(gamma)
    aerr = float(np.max(np.abs(A[:, 0] - target)) / target)
    ortho = float(np.max(np.abs(A[:, 1])))
    r2 = c2["residual"].measured
    # the arc is a chord of the cap boundary; long windows expose the first-order
    # energy gain on S2 while staying inside the uniqueness tube
    p1 = probe_local_minimality(gamma, S1, 500, 0.25, 1e-3, seed)
    p2 = probe_local_minimality(gamma, S2, 500, 0.25, 1e-3, seed)
    checks = [
        ("S1 certifies", c1.overall, f"residual {c1['residual'].measured:.2e}"),
        ("S1 acceleration ~ 0.57735 d/dtheta", aerr <= 0.01 and ortho <= 1e-8,
         f"relative error {aerr:.2e}"),
        ("S2 fails certification", not c2.overall, f"residual {r2:.6f}"),
        ("S2 residual ~ 0.577", abs(r2 - target) <= 1e-3, f"{r2:.6f}"),
        ("S1 minimality probe passes", p1.overall, f"min gap {p1.details['min_gap']:.3e}"),
        ("S2 minimality probe finds a better curve", not p2.overall,
         f"min gap {p2.details['min_gap']:.3e}"),
    ]
    lines = [f"[{'ok' if ok else 'FAIL'}] {name}: {info}" for name, ok, info in checks]
    lines.append(f"S1: {'PASS' if c1.overall else 'FAIL'}  S2: {'PASS' if c2.overall else 'FAIL'}")
    return all(ok for _, ok, _ in checks), curve_to_json(gamma, residual(gamma, S1)), lines


def _demo(args, fn):
    t0 = time.perf_counter()
    kwargs = {"seed": 0 if args.seed is None else args.seed}
    if args.nodes is not None:
        kwargs["N"] = args.nodes
    ok, curve_json, lines = fn(**kwargs)
    for line in lines:
        print(line)
    print(f"elapsed {time.perf_counter() - t0:.2f} s")
    if args.out:
        _write(args.out, curve_json)
    return EXIT_OK if ok else EXIT_CERT


COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "probe": cmd_probe,
    "export": cmd_export,
    "demo-strip": lambda a: _demo(a, run_strip_demo),
    "demo-caps": lambda a: _demo(a, run_caps_demo),
}


def build_parser():
    p = argparse.ArgumentParser(prog="weakgeo", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--out", help="output file (curve JSON, report JSON or CSV)")
    p.add_argument("--curve", help="curve JSON to certify, probe or export instead of solving")
    p.add_argument("--seed", type=int, help="probe seed (non-negative)")
    p.add_argument("--nodes", type=int, help="override the node count N")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_PARSE
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
