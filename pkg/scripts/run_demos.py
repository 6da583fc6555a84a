"""Run the strip and caps demos and write their curves to an output directory.

    python3 scripts/run_demos.py [--out results] [--seed 0]
"""
import argparse
import pathlib
import time

from weakgeo.cli import run_caps_demo, run_strip_demo


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    all_ok = True
    for name, fn in [("strip", run_strip_demo), ("caps", run_caps_demo)]:
        t0 = time.perf_counter()
        ok, curve_json, lines = fn(seed=args.seed)
        print(f"== {name} ({time.perf_counter() - t0:.2f} s)")
        print("\n".join(lines))
        (out / f"{name}_curve.json").write_text(curve_json)
        all_ok &= ok
    print("all demos passed" if all_ok else "some demo checks failed")
    return 0 if all_ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
