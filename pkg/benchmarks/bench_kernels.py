"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--steps 20000] [--dim 3] [--repeat 3] [--json out.json]

Each kernel runs on the same random inputs under both backends; the table
shows the best of ``--repeat`` wall times and the speedup.
"""
import argparse
import json
import sys
import time

import numpy as np

from floquet import kernels


def inputs(steps: int, n: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    mats = rng.uniform(0.5, 2.0, (steps, n, n))
    w = rng.uniform(0.5, 1.0, (steps + 1, n))
    ws = rng.uniform(0.5, 1.0, (steps + 1, n))
    q0 = np.ascontiguousarray(np.linalg.qr(rng.standard_normal((n, min(2, n))))[0])
    cps = np.unique(np.geomspace(1, steps, 24).astype(np.int64))
    return {
        "normalized_orbit": lambda k: k.normalized_orbit(mats, np.ones(n), 0, False),
        "normalized_orbit(store)": lambda k: k.normalized_orbit(mats, np.ones(n), 0, True),
        "qr_log_diagonals": lambda k: k.qr_log_diagonals(mats, q0),
        "tau_kappa": lambda k: k.tau_kappa(mats, np.ones(n) / n),
        "log_scaled_product": lambda k: k.log_scaled_product(mats),
        "projected_products": lambda k: k.projected_products(mats, w, ws, cps),
    }


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", default=None, help="also write the timings here")
    args = p.parse_args(argv)

    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the python backend only", file=sys.stderr)
    cases = inputs(args.steps, args.dim)
    rows = []
    print(f"steps={args.steps} dim={args.dim} repeat={args.repeat}")
    print(f"{'kernel':26s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, fn in cases.items():
        t = {b: best_time(lambda: fn(mod), args.repeat) for b, mod in sorted(backends.items())}
        sp = t["python"] / t["compiled"] if "compiled" in t else float("nan")
        rows.append({"kernel": name, **t, "speedup": sp})
        print(f"{name:26s} {t['python']:11.4f} {t.get('compiled', float('nan')):13.4f} {sp:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"steps": args.steps, "dim": args.dim, "results": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
