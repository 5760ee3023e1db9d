"""Command line driver.

    floquet estimate|separation|verify|compare|orbit --config run.yaml --out DIR
            [--workers K] [--horizon N]

Every command writes ``record.json`` (a RunRecord) and its CSV traces into
the output directory, which defaults to ``$FLOQUET_OUT`` or ``./runs``.

Exit codes: 0 success, 2 configuration error, 3 an assumption or
precondition check failed, 4 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .cocycle import (ConfigError, OmegaPath, check_A1_integrability, forward_product)
from .config import RunConfig, RunRecord, load_config
from .estimators import default_workers
from .focusing import AssumptionError, FocusingError, auto_step, focusing_report, verify_A5
from .hilbert_metric import ray_distance
from .ordered_space import norm, ones_unit
from .principal import (entire_orbit, forward_normalize, growth_log, lyapunov_top,
                        pullback_adaptive)
from .separation import (DegeneratePairingError, DominationError, compare_exponents,
                         dual_adaptive, projection_family, qr_exponents, second_exponent,
                         temperedness_check)

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 2, 3, 4
OUT_ENV = "FLOQUET_OUT"
COMMANDS = ("estimate", "separation", "verify", "compare", "orbit")

_OPTIONS = {
    "estimate": {"traces", "trace_every", "focusing_samples"},
    "separation": {"traces", "points", "qr", "eps", "focusing_samples"},
    "verify": {"focusing_samples", "integrability_replicates", "nu_horizon", "invariant_samples"},
    "compare": {"check_depth", "focusing_samples"},
    "orbit": {"anchor", "backward", "forward"},
}

NUMERICAL = (FocusingError, DegeneratePairingError, FloatingPointError, np.linalg.LinAlgError)


class Run:
    """State shared by the command implementations."""

    def __init__(self, command: str, cfg: RunConfig, out: Path, workers: int):
        self.cfg = cfg
        self.out = out
        self.workers = workers
        self.model = cfg.build_model()
        self.step = cfg.step if cfg.step is not None else auto_step(self.model)
        self.record = RunRecord(command, cfg.to_dict(), backend=kernels.BACKEND)

    def error(self, kind: str, exc: Exception, seed=None) -> None:
        self.record.errors.append({"kind": kind, "message": str(exc),
                                   "index": getattr(exc, "index", None), "seed": seed})

    def add_output(self, name: str) -> Path:
        self.record.outputs.append(name)
        return self.out / name

    def focusing(self, model=None) -> None:
        samples = int(self.cfg.option("focusing_samples", 1000))
        rep = focusing_report(model or self.model, seed=self.cfg.seeds[0], samples=samples,
                              step=self.step, e=self.cfg.focus)
        self.record.focusing = rep.to_dict()

    def estimate_kwargs(self) -> dict:
        c = self.cfg
        return {"burn_in": c.burn_in, "step": self.step, "tol": c.tol, "cap": c.cap}


def _trace_every(cfg: RunConfig, steps: int) -> int:
    every = cfg.option("trace_every")
    return int(every) if every else max(1, math.ceil(steps / 10000))


def _partial_top(run: Run, dual: bool = False):
    """Per-seed fallback after an abort: keep the replicates that finish."""
    done = []
    for s in run.cfg.seeds:
        try:
            est = lyapunov_top(run.model, [s], run.cfg.horizon, dual=dual,
                               **run.estimate_kwargs())
            done.extend(est.replicates)
        except NUMERICAL as exc:
            run.error("numerical_abort", exc, s)
    return done


# --------------------------------------------------------------------------
# commands


def cmd_estimate(run: Run) -> int:
    cfg = run.cfg
    run.focusing()
    try:
        est = lyapunov_top(run.model, cfg.seeds, cfg.horizon, workers=run.workers,
                           **run.estimate_kwargs())
    except NUMERICAL:
        run.record.status = "numerical_abort"
        run.record.replicates = _partial_top(run)
        run.record.results["partial"] = True
        return EXIT_NUMERICAL
    run.record.results["lambda1"] = est
    run.record.replicates = est.replicates
    steps = cfg.horizon // run.step
    run.record.steps = steps * len(cfg.seeds)
    if cfg.option("traces", True):
        every = _trace_every(cfg, steps)
        for s in cfg.seeds:
            path = OmegaPath(run.model, s, step=run.step)
            pv = pullback_adaptive(path, 0, tol=cfg.tol, cap=cfg.cap, e=cfg.focus)
            glog, _, _ = growth_log(path, pv, steps, certificates=True)
            glog.to_csv(run.add_output(f"growth_seed{s}.csv"), every=every)
    return EXIT_OK


def cmd_separation(run: Run) -> int:
    cfg = run.cfg
    run.focusing()
    try:
        sep = second_exponent(run.model, cfg.seeds, cfg.horizon, points=int(cfg.option("points", 24)),
                              workers=run.workers, **run.estimate_kwargs())
        temp = temperedness_check(run.model, cfg.seeds, cfg.horizon,
                                  eps=float(cfg.option("eps", 0.01)), step=run.step,
                                  tol=cfg.tol, cap=cfg.cap)
        path = OmegaPath(run.model, cfg.seeds[0], step=run.step)
        fam = projection_family(path, 1, 0, tol=cfg.tol, cap=cfg.cap)
    except NUMERICAL as exc:
        run.error("numerical_abort", exc)
        run.record.status = "numerical_abort"
        return EXIT_NUMERICAL
    res = run.record.results
    res.update(sep.to_dict())
    res["pair"] = {"anchor_index": 0, "seed": cfg.seeds[0], "w": fam.w[0], "w_star": fam.w_star[0],
                   "pairing": float(fam.pairing[0])}
    res["temperedness"] = temp
    if cfg.option("qr", True):
        res["qr"] = qr_exponents(run.model, cfg.seeds, cfg.horizon, min(2, path.n), step=run.step,
                                 burn_in=cfg.burn_in, workers=run.workers)
    res["verdicts"] = {"zero_separation": sep.zero_separation, "tempered": temp.verdict,
                       "sigma_positive": bool(sep.sigma > 3 * sep.sigma_se)}
    run.record.replicates = [
        {"seed": a["seed"], "lambda1": a["value"], "lambda1_se": a["se"],
         "lambda2": b["value"], "lambda2_se": b["se"], "pairing_min": b["pairing_min"]}
        for a, b in zip(sep.lambda1.replicates, sep.lambda2.replicates)]
    run.record.steps = (cfg.horizon // run.step) * len(cfg.seeds)
    if cfg.option("traces", True):
        for s, tr in zip(sorted(cfg.seeds), sep.traces):
            tr.to_csv(run.add_output(f"separation_seed{s}.csv"))
    return EXIT_OK


def _invariant_suite(run: Run, rng: np.random.Generator) -> dict:
    """Sampled invariant checks along the first seed's path."""
    cfg = run.cfg
    path = OmegaPath(run.model, cfg.seeds[0], step=run.step)
    kind = path.norm
    n = path.n
    samples = int(cfg.option("invariant_samples", 10000))
    out = {}
    pv = pullback_adaptive(path, 0, tol=cfg.tol, cap=cfg.cap)
    # start independence
    alt = pullback_adaptive(path, 0, tol=cfg.tol, cap=cfg.cap, start=rng.uniform(0.1, 1.0, n))
    out["start_independence"] = bool(norm(pv.w - alt.w, kind) <= pv.error_bound + alt.error_bound + 1e-14)
    # equivariance
    t = 10
    fw = forward_normalize(path, pv, t)
    direct = pullback_adaptive(path, t, tol=cfg.tol, cap=cfg.cap)
    out["equivariance"] = bool(norm(fw.w - direct.w, kind) <= fw.error_bound + direct.error_bound + 1e-14)
    # growth additivity
    glog, _, _ = growth_log(path, pv, 64)
    whole = glog.log_rho(0, 64)
    out["growth_additivity"] = bool(abs(whole - glog.log_rho(0, 20) - glog.log_rho(20, 44)) <= 1e-10)
    # focusing lower bound w >= e / kappa(A_{-1})
    e = ones_unit(n, kind)
    kap = float(kernels.tau_kappa(path.window(-1, 0), e)[1][0])
    out["lower_bound"] = bool(np.all(pv.w >= e / kap * (1 - 1e-12)))
    # projection algebra and cone avoidance
    fam = projection_family(path, 8, 0, tol=cfg.tol, cap=cfg.cap)
    P = fam.matrix(0)
    U = rng.standard_normal((64, n))
    PU = U @ P.T
    out["projection_idempotent"] = bool(np.max(np.abs(P @ P - P)) <= 1e-10)
    out["projection_kills_w"] = bool(np.max(np.abs(P @ fam.w[0])) <= 1e-10)
    out["projection_range"] = bool(np.max(np.abs(PU @ fam.w_star[0])) <= 1e-10)
    cone = rng.exponential(size=(samples, n))
    out["cone_avoidance"] = bool(np.all(cone @ fam.w_star[0] > 0))
    return out


def cmd_verify(run: Run) -> int:
    cfg = run.cfg
    rng = np.random.default_rng(cfg.seeds[0])
    run.focusing()
    foc = run.record.focusing
    verdicts = dict(foc["verdicts"])
    verdicts["primitive"] = foc["primitivity_index"] is not None
    integ = check_A1_integrability(run.model, int(cfg.option("integrability_replicates", 1000)),
                                   seed=cfg.seeds[0])
    verdicts["A1_integrable"] = not integ.heavy_tail
    res = run.record.results
    res["integrability"] = integ
    e_bar = cfg.focus
    try:
        path = OmegaPath(run.model, cfg.seeds[0], step=run.step)
        nu = verify_A5(path, e_bar, horizon=int(cfg.option("nu_horizon", min(cfg.horizon // run.step, 10000))))
        res["nu"] = nu
        verdicts["A5_nu_positive"] = True
    except AssumptionError as exc:
        run.error("assumption", exc)
        verdicts["A5_nu_positive"] = False
    try:
        dual_pv = None
        if verdicts["A3_focusing"] and verdicts["A3_star_focusing"]:
            verdicts.update(_invariant_suite(run, rng))
            dual_pv = dual_adaptive(OmegaPath(run.model, cfg.seeds[0], step=run.step), 0,
                                    tol=cfg.tol, cap=cfg.cap)
        if dual_pv is not None:
            res["dual_certificate"] = dual_pv.error_bound
    except NUMERICAL as exc:
        run.error("numerical_abort", exc)
        run.record.status = "numerical_abort"
        res["verdicts"] = verdicts
        return EXIT_NUMERICAL
    res["verdicts"] = verdicts
    res["step"] = run.step
    if not all(verdicts.values()):
        run.record.status = "assumption_failed"
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_compare(run: Run) -> int:
    cfg = run.cfg
    hi = cfg.build_model_hi()
    run.focusing()
    step = cfg.step if cfg.step is not None else max(run.step, auto_step(hi))
    try:
        cmp = compare_exponents(run.model, hi, cfg.seeds, cfg.horizon, step=step,
                                burn_in=cfg.burn_in, tol=cfg.tol, cap=cfg.cap, workers=run.workers,
                                check_depth=int(cfg.option("check_depth", 4096)))
    except DominationError as exc:
        run.error("domination", exc, exc.seed)
        run.record.status = "assumption_failed"
        return EXIT_ASSUMPTION
    except NUMERICAL as exc:
        run.error("numerical_abort", exc)
        run.record.status = "numerical_abort"
        return EXIT_NUMERICAL
    res = run.record.results
    res.update(cmp.to_dict())
    res["verdicts"] = {"ordered": cmp.ordered}
    run.record.replicates = [
        {"seed": a["seed"], "lambda_lo": a["value"], "lambda_hi": b["value"],
         "gap": b["value"] - a["value"]}
        for a, b in zip(cmp.lambda_lo.replicates, cmp.lambda_hi.replicates)]
    run.record.steps = 2 * (cfg.horizon // step) * len(cfg.seeds)
    if not cmp.ordered:
        run.record.status = "assumption_failed"
        return EXIT_ASSUMPTION
    return EXIT_OK


def _orbit_checks(path: OmegaPath, orb) -> dict:
    """Entire-orbit relation over all index pairs, in the log domain."""
    idx = orb.indices
    worst = 0.0
    for i, s in enumerate(idx):
        for j in range(i + 1, idx.size):
            prod = forward_product(path, int(s), int(idx[j] - s))
            img = prod.value @ orb.units[i]
            scale = prod.log_scale + orb.log_scale[i] - orb.log_scale[j]
            ref = orb.units[j]
            err = np.max(np.abs(img * math.exp(scale) - ref)) / np.max(np.abs(ref))
            worst = max(worst, float(err))
    return {"relation_max_rel_error": worst, "min_coordinate": float(orb.units.min())}


def cmd_orbit(run: Run) -> int:
    cfg = run.cfg
    k = int(cfg.option("anchor", 0))
    m = int(cfg.option("backward", 20))
    t = int(cfg.option("forward", 20))
    reps = []
    try:
        for s in cfg.seeds:
            path = OmegaPath(run.model, s, step=run.step)
            orb = entire_orbit(path, k, m, t, tol=cfg.tol, cap=cfg.cap)
            rng = np.random.default_rng(s)
            other = entire_orbit(path, k, m, t, start=rng.uniform(0.1, 1.0, path.n),
                                 tol=cfg.tol, cap=cfg.cap)
            rec = {"seed": s, **_orbit_checks(path, orb)}
            rec["ray_distance_second_orbit"] = max(
                ray_distance(a, b) for a, b in zip(orb.units, other.units))
            reps.append(rec)
            dest = run.add_output(f"orbit_seed{s}.csv")
            with open(dest, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["index", "log_scale"] + [f"u{i}" for i in range(path.n)])
                for j, ls, u in zip(orb.indices, orb.log_scale, orb.units):
                    wr.writerow([int(j), repr(float(ls))] + [repr(float(x)) for x in u])
    except NUMERICAL as exc:
        run.error("numerical_abort", exc)
        run.record.status = "numerical_abort"
        run.record.replicates = reps
        return EXIT_NUMERICAL
    run.record.replicates = reps
    run.record.steps = (m + t) * len(cfg.seeds)
    run.record.results["verdicts"] = {
        "relation": all(r["relation_max_rel_error"] <= 1e-10 for r in reps),
        "open_cone": all(r["min_coordinate"] > 0 for r in reps),
        "unique_ray": all(r["ray_distance_second_orbit"] < 1e-8 for r in reps),
    }
    run.record.results["window"] = [k - m, k + t]
    return EXIT_OK


DISPATCH = {"estimate": cmd_estimate, "separation": cmd_separation, "verify": cmd_verify,
            "compare": cmd_compare, "orbit": cmd_orbit}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floquet", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", default=None,
                   help=f"output directory (default: ${OUT_ENV} or ./runs)")
    p.add_argument("--workers", type=int, default=None,
                   help="replicate worker processes (default: CPU count)")
    p.add_argument("--horizon", type=int, default=None, help="override the configured horizon")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_command(command: str, cfg: RunConfig, out: Path, workers: int = 1) -> tuple[RunRecord, int]:
    """Run one command and write its record; returns ``(record, exit_code)``."""
    unknown = set(cfg.options) - _OPTIONS[command]
    if unknown:
        raise ConfigError(f"{command}: unknown options {sorted(unknown)}")
    if command == "compare" and cfg.model_hi is None and cfg.coupling is None:
        raise ConfigError("compare needs model_hi or coupling")
    out.mkdir(parents=True, exist_ok=True)
    run = Run(command, cfg, out, workers)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    code = DISPATCH[command](run)
    run.record.timing = {"started": started, "wall_seconds": time.perf_counter() - t0}
    run.record.write(run.add_output("record.json"))
    return run.record, code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    out = Path(args.out or os.environ.get(OUT_ENV) or "runs")
    workers = args.workers if args.workers is not None else default_workers()
    try:
        if workers < 1:
            raise ConfigError("--workers must be positive")
        cfg = load_config(args.config)
        if args.horizon is not None:
            cfg = dataclasses.replace(cfg, horizon=args.horizon)
        record, code = run_command(args.command, cfg, out, workers)
    except (ConfigError, ValueError) as exc:
        print(f"floquet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for err in record.errors:
        print(f"floquet: {err['kind']}: {err['message']}", file=sys.stderr)
    print(f"{args.command}: {record.status} -> {out / 'record.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
