"""Batch command-line front end: ``ksblowup {validate,certify,simulate,sweep,proptest}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import harness
from .grid import ConfigError, build_grid
from .params import (DerivedParams, InfeasibleParameters, InputError, ModelParams,
                     PreconditionError, chi_thresholds, default_gamma, derive, validate_model)
from .solver import BlewUp, HorizonReached, SolverConfig, Stalled, run
from .subsolution import certify, phi
from .transforms import ConstructionError, RadialProfile, make_admissible_initial

log = logging.getLogger("ksblowup")

EXIT_OK, EXIT_INVALID, EXIT_CERT, EXIT_NO_BLOWUP, EXIT_COMPARISON, EXIT_STALLED, EXIT_USAGE = 0, 2, 3, 5, 6, 7, 64

_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


@dataclass
class ExperimentConfig:
    N: int = 3
    p: float = 1.6
    M: float = 8.0
    chi: float | None = None
    chi_N: float | None = 60.0
    gamma: float | None = None
    grid_n: int = 2048
    clustering_exponent: float = 3.0
    horizon: float | None = None
    horizon_factor: float = 1.2
    initial_mode: str = "mollified"
    initial_scale: float = 1.0
    inflation: float = 1.5
    blow_factor: float = 1.05
    output_dir: str = "out"
    seed: int = 0
    workers: int = 2
    cert_rho_samples: int = 10_000
    cert_t_samples: int = 5
    cert_tol: float = 1e-9
    proptest_n: int = 1000
    proptest_deltas: str = "0.25,0.5,1.5,2"
    # solver
    dt_init: float = 1e-6
    dt_min: float = 1e-15
    dt_max: float = 1e-2
    u_cap: float = 1e6
    grow: float = 1.5
    shrink: float = 0.5
    tol_step: float = 1e-6
    scheme: str = "imex"
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    jacobian_floor: float = 1e-14
    snapshot_every: int = 25
    max_steps: int = 2_000_000
    envelope_tol: float = 1e-6

    def __post_init__(self):
        if self.chi is not None:
            self.chi_N = None
        if self.chi is None and self.chi_N is None:
            raise ConfigError("one of chi or chi_N is required")
        checks = [
            (self.grid_n >= 16, "grid_n must be >= 16"),
            (self.clustering_exponent >= 1, "clustering_exponent must be >= 1"),
            (self.horizon is None or self.horizon > 0, "horizon must be positive"),
            (self.horizon_factor > 0, "horizon_factor must be positive"),
            (self.initial_mode in ("exact", "mollified", "inflated"), "unknown initial_mode"),
            (self.initial_scale > 0, "initial_scale must be positive"),
            (self.blow_factor >= 1, "blow_factor must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.cert_rho_samples >= 2 and self.cert_t_samples >= 1, "certificate sample counts too small"),
            (self.cert_tol > 0, "cert_tol must be positive"),
            (self.proptest_n >= 1, "proptest_n must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        self.deltas()
        self.solver_config()

    def model(self) -> ModelParams:
        if self.chi is not None:
            return ModelParams(self.N, self.p, self.M, self.chi)
        return ModelParams.from_chi_N(self.N, self.p, self.M, self.chi_N)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**{k: getattr(self, k) for k in _SOLVER_KEYS})

    def deltas(self) -> list[float]:
        try:
            return [float(v) for v in self.proptest_deltas.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad proptest_deltas: {exc}") from exc

    def horizon_for(self, dp: DerivedParams) -> float:
        return self.horizon if self.horizon is not None else self.horizon_factor * dp.T_max


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    raw = raw.strip()
    if "None" in ftype and raw.lower() in ("", "none"):
        return None
    try:
        if ftype.startswith("int"):
            return int(raw)
        if ftype.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    if "chi" in values and "chi_N" in values and values["chi"] is not None and values["chi_N"] is not None:
        raise ConfigError("give chi or chi_N, not both")
    if values.get("chi") is not None:
        values.setdefault("chi_N", None)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------- pipeline pieces

def _derive_or_report(cfg: ExperimentConfig, quiet: bool = False):
    """Validation gate shared by every command.  Returns (report, dp or None)."""
    mp = cfg.model()
    rep = validate_model(mp, cfg.gamma)
    if not quiet:
        print(rep)
    if not rep.passed:
        return rep, None
    try:
        dp = derive(mp, cfg.gamma)
    except (PreconditionError, InfeasibleParameters) as exc:
        if not quiet:
            print(f"derivation failed: {exc}")
        return rep, None
    return rep, dp


def _print_derived(dp: DerivedParams, mp: ModelParams) -> None:
    thr = chi_thresholds(mp, dp.gamma)
    print(f"gamma = {dp.gamma:.6g}  (gamma_max = {dp.gamma_max:.6g})")
    print(f"theta = {dp.theta:.6g}")
    print("epsilon terms = " + ", ".join(f"{e:.6g}" for e in dp.epsilon_terms))
    print(f"epsilon = {dp.epsilon:.6g}")
    print(f"T_max = {dp.T_max:.6g}  (original time {dp.T_max / dp.N**2:.6g})")
    print(f"rho1 = {dp.rho1:.6g}, rho2 = {dp.rho2:.6g}, kappa = {dp.kappa:.6g}")
    print(f"chi = {mp.chi:.6g}, chi_N = {dp.chi_N:.6g}, chi_N threshold = {dp.chi_threshold:.6g}")
    print("threshold variants: " + ", ".join(f"{k} = {v:.6g}" for k, v in thr.items()))


def _initial(cfg: ExperimentConfig, dp: DerivedParams, grid):
    prof = make_admissible_initial(dp, grid, cfg.initial_mode, inflation=cfg.inflation)
    if cfg.initial_scale != 1.0:
        prof = prof.with_values(prof.values * cfg.initial_scale)
    return prof


def _simulate_core(cfg: ExperimentConfig, dp: DerivedParams, margin: bool = True):
    grid = build_grid(cfg.grid_n, cfg.clustering_exponent)
    U0 = _initial(cfg, dp, grid)
    comparable = dp.admissible and float(np.min(U0.values - phi(0.0, grid.nodes, dp))) >= 0.0

    def margin_fn(t, U):
        return float(np.min(U - phi(min(t, dp.T_max), grid.nodes, dp)))

    horizon = cfg.horizon_for(dp)
    result = run(U0, cfg.solver_config(), dp, horizon,
                 margin_fn=margin_fn if (comparable and margin) else None)
    trace = harness.compare_with_subsolution(result, dp) if comparable else None
    return grid, U0, result, trace, horizon


def _simulate_exit(result, trace, dp: DerivedParams, blow_factor: float) -> int:
    out = result.outcome
    if isinstance(out, Stalled):
        return EXIT_STALLED
    if trace is not None and not trace.passed:
        return EXIT_COMPARISON
    if isinstance(out, HorizonReached):
        return EXIT_NO_BLOWUP
    if isinstance(out, BlewUp) and out.t_blow > blow_factor * dp.T_max:
        return EXIT_NO_BLOWUP
    return EXIT_OK


PLOT_TEMPLATE = """\
# gnuplot script generated by ksblowup simulate
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 1000,700
set output 'sup_u.png'
set logscale y
set xlabel 'rescaled time t'
set ylabel 'sup u'
plot 'timeseries.csv' using 1:3 with lines title 'sup u'
set output 'margin.png'
unset logscale y
set ylabel 'min (U - phi)'
plot 'comparison.csv' using 1:2 with linespoints title 'comparison margin'
set output 'profiles.png'
set xlabel 'rho'
set ylabel 'U'
plot {profiles}
"""


def _write_plot_script(out: Path, snapshot_files: list[str]) -> None:
    pick = snapshot_files[:: max(1, len(snapshot_files) // 6)]
    entries = ", ".join(f"'{f}' using 1:2 with lines title '{Path(f).stem}'" for f in pick)
    (out / "plot.script").write_text(PLOT_TEMPLATE.format(profiles=entries or "0"))


# ---------------------------------------------------------------- commands

def cmd_validate(cfg: ExperimentConfig, args) -> int:
    rep, dp = _derive_or_report(cfg)
    if dp is None:
        return EXIT_INVALID
    _print_derived(dp, cfg.model())
    return EXIT_OK


def cmd_certify(cfg: ExperimentConfig, args) -> int:
    rep, dp = _derive_or_report(cfg)
    if dp is None:
        return EXIT_INVALID
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cert = certify(dp, rho_samples=cfg.cert_rho_samples, t_samples=cfg.cert_t_samples, tol=cfg.cert_tol)
    cert.write_csv(out / "cert.csv")
    text = cert.summary()
    ratio = dp.chi_N / dp.chi_threshold
    if ratio < 1.01:
        text += f"\nWARNING small margin: chi_N / threshold = {ratio:.6g}"
    print(text)
    (out / "summary.txt").write_text(text + "\n")
    return EXIT_OK if cert.passed else EXIT_CERT


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    rep, dp = _derive_or_report(cfg)
    if dp is None:
        return EXIT_INVALID
    try:
        grid, U0, result, trace, horizon = _simulate_core(cfg, dp)
    except ConstructionError as exc:
        print(f"initial data: {exc}")
        return EXIT_INVALID
    out = Path(cfg.output_dir)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    result.series.write_csv(out / "timeseries.csv")
    snap_files = []
    for k, (t, U) in enumerate(result.snapshots):
        name = f"snapshots/profile_{k}.csv"
        RadialProfile(grid, U, "mass_U", t).write_csv(out / name)
        snap_files.append(name)
    files = {"timeseries": str(out / "timeseries.csv"), "snapshots": str(snap_dir)}
    if trace is not None:
        trace.write_csv(out / "comparison.csv")
        files["comparison"] = str(out / "comparison.csv")
    else:
        print("comparison skipped: U0 does not lie above phi(0, .)")
    cert = certify(dp, rho_samples=cfg.cert_rho_samples, t_samples=cfg.cert_t_samples, tol=cfg.cert_tol)
    _write_plot_script(out, snap_files)
    files["plot"] = str(out / "plot.script")
    summary = harness.report(result, cert, trace, files, horizon=horizon, blow_factor=cfg.blow_factor)
    if trace is None:
        summary.notes.append("comparison precondition unsatisfied; harness skipped")
    summary.write(out)
    print(summary.text(), end="")
    return _simulate_exit(result, trace, dp, cfg.blow_factor)


SWEEP_AXES = ("p", "M", "chi", "chi_N")
SWEEP_FIELDS = ("point", "axis", "value", "status", "gamma", "epsilon", "T_max", "t_blow",
                "margin", "outcome", "exit", "note")


def _sweep_point(args) -> dict:
    point, axis, value, cfg_dict = args
    row = {k: "" for k in SWEEP_FIELDS}
    row.update(point=point, axis=axis, value=value)
    try:
        cfg = ExperimentConfig(**cfg_dict)
        _, dp = _derive_or_report(cfg, quiet=True)
    except (ConfigError, InputError) as exc:
        row.update(status="skipped", note=str(exc))
        return row
    if dp is None:
        mp = cfg.model()
        note = "; ".join(f.label for f in validate_model(mp, cfg.gamma).failures) or "derivation failed"
        if axis in ("chi", "chi_N"):
            try:
                g = cfg.gamma if cfg.gamma is not None else default_gamma(mp)
                t = chi_thresholds(mp, g)
                note += f" (chi_N={mp.chi_N:.6g}, threshold {max(t['floor'], t['positivity']):.6g})"
            except (InfeasibleParameters, PreconditionError, InputError):
                pass
        row.update(status="skipped", note=note)
        return row
    row.update(status="run", gamma=dp.gamma, epsilon=dp.epsilon, T_max=dp.T_max)
    try:
        _, _, result, trace, _ = _simulate_core(cfg, dp, margin=False)
    except ConstructionError as exc:
        row.update(status="skipped", note=str(exc))
        return row
    row["outcome"] = type(result.outcome).__name__
    if isinstance(result.outcome, BlewUp):
        row["t_blow"] = result.outcome.t_blow
    row["margin"] = "" if trace is None else trace.worst
    row["exit"] = _simulate_exit(result, trace, dp, cfg.blow_factor)
    return row


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    if args.axis is None or args.values is None:
        raise ConfigError("sweep needs --axis and --values")
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"--axis must be one of {', '.join(SWEEP_AXES)}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")
    base = dataclasses.asdict(cfg)
    jobs = []
    for i, v in enumerate(values):
        d = dict(base)
        d[args.axis] = v
        if args.axis == "chi":
            d["chi_N"] = None
        elif args.axis == "chi_N":
            d["chi"] = None
        jobs.append((i, args.axis, v, d))
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
        rows = list(pool.map(_sweep_point, jobs))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(SWEEP_FIELDS))
        w.writeheader()
        for r in rows:
            w.writerow(r)
    for r in rows:
        if r["status"] == "skipped":
            print(f"point {r['point']} ({args.axis}={r['value']:g}) skipped: {r['note']}")
        else:
            print(f"point {r['point']} ({args.axis}={r['value']:g}): {r['outcome']} "
                  f"t_blow={r['t_blow']} T_max={r['T_max']:.6g}")
    ran = [r for r in rows if r["status"] == "run"]
    if not ran:
        return EXIT_INVALID
    codes = {r["exit"] for r in ran}
    for code in (EXIT_COMPARISON, EXIT_STALLED, EXIT_NO_BLOWUP):
        if code in codes:
            return code
    return EXIT_OK


def run_proptests(cfg: ExperimentConfig) -> tuple[list[dict], int, int]:
    """Hardy and mean-value batches.  Returns (rows, failures, rejected)."""
    rng = np.random.default_rng(cfg.seed)
    rows, failures, rejected = [], 0, 0
    for delta in cfg.deltas():
        for i in range(cfg.proptest_n):
            rho, u = harness.random_hardy_function(rng, delta if delta != 1.0 else 2.0)
            try:
                h = harness.hardy_check(rho, u, delta)
            except harness.PreconditionError:
                rejected += 1
                rows.append({"kind": "hardy", "index": i, "a": delta, "b": "", "c": "", "d": "",
                             "lhs": "", "rhs": "", "bound": "", "result": "rejected"})
                continue
            failures += not h.passed
            rows.append({"kind": "hardy", "index": i, "a": delta, "b": len(rho), "c": "", "d": "",
                         "lhs": repr(h.lhs), "rhs": repr(h.rhs), "bound": repr(h.constant * h.rhs),
                         "result": "pass" if h.passed else "FAIL"})
    for i in range(cfg.proptest_n):
        p = float(rng.uniform(1.01, 1.99))
        k = float(rng.uniform(0.01, 0.99))
        y = float(rng.lognormal(0.0, 1.0))
        x = float(rng.uniform(0.0, k * y))
        if i % 10 == 0:  # push toward the x -> k y boundary
            x = k * y * (1.0 - 10.0 ** -rng.uniform(1, 8))
        xi, k0, ok = harness.mvt_bound_check(x, y, k, p)
        failures += not ok
        rows.append({"kind": "mvt", "index": i, "a": repr(p), "b": repr(k), "c": repr(y), "d": repr(x),
                     "lhs": repr(xi), "rhs": repr(k0 * y), "bound": "", "result": "pass" if ok else "FAIL"})
    return rows, failures, rejected


def cmd_proptest(cfg: ExperimentConfig, args) -> int:
    rows, failures, rejected = run_proptests(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "proptest.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["kind", "index", "a", "b", "c", "d", "lhs", "rhs", "bound", "result"])
        w.writeheader()
        w.writerows(rows)
    print(f"{len(rows)} cases, {failures} failures, {rejected} rejected inputs (seed {cfg.seed})")
    return EXIT_OK if failures == 0 else EXIT_CERT


COMMANDS = {
    "validate": cmd_validate,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "proptest": cmd_proptest,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ksblowup", description="Blow-up simulator and subsolution certificate checker.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--seed", type=int, help="seed for property tests (overrides seed)")
    ap.add_argument("--axis", help="sweep axis: p, M, chi or chi_N")
    ap.add_argument("--values", help="comma-separated sweep values")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        t0 = time.perf_counter()
        code = COMMANDS[args.command](cfg, args)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
        return code
    except (ConfigError, InputError) as exc:
        print(f"ksblowup: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
