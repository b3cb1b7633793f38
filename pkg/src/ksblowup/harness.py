"""Empirical checks layered on top of solver runs and sampled functions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, build_grid
from .params import DerivedParams, PreconditionError, a_of_t
from .solver import (BlewUp, HorizonReached, Operator, RunResult, SolverConfig, Stalled, StepFailed,
                     replay, run)
from .subsolution import CertReport, phi, spatial_part

# 16-point Gauss-Legendre on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


# ---------------------------------------------------------------- comparison

@dataclass
class ComparisonTrace:
    times: list[float]
    min_margin: list[float]
    tol: float
    first_violation: tuple[float, float, float] | None = None
    interpolated: bool = False
    half_mass: list[tuple[float, float, float]] = field(default_factory=list)  # (t, rho, U)

    @property
    def worst(self) -> float:
        return min(self.min_margin) if self.min_margin else math.inf

    @property
    def half_mass_ok(self) -> bool:
        return all(U >= 0.5 - self.tol for _, _, U in self.half_mass)

    @property
    def passed(self) -> bool:
        return self.first_violation is None and self.half_mass_ok

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "min_margin"])
            for t, m in zip(self.times, self.min_margin):
                w.writerow([repr(t), repr(m)])


def compare_with_subsolution(result: RunResult, dp: DerivedParams, tol: float | None = None,
                             c_tol: float = 10.0, grid: Grid | None = None) -> ComparisonTrace:
    """min over nodes of U - phi at every snapshot taken before blow-up.

    Passing ``grid`` different from the run's grid evaluates on that grid after linear
    interpolation; the trace is then flagged.
    """
    if not dp.admissible:
        raise PreconditionError(
            f"chi_N={dp.chi_N:.6g} not above threshold {dp.chi_threshold:.6g}: comparison undefined"
        )
    g = result.grid
    if tol is None:
        tol = c_tol * (g.h_max + result.config.tol_step)
    start = result.U0 - phi(0.0, g.nodes, dp)
    if float(start.min()) < 0.0:
        raise PreconditionError(f"U0 lies below phi(0, .) by {-start.min():.3e}")

    interpolated = grid is not None and grid is not g and not (
        grid.nodes.shape == g.nodes.shape and np.array_equal(grid.nodes, g.nodes))
    target = grid if interpolated else g

    t_end = dp.T_max
    if isinstance(result.outcome, BlewUp):
        t_end = min(t_end, result.outcome.t_blow)
    times, margins = [], []
    first = None
    half = []
    for k, (t, U) in enumerate(result.snapshots):
        if t > t_end or (t == t_end and isinstance(result.outcome, BlewUp) and k > 0):
            break
        vals = np.interp(target.nodes, g.nodes, U) if interpolated else U
        m = vals - phi(t, target.nodes, dp)
        i = int(np.argmin(m))
        times.append(float(t))
        margins.append(float(m[i]))
        if first is None and m[i] < -tol:
            first = (float(t), float(target.nodes[i]), float(m[i]))
        r_half = float(a_of_t(t, dp)) ** (1.0 / dp.gamma)
        if 0.0 < r_half <= dp.rho1:
            half.append((float(t), r_half, float(np.interp(r_half, target.nodes, vals))))
    return ComparisonTrace(times, margins, float(tol), first, interpolated, half)


# ---------------------------------------------------------------- stability

@dataclass
class StabilityProbe:
    scale: float
    t: np.ndarray
    difference: np.ndarray
    sup_u: np.ndarray
    bound: float
    status: str  # "passed" | "failed" | "inconclusive"
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    @property
    def max_difference(self) -> float:
        return float(self.difference.max()) if self.difference.size else 0.0


def stability_probe(U0, perturbation_scale: float, config: SolverConfig, dp: DerivedParams,
                    grid: Grid, horizon: float | None = None, base: RunResult | None = None,
                    sup_factor: float = 100.0, amplification: float = 1e4) -> StabilityProbe:
    """Divergence of U0 and U0 (1 + scale) under the same step sequence.

    The step sequence is the one the adaptive controller chose for U0, so both
    trajectories see identical dt.  Monitoring stops once sup u of the base run
    reaches sup_factor * M.
    """
    U0 = np.asarray(getattr(U0, "values", U0), dtype=float)
    if base is None:
        base = run(U0, config, dp, horizon or 1.2 * dp.T_max, grid=grid)
    if base.grid is not grid and not np.array_equal(base.grid.nodes, grid.nodes):
        raise PreconditionError("stability probe needs both runs on the same grid")
    dts = base.series.dt[1:]
    limit = sup_factor * dp.M
    bound = amplification * perturbation_scale
    ts, diffs, sups = [0.0], [float(np.max(np.abs(U0 * perturbation_scale)))], [base.series.sup_u[0]]
    status, note = "passed", ""
    if isinstance(base.outcome, Stalled):
        status, note = "inconclusive", "base run stalled"
    try:
        gen_a = replay(U0, dts, config, dp, grid)
        gen_b = replay(U0 * (1.0 + perturbation_scale), dts, config, dp, grid)
        for k, ((t, Ua), (_, Ub)) in enumerate(zip(gen_a, gen_b), start=1):
            su = base.series.sup_u[k]
            if su > limit:
                break
            d = float(np.max(np.abs(Ua - Ub)))
            ts.append(t)
            diffs.append(d)
            sups.append(su)
            if not np.isfinite(d):
                status, note = "inconclusive", "non-finite perturbed state"
                break
    except StepFailed as exc:
        status, note = "inconclusive", f"replay failed: {exc}"
    diff = np.asarray(diffs)
    if status == "passed" and np.any(diff > bound):
        status = "failed"
    return StabilityProbe(perturbation_scale, np.asarray(ts), diff, np.asarray(sups), bound, status, note)


# ---------------------------------------------------------------- Hardy

@dataclass(frozen=True)
class HardyCheck:
    delta: float
    lhs: float
    rhs: float
    constant: float
    quad_tol: float = 1e-9

    @property
    def eps0(self) -> float:
        return abs(1.0 - self.delta) / 2.0

    @property
    def sharp_constant(self) -> float:
        e = self.eps0
        return 1.0 / (e * (abs(1.0 - self.delta) - e))

    @property
    def passed(self) -> bool:
        return self.lhs <= self.constant * self.rhs * (1.0 + self.quad_tol) + self.quad_tol * 1e-6


def hardy_constant(delta: float) -> float:
    return 4.0 / (1.0 - delta) ** 2


def hardy_integrals(rho, u, delta: float) -> tuple[float, float]:
    """int rho^-delta u^2 and int rho^(2-delta) u_rho^2 for the piecewise-linear interpolant.

    The gradient integral is exact cell by cell.  The weighted L2 integral uses the
    closed form on the first cell and Gauss-Legendre elsewhere.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    a, b = rho[:-1], rho[1:]
    s = np.diff(u) / np.diff(rho)
    e = 3.0 - delta
    rhs = float(np.sum(s**2 * (b**e - a**e) / e))

    h, u0, s0 = rho[1], u[0], s[0]
    first = s0**2 * h ** (3.0 - delta) / (3.0 - delta)
    if u0 != 0.0:
        first += u0**2 * h ** (1.0 - delta) / (1.0 - delta) + 2.0 * u0 * s0 * h ** (2.0 - delta) / (2.0 - delta)
    x = a[1:, None] + (b - a)[1:, None] * _GL_X[None, :]
    ux = u[1:-1, None] + s[1:, None] * (x - a[1:, None])
    rest = np.sum((b - a)[1:] * np.sum(_GL_W * x ** (-delta) * ux**2, axis=1))
    return float(first + rest), rhs


def hardy_check(rho, u, delta: float, quad_tol: float = 1e-9, zero_tol: float = 1e-12) -> HardyCheck:
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    if not math.isfinite(delta) or delta <= 0.0 or delta == 1.0:
        raise PreconditionError("delta must lie in (0, 1) or (1, inf)")
    if rho[0] != 0.0 or rho[-1] != 1.0 or np.any(np.diff(rho) <= 0):
        raise PreconditionError("samples must cover [0, 1] on increasing nodes")
    scale = max(1.0, float(np.max(np.abs(u))))
    if abs(u[-1]) > zero_tol * scale:
        raise PreconditionError("u must vanish at rho = 1")
    if delta > 1.0:
        # linear near 0 gives rho^(1-delta) u^2 ~ rho^(3-delta)
        if abs(u[0]) > zero_tol * scale or delta >= 3.0:
            raise PreconditionError("rho^(1-delta) u^2 does not decay at the origin")
    u = u.copy()
    u[-1] = 0.0
    if delta > 1.0:
        u[0] = 0.0
    lhs, rhs = hardy_integrals(rho, u, delta)
    return HardyCheck(delta, lhs, rhs, hardy_constant(delta), quad_tol)


def random_hardy_function(rng: np.random.Generator, delta: float, max_knots: int = 12):
    """Random piecewise-linear u on random knots with u(1) = 0 (and u(0) = 0 when delta > 1)."""
    k = int(rng.integers(1, max_knots + 1))
    inner = np.sort(rng.uniform(0.0, 1.0, size=k))
    rho = np.unique(np.concatenate(([0.0], inner, [1.0])))
    u = rng.normal(size=rho.size) * rng.lognormal(0.0, 1.0)
    u[-1] = 0.0
    if delta > 1.0:
        u[0] = 0.0
    return rho, u


# ---------------------------------------------------------------- mean value bound

def mvt_bound_check(x: float, y: float, k: float, p: float) -> tuple[float, float, bool]:
    """Intermediate point of y^(p-1) - x^(p-1) = (p-1) xi^(p-2) (y - x) against k0 y."""
    vals = (x, y, k, p)
    if not all(math.isfinite(v) for v in vals):
        raise PreconditionError("non-finite input")
    if not (y > 0 and 0 < k < 1 and 1 < p < 2 and 0 <= x < k * y):
        raise PreconditionError("need 0 <= x < k y, y > 0, k in (0,1), p in (1,2)")
    xi = ((p - 1.0) * (y - x) / (y ** (p - 1.0) - x ** (p - 1.0))) ** (1.0 / (2.0 - p))
    k0 = ((p - 1.0) * (1.0 - k)) ** (1.0 / (2.0 - p))
    return xi, k0, bool(xi >= k0 * y * (1.0 - 1e-12))


# ---------------------------------------------------------------- consistency

def consistency_errors(dp: DerivedParams, ns=(256, 512, 1024), t: float = 0.0, margin: float = 0.02,
                       clustering_exponent: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    """Sup error of the discrete right-hand side on sampled phi against the closed form.

    Nodes within ``margin`` of 0, 1, rho1 or rho2 are excluded.  Returns (errors,
    ratios of successive errors).
    """
    errs = []
    for n in ns:
        g = build_grid(n, clustering_exponent)
        U = phi(t, g.nodes, dp)
        r = g.interior
        keep = ((r > margin) & (r < 1.0 - margin)
                & (np.abs(r - dp.rho1) > margin) & (np.abs(r - dp.rho2) > margin))
        disc = Operator(g, dp).rhs(U)[1:-1][keep]
        exact = spatial_part(t, r[keep], dp)
        errs.append(float(np.max(np.abs(disc - exact))))
    errs = np.asarray(errs)
    return errs, errs[:-1] / errs[1:]


# ---------------------------------------------------------------- report

@dataclass
class Summary:
    outcome: str
    t_end: float
    t_blow: float | None
    t_blow_original: float | None
    T_max: float
    blow_le_T_max: bool | None
    blow_within_tolerance: bool | None
    cert_passed: bool | None
    comparison_passed: bool | None
    cap_sensitivity: float | None
    theorem_check: str
    files: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    FIELDS = ("outcome", "t_end", "t_blow", "t_blow_original", "T_max", "blow_le_T_max",
              "blow_within_tolerance", "cert_passed", "comparison_passed", "cap_sensitivity",
              "theorem_check")

    def text(self) -> str:
        lines = [f"{k} = {getattr(self, k)}" for k in self.FIELDS]
        lines += [f"file.{k} = {v}" for k, v in self.files.items()]
        lines += [f"note = {n}" for n in self.notes]
        lines.append(f"theorem check {self.theorem_check}")
        return "\n".join(lines) + "\n"

    def csv_row(self) -> dict[str, object]:
        return {k: getattr(self, k) for k in self.FIELDS}

    def write(self, directory: str | Path) -> None:
        d = Path(directory)
        (d / "summary.txt").write_text(self.text())
        with (d / "summary.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.FIELDS))
            w.writeheader()
            w.writerow(self.csv_row())


def report(result: RunResult, cert: CertReport | None = None, trace: ComparisonTrace | None = None,
           files: dict[str, str] | None = None, horizon: float | None = None,
           blow_factor: float = 1.05) -> Summary:
    dp = result.dp
    out = result.outcome
    t_end = result.series.t[-1]
    notes = []
    t_blow = t_orig = le = within = None
    if isinstance(out, BlewUp):
        t_blow, t_orig = out.t_blow, out.t_blow_original
        le = t_blow <= dp.T_max
        within = t_blow <= blow_factor * dp.T_max
        if out.by_dt_collapse:
            notes.append("blow-up inferred from step-size collapse with monotone growth")
    cmp_ok = None if trace is None else trace.passed
    if trace is not None and not trace.half_mass:
        notes.append("half-mass check vacuous: a(t)^(1/gamma) never reached rho1 before blow-up")
    if isinstance(out, BlewUp):
        verdict = "PASSED" if within and cmp_ok is not False else "FAILED"
    elif isinstance(out, HorizonReached):
        h = horizon if horizon is not None else out.T
        verdict = "FAILED" if h >= dp.T_max else "INCONCLUSIVE"
        if verdict == "INCONCLUSIVE":
            notes.append("horizon shorter than T_max")
    else:
        verdict = "INCONCLUSIVE"
        notes.append(f"solver stalled: {out.reason}")
    return Summary(
        outcome=type(out).__name__, t_end=t_end, t_blow=t_blow, t_blow_original=t_orig,
        T_max=dp.T_max, blow_le_T_max=le, blow_within_tolerance=within,
        cert_passed=None if cert is None else cert.passed, comparison_passed=cmp_ok,
        cap_sensitivity=result.cap_sensitivity, theorem_check=verdict,
        files=dict(files or {}), notes=notes,
    )
