"""Method-of-lines integration of the rescaled mass-accumulation equation

    U_t = rho^((2N-2)/N) U_rhorho + chi_N rho^((2-p)(N-1)/N) (U_rho + M) |U|^(p-2) U,
    U(t, 0) = U(t, 1) = 0,

on a graded grid, with adaptive step doubling and blow-up detection.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .grid import ConfigError, Grid, build_grid
from .params import DerivedParams
from .transforms import RadialProfile

log = logging.getLogger(__name__)

__all__ = [
    "BlewUp", "HorizonReached", "Stalled", "SolverConfig", "StepFailed", "Operator",
    "RunResult", "TimeSeries", "build_grid", "rhs", "step", "run", "replay",
    "self_convergence", "ConvergenceStudy",
]


class StepFailed(RuntimeError):
    """A single step could not be completed; the caller should shrink dt."""


@dataclass(frozen=True)
class SolverConfig:
    dt_init: float = 1e-6
    dt_min: float = 1e-15
    dt_max: float = 1e-2
    u_cap: float = 1e6  # blow-up threshold as a multiple of M
    grow: float = 1.5
    shrink: float = 0.5
    tol_step: float = 1e-6
    scheme: str = "imex"
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    jacobian_floor: float = 1e-14
    snapshot_every: int = 25
    max_steps: int = 2_000_000
    envelope_tol: float = 1e-6  # allowed excursion outside -M rho <= U <= M (1 - rho), times M

    def __post_init__(self):
        if not (0 < self.dt_min < self.dt_init <= self.dt_max):
            raise ConfigError("need 0 < dt_min < dt_init <= dt_max")
        if not self.u_cap > 1:
            raise ConfigError("u_cap is a multiple of M and must exceed 1")
        if not (self.grow > 1 and 0 < self.shrink < 1):
            raise ConfigError("grow must exceed 1 and shrink must lie in (0, 1)")
        if not self.tol_step > 0:
            raise ConfigError("tol_step must be positive")
        if self.scheme not in ("imex", "fully_implicit"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if not self.envelope_tol >= 0:
            raise ConfigError("envelope_tol must be nonnegative")


@dataclass(frozen=True)
class BlewUp:
    t_blow: float
    t_blow_original: float
    by_dt_collapse: bool = False

    name = "BlewUp"


@dataclass(frozen=True)
class HorizonReached:
    T: float

    name = "HorizonReached"


@dataclass(frozen=True)
class Stalled:
    t: float
    reason: str = ""

    name = "Stalled"


@dataclass
class TimeSeries:
    t: list[float] = field(default_factory=list)
    dt: list[float] = field(default_factory=list)
    sup_u: list[float] = field(default_factory=list)
    min_u: list[float] = field(default_factory=list)
    sup_U: list[float] = field(default_factory=list)
    margin: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(getattr(self, k), dtype=float)
                for k in ("t", "dt", "sup_u", "min_u", "sup_U", "margin")}

    def write_csv(self, path: str | Path) -> None:
        has_margin = len(self.margin) == len(self.t)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "dt", "sup_u", "min_u", "sup_U", "margin"])
            for i in range(len(self.t)):
                m = self.margin[i] if has_margin else ""
                w.writerow([repr(self.t[i]), repr(self.dt[i]), repr(self.sup_u[i]),
                            repr(self.min_u[i]), repr(self.sup_U[i]), repr(m) if m != "" else ""])


@dataclass
class RunResult:
    outcome: BlewUp | HorizonReached | Stalled
    series: TimeSeries
    grid: Grid
    dp: DerivedParams
    config: SolverConfig
    U0: np.ndarray
    snapshots: list[tuple[float, np.ndarray]]
    final: np.ndarray
    n_rejected: int = 0
    t_cap: float | None = None
    t_cap_over_10: float | None = None

    @property
    def blew_up(self) -> bool:
        return isinstance(self.outcome, BlewUp)

    @property
    def cap_sensitivity(self) -> float | None:
        """Relative gap between the times sup u crosses u_cap and u_cap/10."""
        if self.t_cap is None or self.t_cap_over_10 is None:
            return None
        return abs(self.t_cap - self.t_cap_over_10) / self.t_cap

    def profile(self, k: int = -1) -> RadialProfile:
        t, U = self.snapshots[k]
        return RadialProfile(self.grid, U, "mass_U", t)


class Operator:
    """Per-(grid, parameters) coefficient arrays of the semi-discrete equation."""

    def __init__(self, grid: Grid, dp: DerivedParams):
        self.grid = grid
        self.dp = dp
        N, p = dp.N, dp.p
        r = grid.interior
        self.diff = r ** ((2.0 * N - 2.0) / N)
        self.adv = dp.chi_N * r ** ((2.0 - p) * (N - 1.0) / N)
        self.d2 = grid.d2_weights
        self.d1 = grid.d1_weights

    def reaction(self, U: np.ndarray) -> np.ndarray:
        p, M = self.dp.p, self.dp.M
        Ui = U[1:-1]
        return self.adv * (self.grid.d1_interior(U) + M) * np.sign(Ui) * np.abs(Ui) ** (p - 1.0)

    def rhs(self, U: np.ndarray) -> np.ndarray:
        out = np.zeros_like(U)
        out[1:-1] = self.diff * self.grid.d2_interior(U) + self.reaction(U)
        return out

    def _diffusion_banded(self, dt: float) -> np.ndarray:
        wl, wc, wr = self.d2
        m = self.grid.n - 1
        ab = np.zeros((3, m))
        ab[0, 1:] = -dt * self.diff[:-1] * wr[:-1]
        ab[1, :] = 1.0 - dt * self.diff * wc
        ab[2, :-1] = -dt * self.diff[1:] * wl[1:]
        return ab

    def imex_step(self, U: np.ndarray, dt: float) -> np.ndarray:
        b = U[1:-1] + dt * self.reaction(U)
        try:
            x = solve_banded((1, 1), self._diffusion_banded(dt), b, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise StepFailed(str(exc)) from exc
        if not np.all(np.isfinite(x)):
            raise StepFailed("non-finite solution of the diffusion solve")
        out = np.zeros_like(U)
        out[1:-1] = x
        return out

    def implicit_step(self, U: np.ndarray, dt: float, cfg: SolverConfig) -> np.ndarray:
        p, M = self.dp.p, self.dp.M
        wl, wc, wr = self.d1
        V = self.imex_step(U, dt)

        def residual(V):
            return V[1:-1] - U[1:-1] - dt * self.rhs(V)[1:-1]

        F = residual(V)
        for _ in range(cfg.newton_max_iter):
            Vi = V[1:-1]
            s = np.sign(Vi) * np.abs(Vi) ** (p - 1.0)
            ds = (p - 1.0) * np.maximum(np.abs(Vi), cfg.jacobian_floor) ** (p - 2.0)
            D1 = self.grid.d1_interior(V) + M
            ab = self._diffusion_banded(dt)
            ab[0, 1:] -= dt * self.adv[:-1] * wr[:-1] * s[:-1]
            ab[1, :] -= dt * self.adv * (wc * s + D1 * ds)
            ab[2, :-1] -= dt * self.adv[1:] * wl[1:] * s[1:]
            try:
                delta = solve_banded((1, 1), ab, -F, check_finite=False)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise StepFailed(str(exc)) from exc
            if not np.all(np.isfinite(delta)):
                raise StepFailed("non-finite Newton update")
            if np.max(np.abs(delta)) <= cfg.newton_tol * (1.0 + np.max(np.abs(V))):
                V = V.copy()
                V[1:-1] += delta
                return V
            norm0 = np.max(np.abs(F))
            lam = 1.0
            for _ in range(12):
                trial = V.copy()
                trial[1:-1] += lam * delta
                Ft = residual(trial)
                if np.max(np.abs(Ft)) <= (1.0 - 1e-4 * lam) * norm0 or norm0 == 0.0:
                    break
                lam *= 0.5
            else:
                raise StepFailed("damped Newton could not reduce the residual")
            V, F = trial, Ft
            if lam * np.max(np.abs(delta)) <= cfg.newton_tol * (1.0 + np.max(np.abs(V))):
                return V
        raise StepFailed("Newton iteration did not converge")

    def advance(self, U: np.ndarray, dt: float, cfg: SolverConfig) -> np.ndarray:
        if cfg.scheme == "imex":
            return self.imex_step(U, dt)
        return self.implicit_step(U, dt, cfg)

    def density(self, U: np.ndarray) -> np.ndarray:
        return self.grid.d1(U) + self.dp.M

    def envelope_excess(self, U: np.ndarray) -> float:
        """How far U leaves -M rho <= U <= M (1 - rho), which any nonnegative density obeys."""
        r, M = self.grid.nodes, self.dp.M
        return float(max(np.max(U - M * (1.0 - r)), np.max(-M * r - U)))


def rhs(U, dp: DerivedParams, grid: Grid) -> np.ndarray:
    """Semi-discrete right-hand side at every node (zero at the two Dirichlet nodes)."""
    vals = U.values if isinstance(U, RadialProfile) else np.asarray(U, dtype=float)
    return Operator(grid, dp).rhs(vals)


def step(U: np.ndarray, dt: float, config: SolverConfig, dp: DerivedParams,
         grid: Grid | None = None, op: Operator | None = None) -> tuple[np.ndarray, float]:
    """One step-doubled step: returns the two-half-step state and the relative difference
    to the single full step."""
    if op is None:
        if grid is None:
            raise ConfigError("step needs a grid or an operator")
        op = Operator(grid, dp)
    full = op.advance(U, dt, config)
    half = op.advance(op.advance(U, 0.5 * dt, config), 0.5 * dt, config)
    err = float(np.max(np.abs(full - half))) / max(1.0, float(np.max(np.abs(half))))
    return half, err


def _exploding(sup_u: Sequence[float], M: float) -> bool:
    k = max(5, len(sup_u) // 10)
    tail = np.asarray(sup_u[-k:])
    return tail.size >= 2 and bool(np.all(np.diff(tail) >= 0)) and tail[-1] >= 10.0 * M


def run(U0, config: SolverConfig, dp: DerivedParams, horizon: float,
        grid: Grid | None = None,
        margin_fn: Callable[[float, np.ndarray], float] | None = None) -> RunResult:
    """Adaptive integration until blow-up, the horizon, or a stall."""
    if isinstance(U0, RadialProfile):
        grid = U0.grid
        U = np.array(U0.values, dtype=float)
    else:
        if grid is None:
            raise ConfigError("a grid is required when U0 is a bare array")
        U = np.array(U0, dtype=float)
    if U[0] != 0.0 or U[-1] != 0.0:
        raise ConfigError("initial data must vanish at both endpoints")
    if not horizon > 0:
        raise ConfigError("horizon must be positive")

    op = Operator(grid, dp)
    cfg = config
    M, N = dp.M, dp.N
    cap = cfg.u_cap * M
    series = TimeSeries()
    snapshots: list[tuple[float, np.ndarray]] = []

    def record(t, dt, U):
        u = op.density(U)
        series.t.append(t)
        series.dt.append(dt)
        series.sup_u.append(float(u.max()))
        series.min_u.append(float(u.min()))
        series.sup_U.append(float(np.max(np.abs(U))))
        if margin_fn is not None:
            series.margin.append(float(margin_fn(t, U)))
        return series.sup_u[-1]

    t = 0.0
    dt = cfg.dt_init
    record(t, 0.0, U)
    snapshots.append((t, U.copy()))
    U_init = U.copy()
    accepted = rejected = 0
    t_cap = t_cap10 = None
    outcome = None

    while outcome is None:
        if accepted + rejected >= cfg.max_steps:
            outcome = Stalled(t, "step budget exhausted")
            break
        h = min(dt, cfg.dt_max, horizon - t)
        try:
            Unew, err = step(U, h, cfg, dp, op=op)
            ok = np.isfinite(err) and err <= cfg.tol_step
        except StepFailed as exc:
            log.debug("step failed at t=%.6g dt=%.3g: %s", t, h, exc)
            ok, err = False, math.inf
        if ok:
            U = Unew
            t = t + h if horizon - t > h else horizon
            accepted += 1
            su = record(t, h, U)
            if accepted % cfg.snapshot_every == 0:
                snapshots.append((t, U.copy()))
            if not np.isfinite(su):
                outcome = Stalled(t, "non-finite density")
            elif op.envelope_excess(U) > cfg.envelope_tol * M:
                outcome = Stalled(t, f"discretization failure: U left the envelope -M rho <= U <= M(1-rho) "
                                     f"at sup u = {su:.3g}; refine or cluster the grid")
            elif su >= cap / 10.0 and t_cap10 is None:
                t_cap10 = t
            if outcome is None and su >= cap:
                t_cap = t
                outcome = BlewUp(t, t / N**2)
            elif outcome is None and t >= horizon:
                outcome = HorizonReached(horizon)
            if err < 0.5 * cfg.tol_step:
                dt = min(h * cfg.grow, cfg.dt_max)
            else:
                dt = h
        else:
            rejected += 1
            dt = h * cfg.shrink
            if dt < cfg.dt_min:
                if _exploding(series.sup_u, M):
                    outcome = BlewUp(t, t / N**2, by_dt_collapse=True)
                else:
                    outcome = Stalled(t, f"dt fell below dt_min={cfg.dt_min:g}")

    if snapshots[-1][0] != t:
        snapshots.append((t, U.copy()))
    return RunResult(outcome=outcome, series=series, grid=grid, dp=dp, config=cfg, U0=U_init,
                     snapshots=snapshots, final=U, n_rejected=rejected,
                     t_cap=t_cap, t_cap_over_10=t_cap10)


def replay(U0: np.ndarray, dts: Iterable[float], config: SolverConfig, dp: DerivedParams,
           grid: Grid):
    """Re-run a recorded step sequence without adaptivity; yields (t, U) after each step."""
    op = Operator(grid, dp)
    U = np.array(U0, dtype=float)
    t = 0.0
    for h in dts:
        U, _ = step(U, h, config, dp, op=op)
        t += h
        yield t, U


@dataclass
class ConvergenceStudy:
    ns: list[int]
    diffs: list[float]
    orders: list[float]
    exact: bool

    @property
    def order(self) -> float:
        if self.exact:
            return math.inf
        return self.orders[-1]


def self_convergence(U0: Callable[[np.ndarray], np.ndarray], dp: DerivedParams,
                     grids: Sequence[Grid], horizon: float, n_steps: int = 400,
                     config: SolverConfig | None = None) -> ConvergenceStudy:
    """Observed spatial order from sup-norm differences of successive nested grids.

    Every grid uses the same fixed step sequence so temporal error cancels in the
    differences.
    """
    if len(grids) < 3:
        raise ConfigError("self-convergence needs at least three grids")
    cfg = config or SolverConfig(scheme="imex")
    dt = horizon / n_steps
    finals = []
    for g in grids:
        U = np.asarray(U0(g.nodes), dtype=float).copy()
        U[0] = U[-1] = 0.0
        op = Operator(g, dp)
        for _ in range(n_steps):
            U = op.advance(U, dt, cfg)
        finals.append(U)
    diffs = []
    for (gc, Uc), (gf, Uf) in zip(zip(grids, finals), zip(grids[1:], finals[1:])):
        if gf.n <= gc.n or gf.n % gc.n:
            raise ConfigError("grids are not nested")
        idx = gf.coarsen(gf.n // gc.n)
        if not np.allclose(gf.nodes[idx], gc.nodes, rtol=0, atol=1e-14):
            raise ConfigError("grids are not nested")
        diffs.append(float(np.max(np.abs(Uf[idx] - Uc))))
    exact = all(d == 0.0 for d in diffs)
    orders = [] if exact else [math.log2(a / b) if b > 0 else math.inf
                               for a, b in zip(diffs, diffs[1:])]
    return ConvergenceStudy([g.n for g in grids], diffs, orders, exact)
