"""The explicit blow-up subsolution phi and the parabolic operator applied to it.

phi is glued from

    phi1 = rho^g / (rho^g + a(t))                               on (0, 1/2]
    phi2 = beta(t) (1 - rho + kappa (rho2-rho)_+ (rho-1/2) / (rho2-1/2))   on (1/2, 1)

and the operator is

    L(phi) = phi_t - rho^((2N-2)/N) phi_rhorho
             - chi_N rho^((2-p)(N-1)/N) (phi_rho + M) |phi|^(p-2) phi.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import (
    DerivedParams,
    PreconditionError,
    a_of_t,
    a_prime_of_t,
    beta_of_t,
    beta_prime_of_t,
    q_of_gamma,
)


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def signed_power(x, e):
    """sign(x)|x|^e, the continuous extension of |x|^(e-1) x."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** e


# --- inner piece -----------------------------------------------------------

def _rho1_domain(rho, dp):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or np.any(rho > dp.rho1):
        raise PreconditionError("phi1 is defined for 0 < rho <= rho1")
    return rho


def phi1(t, rho, dp: DerivedParams):
    rho = _rho1_domain(rho, dp)
    rg = rho**dp.gamma
    return _out(rg / (rg + a_of_t(t, dp)))


def phi1_t(t, rho, dp: DerivedParams):
    rho = _rho1_domain(rho, dp)
    rg = rho**dp.gamma
    return _out(-rg * a_prime_of_t(t, dp) / (rg + a_of_t(t, dp)) ** 2)


def phi1_rho(t, rho, dp: DerivedParams):
    rho = _rho1_domain(rho, dp)
    g, a = dp.gamma, a_of_t(t, dp)
    return _out(g * a * rho ** (g - 1) / (rho**g + a) ** 2)


def phi1_rhorho(t, rho, dp: DerivedParams):
    rho = _rho1_domain(rho, dp)
    g, a = dp.gamma, a_of_t(t, dp)
    num = (g - 1) * a**2 * rho ** (g - 2) - a * (g + 1) * rho ** (2 * g - 2)
    return _out(g * num / (rho**g + a) ** 3)


# --- outer piece -----------------------------------------------------------

def _rho2_domain(rho, dp):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < dp.rho1) or np.any(rho > 1.0):
        raise PreconditionError("phi2 is defined for rho1 <= rho <= 1")
    return rho


def _shape2(rho, dp):
    r1, r2 = dp.rho1, dp.rho2
    return 1.0 - rho + dp.kappa * np.maximum(r2 - rho, 0.0) * (rho - r1) / (r2 - r1)


def phi2(t, rho, dp: DerivedParams):
    rho = _rho2_domain(rho, dp)
    return _out(beta_of_t(t, dp) * _shape2(rho, dp))


def phi2_t(t, rho, dp: DerivedParams):
    rho = _rho2_domain(rho, dp)
    return _out(beta_prime_of_t(t, dp) * _shape2(rho, dp))


def phi2_rho(t, rho, dp: DerivedParams, side: str = "right"):
    """Slope of phi2; at rho2 itself `side` picks the one-sided limit."""
    rho = _rho2_domain(rho, dp)
    r1, r2, k = dp.rho1, dp.rho2, dp.kappa
    b = beta_of_t(t, dp)
    inner = -b * (1.0 + k * (2 * rho - r1 - r2) / (r2 - r1))
    use_inner = (rho < r2) | ((rho == r2) & (side == "left"))
    return _out(np.where(use_inner, inner, -b))


def phi2_rhorho(t, rho, dp: DerivedParams):
    rho = _rho2_domain(rho, dp)
    b = beta_of_t(t, dp)
    return _out(np.where(rho < dp.rho2, -2.0 * dp.kappa * b / (dp.rho2 - dp.rho1), 0.0))


def phi2_argmax(dp: DerivedParams) -> float:
    g = dp.gamma
    return (g + 2) * (2 * g + 1) / (4 * (g + 1) ** 2)


def phi2_max(t, dp: DerivedParams) -> float:
    return beta_of_t(t, dp) * (1.0 - q_of_gamma(dp.gamma))


# --- glued function --------------------------------------------------------

def phi(t, rho, dp: DerivedParams):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho > 1):
        raise PreconditionError("rho must lie in [0, 1]")
    a = a_of_t(t, dp)
    inner = np.clip(rho, 0.0, dp.rho1)
    rg = inner**dp.gamma
    with np.errstate(invalid="ignore", divide="ignore"):
        v1 = np.where(rg > 0, rg / (rg + a), 0.0) if a > 0 else np.where(rg > 0, 1.0, 0.0)
    outer = np.clip(rho, dp.rho1, 1.0)
    v2 = beta_of_t(t, dp) * _shape2(outer, dp)
    out = np.where(rho <= dp.rho1, v1, v2)
    return _out(out)


def _pieces(t, rho, dp):
    """phi, phi_t, phi_rho, phi_rhorho evaluated piecewise on an array of rho."""
    rho = np.asarray(rho, dtype=float)
    inner = rho <= dp.rho1
    f = np.empty_like(rho)
    ft, fr, frr = np.empty_like(rho), np.empty_like(rho), np.empty_like(rho)
    if inner.any():
        r = rho[inner]
        f[inner] = phi1(t, r, dp)
        ft[inner] = phi1_t(t, r, dp)
        fr[inner] = phi1_rho(t, r, dp)
        frr[inner] = phi1_rhorho(t, r, dp)
    outer = ~inner
    if outer.any():
        r = rho[outer]
        f[outer] = phi2(t, r, dp)
        ft[outer] = phi2_t(t, r, dp)
        fr[outer] = phi2_rho(t, r, dp)
        frr[outer] = phi2_rhorho(t, r, dp)
    return f, ft, fr, frr


def phi_rho(t, rho, dp: DerivedParams):
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0) or np.any(rho > 1):
        raise PreconditionError("phi_rho needs 0 < rho <= 1")
    out = _pieces(t, rho, dp)[2]
    return float(out[0]) if scalar else out


def _exclude_kinks(rho, dp):
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0) or np.any(rho >= 1):
        raise PreconditionError("L is evaluated on the open interval (0, 1)")
    if np.any(rho == dp.rho1) or np.any(rho == dp.rho2):
        raise PreconditionError("L is distributional at rho1 and rho2; exclude the kinks")
    return rho


def spatial_part(t, rho, dp: DerivedParams):
    """rho^((2N-2)/N) phi_rhorho + chi_N rho^((2-p)(N-1)/N) (phi_rho + M) |phi|^(p-2) phi."""
    scalar = np.ndim(rho) == 0
    rho = _exclude_kinks(rho, dp)
    N, p, M = dp.N, dp.p, dp.M
    f, _, fr, frr = _pieces(t, rho, dp)
    out = (rho ** ((2 * N - 2) / N) * frr
           + dp.chi_N * rho ** ((2 - p) * (N - 1) / N) * (fr + M) * signed_power(f, p - 1))
    return float(out[0]) if scalar else out


def L_eval(t, rho, dp: DerivedParams):
    scalar = np.ndim(rho) == 0
    rho = _exclude_kinks(rho, dp)
    N, p, M = dp.N, dp.p, dp.M
    f, ft, fr, frr = _pieces(t, rho, dp)
    out = (ft - rho ** ((2 * N - 2) / N) * frr
           - dp.chi_N * rho ** ((2 - p) * (N - 1) / N) * (fr + M) * signed_power(f, p - 1))
    return float(out[0]) if scalar else out


# --- certificate -----------------------------------------------------------

def slopes_at_rho1(t, dp: DerivedParams) -> tuple[float, float]:
    """(left, right) limits of phi_rho at rho1."""
    left = float(phi1_rho(t, dp.rho1, dp))
    right = float(phi2_rho(t, dp.rho1, dp))
    return left, right


def slopes_at_rho2(t, dp: DerivedParams) -> tuple[float, float]:
    left = float(phi2_rho(t, dp.rho2, dp, side="left"))
    right = float(phi2_rho(t, dp.rho2, dp, side="right"))
    return left, right


@dataclass
class CertReport:
    worst_L1: float
    worst_L2: float
    c1_matching_error: float
    jump_at_rho1_min: float
    jump_at_rho2: np.ndarray
    jump_at_rho2_rel_error: float
    t_samples: np.ndarray
    tol: float
    violations: list[tuple[float, float, float]] = field(default_factory=list)
    n_evaluations: int = 0
    elapsed: float = 0.0

    @property
    def worst(self) -> float:
        return max(self.worst_L1, self.worst_L2)

    @property
    def c1_matched(self) -> bool:
        return self.c1_matching_error <= self.tol

    @property
    def passed(self) -> bool:
        # A subsolution needs L <= 0 off the kinks and nonnegative slope jumps at them.
        return (
            self.worst <= self.tol
            and self.jump_at_rho1_min >= -self.tol
            and self.jump_at_rho2_rel_error <= self.tol
        )

    def summary(self) -> str:
        return (
            f"certificate {'PASSED' if self.passed else 'FAILED'}: "
            f"worst_L1={self.worst_L1:.3e} worst_L2={self.worst_L2:.3e} "
            f"c1_matching_error={self.c1_matching_error:.3e} "
            f"min_jump_rho1={self.jump_at_rho1_min:.3e} "
            f"jump_rho2_rel_err={self.jump_at_rho2_rel_error:.3e} "
            f"evaluations={self.n_evaluations} elapsed={self.elapsed:.3f}s"
        )

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "rho", "L_value"])
            for row in self.violations:
                w.writerow([repr(v) for v in row])
        with path.with_name(path.stem + "_summary.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["passed", "worst_L1", "worst_L2", "c1_matching_error",
                        "min_jump_rho1", "jump_rho2_rel_error", "tol", "evaluations"])
            w.writerow([self.passed, self.worst_L1, self.worst_L2, self.c1_matching_error,
                        self.jump_at_rho1_min, self.jump_at_rho2_rel_error, self.tol,
                        self.n_evaluations])


def certification_samples(dp: DerivedParams, rho_samples: int) -> np.ndarray:
    """Sample points in (1e-8, rho1) u (rho1, rho2) u (rho2, 1-1e-8), kinks offset by half a spacing."""
    lo = 1e-8
    r1, r2 = dp.rho1, dp.rho2
    n1 = max(rho_samples // 2, 2)
    n2 = max((rho_samples - n1) // 2, 2)
    n3 = max(rho_samples - n1 - n2, 2)
    # log-spaced toward 0, then shifted half a log-step so rho1 itself is never hit
    e = np.linspace(np.log(lo), np.log(r1), n1 + 1)
    s1 = np.exp(e[:-1] + 0.5 * (e[1] - e[0]))
    s1 = s1[s1 < r1]
    h2 = (r2 - r1) / n2
    s2 = r1 + h2 * (np.arange(n2) + 0.5)
    e3 = np.linspace(np.log(lo), np.log(1.0 - r2), n3 + 1)
    s3 = 1.0 - np.exp(e3[:-1] + 0.5 * (e3[1] - e3[0]))
    s3 = s3[s3 > r2]
    return np.concatenate([s1, s2, np.sort(s3)])


def certify(dp: DerivedParams, rho_samples: int = 10_000, t_samples: int = 5,
            tol: float = 1e-9, max_violations: int = 1000) -> CertReport:
    if not dp.admissible:
        raise PreconditionError(
            f"parameters fail the thresholds (chi_N={dp.chi_N:.6g}, "
            f"threshold={dp.chi_threshold:.6g}, epsilon={dp.epsilon:.6g}); certificate is meaningless"
        )
    if not tol >= 0:
        raise PreconditionError("tol must be nonnegative")
    start = time.perf_counter()
    rho = certification_samples(dp, rho_samples)
    inner = rho < dp.rho1
    ts = np.linspace(0.0, 0.99 * dp.T_max, t_samples)
    worst1 = worst2 = -np.inf
    c1_err = 0.0
    jump1_min = np.inf
    jumps2 = np.empty(ts.size)
    rel2 = 0.0
    violations: list[tuple[float, float, float]] = []
    for k, t in enumerate(ts):
        vals = L_eval(t, rho, dp)
        worst1 = max(worst1, float(vals[inner].max()))
        worst2 = max(worst2, float(vals[~inner].max()))
        bad = np.nonzero(vals > tol)[0]
        for i in bad[: max(0, max_violations - len(violations))]:
            violations.append((float(t), float(rho[i]), float(vals[i])))
        left, right = slopes_at_rho1(t, dp)
        c1_err = max(c1_err, abs(right - left))
        jump1_min = min(jump1_min, right - left)
        l2, r2 = slopes_at_rho2(t, dp)
        jumps2[k] = r2 - l2
        b = beta_of_t(t, dp)
        rel2 = max(rel2, abs(jumps2[k] - dp.kappa * b) / b)
    return CertReport(
        worst_L1=worst1,
        worst_L2=worst2,
        c1_matching_error=c1_err,
        jump_at_rho1_min=jump1_min,
        jump_at_rho2=jumps2,
        jump_at_rho2_rel_error=rel2,
        t_samples=ts,
        tol=tol,
        violations=violations,
        n_evaluations=rho.size * ts.size,
        elapsed=time.perf_counter() - start,
    )
