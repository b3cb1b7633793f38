"""Model constants, structural checks and every quantity derived from them.

All times here are in rescaled units (t_rescaled = N**2 * t_original).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InputError(ValueError):
    """Non-finite or otherwise unusable numeric input."""


class InfeasibleParameters(ValueError):
    """No admissible subsolution exponent / positive rate exists."""


class PreconditionError(ValueError):
    """An operation was called outside its admissible domain."""


@dataclass(frozen=True)
class ModelParams:
    N: int
    p: float
    M: float
    chi: float

    @classmethod
    def from_chi_N(cls, N: int, p: float, M: float, chi_N: float) -> "ModelParams":
        return cls(N=N, p=p, M=M, chi=chi_N * N**p)

    @property
    def chi_N(self) -> float:
        return self.chi * self.N ** (-self.p)


@dataclass(frozen=True)
class Finding:
    label: str
    passed: bool
    observed: float
    required: str
    binding: bool = True

    def __str__(self) -> str:
        status = "ok  " if self.passed else "FAIL"
        note = "" if self.binding else " (informational)"
        return f"[{status}] {self.label}: observed {self.observed:.6g}, required {self.required}{note}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)
    gamma: float | None = None
    chi_threshold: float | None = None

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.findings if f.binding)

    @property
    def failures(self) -> list[Finding]:
        return [f for f in self.findings if f.binding and not f.passed]

    def __str__(self) -> str:
        lines = [str(f) for f in self.findings]
        lines.append("validation " + ("PASSED" if self.passed else "FAILED"))
        return "\n".join(lines)


@dataclass(frozen=True)
class DerivedParams:
    model: ModelParams
    chi_N: float
    gamma: float
    gamma_max: float
    theta: float
    epsilon: float
    T_max: float
    rho1: float
    rho2: float
    kappa: float
    chi_threshold: float
    epsilon_terms: tuple[float, float, float]

    # convenience pass-throughs used all over the numerics
    @property
    def N(self) -> int:
        return self.model.N

    @property
    def p(self) -> float:
        return self.model.p

    @property
    def M(self) -> float:
        return self.model.M

    @property
    def admissible(self) -> bool:
        return (
            self.chi_N > self.chi_threshold
            and self.epsilon > 0
            and 1 < self.gamma < self.gamma_max
        )


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        try:
            ok = math.isfinite(float(v))
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise InputError(f"{name} must be a finite number, got {v!r}")


def q_of_gamma(gamma: float) -> float:
    """(gamma+2)(3 gamma/2 + 1) / (4 (gamma+1)^2); its infimum over gamma >= 1 is 3/8."""
    _check_finite(gamma=gamma)
    if gamma <= 0:
        raise PreconditionError("gamma must be positive")
    return (gamma + 2.0) * (1.5 * gamma + 1.0) / (4.0 * (gamma + 1.0) ** 2)


def rho2_of_gamma(gamma: float) -> float:
    return (2.0 + gamma) / (2.0 * (1.0 + gamma))


def _gap_term(N: int, gamma: float, rho1: float = 0.5) -> float:
    """2(1+gamma) rho2^(2-2/N) / ((rho2-rho1)(1-rho2)), the diffusion cost across (rho1, rho2)."""
    r2 = rho2_of_gamma(gamma)
    return 2.0 * (1.0 + gamma) * r2 ** (2.0 - 2.0 / N) / ((r2 - rho1) * (1.0 - r2))


def chi_thresholds(mp: ModelParams, gamma: float) -> dict[str, float]:
    """All threshold variants for chi_N appearing in the blow-up argument.

    ``positivity`` is the one that makes the third rate term positive and is the
    binding gate; the other two are reported for reference only.
    """
    N, p, M = mp.N, mp.p, mp.M
    r2 = rho2_of_gamma(gamma)
    base = r2 ** (2.0 - 2.0 / N) * (1.0 + gamma) / ((r2 - 0.5) * (1.0 - r2) * (M - 6.0))
    return {
        "floor": 4.0,
        "positivity": 4.0 * base * (4.0 / 3.0) ** (2.0 - p),
        "pow2_constant": 2.0 ** (5.0 - p) * base,
        "gamma_free": 3.0 * 2.0**6 / (M - 6.0) * (4.0 / 3.0) ** (2.0 / N - p),
    }


def chi_threshold(mp: ModelParams, gamma: float) -> float:
    t = chi_thresholds(mp, gamma)
    return max(t["floor"], t["positivity"])


def gamma_bound(mp: ModelParams) -> float:
    """Upper bound for the subsolution exponent; raises if it does not exceed 1."""
    _check_finite(N=mp.N, p=mp.p, M=mp.M, chi=mp.chi)
    N, p, M = mp.N, mp.p, mp.M
    if p <= 1:
        raise InfeasibleParameters("p must exceed 1")
    terms = (
        1.0 + (2.0 - p) / (N * (p - 1.0)),
        mp.chi_N / 2.0 - 1.0,
        1.0 + (M - 6.0) / 4.0,
        (N + 1.0) / N,
        math.inf,  # q(gamma) > 3/8 everywhere, so gamma* never binds
    )
    bound = min(terms)
    if not bound > 1.0:
        raise InfeasibleParameters(f"gamma bound {bound:.6g} <= 1: no admissible gamma")
    return bound


def default_gamma(mp: ModelParams) -> float:
    bound = gamma_bound(mp)
    g = 0.99 * bound
    if g <= 1.0:
        g = 0.5 * (1.0 + bound)
    return g


def validate_model(mp: ModelParams, gamma: float | None = None) -> ValidationReport:
    _check_finite(N=mp.N, p=mp.p, M=mp.M, chi=mp.chi)
    if gamma is not None:
        _check_finite(gamma=gamma)
    rep = ValidationReport()
    N, p, M = mp.N, mp.p, mp.M
    is_int = float(N) == int(N)
    rep.findings.append(Finding("dimension N > 2, integer", is_int and N > 2, N, "integer > 2"))
    lo = N / (N - 1.0) if N > 1 else math.inf
    rep.findings.append(Finding("flux exponent p in (N/(N-1), 2)", lo < p < 2.0, p, f"in ({lo:.6g}, 2)"))
    rep.findings.append(Finding("mean mass M > 6", M > 6.0, M, "> 6"))
    rep.findings.append(Finding("chemotactic strength chi > 0", mp.chi > 0, mp.chi, "> 0"))
    if not rep.passed:
        return rep

    try:
        bound = gamma_bound(mp)
    except InfeasibleParameters:
        bound = 1.0
    rep.findings.append(Finding("gamma range nonempty", bound > 1.0, bound, "> 1"))
    if bound <= 1.0:
        return rep
    g = default_gamma(mp) if gamma is None else float(gamma)
    rep.gamma = g
    rep.findings.append(Finding("gamma in (1, gamma_max)", 1.0 < g < bound, g, f"in (1, {bound:.6g})"))

    t = chi_thresholds(mp, g)
    thr = max(t["floor"], t["positivity"])
    rep.chi_threshold = thr
    rep.findings.append(Finding("chi_N above threshold", mp.chi_N > thr, mp.chi_N, f"> {thr:.6g}"))
    rep.findings.append(
        Finding("chi_N above the 2^(5-p) threshold constant", mp.chi_N > t["pow2_constant"], mp.chi_N,
                f"> {t['pow2_constant']:.6g}", binding=False)
    )
    rep.findings.append(
        Finding("chi_N above the gamma-free sufficient bound", mp.chi_N > t["gamma_free"], mp.chi_N,
                f"chi_N > {t['gamma_free']:.6g}", binding=False)
    )
    return rep


def epsilon_terms(mp: ModelParams, gamma: float) -> tuple[float, float, float]:
    N, p, M, chi_N = mp.N, mp.p, mp.M, mp.chi_N
    theta = (3.0 - p) / 2.0
    rho1 = 0.5
    e1 = chi_N * gamma * (1.0 - theta) / 2.0**p
    e2 = chi_N * gamma * (p - 1.0) / 2.0
    e3 = (p - 1.0) * rho1 ** (gamma * (p - 1.0) / 2.0) * (
        chi_N * (M / 2.0 - 3.0) * (4.0 / 3.0) ** (p - 2.0) - _gap_term(N, gamma, rho1)
    )
    return e1, e2, e3


def derive(mp: ModelParams, gamma: float | None = None) -> DerivedParams:
    report = validate_model(mp, gamma)
    if not all(f.passed for f in report.findings[:4]):
        raise PreconditionError("model fails structural assumptions:\n" + str(report))
    bound = gamma_bound(mp)
    g = default_gamma(mp) if gamma is None else float(gamma)
    if not 1.0 < g < bound:
        raise PreconditionError(f"gamma={g} outside (1, {bound:.6g})")
    terms = epsilon_terms(mp, g)
    eps = min(terms)
    if not eps > 0:
        raise InfeasibleParameters(f"epsilon={eps:.6g} <= 0: chi_N too small relative to M")
    theta = (3.0 - mp.p) / 2.0
    return DerivedParams(
        model=mp,
        chi_N=mp.chi_N,
        gamma=g,
        gamma_max=bound,
        theta=theta,
        epsilon=eps,
        T_max=1.0 / eps,
        rho1=0.5,
        rho2=rho2_of_gamma(g),
        kappa=1.0 + g,
        chi_threshold=chi_threshold(mp, g),
        epsilon_terms=terms,
    )


def _check_time(t, dp: DerivedParams):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > dp.T_max * (1 + 1e-14)):
        raise PreconditionError(f"t outside [0, T_max={dp.T_max:.6g}]")
    return t


def a_of_t(t, dp: DerivedParams):
    t = _check_time(t, dp)
    base = np.clip(1.0 - dp.epsilon * t, 0.0, None)
    out = base ** (1.0 / (1.0 - dp.theta))
    return float(out) if out.ndim == 0 else out


def a_prime_of_t(t, dp: DerivedParams):
    a = np.asarray(a_of_t(t, dp))
    out = -(dp.epsilon / (1.0 - dp.theta)) * a**dp.theta
    return float(out) if out.ndim == 0 else out


def beta_of_t(t, dp: DerivedParams):
    """beta(t) = phi_1(t, 1/2) / (1 - 1/2); increases from 2/(1+2^gamma) to 2."""
    a = np.asarray(a_of_t(t, dp))
    c = 2.0 ** (-dp.gamma)
    out = 2.0 * c / (c + a)
    return float(out) if out.ndim == 0 else out


def beta_prime_of_t(t, dp: DerivedParams):
    a = np.asarray(a_of_t(t, dp))
    ap = np.asarray(a_prime_of_t(t, dp))
    c = 2.0 ** (-dp.gamma)
    out = -2.0 * c * ap / (c + a) ** 2
    return float(out) if out.ndim == 0 else out
