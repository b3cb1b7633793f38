"""Changes of unknowns for radial profiles.

Every profile lives on a graded node set rho_i in [0, 1].  The physical radius
of node i is r_i = rho_i**(1/N), which is also the s-variable of the W form.

    U~(rho) = N * int_0^{rho^(1/N)} (u(r) - M) r^(N-1) dr = int_0^rho (u - M) drho'
    u(rho^(1/N)) = U~_rho(rho) + M
    W(s) = s^(-N) U~(s^N)
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .grid import Grid
from .params import DerivedParams, ModelParams, PreconditionError, beta_of_t

log = logging.getLogger(__name__)

KINDS = ("density_u", "mass_U", "w_form", "v_gradient")


class InconsistentInitialData(ValueError):
    pass


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: Grid
    values: np.ndarray
    variable_kind: str
    time_stamp: float = 0.0

    def __post_init__(self):
        if self.variable_kind not in KINDS:
            raise ValueError(f"unknown variable kind {self.variable_kind!r}")
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("profile values do not match the grid")
        if self.variable_kind != "v_gradient" and not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rho(self) -> np.ndarray:
        return self.grid.nodes

    def coordinate(self, N: int) -> np.ndarray:
        """Radius r = s = rho^(1/N) of every node."""
        return self.grid.nodes ** (1.0 / N)

    @property
    def negative_nodes(self) -> np.ndarray:
        return np.nonzero(self.values < 0)[0]

    def with_values(self, values, **kw) -> "RadialProfile":
        return replace(self, values=np.asarray(values, dtype=float), **kw)

    def write_csv(self, path: str | Path, N: int | None = None) -> None:
        use_s = self.variable_kind == "w_form"
        x = self.coordinate(N) if (use_s and N is not None) else self.rho
        with Path(path).open("w", newline="") as fh:
            fh.write(f"# variable_kind={self.variable_kind},time_stamp={self.time_stamp!r}\n")
            w = csv.writer(fh)
            w.writerow(["s" if use_s and N is not None else "rho", "value"])
            for xi, vi in zip(x, self.values):
                w.writerow([repr(float(xi)), repr(float(vi))])


def read_profile_csv(path: str | Path, grid: Grid) -> RadialProfile:
    with Path(path).open() as fh:
        meta = fh.readline().lstrip("# ").strip()
        info = dict(item.split("=", 1) for item in meta.split(","))
        rows = list(csv.reader(fh))[1:]
    vals = np.array([float(r[1]) for r in rows])
    return RadialProfile(grid, vals, info["variable_kind"], float(info["time_stamp"]))


@dataclass(frozen=True)
class SphereGeometry:
    N: int
    omega: float
    ball_volume: float

    @classmethod
    def of(cls, N: int) -> "SphereGeometry":
        w = sphere_area(N)
        return cls(N=N, omega=w, ball_volume=w / N)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N, N pi^(N/2) / Gamma(N/2 + 1)."""
    if int(N) != N or N < 2:
        raise PreconditionError("sphere_area needs an integer N >= 2")
    return math.exp(math.log(N) + 0.5 * N * math.log(math.pi) - math.lgamma(0.5 * N + 1.0))


def mass_accum_from_density(u0: RadialProfile, mp: ModelParams, geom: SphereGeometry | None = None,
                            rtol: float = 1e-4, atol: float = 1e-10) -> RadialProfile:
    """Rescaled mass accumulation U~ of a density sampled at radii rho_i^(1/N).

    The integral in r with weight N r^(N-1) becomes a plain integral in rho, done by
    composite trapezoid on the graded grid.  The residual mass at rho=1 must vanish
    to within ``atol + rtol * int |u - M|`` or the data are rejected.
    """
    if u0.variable_kind != "density_u":
        raise ValueError("expected a density_u profile")
    rho = u0.rho
    excess = u0.values - mp.M
    U = cumulative_trapezoid(excess, rho, initial=0.0)
    scale = float(np.trapezoid(np.abs(excess), rho))
    if abs(U[-1]) > atol + rtol * scale:
        raise InconsistentInitialData(
            f"mean density differs from M: residual mass {U[-1]:.3e} (scale {scale:.3e})"
        )
    # remove the quadrature residual as a constant density shift rather than a jump at rho=1
    U -= rho * U[-1]
    U[0] = U[-1] = 0.0
    return RadialProfile(u0.grid, U, "mass_U", u0.time_stamp)


def density_from_mass(U: RadialProfile, mp: ModelParams) -> RadialProfile:
    """u(rho^(1/N)) = U~_rho + M; negative densities are logged and exposed via ``negative_nodes``."""
    if U.variable_kind != "mass_U":
        raise ValueError("expected a mass_U profile")
    u = U.grid.d1(U.values) + mp.M
    prof = RadialProfile(U.grid, u, "density_u", U.time_stamp)
    bad = prof.negative_nodes
    if bad.size:
        log.warning("density negative at %d nodes (min %.3e): discretization failure",
                    bad.size, float(u.min()))
    return prof


def w_from_mass(U: RadialProfile) -> RadialProfile:
    if U.variable_kind != "mass_U":
        raise ValueError("expected a mass_U profile")
    rho = U.rho
    W = np.empty_like(rho)
    W[1:] = U.values[1:] / rho[1:]
    W[0] = U.grid.d1(U.values)[0]  # U~ ~ U~_rho(0) rho near the origin
    return RadialProfile(U.grid, W, "w_form", U.time_stamp)


def mass_from_w(W: RadialProfile) -> RadialProfile:
    if W.variable_kind != "w_form":
        raise ValueError("expected a w_form profile")
    U = W.values * W.rho
    U[0] = 0.0
    return RadialProfile(W.grid, U, "mass_U", W.time_stamp)


def v_gradient(U: RadialProfile, geom: SphereGeometry) -> RadialProfile:
    """d v / d rho = -rho^((2-2N)/N) U~ / N^2 in rescaled mass units.

    At the origin the node holds the limit along U~ ~ c rho, namely
    -c rho^((2-N)/N) / N^2: finite (-c/4) for N = 2, and -inf*sign(c) for N > 2
    unless c = 0.
    """
    if U.variable_kind != "mass_U":
        raise ValueError("expected a mass_U profile")
    N = geom.N
    rho = U.rho
    out = np.empty_like(rho)
    out[1:] = -rho[1:] ** ((2.0 - 2.0 * N) / N) * U.values[1:] / N**2
    c = U.grid.d1(U.values)[0]
    if N == 2:
        out[0] = -c / N**2
    elif c == 0.0:
        out[0] = 0.0
    else:
        out[0] = -math.copysign(math.inf, c)
    return RadialProfile(U.grid, out, "v_gradient", U.time_stamp)


def _hermite_blend(x, x0, x1, f0, f1, d0, d1):
    h = x1 - x0
    s = (x - x0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1


def make_admissible_initial(dp: DerivedParams, grid: Grid, mode: str = "mollified",
                            inflation: float = 1.5, blend_cells: float = 2.0) -> RadialProfile:
    """Initial mass accumulation lying above phi(0, .) with a nonnegative density.

    mode = "exact"     : phi(0, .) sampled, kinks kept;
           "mollified" : cubic-Hermite blend over +-blend_cells local spacings at rho1 and
                         rho2, then lifted by max(0, phi - U0);
           "inflated"  : min(inflation * phi, M (1 - rho)).
    """
    from .subsolution import phi, phi_rho

    rho = grid.nodes
    base = np.asarray(phi(0.0, rho, dp), dtype=float)
    base[0] = base[-1] = 0.0

    if mode == "exact":
        U0 = base.copy()
    elif mode == "mollified":
        U0 = base.copy()
        for kink in (dp.rho1, dp.rho2):
            j = int(np.searchsorted(rho, kink))
            h = float(grid.h[min(max(j - 1, 0), grid.n - 1)])
            w = blend_cells * h
            x0, x1 = kink - w, kink + w
            sel = (rho > x0) & (rho < x1)
            f0, f1 = float(phi(0.0, x0, dp)), float(phi(0.0, x1, dp))
            d0, d1 = float(phi_rho(0.0, x0, dp)), float(phi_rho(0.0, x1, dp))
            U0[sel] = _hermite_blend(rho[sel], x0, x1, f0, f1, d0, d1)
        U0 += np.maximum(0.0, base - U0)
    elif mode == "inflated":
        if not inflation > 1.0:
            raise ConstructionError("inflated mode needs a factor > 1")
        U0 = np.minimum(inflation * base, dp.M * (1.0 - rho))
    else:
        raise ConstructionError(f"unknown initial mode {mode!r}")

    steepest = -float(beta_of_t(0.0, dp)) * (1.0 + dp.kappa)
    if mode != "inflated" and steepest <= -dp.M:
        raise ConstructionError("subsolution slope below -M: the density would be negative")
    U0[0] = U0[-1] = 0.0
    prof = RadialProfile(grid, U0, "mass_U", 0.0)
    u = grid.d1(U0) + dp.M
    if np.any(u < 0):
        raise ConstructionError(f"initial density negative (min {u.min():.3e})")
    return prof
