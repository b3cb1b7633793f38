"""Reference blow-up experiment: validate, certify, simulate, compare, probe stability.

    python scripts/theorem_check.py [--n 2048] [--out out/theorem_check]
"""
import argparse
import time
from pathlib import Path

import numpy as np

from ksblowup.grid import build_grid
from ksblowup.harness import compare_with_subsolution, report, stability_probe
from ksblowup.params import ModelParams, derive, validate_model
from ksblowup.solver import SolverConfig, run
from ksblowup.subsolution import certify, phi
from ksblowup.transforms import make_admissible_initial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--chi-N", type=float, default=60.0)
    ap.add_argument("--gamma", type=float, default=1.2)
    ap.add_argument("--out", default="out/theorem_check")
    args = ap.parse_args()

    mp = ModelParams.from_chi_N(3, 1.6, 8.0, args.chi_N)
    print(validate_model(mp, args.gamma))
    dp = derive(mp, args.gamma)
    print(f"epsilon={dp.epsilon:.6g}  T_max={dp.T_max:.6g}")

    cert = certify(dp)
    print(cert.summary())

    grid = build_grid(args.n)
    U0 = make_admissible_initial(dp, grid)
    cfg = SolverConfig()
    t0 = time.perf_counter()
    res = run(U0, cfg, dp, 1.2 * dp.T_max,
              margin_fn=lambda t, U: float(np.min(U - phi(min(t, dp.T_max), grid.nodes, dp))))
    print(f"{res.outcome}  ({time.perf_counter() - t0:.2f} s, {len(res.series)} steps, "
          f"{res.n_rejected} rejected)")

    trace = compare_with_subsolution(res, dp)
    probe = stability_probe(U0, 1e-8, cfg, dp, grid, base=res)
    print(f"comparison worst margin {trace.worst:.3e} (tol {trace.tol:.3e})")
    print(f"stability: max difference {probe.max_difference:.3e} -> {probe.status}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.series.write_csv(out / "timeseries.csv")
    trace.write_csv(out / "comparison.csv")
    summary = report(res, cert, trace, {"timeseries": str(out / "timeseries.csv")})
    summary.write(out)
    print(summary.text(), end="")


if __name__ == "__main__":
    main()
