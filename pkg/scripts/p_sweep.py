"""Blow-up time and T_max across the admissible range of p (N=3, M=8, chi_N=60, default gamma).

    python scripts/p_sweep.py [--n 1024] [--out out/p_sweep.csv]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from ksblowup.grid import build_grid
from ksblowup.params import InfeasibleParameters, ModelParams, PreconditionError, derive
from ksblowup.solver import SolverConfig, run
from ksblowup.transforms import make_admissible_initial

ap = argparse.ArgumentParser()
ap.add_argument("--n", type=int, default=1024)
ap.add_argument("--out", default="out/p_sweep.csv")
args = ap.parse_args()

grid = build_grid(args.n)
rows = []
for p in np.round(np.arange(1.52, 2.0, 0.04), 2):
    try:
        dp = derive(ModelParams.from_chi_N(3, float(p), 8.0, 60.0))
    except (PreconditionError, InfeasibleParameters) as exc:
        print(f"p={p:.2f}: skipped ({str(exc).splitlines()[0]})")
        continue
    r = run(make_admissible_initial(dp, grid), SolverConfig(), dp, 1.2 * dp.T_max)
    tb = getattr(r.outcome, "t_blow", float("nan"))
    rows.append(dict(p=p, gamma=dp.gamma, epsilon=dp.epsilon, T_max=dp.T_max, t_blow=tb,
                     ratio=tb / dp.T_max, outcome=type(r.outcome).__name__))
    print(f"p={p:.2f}  gamma={dp.gamma:.4f}  T_max={dp.T_max:.4g}  t_blow={tb:.4g}  "
          f"t_blow/T_max={tb / dp.T_max:.3g}")

out = Path(args.out)
out.parent.mkdir(parents=True, exist_ok=True)
with out.open("w", newline="") as fh:
    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
print(f"wrote {out}")
