"""Blow-up time against grid size and clustering, plus the spatial self-convergence order.

    python scripts/resolution_study.py
"""
import time

from ksblowup.grid import build_grid
from ksblowup.harness import consistency_errors
from ksblowup.params import ModelParams, derive
from ksblowup.solver import SolverConfig, run, self_convergence
from ksblowup.transforms import make_admissible_initial

dp = derive(ModelParams.from_chi_N(3, 1.6, 8.0, 60.0), 1.2)
print(f"T_max = {dp.T_max:.6g}")

print("\nn      c    outcome         t_end         cap_sens   steps  seconds")
for c in (1.0, 2.0, 3.0):
    for n in (256, 512, 1024, 2048):
        g = build_grid(n, c)
        t0 = time.perf_counter()
        r = run(make_admissible_initial(dp, g), SolverConfig(), dp, 1.2 * dp.T_max)
        print(f"{n:<6d} {c:<4g} {type(r.outcome).__name__:<15s} {r.series.t[-1]:<13.6g} "
              f"{r.cap_sensitivity or float('nan'):<10.2e} "
              f"{len(r.series):<6d} {time.perf_counter() - t0:.2f}")

print("\nself-convergence on U0 = rho (1 - rho), horizon 1e-3")
for c in (1.0, 2.0, 3.0):
    study = self_convergence(lambda x: x * (1 - x), dp, [build_grid(n, c) for n in (128, 256, 512, 1024)], 1e-3)
    print(f"  c={c:g}: diffs {['%.3e' % d for d in study.diffs]}  orders {['%.3f' % o for o in study.orders]}")

print("\nrhs(phi) against the closed-form spatial operator")
for c in (1.0, 3.0):
    errs, ratios = consistency_errors(dp, ns=(256, 512, 1024, 2048), clustering_exponent=c)
    print(f"  c={c:g}: errors {['%.3e' % e for e in errs]}  ratios {['%.3f' % x for x in ratios]}")
