"""
Depth against precision
=======================

Sweep the target precision and fit the log-log slope of circuit depth.
With beta=0 depth grows like 1/eps (up to a log factor); with beta=1/3 it
grows like eps^(-2/3) and the extra cost moves into the number of shots.
"""
import numpy as np

from eigengap_ae.experiments import SweepPlan, run_sweep

eps = np.geomspace(1e-1, 1e-3, 5)
for beta in (0.0, 1 / 3):
    res = run_sweep(SweepPlan(["glsae"], [0.3], eps, beta=beta, trials=10, seed_base=1))
    print(f"beta={beta:.2f}")
    for s in res.summary:
        print(f"  eps={s['epsilon']:.1e} success={s['success']:.1f} depth={s['median_depth']:7.0f} "
              f"queries={s['median_queries']:9.0f} rmse={s['rmse']:.2e}")
    print(f"  depth slope {res.depth_slope():+.3f}")
