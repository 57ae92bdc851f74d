"""
Trading depth for shots
=======================

Hold the product of maximum depth and total queries fixed and split it
different ways.  The error barely moves.
"""
from eigengap_ae.experiments import InvariancePlan, log_splits, run_invariance

budget = 1e6
splits = log_splits(budget, 4, depth_min=20, depth_max=300)
res = run_invariance(InvariancePlan(budget=budget, splits=splits, a_true=0.25, trials=40, seed_base=2))
for depth, queries, _, rmse, _ in res.rows:
    print(f"depth {depth:6.1f}  queries {queries:8.0f}  rmse {rmse:.2e}")
print(f"max/min rmse ratio {res.ratio:.2f}")

# Pushing depth until only a handful of samples remain breaks the tradeoff.
deep = run_invariance(InvariancePlan(budget=budget, splits=[(1000, 1000)], a_true=0.25, trials=40, seed_base=2))
print(f"depth 1000 with 1000 queries: rmse {deep.rows[0][3]:.2e}")
