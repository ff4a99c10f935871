# A small version of the synthetic benchmark
#
# Both estimators are tuned by 5-fold CV (20 Lasso penalties, 20 x 10 for the
# pair) and compared by in-sample prediction error. Improvement is
# 100 (MSE_lasso / MSE_new - 1). Expect a few minutes on one core.

import sys

from lassoridge.cli import emit_report
from lassoridge.simulate import ScenarioConfig, run_scenario

reports = []
for n in (100, 200):
    for p in (100, 200):
        cfg = ScenarioConfig(n=n, p=p, s_true=5, rho=0.0, sigma=0.5, replications=10)
        rep = run_scenario(cfg)
        print(f"n={n:3d} p={p:3d}: prediction improvement {rep.pred_improvement_pct:+6.1f}%", file=sys.stderr)
        reports.append(rep)

# Same table as `lassoridge simulate --format text`.
emit_report(reports, "text", None)
