# Fixed-design experiment on a generated stand-in
#
# No gene-expression file ships with the package, so this uses a synthetic
# AR(1) matrix of the same 38 x 3051 shape. It is a stand-in, not real data,
# and its results say nothing about any particular dataset. Pass your own
# matrix to SemiSyntheticSpec(design="path.csv") to use real measurements.

from lassoridge.core import Rng
from lassoridge.simulate import SemiSyntheticSpec, run_semi_synthetic, standin_design

design = standin_design(Rng(5), 38, 3051, rho=0.5)
for case in (1, 2, 3):
    spec = SemiSyntheticSpec(design=design, beta_case=case, rounds=10, seed=5, label="stand-in")
    rep = run_semi_synthetic(spec)
    print(f"case {case}: test MSE lasso {rep.mean_pred_mse_lasso:8.3f} (sd {rep.sd_pred_mse_lasso:.2f})"
          f"   lasso-ridge {rep.mean_pred_mse_new:8.3f} (sd {rep.sd_pred_mse_new:.2f})")
