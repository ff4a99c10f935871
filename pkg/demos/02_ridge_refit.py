# The ridge correction on top of the Lasso
#
# Given the Lasso signs s on E, the correction solves
#     (X_E^T X_E / n + lambda_r I) delta_E = lambda_l s
# and adds delta to the Lasso. It partly undoes the shrinkage.

import numpy as np

from lassoridge.core import Rng
from lassoridge.lasso import fit_lasso, lambda_max
from lassoridge.refit import refit_closed_form, refit_direct_solve, sign_preservation_check
from lassoridge.simulate import ar1_design, true_beta

rng = Rng(2)
X = ar1_design(rng, 100, 200, 0.0)
beta0 = true_beta("unit_first_s", 200, 5)
y = X.values @ beta0 + 0.5 * rng.generator.standard_normal(100)
fit = fit_lasso(X, y, 0.15 * lambda_max(X, y))

# Default penalty: just above twice the infinity norm of the restricted Gram matrix.
rf = refit_closed_form(X, fit)
print(f"lambda_r = {rf.lambda_r:.4f} (safe threshold {rf.min_safe_lambda_r:.4f})")
print("first 5 Lasso coefs :", fit.beta[:5].round(3))
print("first 5 refit coefs :", rf.beta_r[:5].round(3))
print("signs preserved     :", sign_preservation_check(fit, rf))

# The same correction from conjugate gradients on the actual residual.
rd = refit_direct_solve(X, y, fit)
print("closed form vs CG   :", np.abs(rf.delta - rd.delta).max())

# Growing lambda_r shrinks the correction back to nothing.
for lr in (rf.lambda_r, 10 * rf.lambda_r, 1e3 * rf.lambda_r, 1e8):
    print(f"lambda_r = {lr:10.3g}  ||delta|| = {np.linalg.norm(refit_closed_form(X, fit, lr).delta):.3e}")
