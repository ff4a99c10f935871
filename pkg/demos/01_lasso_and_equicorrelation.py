# Fitting the Lasso and reading off the equicorrelation set
#
# The refit only ever touches the coordinates whose residual correlation sits
# exactly at the penalty level. This script fits one Lasso and shows that set.

import numpy as np

from lassoridge.core import Rng
from lassoridge.lasso import equicorrelation, fit_lasso, lambda_max
from lassoridge.simulate import ar1_design, true_beta

rng = Rng(1)
X = ar1_design(rng, 80, 150, 0.5)
beta0 = true_beta("unit_first_s", 150, 5)
y = X.values @ beta0 + 0.5 * rng.generator.standard_normal(80)

# Penalty at 10% of the smallest value that zeroes everything.
lam = 0.1 * lambda_max(X, y)
fit = fit_lasso(X, y, lam)
print(f"lambda = {lam:.4f}, converged = {fit.converged}, KKT slack = {fit.kkt_slack:.1e}")

E, s = equicorrelation(fit, X, y)
print("E     =", E.tolist())
print("signs =", s.astype(int).tolist())

# Every coordinate in E has |X_j^T r| / n equal to lambda; the rest sit below.
corr = np.abs(X.values.T @ fit.residual) / X.n
print("max |corr| on E    :", corr[E].max().round(10))
print("max |corr| off E   :", np.delete(corr, E).max().round(6))
print("Lasso coefficients on E:", fit.beta[E].round(3))
