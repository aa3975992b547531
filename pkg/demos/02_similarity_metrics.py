"""
Similarity metrics
==================

One comparison yields volume (MD, NMD), spatial (SP), mass (NMA) and
structural (NSA, RRNSA) scores, next to the usual RMSE and R^2.
"""

import numpy as np

from mobsim import GridSpec, compare, estimate_mu
from mobsim.experiments import gen_random_tableau

grid = GridSpec(10, 10)
X = gen_random_tableau(grid, 400, seed=1)

# a scaled copy keeps its structure but not its volume
r = compare(X, X.scaled(1.5))
print("scaled   nmd=%.3f  nma=%.3f  rrnsa=%.3f" % (r.nmd, r.nma, r.rrnsa))

# an unrelated tableau of the same size
r = compare(X, gen_random_tableau(grid, 400, seed=2))
print("random   nmd=%.3f  nma=%.3f  nsa=%.3f  rrnsa=%.3f" % (r.nmd, r.nma, r.nsa, r.rrnsa))

# perturb every flow by up to 20 percent
rng = np.random.default_rng(0)
noisy = X.with_flows({v: w * (1 + 0.2 * rng.random()) for v, w in X.flows.items()})
r = compare(X, noisy)
print("noisy    nsa=%.4f  rmse=%.2e  r2=%.4f" % (r.nsa, r.baseline_rmse, r.baseline_r2))

# the RRNSA baseline: NSA against copies with the cells shuffled
est = estimate_mu(X, trials=20, seed=0)
print("mu estimate %.4f +/- %.4f" % (est.mean_nsa, est.std_nsa))
r = compare(X, noisy, mu=est.mean_nsa)
print("rrnsa with the local baseline: %.3f" % r.rrnsa)
