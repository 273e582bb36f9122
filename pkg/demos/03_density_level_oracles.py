"""Density level sets: the efficiency yardstick for any conformal method.

The smallest prediction set with 1 - alpha marginal coverage is the
density super-level set {y : f(y|x) >= t'}, with one marginal threshold
t' shared by all inputs.  For the synthetic scenarios the threshold and
sets are computed exactly (Monte-Carlo bisection + grid/bisection level
slices), which lets us measure how close the thresholded-interval
method gets when fed the true quantile function.
"""

import numpy as np

from cti import (
    Bimodal,
    HeteroGauss,
    QuantileLevels,
    batch_scores,
    build_partition,
    calibrate_threshold,
    generate,
    lipschitz_bound,
    oracle_expected_length,
    oracle_quantile_model,
    oracle_set,
    oracle_threshold,
    predict_set,
)

alpha = 0.1

# --- the bimodal level set splits into two slices
bimodal = Bimodal()
t_bi = oracle_threshold(bimodal, alpha, mc_n=200_000, seed=0)
slices = oracle_set(bimodal, x=0.5, t_prime=t_bi)
print(f"bimodal threshold t' = {t_bi:.4f}")
print("level-set slices:", [(round(lo, 2), round(hi, 2)) for lo, hi in slices])

# --- hetero-gauss: compare CTI-with-oracle-quantiles to the level sets
scenario = HeteroGauss()
t_prime = oracle_threshold(scenario, alpha, mc_n=200_000, seed=7)
oracle = oracle_expected_length(scenario, t_prime, n_x=2000, seed=8)
print(f"\nhetero-gauss t' = {t_prime:.4f}, "
      f"oracle mean length = {oracle.expected_length:.3f} (+- {oracle.mc_se:.3f})")

levels = QuantileLevels(100)
model = oracle_quantile_model(scenario, levels)
X, y = generate(scenario, 7000, seed=0)
grids = model.predict_grid(X)
scores, _ = batch_scores(grids[:5000], y[:5000], "infinite")
threshold = calibrate_threshold(scores, alpha)
sizes = [predict_set(build_partition(g), threshold).size for g in grids[5000:]]
print(f"thresholded intervals (K=100, true quantiles): "
      f"mean size {np.mean(sizes):.3f} -> ratio {np.mean(sizes) / oracle.expected_length:.3f}")

# 1/(K t) approximates t': thresholding lengths is density thresholding
k_t = 1.0 / (levels.n_intervals * threshold.t)
print(f"1/(K t) = {k_t:.4f} vs t' = {t_prime:.4f}")

# --- the Lipschitz band that makes the approximation quantitative:
# an L-Lipschitz density integrating to c over [a, b] stays within
# c/(b-a) -+ L(b-a)/2 on the whole interval
lo, hi = lipschitz_bound(a=0.0, b=0.5, mass=0.2, lipschitz=1.0)
print(f"\nband example: mass 0.2 on [0, 0.5], L=1 -> f in [{lo:.3f}, {hi:.3f}]")
