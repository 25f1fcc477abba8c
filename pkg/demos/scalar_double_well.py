"""Fit a Gaussian to the 1-d double-well target and sample it.

The target density is proportional to exp(-V(x)/eps + x^2/2) under a unit
Gaussian reference, with V(x) = x^4 + x^2/2. For small eps it concentrates
like N(0, eps), and the best Gaussian fit has a closed-form variance, so
everything the stochastic machinery produces can be checked against pencil
and paper. Runs in a few seconds.
"""

import time

import numpy as np

from klgauss import (
    ChainConfig,
    GaussianSpec,
    ScalarDoubleWell,
    ScalarReference,
    ScalarVariance,
    estimate_dkl,
    fit_chain,
    reference_chain,
    rm_minimize,
    RMConfig,
    scalar_acceptance_asymptote,
    scalar_dkl_analytic,
    scalar_sigma_opt,
    StepSchedule,
)

EPS = 0.01

print(f"== scalar double well, eps = {EPS} ==")
print()
s_opt = scalar_sigma_opt(EPS)
print(f"closed-form optimal sigma     : {s_opt:.6f}")
print(f"small-eps expansion sqrt(eps - 12 eps^2): {np.sqrt(EPS - 12 * EPS**2):.6f}")
print(f"divergence at the optimum     : {scalar_dkl_analytic(0.0, s_opt, EPS):.4f}"
      " (up to the target's log-normalizer)")
print()

# -- stochastic fit, started well away from the answer ----------------------
problem = ScalarDoubleWell(EPS)
ref = ScalarReference()
start = GaussianSpec(np.array([0.25]), ScalarVariance(1.0), ref)
config = RMConfig(iterations=10_000, batch_size=100,
                  schedule=StepSchedule(0.1, 0.6),
                  mean_bounds=(-0.5, 0.5), cov_bounds=(1e-3, 1.0))
t0 = time.perf_counter()
fit, trace = rm_minimize(start, problem, config, np.random.default_rng(1))
elapsed = time.perf_counter() - t0

print(f"stochastic fit ({config.iterations} iterations, batches of "
      f"{config.batch_size}, {elapsed:.1f} s):")
print(f"  mean  {fit.mean[0]:+.5f}   (truth 0)")
print(f"  sigma  {fit.cov.sigma:.5f}   (truth {s_opt:.5f})")
for k in (0, len(trace.steps) // 100, len(trace.steps) // 10, -1):
    n = trace.steps[k]
    print(f"  divergence estimate at iteration {n:>6}: {trace.dkl[k]:8.3f}")
print()

# -- the fitted Gaussian as a pCN proposal base ------------------------------
chain_cfg = ChainConfig(steps=100_000, beta=1.0, thin=100, burn_frac=0.1)
plain = reference_chain(problem, ref, chain_cfg, np.random.default_rng(2))
informed = fit_chain(problem, fit, chain_cfg, np.random.default_rng(3))

print(f"independence sampler, {chain_cfg.steps} steps each:")
print(f"  reference-based acceptance : {plain.acceptance_rate:.4f}"
      f"  (small-eps asymptote {scalar_acceptance_asymptote(EPS):.4f})")
print(f"  fit-based acceptance       : {informed.acceptance_rate:.4f}")
print(f"  posterior second moment    : {informed.node_var[0] + informed.node_mean[0]**2:.5f}"
      f"  (quadrature gives {0.9065 * EPS:.5f})")
print()

final = estimate_dkl(fit, problem, 20_000, np.random.default_rng(4))
print(f"fresh-batch divergence at the fit: {final.value:.4f}"
      f" +/- {final.stderr:.4f} (up to log-normalizer)")
print(f"analytic value at the same point : "
      f"{scalar_dkl_analytic(float(fit.mean[0]), fit.cov.sigma, EPS):.4f}")
print("(the estimate sits low: its log-partition term is a heavy-tailed")
print(" average exactly at the optimum. The gradients that drive the fit")
print(" don't involve that term and are unbiased.)")
