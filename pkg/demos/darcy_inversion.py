"""Bayesian recovery of a log-permeability field from four pressure readings.

Steady 1-d groundwater flow: -(e^u p')' = 0 on the unit circle... almost;
here the flow cell is the unit interval with fixed pressures at the ends and
a periodic random field prior on the log-permeability u. Four noisy interior
pressure observations define the posterior. We fit a rank-2 Gaussian to it,
then use the fit to drive a pCN chain and compare against the prior-based
chain. Takes roughly half a minute.
"""

import numpy as np

from klgauss import (
    DarcyProblem,
    FiniteRank,
    GaussianSpec,
    PeriodicReference,
    RMConfig,
    StepSchedule,
    darcy_true_field,
    fit_chain,
    iact,
    reference_chain,
    rm_minimize,
    synthesize_darcy_data,
    ChainConfig,
)

N = 128
NOISE = 0.1

print(f"== Darcy inversion, grid {N}, observation noise {NOISE} ==")
print()

rng = np.random.default_rng(7)
truth, data = synthesize_darcy_data(N, NOISE, rng)
problem = DarcyProblem(N, NOISE, data)
print("observations (position, noisy pressure):")
for x, y in zip(problem.obs_points, data):
    print(f"  x = {x:.1f}   p = {y:+.4f}")
print()

ref = PeriodicReference(N, scale=1.0)
rank = 2
start = GaussianSpec(np.zeros(N), FiniteRank(np.diag(ref.lam[:rank])), ref)
config = RMConfig(iterations=10_000, batch_size=100,
                  schedule=StepSchedule(0.1, 0.6),
                  mean_bounds=(-5.0, 5.0), cov_bounds=(1e-4, 1.0))
fit, trace = rm_minimize(start, problem, config, np.random.default_rng(8))

print(f"rank-{rank} fit after {config.iterations} iterations:")
print(f"  divergence estimate {trace.dkl[0]:.2f} -> {trace.dkl[-1]:.2f}"
      " (up to log-normalizer)")
x = np.arange(N) / N
for point in (0.0, 0.25, 0.5, 0.75):
    i = int(point * N)
    print(f"  posterior mean at x = {point:.2f}: {fit.mean[i]:+.3f}"
          f"   (truth {truth[i]:+.3f})")
eigs = np.linalg.eigvalsh(fit.cov.factor @ fit.cov.factor)
print(f"  fitted leading-mode covariance eigenvalues: "
      + ", ".join(f"{v:.4f}" for v in eigs[::-1])
      + f"  (prior gives {ref.lam[0]**2:.4f} each)")
print()

chain_cfg = ChainConfig(steps=100_000, beta=0.6, thin=10, burn_frac=0.1)
plain = reference_chain(problem, ref, chain_cfg, np.random.default_rng(9))
informed = fit_chain(problem, fit, chain_cfg, np.random.default_rng(10))

print(f"pCN chains, beta = {chain_cfg.beta}, {chain_cfg.steps} steps:")
print(f"              acceptance   probe IACT (x{chain_cfg.thin} steps)")
for name, diag in (("prior-based", plain), ("fit-based", informed)):
    tau = iact(diag.probe_post_burn, chain_cfg.max_lag)
    print(f"  {name:<11} {diag.acceptance_rate:^10.4f}   {tau:.2f}")
print()
print("the fitted proposal both accepts more and decorrelates faster;")
print("the node-64 posterior mean from the two chains agrees to MC error:")
print(f"  prior-based chain : {plain.node_mean[N // 2]:+.4f}")
print(f"  fit-based chain   : {informed.node_mean[N // 2]:+.4f}")
print(f"  Gaussian fit      : {fit.mean[N // 2]:+.4f}")
