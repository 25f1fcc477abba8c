"""The three structured Gaussian samplers and their exact covariances.

Every covariance family in the package has a sampler that avoids dense
factorizations where structure allows: a spectral sampler for low-rank
updates of a diagonal mode covariance, a local Ornstein-Uhlenbeck recursion
for bridges with constant curvature, and an eigenbasis sampler for variable
curvature. Each is checked here against its closed-form covariance. Runs in
a few seconds.
"""

import numpy as np

from klgauss import (
    BridgeReference,
    ConstantPotential,
    FiniteRank,
    GaussianSpec,
    PeriodicReference,
    VariablePotential,
    sample_centered,
)

DRAWS = 200_000


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def empirical_cov(draws):
    c = draws - draws.mean(axis=0)
    return c.T @ c / len(draws)


print(f"== structured Gaussian samplers, {DRAWS} draws each ==")
print()

# -- spectral sampler: rank-2 update of a periodic random field --------------
ref = PeriodicReference(32, scale=1.0)
factor = np.array([[0.4, 0.15], [0.15, 0.25]])
spec = GaussianSpec(np.zeros(32), FiniteRank(factor), ref)
draws = sample_centered(spec, np.random.default_rng(31), DRAWS)
modes = ref.synth(np.eye(ref.n_modes))
coeff_cov = np.diag(np.concatenate([[0.0, 0.0], ref.lam[2:] ** 2]))
coeff_cov[:2, :2] = factor @ factor
exact = modes.T @ coeff_cov @ modes
print("finite-rank spectral sampler (periodic field, rank-2 update):")
print(f"  relative Frobenius error of the sample covariance: "
      f"{rel_fro(empirical_cov(draws), exact):.4f}")
print()

# -- OU recursion: bridge with constant curvature ----------------------------
bref = BridgeReference(24)
strength, eps = 4.0, 0.4
ou_spec = GaussianSpec(bref.mean0.copy(), ConstantPotential(strength, eps), bref)
ou_draws = sample_centered(ou_spec, np.random.default_rng(32), DRAWS)
exact_const = np.linalg.inv(bref.path_precision(strength, eps))
print("Ornstein-Uhlenbeck bridge sampler (constant curvature):")
print(f"  relative Frobenius error vs dense precision solve: "
      f"{rel_fro(empirical_cov(ou_draws), exact_const):.4f}")
a = np.sqrt(strength) / eps
mid = bref.t[12]
analytic_mid = 2.0 * np.sinh(a * mid) * np.sinh(a * (1 - mid)) / (a * np.sinh(a))
print(f"  midpoint variance {empirical_cov(ou_draws)[12, 12]:.5f}, "
      f"closed form 2 sinh(at) sinh(a(1-t)) / (a sinh a) = {analytic_mid:.5f}")
print()

# -- eigenbasis sampler: bridge with varying curvature ------------------------
b = 1.0 + 0.8 * np.sin(2 * np.pi * bref.t)
pe_spec = GaussianSpec(bref.mean0.copy(), VariablePotential(b, 0.35), bref)
pe_draws = sample_centered(pe_spec, np.random.default_rng(33), DRAWS)
exact_var = np.linalg.inv(bref.path_precision(b, 0.35))
print("precision-eigenbasis sampler (varying curvature):")
print(f"  relative Frobenius error vs dense precision solve: "
      f"{rel_fro(empirical_cov(pe_draws), exact_var):.4f}")
print()

# -- consistency: both bridge samplers on the same constant curvature --------
pe_const = GaussianSpec(bref.mean0.copy(),
                        VariablePotential(np.full(24, strength), eps), bref)
pe_const_draws = sample_centered(pe_const, np.random.default_rng(34), DRAWS)
print("cross-check on a shared constant-curvature target:")
print(f"  OU recursion vs eigenbasis sample covariances differ by "
      f"{rel_fro(empirical_cov(pe_const_draws), empirical_cov(ou_draws)):.4f}")
