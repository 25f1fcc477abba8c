"""Projected stochastic descent for the Gaussian fit parameters.

Each iteration draws one centred batch from the current fit and reuses it
for both parameter updates: the mean moves along the covariance-smoothed
mean gradient, the covariance parameter along its family preconditioned
gradient (see :func:`klgauss.gaussians.descent_direction_cov`), both with
the decaying step ``a0 * n**(-decay)``. Updates are projected back into
boxes -- pointwise for means and potentials, through an eigenvalue clamp
for the symmetric finite-rank factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteObjectiveError
from .gaussians import (
    FiniteRank,
    GaussianSpec,
    cov_values,
    cov_with_values,
    descent_direction_cov,
    sample_centered,
    theta_summary,
)
from .objective import estimate_gradients

__all__ = [
    "StepSchedule",
    "RMConfig",
    "RMTrace",
    "project_box",
    "project_spd",
    "rm_minimize",
]


@dataclass(frozen=True)
class StepSchedule:
    """Decaying Robbins-Monro step ``a0 * n**(-decay)``, ``decay in (1/2, 1]``."""

    a0: float
    decay: float = 0.6

    def __post_init__(self) -> None:
        if not self.a0 > 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if not 0.5 < self.decay <= 1.0:
            raise ValueError(
                f"decay must lie in (1/2, 1] for convergence, got {self.decay}"
            )

    def step_at(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"iterations count from 1, got {n}")
        return self.a0 * float(n) ** (-self.decay)


@dataclass(frozen=True)
class RMConfig:
    iterations: int
    batch_size: int
    schedule: StepSchedule
    mean_bounds: tuple[float, float]
    cov_bounds: tuple[float, float]
    snapshot_every: int = 100

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.batch_size < 2:
            raise ValueError("covariance gradients need a batch of at least 2")
        for name, (lo, hi) in (("mean", self.mean_bounds), ("cov", self.cov_bounds)):
            if not lo < hi:
                raise ValueError(f"{name}_bounds must satisfy lo < hi, got ({lo}, {hi})")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be positive")


@dataclass
class RMTrace:
    """Per-iteration diagnostics plus periodic parameter snapshots."""

    steps: list[int] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    dkl: list[float] = field(default_factory=list)
    dkl_stderr: list[float] = field(default_factory=list)
    mean_norm: list[float] = field(default_factory=list)
    cov_summary: list[float] = field(default_factory=list)
    proj_active: list[int] = field(default_factory=list)
    snapshot_steps: list[int] = field(default_factory=list)
    snapshot_means: list[np.ndarray] = field(default_factory=list)
    snapshot_covs: list[np.ndarray] = field(default_factory=list)

    def record(self, n: int, a_n: float, est, spec: GaussianSpec, proj: int) -> None:
        self.steps.append(n)
        self.step_sizes.append(a_n)
        self.dkl.append(est.value)
        self.dkl_stderr.append(est.stderr)
        self.mean_norm.append(float(np.sqrt(spec.ref.inner(spec.mean, spec.mean))))
        self.cov_summary.append(theta_summary(spec.cov))
        self.proj_active.append(proj)

    def snapshot(self, n: int, spec: GaussianSpec) -> None:
        self.snapshot_steps.append(n)
        self.snapshot_means.append(spec.mean.copy())
        self.snapshot_covs.append(np.atleast_1d(np.asarray(cov_values(spec.cov),
                                                           dtype=float)).ravel().copy())


def project_box(values, lo: float, hi: float):
    """Clip into ``[lo, hi]``; returns ``(projected, was_active)``."""
    arr = np.asarray(values, dtype=float)
    out = np.clip(arr, lo, hi)
    active = bool(np.any(out != arr))
    if np.isscalar(values) or arr.ndim == 0:
        return float(out), active
    return out, active


def project_spd(matrix: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Nearest symmetric matrix with spectrum in ``[lo, hi]`` (Frobenius).

    Symmetrizes, then clamps the eigenvalues: for symmetric input this is
    the exact Frobenius-norm projection onto ``{A = A', lo <= spec(A) <= hi}``.
    """
    if not lo <= hi:
        raise ValueError(f"need lo <= hi, got ({lo}, {hi})")
    a = np.asarray(matrix, dtype=float)
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    clipped = np.clip(vals, lo, hi)
    out = (vecs * clipped) @ vecs.T
    return 0.5 * (out + out.T)


def rm_minimize(
    spec: GaussianSpec,
    problem,
    config: RMConfig,
    rng: np.random.Generator,
) -> tuple[GaussianSpec, RMTrace]:
    """Run the projected stochastic descent; returns the final fit and trace.

    Both parameters update from the same batch each iteration. The trace
    row for iteration ``n`` holds the divergence estimate at the incoming
    parameters and the projection activity of the outgoing update
    (bit 0: mean clamped, bit 1: covariance clamped).
    """
    trace = RMTrace()
    m_lo, m_hi = config.mean_bounds
    c_lo, c_hi = config.cov_bounds
    trace.snapshot(0, spec)
    for n in range(1, config.iterations + 1):
        batch = sample_centered(spec, rng, config.batch_size)
        grads = estimate_gradients(spec, problem, batch)
        if not np.isfinite(grads.estimate.value):
            exc = NonFiniteObjectiveError(
                f"divergence estimate became non-finite at iteration {n}"
            )
            exc.trace = trace
            exc.iteration = n
            raise exc
        a_n = config.schedule.step_at(n)

        mean_dir = spec.ref.apply_cov(grads.mean)
        new_mean, mean_active = project_box(spec.mean - a_n * mean_dir, m_lo, m_hi)

        cov_dir = descent_direction_cov(spec, grads.cov)
        theta_raw = cov_values(spec.cov) - a_n * np.asarray(cov_dir)
        if isinstance(spec.cov, FiniteRank):
            theta_new = project_spd(theta_raw, c_lo, c_hi)
            scale = max(1.0, float(np.abs(theta_raw).max()))
            cov_active = bool(np.abs(theta_new - theta_raw).max() > 1e-12 * scale)
        else:
            theta_new, cov_active = project_box(theta_raw, c_lo, c_hi)
        if not (np.all(np.isfinite(new_mean)) and np.all(np.isfinite(np.asarray(theta_new)))):
            exc = NonFiniteObjectiveError(
                f"parameter update became non-finite at iteration {n}"
            )
            exc.trace = trace
            exc.iteration = n
            raise exc

        proj = (1 if mean_active else 0) | (2 if cov_active else 0)
        trace.record(n, a_n, grads.estimate, spec, proj)
        spec = spec.with_mean(new_mean).with_cov(cov_with_values(spec.cov, theta_new))
        if n % config.snapshot_every == 0 or n == config.iterations:
            trace.snapshot(n, spec)
    return spec, trace
