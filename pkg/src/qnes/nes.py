"""Evolution-strategy optimizers over Gaussian search distributions.

Three variants, all minimizing a black-box fitness:

- canonical: fixed isotropic width, plain search-gradient step on the mean
  (optionally preconditioned by the empirical Fisher matrix);
- separable: per-coordinate standard deviations, rank-based utilities,
  multiplicative exponential sigma updates;
- full: global scale sigma plus a unit-determinant shape matrix B updated in
  exponential coordinates; the covariance factor is sigma * B.

The k fitness evaluations per iteration are pure and may run serially, on a
thread pool, or through a vectorized batch evaluator; per-walker child random
streams keep sampling independent of the execution schedule.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .numerics import SeededRng, matrix_exponential_symmetric, sample_standard_normal_vector
from .trace import RunTrace

__all__ = [
    "IsotropicDistribution",
    "SeparableDistribution",
    "FullDistribution",
    "NesConfig",
    "WalkerBatch",
    "compute_utilities",
    "default_learning_rates",
    "default_population",
    "map_to_task",
    "sample_walkers",
    "canonical_gradient_estimate",
    "estimate_fisher",
    "apply_fisher_inverse",
    "canonical_step",
    "snes_step",
    "xnes_step",
    "spread_max",
    "optimize",
]


@dataclass
class IsotropicDistribution:
    """Mean plus one fixed isotropic width (the canonical strategy; no adaptation)."""

    mu: np.ndarray
    sigma: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if not np.all(np.isfinite(self.mu)):
            raise ValueError("mu must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class SeparableDistribution:
    """Mean plus independent per-coordinate standard deviations."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.mu.shape != self.sigma.shape:
            raise ValueError("mu and sigma must have the same shape")
        if not np.all(np.isfinite(self.mu)):
            raise ValueError("mu must be finite")
        if not np.all(self.sigma > 0):
            raise ValueError("all sigma components must be positive")


@dataclass
class FullDistribution:
    """Mean, global scale sigma, and unit-determinant shape matrix B."""

    mu: np.ndarray
    sigma: float
    shape: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.shape = np.asarray(self.shape, dtype=float)
        d = self.mu.size
        if self.shape.shape != (d, d):
            raise ValueError("shape matrix must be d x d")
        if not np.all(np.isfinite(self.mu)) or not np.all(np.isfinite(self.shape)):
            raise ValueError("distribution parameters must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_factor(cls, mu: np.ndarray, factor: np.ndarray) -> "FullDistribution":
        """Split a covariance factor A into sigma = |det A|^(1/d) and B = A/sigma."""
        from .numerics import scale_from_factor

        sigma, shape = scale_from_factor(factor)
        return cls(mu=mu, sigma=sigma, shape=shape)

    @classmethod
    def isotropic(cls, mu: np.ndarray, sigma: float) -> "FullDistribution":
        mu = np.asarray(mu, dtype=float)
        return cls(mu=mu, sigma=float(sigma), shape=np.eye(mu.size))


@dataclass
class NesConfig:
    """Walker count, learning rates, and stopping controls.

    Learning rates left as None are filled from the dimension-dependent defaults
    at step time (for batch optimization that dimension is the batch size).
    """

    population: int
    max_iterations: int = 1000
    stop_threshold: float = 1e-8
    eta_mu: float | None = None
    eta_sigma: float | None = None      # separable sigma rate
    eta_scale: float | None = None      # full-variant sigma rate
    eta_shape: float | None = None      # full-variant B rate
    natural_gradient: bool = False      # canonical variant: precondition by the Fisher matrix

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    def resolved(self, d: int) -> "NesConfig":
        eta_mu, eta_scale_or_shape, eta_sigma = default_learning_rates(d)
        return replace(
            self,
            eta_mu=self.eta_mu if self.eta_mu is not None else eta_mu,
            eta_sigma=self.eta_sigma if self.eta_sigma is not None else eta_sigma,
            eta_scale=self.eta_scale if self.eta_scale is not None else eta_scale_or_shape,
            eta_shape=self.eta_shape if self.eta_shape is not None else eta_scale_or_shape,
        )


@dataclass
class WalkerBatch:
    """One generation: local samples s_n, task points z_n, and their fitnesses."""

    samples: np.ndarray
    points: np.ndarray
    fitnesses: np.ndarray | None = None


def compute_utilities(k: int) -> np.ndarray:
    """Rank-based utility weights, best rank first; they sum to zero.

    u_n = max(0, ln(k/2 + 1) - ln n) / sum_j max(0, ln(k/2 + 1) - ln j) - 1/k
    for ranks n = 1..k. The bottom floor(k/2) entries are all -1/k.
    """
    if k < 2:
        raise ValueError("population must be >= 2 for fitness shaping")
    ranks = np.arange(1, k + 1, dtype=float)
    raw = np.maximum(0.0, np.log(k / 2 + 1.0) - np.log(ranks))
    return raw / raw.sum() - 1.0 / k


def default_learning_rates(d: int) -> tuple[float, float, float]:
    """(eta_mu, eta_scale_or_shape, eta_sigma) defaults for problem dimension d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    denom = 5.0 * d * math.sqrt(d)
    return 1.0, (9.0 + 3.0 * math.log(d)) / denom, (3.0 + math.log(d)) / denom


def default_population(d: int) -> int:
    """round(4 + 3 ln d): the conventional dimension-based walker count."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return int(round(4 + 3 * math.log(d)))


def map_to_task(dist, samples: np.ndarray) -> np.ndarray:
    """Map local-coordinate samples (k, d) to task coordinates for the given variant."""
    if isinstance(dist, IsotropicDistribution):
        return dist.mu + dist.sigma * samples
    if isinstance(dist, SeparableDistribution):
        return dist.mu + dist.sigma * samples
    if isinstance(dist, FullDistribution):
        # z_n = mu + sigma * B s_n: the factor side must match the exponential
        # B update (B <- B exp(.)), otherwise the shape feedback is applied in a
        # rotated frame and the coupled dynamics diverge on converged quadratics
        return dist.mu + dist.sigma * (samples @ dist.shape.T)
    raise TypeError(f"unknown distribution type {type(dist).__name__}")


def sample_walkers(dist, k: int, rng: SeededRng) -> WalkerBatch:
    """Draw k walkers, one independent child stream per walker index."""
    if k < 1:
        raise ValueError("population must be >= 1")
    d = dist.mu.size
    samples = np.stack([sample_standard_normal_vector(rng.stream(n), d) for n in range(k)])
    return WalkerBatch(samples=samples, points=map_to_task(dist, samples))


def canonical_gradient_estimate(batch: WalkerBatch, sigma_init: float) -> np.ndarray:
    """Search-gradient estimate (1 / (k * sigma)) * sum_n f(z_n) s_n."""
    if not sigma_init > 0:
        raise ValueError("sigma_init must be positive")
    if batch.fitnesses is None:
        raise ValueError("walker fitnesses are not filled")
    fits = np.asarray(batch.fitnesses, dtype=float)
    return (fits @ batch.samples) / (fits.size * sigma_init)


def estimate_fisher(samples: np.ndarray, dist) -> np.ndarray:
    """Empirical Fisher matrix of the mean block: (1/k) sum_n (s_n/sigma)(s_n/sigma)^T."""
    sigma = dist.sigma
    grads = np.asarray(samples, dtype=float) / sigma
    return grads.T @ grads / grads.shape[0]


def apply_fisher_inverse(fisher: np.ndarray, grad: np.ndarray, ridge: float = 1e-8) -> np.ndarray:
    """Solve F x = grad, adding ridge * I when F is ill-conditioned or singular."""
    fisher = np.asarray(fisher, dtype=float)
    eigs = np.linalg.eigvalsh(fisher)
    if eigs[0] <= ridge * max(1.0, eigs[-1]):
        fisher = fisher + ridge * np.eye(fisher.shape[0])
    return np.linalg.solve(fisher, grad)


def _rank_order(fitnesses: np.ndarray | None) -> np.ndarray:
    if fitnesses is None:
        raise ValueError("walker fitnesses are not filled")
    fits = np.asarray(fitnesses, dtype=float)
    if not np.all(np.isfinite(fits)):
        raise ValueError("walker fitness values must be finite")
    # ascending fitness = best first (minimization); stable sort breaks ties by walker index
    return np.argsort(fits, kind="stable")


def canonical_step(dist: IsotropicDistribution, batch: WalkerBatch,
                   config: NesConfig) -> IsotropicDistribution:
    """Descend the estimated search gradient; the width stays fixed."""
    cfg = config.resolved(dist.mu.size)
    grad = canonical_gradient_estimate(batch, dist.sigma)
    if cfg.natural_gradient:
        grad = apply_fisher_inverse(estimate_fisher(batch.samples, dist), grad)
    return IsotropicDistribution(mu=dist.mu - cfg.eta_mu * grad, sigma=dist.sigma)


def snes_step(dist: SeparableDistribution, batch: WalkerBatch,
              config: NesConfig) -> SeparableDistribution:
    """One separable update: utility-weighted mean step, exponential sigma step."""
    order = _rank_order(batch.fitnesses)
    k = order.size
    utilities = compute_utilities(k)
    s_sorted = batch.samples[order]
    grad_mu = utilities @ s_sorted
    grad_sigma = utilities @ (s_sorted**2 - 1.0)
    cfg = config.resolved(dist.mu.size)
    mu = dist.mu + cfg.eta_mu * dist.sigma * grad_mu
    sigma = dist.sigma * np.exp(0.5 * cfg.eta_sigma * grad_sigma)
    return SeparableDistribution(mu=mu, sigma=sigma)


def xnes_step(dist: FullDistribution, batch: WalkerBatch, config: NesConfig) -> FullDistribution:
    """One full-covariance update in exponential coordinates; |det B| stays 1."""
    order = _rank_order(batch.fitnesses)
    k = order.size
    utilities = compute_utilities(k)
    s_sorted = batch.samples[order]
    d = dist.mu.size
    eye = np.eye(d)
    grad_mu = utilities @ s_sorted
    grad_m = np.einsum("n,ni,nj->ij", utilities, s_sorted, s_sorted) - utilities.sum() * eye
    grad_scale = np.trace(grad_m) / d
    grad_shape = grad_m - grad_scale * eye
    cfg = config.resolved(d)
    mu = dist.mu + cfg.eta_mu * dist.sigma * (dist.shape @ grad_mu)
    sigma = dist.sigma * math.exp(0.5 * cfg.eta_scale * grad_scale)
    shape = dist.shape @ matrix_exponential_symmetric(0.5 * cfg.eta_shape * grad_shape)
    # grad_shape is traceless so |det shape| = 1 in exact arithmetic; refactor the
    # float drift into sigma to keep the covariance factor sigma*shape unchanged
    drift = abs(np.linalg.det(shape)) ** (1.0 / d)
    return FullDistribution(mu=mu, sigma=sigma * drift, shape=shape / drift)


def spread_max(dist) -> float:
    """Stopping statistic: max sigma component, or max |entry| of the full covariance."""
    if isinstance(dist, IsotropicDistribution):
        return float(dist.sigma)
    if isinstance(dist, SeparableDistribution):
        return float(np.max(dist.sigma))
    if isinstance(dist, FullDistribution):
        cov = dist.sigma**2 * (dist.shape @ dist.shape.T)
        return float(np.max(np.abs(cov)))
    raise TypeError(f"unknown distribution type {type(dist).__name__}")


def _step_for(dist):
    if isinstance(dist, IsotropicDistribution):
        return canonical_step
    if isinstance(dist, SeparableDistribution):
        return snes_step
    if isinstance(dist, FullDistribution):
        return xnes_step
    raise TypeError(f"unknown distribution type {type(dist).__name__}")


def make_evaluator(fitness, fitness_batch=None, n_workers: int = 0):
    """Row-matrix fitness evaluator: vectorized, threaded, or serial.

    All three produce the fitness of each row; threaded and serial are
    bit-identical (same per-row arithmetic, results gathered in walker order).
    """
    if fitness_batch is not None:
        return lambda points: np.asarray(fitness_batch(points), dtype=float)
    if n_workers > 1:
        def threaded(points):
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                return np.array(list(pool.map(fitness, points)), dtype=float)
        return threaded
    return lambda points: np.array([fitness(z) for z in points], dtype=float)


def optimize(
    fitness,
    dist,
    config: NesConfig,
    rng: SeededRng,
    trace: RunTrace | None = None,
    fitness_batch=None,
    n_workers: int = 0,
    callback=None,
) -> tuple[np.ndarray, RunTrace]:
    """Sample -> evaluate -> step until the spread threshold or max_iterations.

    Returns the final distribution center and the trace. The trace records the
    loss at the center each iteration (one reporting evaluation, not counted);
    counted evaluations grow by exactly k per iteration.
    """
    step = _step_for(dist)
    if not isinstance(dist, IsotropicDistribution) and config.population < 2:
        raise ValueError("population must be >= 2 for fitness shaping")
    evaluator = make_evaluator(fitness, fitness_batch, n_workers)
    if trace is None:
        trace = RunTrace()
    evaluations = 0
    trace.record(0, evaluations, evaluator(dist.mu[None, :])[0], spread_max(dist))
    for iteration in range(1, config.max_iterations + 1):
        if spread_max(dist) <= config.stop_threshold:
            break
        batch = sample_walkers(dist, config.population, rng)
        batch.fitnesses = evaluator(batch.points)
        dist = step(dist, batch, config)
        evaluations += config.population
        trace.record(iteration, evaluations, evaluator(dist.mu[None, :])[0], spread_max(dist))
        if callback is not None:
            callback(iteration, dist)
    return dist.mu, trace
