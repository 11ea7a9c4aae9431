"""Distance filters over the latent state (radial velocity, distance).

State vectors are ordered ``(nu, rho)``: velocity first, distance second.

The dynamics are the exact discretization of

    d nu  = sigma_nu dW1
    d rho = nu dt + sigma_rho dW2

so over an interval tau the state moves by ``F = [[1, 0], [tau, 1]]`` plus
Gaussian noise with covariance :func:`transition_covariance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .ftm import MeasurementNoiseModel

NU, RHO = 0, 1


class FilterError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class DynamicsParams:
    sigma_nu: float = 0.5  # m/s per sqrt(s)
    sigma_rho: float = 0.1  # m per sqrt(s)

    def __post_init__(self):
        if self.sigma_nu < 0 or self.sigma_rho < 0:
            raise ValueError("dynamics noise scales must be non-negative")


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def rho(self) -> float:
        return float(self.mean[RHO])

    @property
    def rho_var(self) -> float:
        return float(self.cov[RHO, RHO])


@dataclass(frozen=True)
class ParticlePopulation:
    particles: np.ndarray  # (N, 2)
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        if len(self.particles) < 2:
            raise ValueError("need at least two particles")

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.weights)
        return c / c[-1]

    @cached_property
    def columns(self) -> tuple[np.ndarray, np.ndarray]:
        return np.ascontiguousarray(self.particles[:, NU]), np.ascontiguousarray(self.particles[:, RHO])

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    @property
    def rho_mean(self) -> float:
        return float(self.weights @ self.particles[:, RHO])

    @property
    def rho_var(self) -> float:
        d = self.particles[:, RHO] - self.rho_mean
        return float(self.weights @ (d * d))


@dataclass(frozen=True)
class HoltState:
    """Holt linear-trend smoother.

    ``trend`` is the change per sampling step; ``step`` (seconds) converts a
    forecast horizon in seconds into steps.
    """

    level: float
    trend: float
    alpha: float = 0.5
    beta: float = 0.5
    step: float = 1.0

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
        if self.step <= 0:
            raise ValueError("step must be positive")


def transition_covariance(tau: float, d: DynamicsParams) -> np.ndarray:
    if tau < 0:
        raise ValueError(f"negative time step {tau}")
    sn2, sr2 = d.sigma_nu**2, d.sigma_rho**2
    c = sn2 * tau**2 / 2
    return np.array([[sn2 * tau, c], [c, tau * (sn2 * tau**2 / 3 + sr2)]])


def transition_matrix(tau: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [tau, 1.0]])


def _chol2(q: np.ndarray) -> np.ndarray:
    # lower-triangular factor tolerating a singular (e.g. sigma_nu = 0) matrix
    l00 = math.sqrt(max(q[0, 0], 0.0))
    l10 = q[1, 0] / l00 if l00 > 0 else 0.0
    l11 = math.sqrt(max(q[1, 1] - l10 * l10, 0.0))
    return np.array([[l00, 0.0], [l10, l11]])


# Kalman filter ---------------------------------------------------------------

def kf_init(z: float, measurement_sigma: float, velocity_var: float = 1.0) -> GaussianState:
    return GaussianState(np.array([0.0, z]), np.diag([velocity_var, measurement_sigma**2]))


def kf_predict(state: GaussianState, tau: float, d: DynamicsParams) -> GaussianState:
    f = transition_matrix(tau)
    cov = f @ state.cov @ f.T + transition_covariance(tau, d)
    return GaussianState(f @ state.mean, 0.5 * (cov + cov.T))


def kf_update(state: GaussianState, z: float, measurement_sigma: float, offset: float = 0.0) -> GaussianState:
    """Condition on a range reading ``z = rho + offset + N(0, measurement_sigma^2)``."""
    if measurement_sigma <= 0:
        raise ValueError("measurement_sigma must be positive")
    p = state.cov
    s = p[RHO, RHO] + measurement_sigma**2
    k = p[:, RHO] / s
    mean = state.mean + k * (z - offset - state.mean[RHO])
    # Joseph form keeps the covariance symmetric PSD
    a = np.eye(2) - np.outer(k, [0.0, 1.0])
    cov = a @ p @ a.T + measurement_sigma**2 * np.outer(k, k)
    return GaussianState(mean, 0.5 * (cov + cov.T))


# Particle filter -------------------------------------------------------------

def pf_init(state: GaussianState, n: int, rng: np.random.Generator) -> ParticlePopulation:
    """Draw a population from a Gaussian prior."""
    noise = rng.standard_normal((n, 2)) @ _chol2(state.cov).T
    return ParticlePopulation(state.mean + noise, np.full(n, 1.0 / n))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right")


def propagate(particles: np.ndarray, tau: float, d: DynamicsParams, rng: np.random.Generator) -> np.ndarray:
    moved = particles @ transition_matrix(tau).T
    l = _chol2(transition_covariance(tau, d))
    return moved + rng.standard_normal(particles.shape) @ l.T


def pf_step(pop: ParticlePopulation, tau: float, d: DynamicsParams, z: float,
            noise: MeasurementNoiseModel, rng: np.random.Generator,
            resample_below: float = 0.5) -> ParticlePopulation:
    """Propagate, reweight by the range likelihood, resample when ESS < resample_below * N."""
    particles = propagate(pop.particles, tau, d, rng)
    logw = np.log(pop.weights) + noise.logpdf(z - particles[:, RHO])
    top = np.max(logw)
    if not np.isfinite(top):
        raise FilterError(
            "all particle weights vanished; reset the filter to its prior",
            {"z": z, "rho_min": float(particles[:, RHO].min()), "rho_max": float(particles[:, RHO].max())},
        )
    w = np.exp(logw - top)
    w /= w.sum()
    n = len(w)
    if 1.0 / np.sum(w**2) < resample_below * n:
        idx = systematic_resample(w, rng)
        return ParticlePopulation(particles[idx], np.full(n, 1.0 / n))
    return ParticlePopulation(particles, w)


# Exponential smoothing --------------------------------------------------------

def es_init(z: float, alpha: float = 0.5, beta: float = 0.5, step: float = 1.0) -> HoltState:
    return HoltState(level=z, trend=0.0, alpha=alpha, beta=beta, step=step)


def es_update(state: HoltState, z: float) -> HoltState:
    a, b = state.alpha, state.beta
    level = a * z + (1 - a) * (state.level + state.trend)
    trend = b * (level - state.level) + (1 - b) * state.trend
    return replace(state, level=level, trend=trend)


# Prediction ------------------------------------------------------------------

def predict_distance(state, tau: float, n_samples: int, rng: np.random.Generator,
                     d: DynamicsParams | None = None) -> np.ndarray:
    """Samples of the distance ``tau`` seconds after the last filter update.

    Exponential smoothing has no predictive distribution, so its point forecast
    is repeated ``n_samples`` times.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if isinstance(state, HoltState):
        return np.full(n_samples, state.level + tau / state.step * state.trend)
    d = d or DynamicsParams()
    # distance-marginal transition noise variance
    q = tau * (d.sigma_nu**2 * tau * tau / 3 + d.sigma_rho**2)
    if isinstance(state, GaussianState):
        mean = state.mean[RHO] + tau * state.mean[NU]
        p = state.cov
        var = p[RHO, RHO] + 2 * tau * p[NU, RHO] + tau * tau * p[NU, NU] + q
        return mean + math.sqrt(max(var, 0.0)) * rng.standard_normal(n_samples)
    if isinstance(state, ParticlePopulation):
        # resample first, then propagate only the chosen particles
        idx = np.searchsorted(state.cdf, rng.random(n_samples), side="right")
        nu, rho = state.columns
        out = rho[idx] + tau * nu[idx]
        out += math.sqrt(q) * rng.standard_normal(n_samples)
        return out
    raise TypeError(f"unsupported filter state {type(state).__name__}")
