"""MCS selection policies.

FTMRate picks the MCS maximizing the expected rate ``rate[mcs] * P(success)``
averaged over posterior samples of the distance to the AP. It never looks at
transmission outcomes, which is what makes it immune to collisions. The
baselines (Thompson sampling, a Minstrel-style sampler) learn only from
ACK feedback; the oracle sees the true distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import filters as flt
from .channel import (ChannelParams, SuccessModelParams, default_success_model, snr_from_distance,
                      success_matrix, _sas_cdf)
from .core import N_MCS, PhyConfig
from .ftm import MeasurementNoiseModel

POLICIES = ("FtmRateES", "FtmRateKF", "FtmRatePF", "Oracle", "ThompsonSampling", "MinstrelLike")
FTMRATE_POLICIES = POLICIES[:3]


@dataclass(frozen=True)
class TxFeedback:
    mcs_used: int
    success: bool
    timestamp: float


@dataclass(frozen=True)
class ControllerParams:
    """Hyperparameters for every policy; each controller reads its own subset."""

    mc_samples: int = 256
    n_particles: int = 1024
    alpha: float = 0.5
    beta: float = 0.5
    velocity_var: float = 1.0
    ts_decay: float = 1.0  # 1/s, exponential forgetting of Thompson sampling counts
    minstrel_ewma: float = 0.25
    minstrel_interval: float = 0.1  # s
    minstrel_lookaround: float = 0.1
    dynamics: flt.DynamicsParams = field(default_factory=flt.DynamicsParams)

    def __post_init__(self):
        if self.mc_samples < 1 or self.n_particles < 2:
            raise ValueError("mc_samples must be >= 1 and n_particles >= 2")
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
        if self.ts_decay < 0:
            raise ValueError("ts_decay must be non-negative")
        if not 0 < self.minstrel_ewma <= 1 or self.minstrel_interval <= 0:
            raise ValueError("invalid Minstrel statistics settings")
        if not 0 <= self.minstrel_lookaround < 1:
            raise ValueError("minstrel_lookaround must lie in [0, 1)")


def expected_rates(distance_samples, theta_c: ChannelParams, theta_s: SuccessModelParams, rates) -> np.ndarray:
    """Monte-Carlo estimate of ``E[rate * P(success | snr(rho))]`` for every MCS."""
    snr = snr_from_distance(np.asarray(distance_samples, dtype=float), theta_c)
    return np.asarray(rates, dtype=float) * success_matrix(snr, theta_s).mean(axis=1)


def ftmrate_select_mcs(distance_samples, theta_c: ChannelParams, theta_s: SuccessModelParams, rates) -> int:
    """Expected-rate argmax; ties go to the lower MCS.

    Success probability is non-decreasing in SNR, so each MCS's expected rate
    lies between ``rate * P(success)`` at the smallest and at the largest
    sampled SNR. Only MCSs whose upper bound reaches the best lower bound are
    averaged over all samples; the answer equals the full argmax.
    """
    rho = np.asarray(distance_samples, dtype=float).ravel()
    if rho.size == 0:
        raise ValueError("need at least one distance sample")
    rates = np.asarray(rates, dtype=float)
    snr = snr_from_distance(rho, theta_c)
    if rho.size == 1:
        return int(np.argmax(rates * success_matrix(snr, theta_s)[:, 0]))
    bounds = rates[:, None] * success_matrix(np.array([snr.min(), snr.max()]), theta_s)
    cand = np.flatnonzero(bounds[:, 1] >= bounds[:, 0].max() * (1 - 1e-9))
    if cand.size == 1:
        return int(cand[0])
    loc, sc, sk, tw = (a[cand] for a in theta_s._arrays)
    score = rates[cand] * _sas_cdf(snr[None, :], loc, sc, sk, tw).mean(axis=1)
    return int(cand[np.argmax(score)])


class RateController:
    """One station's rate selection state.

    ``select`` may receive the true distance (only the oracle uses it) and the
    retry index of the frame being sent (only the Minstrel-style baseline uses it).
    """

    policy = "base"

    def __init__(self, phy: PhyConfig, rng: np.random.Generator):
        self.phy = phy
        self.rates = np.array(phy.rates)
        self.rng = rng

    def on_measurement(self, rho_rtt: float, t: float) -> None:
        """Range readings are ignored by policies that do not use FTM."""

    def on_feedback(self, fb: TxFeedback) -> None:
        """ACK feedback is ignored by policies that do not learn from it."""

    def select(self, t: float, true_distance: float | None = None, retry: int = 0,
               rng: np.random.Generator | None = None) -> int:
        raise NotImplementedError


class OutOfOrderMeasurement(ValueError):
    pass


class FtmRate(RateController):
    def __init__(self, kind: str, phy: PhyConfig, rng: np.random.Generator, *,
                 channel: ChannelParams = ChannelParams(),
                 success_model: SuccessModelParams | None = None,
                 noise: MeasurementNoiseModel = MeasurementNoiseModel(),
                 params: ControllerParams = ControllerParams(),
                 ftm_period: float = 0.5):
        super().__init__(phy, rng)
        if kind not in ("es", "kf", "pf"):
            raise ValueError(f"unknown filter {kind!r}")
        if kind == "es" and not ftm_period > 0:
            raise ValueError("exponential smoothing needs a fixed, positive FTM period")
        self.kind = kind
        self.policy = {"es": "FtmRateES", "kf": "FtmRateKF", "pf": "FtmRatePF"}[kind]
        self.channel = channel
        self.success_model = success_model or default_success_model()
        self.noise = noise
        self.params = params
        self.ftm_period = ftm_period
        self.state = None
        self.last_t: float | None = None

    @property
    def initialized(self) -> bool:
        return self.state is not None

    def on_measurement(self, rho_rtt: float, t: float) -> None:
        p, noise = self.params, self.noise
        if self.last_t is not None and t < self.last_t:
            raise OutOfOrderMeasurement(f"measurement at t={t} precedes last one at t={self.last_t}")
        sigma = math.sqrt(noise.variance)
        if self.state is None:
            if self.kind == "es":
                self.state = flt.es_init(rho_rtt, p.alpha, p.beta, self.ftm_period)
            else:
                prior = flt.kf_init(rho_rtt - noise.mean, sigma, p.velocity_var)
                self.state = prior if self.kind == "kf" else flt.pf_init(prior, p.n_particles, self.rng)
        else:
            tau = t - self.last_t
            if self.kind == "es":
                self.state = flt.es_update(self.state, rho_rtt)
            elif self.kind == "kf":
                pred = flt.kf_predict(self.state, tau, p.dynamics)
                # Gaussian moment match for non-Gaussian ranging noise
                self.state = flt.kf_update(pred, rho_rtt, sigma, offset=noise.mean)
            else:
                try:
                    self.state = flt.pf_step(self.state, tau, p.dynamics, rho_rtt, noise, self.rng)
                except flt.FilterError:
                    prior = flt.kf_init(rho_rtt - noise.mean, sigma, p.velocity_var)
                    self.state = flt.pf_init(prior, p.n_particles, self.rng)
        self.last_t = t

    def distance_samples(self, t: float, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.state is None:
            raise RuntimeError("FTMRate controller has no distance measurement yet")
        n = 1 if self.kind == "es" else self.params.mc_samples
        return flt.predict_distance(self.state, max(t - self.last_t, 0.0), n, rng or self.rng, self.params.dynamics)

    def select(self, t, true_distance=None, retry=0, rng=None) -> int:
        return ftmrate_select_mcs(self.distance_samples(t, rng), self.channel, self.success_model, self.rates)


class Oracle(RateController):
    """Expected-rate argmax at the true distance (fading ignored)."""

    policy = "Oracle"

    def __init__(self, phy: PhyConfig, rng: np.random.Generator, *,
                 channel: ChannelParams = ChannelParams(), success_model: SuccessModelParams | None = None):
        super().__init__(phy, rng)
        model = success_model or default_success_model()
        self._best = lru_cache(maxsize=4096)(
            lambda rho: ftmrate_select_mcs([rho], channel, model, self.rates))

    def select(self, t, true_distance=None, retry=0, rng=None) -> int:
        if true_distance is None:
            raise ValueError("the oracle needs the true distance")
        return self._best(float(true_distance))


class ThompsonSampling(RateController):
    """Beta-Bernoulli Thompson sampling per MCS with exponentially forgotten counts."""

    policy = "ThompsonSampling"

    def __init__(self, phy: PhyConfig, rng: np.random.Generator, *, decay: float = 1.0):
        super().__init__(phy, rng)
        self.decay = decay
        self.successes = np.zeros(N_MCS)
        self.failures = np.zeros(N_MCS)
        self.last_t = 0.0

    def _forget(self, t: float) -> float:
        return math.exp(-self.decay * max(t - self.last_t, 0.0))

    def on_feedback(self, fb: TxFeedback) -> None:
        f = self._forget(fb.timestamp)
        self.successes *= f
        self.failures *= f
        self.last_t = max(self.last_t, fb.timestamp)
        if fb.success:
            self.successes[fb.mcs_used] += 1
        else:
            self.failures[fb.mcs_used] += 1

    def select(self, t, true_distance=None, retry=0, rng=None) -> int:
        f = self._forget(t)
        xi = (rng or self.rng).beta(1.0 + f * self.successes, 1.0 + f * self.failures)
        return int(np.argmax(self.rates * xi))


class MinstrelLike(RateController):
    """Simplified Minstrel.

    Success ratios are folded into a per-MCS EWMA every ``interval`` seconds.
    A fixed fraction of first attempts probes a random non-best MCS. Retries
    follow a fallback chain: best throughput, second-best throughput, highest
    success probability, then MCS 0.
    """

    policy = "MinstrelLike"

    def __init__(self, phy: PhyConfig, rng: np.random.Generator, *, ewma: float = 0.25,
                 interval: float = 0.1, lookaround: float = 0.1):
        super().__init__(phy, rng)
        self.ewma, self.interval, self.lookaround = ewma, interval, lookaround
        self.prob = np.full(N_MCS, np.nan)  # nan: never attempted
        self.attempts = np.zeros(N_MCS)
        self.successes = np.zeros(N_MCS)
        self.next_update = interval

    def update_stats(self, t: float) -> None:
        if t < self.next_update:
            return
        tried = self.attempts > 0
        ratio = np.divide(self.successes, self.attempts, out=np.zeros(N_MCS), where=tried)
        fresh = tried & np.isnan(self.prob)
        self.prob[fresh] = ratio[fresh]
        old = tried & ~fresh
        self.prob[old] = (1 - self.ewma) * self.prob[old] + self.ewma * ratio[old]
        self.attempts[:] = 0
        self.successes[:] = 0
        self.next_update += self.interval * (1 + math.floor((t - self.next_update) / self.interval))

    def on_feedback(self, fb: TxFeedback) -> None:
        self.update_stats(fb.timestamp)
        self.attempts[fb.mcs_used] += 1
        self.successes[fb.mcs_used] += fb.success

    def _ranking(self) -> np.ndarray:
        tp = np.where(np.isnan(self.prob), -1.0, self.rates * np.nan_to_num(self.prob))
        return np.lexsort((np.arange(N_MCS), -tp))  # best first, lower MCS on ties

    def select(self, t, true_distance=None, retry=0, rng=None) -> int:
        rng = rng or self.rng
        self.update_stats(t)
        order = self._ranking()
        if retry <= 1:
            best = int(order[0])
            if retry == 0 and rng.random() < self.lookaround:
                probe = int(rng.integers(N_MCS - 1))
                return probe + (probe >= best)
            return best
        if retry <= 3:
            return int(order[1])
        if retry <= 5:
            prob = np.nan_to_num(self.prob, nan=-1.0)
            return int(np.argmax(prob))
        return 0


class FixedMcs(RateController):
    """Always the same MCS; a diagnostic policy for airtime checks."""

    def __init__(self, phy: PhyConfig, rng: np.random.Generator, *, mcs: int):
        super().__init__(phy, rng)
        self.mcs = mcs
        self.policy = f"Fixed{mcs}"

    def select(self, t, true_distance=None, retry=0, rng=None) -> int:
        return self.mcs


def make_controller(policy: str, phy: PhyConfig, rng: np.random.Generator, *,
                    channel: ChannelParams = ChannelParams(),
                    success_model: SuccessModelParams | None = None,
                    noise: MeasurementNoiseModel = MeasurementNoiseModel(),
                    params: ControllerParams = ControllerParams(),
                    ftm_period: float = 0.5) -> RateController:
    if policy in FTMRATE_POLICIES:
        kind = policy[len("FtmRate"):].lower()
        return FtmRate(kind, phy, rng, channel=channel, success_model=success_model, noise=noise,
                       params=params, ftm_period=ftm_period)
    if policy == "Oracle":
        return Oracle(phy, rng, channel=channel, success_model=success_model)
    if policy == "ThompsonSampling":
        return ThompsonSampling(phy, rng, decay=params.ts_decay)
    if policy == "MinstrelLike":
        return MinstrelLike(phy, rng, ewma=params.minstrel_ewma, interval=params.minstrel_interval,
                            lookaround=params.minstrel_lookaround)
    if policy.startswith("Fixed") and policy[5:].isdigit() and int(policy[5:]) < N_MCS:
        return FixedMcs(phy, rng, mcs=int(policy[5:]))
    raise ValueError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")
