"""Fine timing measurement: RTT arithmetic, ranging noise and burst airtime."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class MeasurementRejected(ValueError):
    pass


@dataclass(frozen=True)
class FtmTimestamps:
    """Timestamps of one FTM/ACK exchange, in nanoseconds.

    t1: AP sends the FTM frame, t2: station receives it,
    t3: station sends the ACK, t4: AP receives the ACK.
    """

    t1: float
    t2: float
    t3: float
    t4: float


def compute_rtt(ts: FtmTimestamps) -> float:
    """Round-trip time with the responder turnaround removed (ns)."""
    flight = ts.t4 - ts.t1
    turnaround = ts.t3 - ts.t2
    if flight < 0 or turnaround < 0 or flight < turnaround:
        raise MeasurementRejected(f"inconsistent FTM timestamps {ts}")
    return flight - turnaround


def rtt_to_distance(rtt: float) -> float:
    """One-way distance in meters for an RTT given in nanoseconds."""
    if rtt < 0:
        raise ValueError(f"negative RTT {rtt}")
    return rtt * 1e-9 / 2 * SPEED_OF_LIGHT


def distance_to_rtt(distance: float) -> float:
    return 2 * distance / SPEED_OF_LIGHT * 1e9


@dataclass(frozen=True)
class MeasurementNoiseModel:
    """Additive ranging error.

    ``kind="gaussian"``: N(0, sigma^2).
    ``kind="emg"``: N(mu, sigma^2) plus an independent Exponential(rate) delay,
    i.e. an exponentially modified Gaussian with mean ``mu + 1/rate``.

    The EMG defaults are placeholders: the measured parameters behind the
    ranging error model are not published.
    """

    kind: str = "gaussian"
    sigma: float = 1.0
    mu: float = 0.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "emg"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0 or (self.kind == "emg" and self.sigma == 0):
            raise ValueError("sigma must be positive")
        if self.kind == "emg" and self.rate <= 0:
            raise ValueError("rate must be positive")

    @classmethod
    def emg(cls, mu: float = 0.0, sigma: float = 0.5, rate: float = 1.0) -> "MeasurementNoiseModel":
        return cls(kind="emg", sigma=sigma, mu=mu, rate=rate)

    @property
    def mean(self) -> float:
        return self.mu + 1.0 / self.rate if self.kind == "emg" else 0.0

    @property
    def variance(self) -> float:
        if self.kind == "emg":
            return self.sigma**2 + 1.0 / self.rate**2
        return self.sigma**2

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "gaussian":
            if self.sigma == 0:
                return 0.0 if size is None else np.zeros(size)
            return rng.normal(0.0, self.sigma, size)
        return rng.normal(self.mu, self.sigma, size) + rng.exponential(1.0 / self.rate, size)

    def logpdf(self, err):
        """Log density of the error ``measurement - true distance``."""
        if self.kind == "gaussian":
            if self.sigma == 0:
                raise ValueError("degenerate noise model has no density")
            return stats.norm.logpdf(err, 0.0, self.sigma)
        return stats.exponnorm.logpdf(err, 1.0 / (self.sigma * self.rate), loc=self.mu, scale=self.sigma)


def sample_measurement(true_distance: float, noise: MeasurementNoiseModel, rng: np.random.Generator) -> float:
    """Noisy FTM range reading. Negative readings are returned as-is."""
    if true_distance < 0:
        raise ValueError("true distance must be non-negative")
    return float(true_distance + noise.sample(rng))


# Burst airtime ---------------------------------------------------------------

_LEGACY_PREAMBLE_US = 20.0  # L-STF + L-LTF + L-SIG
_LEGACY_SYMBOL_US = 4.0
_HE_PREAMBLE_US = 44.0  # legacy part + RL-SIG + HE-SIG-A + HE-STF + one 2x HE-LTF
_HE_SYMBOL_US = 13.6  # 12.8 us + 0.8 us GI
_HE_MCS11_20MHZ_DBPS = 1950  # 234 data subcarriers * 10 bits * 5/6
_SERVICE_TAIL_BITS = 16 + 6


def legacy_ofdm_airtime(length: int, rate_mbps: float) -> float:
    """Duration of an 802.11a/g OFDM frame of ``length`` bytes."""
    dbps = 4 * rate_mbps
    n_sym = math.ceil((_SERVICE_TAIL_BITS + 8 * length) / dbps)
    return _LEGACY_PREAMBLE_US + _LEGACY_SYMBOL_US * n_sym


def he_su_airtime(length: int) -> float:
    """Duration of an HE SU frame at MCS 11, 20 MHz, 0.8 us GI, rounded up to 1 us."""
    n_sym = math.ceil((_SERVICE_TAIL_BITS + 8 * length) / _HE_MCS11_20MHZ_DBPS)
    return float(math.ceil(_HE_PREAMBLE_US + _HE_SYMBOL_US * n_sym))


# control_rate -> (frame airtime function, ACK rate in Mbit/s)
_CONTROL_RATES = {
    "legacy_6Mbps": (lambda n: legacy_ofdm_airtime(n, 6.0), 6.0),
    "ax_143_4Mbps": (he_su_airtime, 12.0),
}


@dataclass(frozen=True)
class FtmBurstSpec:
    """Shortest FTM burst: request, two FTM frames, three ACKs, three SIFS."""

    frame_lengths: dict = field(
        default_factory=lambda: {"FtmRequest": 42, "Ftm1": 66, "Ftm2": 48, "Ack": 14}
    )
    sifs: float = 16.0
    control_rate: str = "legacy_6Mbps"

    def __post_init__(self):
        if self.control_rate not in _CONTROL_RATES:
            raise ValueError(f"unknown control rate {self.control_rate!r}")


def burst_components(spec: FtmBurstSpec) -> dict[str, float]:
    """Per-frame airtime (us) of each frame type in the burst."""
    frame_time, ack_rate = _CONTROL_RATES[spec.control_rate]
    out = {name: frame_time(n) for name, n in spec.frame_lengths.items() if name != "Ack"}
    out["Ack"] = legacy_ofdm_airtime(spec.frame_lengths["Ack"], ack_rate)
    return out


def burst_airtime(spec: FtmBurstSpec | None = None) -> float:
    spec = spec or FtmBurstSpec()
    c = burst_components(spec)
    return c["FtmRequest"] + c["Ftm1"] + c["Ftm2"] + 3 * c["Ack"] + 3 * spec.sifs
