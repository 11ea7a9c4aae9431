"""Slot-synchronous DCF simulator for full-buffer uplink stations sharing one AP.

Every contention round, stations count their backoff down through idle slots.
A sole transmitter's frame succeeds with the reference PHY success
probability at its instantaneous (faded) SNR. Two or more transmitters collide
and all of them fail. There is no capture, no RTS/CTS and no hidden terminal.
FTM probes happen out of band: they cost no airtime and are only counted.

Mobility is evaluated lazily at event times from closed-form trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .channel import (ChannelParams, FadingModel, SuccessModelParams, reference_phy_params,
                      sample_faded_snr, snr_from_distance, success_probability)
from .core import N_MCS, PhyConfig, frame_airtime
from .ftm import sample_measurement
from .rate_control import RateController, TxFeedback, make_controller

# RNG stream ids; mobility and ranging depend only on (seed, station) so every
# policy sees the same trajectories and range readings.
MOBILITY, RANGING, MAC, CHANNEL, CONTROLLER = range(1, 6)

SCENARIOS = ("EqualDistance", "MovingStation", "RwpmField")


def stream(seed: int, kind: int, station: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, kind, station])


@dataclass(frozen=True)
class MacParams:
    """802.11 OFDM (5 GHz) DCF timing; durations in microseconds."""

    cw_min: int = 15
    cw_max: int = 1023
    slot: float = 9.0
    sifs: float = 16.0
    difs: float = 34.0
    ack_duration: float = 44.0  # 14 B ACK at 6 Mbit/s
    ack_timeout: float = 50.0  # SIFS + slot + PHY RX start delay
    max_retries: int = 7
    ampdu_frames: int = 4

    def __post_init__(self):
        if not 0 < self.cw_min <= self.cw_max:
            raise ValueError("need 0 < cw_min <= cw_max")
        if min(self.slot, self.sifs, self.difs, self.ack_duration, self.ack_timeout) <= 0:
            raise ValueError("MAC durations must be positive")
        if self.max_retries < 0 or self.ampdu_frames < 1:
            raise ValueError("max_retries must be >= 0 and ampdu_frames >= 1")

    def cw(self, stage: int) -> int:
        return min((self.cw_min + 1) * 2**stage - 1, self.cw_max)


# Backoff and contention -------------------------------------------------------

@dataclass
class Backoff:
    stage: int = 0
    counter: int = 0
    retries: int = 0

    def redraw(self, mac: MacParams, rng: np.random.Generator) -> None:
        self.counter = int(rng.integers(mac.cw(self.stage) + 1))

    def resolve(self, success: bool, mac: MacParams, rng: np.random.Generator) -> None:
        if success:
            self.stage = self.retries = 0
        else:
            self.retries += 1
            if self.retries > mac.max_retries:  # frame dropped
                self.stage = self.retries = 0
            else:
                self.stage += 1
        self.redraw(mac, rng)


@dataclass(frozen=True)
class RoundOutcome:
    idle_slots: int
    transmitters: tuple
    collision: bool
    success: bool


def contention_round(backoffs: list[Backoff], mac: MacParams, rng: np.random.Generator,
                     transmit: Callable[[tuple], bool] | None = None) -> RoundOutcome:
    """Run one contention round.

    ``transmit`` receives the transmitting station indices and returns whether
    a sole transmitter's frame got through (it is consulted for collisions
    too, so the caller can account for every attempt). Collisions always fail.
    """
    idle = min(b.counter for b in backoffs)
    for b in backoffs:
        b.counter -= idle
    tx = tuple(i for i, b in enumerate(backoffs) if b.counter == 0)
    ok = transmit(tx) if transmit is not None else True
    ok = bool(ok) and len(tx) == 1
    for i in tx:
        backoffs[i].resolve(ok, mac, rng)
    return RoundOutcome(idle, tx, len(tx) > 1, ok)


def collision_probability(n_stations: int, cw: int) -> float:
    """P(at least two of ``n`` uniform draws on 0..cw-1 share the minimum), by enumeration of the minimum."""
    total = 0.0
    for m in range(cw):
        above = (cw - m - 1) / cw  # P(draw > m)
        at_least = (cw - m) / cw  # P(draw >= m)
        # P(min == m) - P(exactly one draw == m and the rest > m)
        p_min = at_least**n_stations - above**n_stations
        p_single = n_stations * (1 / cw) * above ** (n_stations - 1)
        total += p_min - p_single
    return total


# Mobility --------------------------------------------------------------------

@dataclass
class Static:
    rho: float

    def advance(self, dt: float, rng=None) -> None:
        pass

    @property
    def distance(self) -> float:
        return self.rho


@dataclass
class ConstantVelocity:
    velocity: float
    rho: float = 0.0

    def advance(self, dt: float, rng=None) -> None:
        self.rho += self.velocity * dt

    @property
    def distance(self) -> float:
        return self.rho


@dataclass(frozen=True)
class RwpmParams:
    area: float = 40.0  # square side, m; AP in the centre
    max_speed: float = 1.4
    max_pause: float = 20.0

    def __post_init__(self):
        if self.area <= 0 or self.max_speed < 0 or self.max_pause < 0:
            raise ValueError("invalid random waypoint parameters")


@dataclass
class RandomWaypoint:
    params: RwpmParams
    x: float
    y: float
    target: tuple = (0.0, 0.0)
    speed: float = 0.0
    pause_left: float = 0.0

    @classmethod
    def start(cls, params: RwpmParams, rng: np.random.Generator) -> "RandomWaypoint":
        x, y = rng.uniform(0.0, params.area, 2)
        mob = cls(params, float(x), float(y))
        mob._new_leg(rng)
        return mob

    def _new_leg(self, rng: np.random.Generator) -> None:
        tx, ty = rng.uniform(0.0, self.params.area, 2)
        self.target = (float(tx), float(ty))
        self.speed = float(rng.uniform(0.0, self.params.max_speed)) if self.params.max_speed > 0 else 0.0

    def advance(self, dt: float, rng: np.random.Generator) -> None:
        while dt > 0:
            if self.pause_left > 0:
                used = min(dt, self.pause_left)
                self.pause_left -= used
                dt -= used
                if self.pause_left <= 0:
                    self._new_leg(rng)
                continue
            if self.speed <= 0:
                return
            dx, dy = self.target[0] - self.x, self.target[1] - self.y
            gap = math.hypot(dx, dy)
            if self.speed * dt < gap:
                f = self.speed * dt / gap
                self.x += f * dx
                self.y += f * dy
                return
            dt -= gap / self.speed
            self.x, self.y = self.target
            self.pause_left = float(rng.uniform(0.0, self.params.max_pause))
            if self.pause_left <= 0:
                self._new_leg(rng)

    @property
    def distance(self) -> float:
        c = self.params.area / 2
        return math.hypot(self.x - c, self.y - c)


def mobility_step(mobility, dt: float, rng: np.random.Generator | None = None):
    """Advance a mobility model by ``dt`` seconds and return it."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    mobility.advance(dt, rng)
    return mobility


# Frame outcomes --------------------------------------------------------------

def frame_outcome(distance: float, mcs: int, rng: np.random.Generator, *,
                  channel: ChannelParams = ChannelParams(), fading: FadingModel = FadingModel(),
                  phy_model: SuccessModelParams | None = None) -> bool:
    """Draw success of a collision-free transmission at the true distance."""
    snr = sample_faded_snr(float(snr_from_distance(distance, channel)), fading, rng)
    return rng.random() < success_probability(snr, mcs, phy_model or reference_phy_params())


# Metrics ---------------------------------------------------------------------

@dataclass
class StationMetrics:
    attempted: int = 0
    successes: int = 0
    collisions: int = 0
    channel_losses: int = 0
    delivered_bits: int = 0
    ftm_probes: int = 0
    mcs_hist: list = field(default_factory=lambda: [0] * N_MCS)

    @property
    def mcs_mode(self) -> int:
        """Most used MCS in the interval (lowest on ties), -1 when idle."""
        if self.attempted == 0:
            return -1
        return max(range(N_MCS), key=lambda m: (self.mcs_hist[m], -m))


@dataclass(frozen=True)
class MetricsRecord:
    """One reporting interval: per-station counters."""

    index: int
    start: float
    length: float
    stations: tuple

    def throughput(self, station: int) -> float:
        return self.stations[station].delivered_bits / self.length / 1e6

    @property
    def aggregate_throughput(self) -> float:
        return sum(s.delivered_bits for s in self.stations) / self.length / 1e6


# Simulation ------------------------------------------------------------------

@dataclass
class StationState:
    id: int
    mobility: object
    controller: RateController
    backoff: Backoff
    mobility_rng: np.random.Generator
    ranging_rng: np.random.Generator
    mobility_time: float = 0.0

    def distance_at(self, t: float) -> float:
        if t > self.mobility_time:
            self.mobility.advance(t - self.mobility_time, self.mobility_rng)
            self.mobility_time = t
        return self.mobility.distance


@dataclass(frozen=True)
class RunSetup:
    """Everything one simulation run needs besides the seed."""

    scenario: str = "EqualDistance"
    n_stations: int = 1
    policy: str = "Oracle"
    duration: float = 60.0
    distance: float = 20.0
    velocity: float = 1.0
    rwpm: RwpmParams = RwpmParams()
    phy: PhyConfig = PhyConfig()
    mac: MacParams = MacParams()
    channel: ChannelParams = ChannelParams()
    fading: FadingModel = FadingModel()
    noise: object = None
    ftm_period: float = 0.5
    interval: float = 1.0
    controller_params: object = None
    success_model: SuccessModelParams | None = None
    phy_model: SuccessModelParams | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.n_stations < 1 or self.duration <= 0 or self.interval <= 0 or self.ftm_period <= 0:
            raise ValueError("n_stations, duration, interval and ftm_period must be positive")
        if self.scenario == "EqualDistance" and self.distance < 0:
            raise ValueError("distance must be non-negative")
        if self.scenario == "MovingStation" and self.velocity < 0:
            raise ValueError("velocity must be non-negative")


class Simulation:
    def __init__(self, setup: RunSetup, seed: int, *, invert_feedback: bool = False,
                 decision_trace: list | None = None):
        from .ftm import MeasurementNoiseModel
        from .rate_control import ControllerParams

        self.setup = s = setup
        self.seed = seed
        self.invert_feedback = invert_feedback
        self.trace = decision_trace
        self.noise = s.noise or MeasurementNoiseModel()
        self.phy_model = s.phy_model or reference_phy_params()
        self.mac_rng = stream(seed, MAC)
        self.channel_rng = stream(seed, CHANNEL)
        params = s.controller_params or ControllerParams()
        self.airtime = [frame_airtime(s.phy.payload_size, s.mac.ampdu_frames, m, s.phy) for m in range(N_MCS)]
        self.bits_per_frame = 8 * s.phy.payload_size * s.mac.ampdu_frames
        self.stations: list[StationState] = []
        for i in range(s.n_stations):
            mob_rng = stream(seed, MOBILITY, i)
            if s.scenario == "EqualDistance":
                mob = Static(s.distance)
            elif s.scenario == "MovingStation":
                mob = ConstantVelocity(s.velocity)
            else:
                mob = RandomWaypoint.start(s.rwpm, mob_rng)
            ctrl = make_controller(s.policy, s.phy, stream(seed, CONTROLLER, i), channel=s.channel,
                                   success_model=s.success_model, noise=self.noise, params=params,
                                   ftm_period=s.ftm_period)
            st = StationState(i, mob, ctrl, Backoff(), mob_rng, stream(seed, RANGING, i))
            st.backoff.redraw(s.mac, self.mac_rng)
            self.stations.append(st)

    def run(self) -> Iterator[MetricsRecord]:
        s, mac = self.setup, self.setup.mac
        n_intervals = math.ceil(s.duration / s.interval - 1e-9)
        current = 0
        metrics = [StationMetrics() for _ in self.stations]
        backoffs = [st.backoff for st in self.stations]
        next_probe = 0.0
        t = 0.0
        us = 1e-6

        def flush_until(idx):
            nonlocal current, metrics
            while current < min(idx, n_intervals):
                yield MetricsRecord(current, current * s.interval, s.interval, tuple(metrics))
                metrics = [StationMetrics() for _ in self.stations]
                current += 1

        while True:
            t_tx = t + (mac.difs + min(b.counter for b in backoffs) * mac.slot) * us
            # out-of-band range measurements due before this transmission
            while next_probe <= t_tx and next_probe < s.duration:
                yield from flush_until(int(next_probe / s.interval))
                for st, m in zip(self.stations, metrics):
                    z = sample_measurement(max(st.distance_at(next_probe), 0.0), self.noise, st.ranging_rng)
                    st.controller.on_measurement(z, next_probe)
                    m.ftm_probes += 1
                next_probe += s.ftm_period
            if t_tx >= s.duration:
                break
            yield from flush_until(int(t_tx / s.interval))
            t = self._round(t_tx, backoffs, metrics)
        yield from flush_until(n_intervals)

    def _round(self, t_tx: float, backoffs, metrics) -> float:
        s, mac = self.setup, self.setup.mac
        picked = {}

        def transmit(tx):
            for i in tx:
                st = self.stations[i]
                d = st.distance_at(t_tx)
                mcs = st.controller.select(t_tx, true_distance=d, retry=st.backoff.retries)
                picked[i] = (mcs, d)
                if self.trace is not None:
                    self.trace.append((t_tx, i, mcs))
            if len(tx) > 1:
                return False
            mcs, d = picked[tx[0]]
            return frame_outcome(d, mcs, self.channel_rng, channel=s.channel, fading=s.fading,
                                 phy_model=self.phy_model)

        outcome = contention_round(backoffs, mac, self.mac_rng, transmit)
        busy = max(self.airtime[picked[i][0]] for i in outcome.transmitters)
        busy += mac.sifs + mac.ack_duration if outcome.success else mac.ack_timeout
        t_end = t_tx + busy * 1e-6
        for i in outcome.transmitters:
            mcs = picked[i][0]
            m = metrics[i]
            m.attempted += 1
            m.mcs_hist[mcs] += 1
            if outcome.success:
                m.successes += 1
                m.delivered_bits += self.bits_per_frame
            elif outcome.collision:
                m.collisions += 1
            else:
                m.channel_losses += 1
            self.stations[i].controller.on_feedback(
                TxFeedback(mcs, outcome.success != self.invert_feedback, t_end))
        return t_end


def run_scenario(setup: RunSetup, seed: int, **kwargs) -> Iterator[MetricsRecord]:
    """Deterministic stream of per-interval metrics for one (setup, seed)."""
    return Simulation(setup, seed, **kwargs).run()
