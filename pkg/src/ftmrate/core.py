"""IEEE 802.11ax single-stream rate table and frame airtime arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

CHANNEL_WIDTHS = (20, 40, 80, 160)
GUARD_INTERVALS = (3.2, 1.6, 0.8)
N_MCS = 12


class DomainError(ValueError):
    """Raised for arguments outside the domain of a rate-table lookup."""


@dataclass(frozen=True)
class McsEntry:
    mcs_index: int
    modulation: str
    coding_rate: Fraction
    data_rate: dict  # (width MHz, GI us) -> Mbit/s


# Columns ordered as (20, 40, 80, 160) MHz x (3.2, 1.6, 0.8) us GI.
_TABLE = [
    (0, "BPSK", "1/2", (7.3, 8.1, 8.6, 14.6, 16.3, 17.2, 30.6, 34.0, 36.0, 61.3, 68.1, 72.1)),
    (1, "QPSK", "1/2", (14.6, 16.3, 17.2, 29.3, 32.5, 34.4, 61.3, 68.1, 72.1, 122.5, 136.1, 144.1)),
    (2, "QPSK", "3/4", (21.9, 24.4, 25.8, 43.9, 48.8, 51.6, 91.9, 102.1, 108.1, 183.8, 204.2, 216.2)),
    (3, "16-QAM", "1/2", (29.3, 32.5, 34.4, 58.5, 65.0, 68.8, 122.5, 136.1, 144.1, 245.0, 272.2, 288.2)),
    (4, "16-QAM", "3/4", (43.9, 48.8, 51.6, 87.8, 97.5, 103.2, 183.8, 204.2, 216.2, 367.5, 408.3, 432.4)),
    (5, "64-QAM", "2/3", (58.5, 65.0, 68.8, 117.0, 130.0, 137.6, 245.0, 272.2, 288.2, 490.0, 544.4, 576.5)),
    (6, "64-QAM", "3/4", (65.8, 73.1, 77.4, 131.6, 146.3, 154.9, 275.6, 306.3, 324.4, 551.3, 612.5, 648.5)),
    (7, "64-QAM", "5/6", (73.1, 81.3, 86.0, 146.3, 162.5, 172.1, 306.3, 340.3, 360.3, 612.5, 680.6, 720.6)),
    (8, "256-QAM", "3/4", (87.8, 97.5, 103.2, 175.5, 195.0, 206.5, 367.5, 408.3, 432.4, 735.0, 816.7, 864.7)),
    (9, "256-QAM", "5/6", (97.5, 108.3, 114.7, 195.0, 216.7, 229.4, 408.3, 453.7, 480.4, 816.6, 907.4, 960.7)),
    (10, "1024-QAM", "3/4", (109.7, 121.9, 129.0, 219.4, 243.8, 258.1, 459.4, 510.4, 540.4, 918.8, 1020.8, 1080.9)),
    (11, "1024-QAM", "5/6", (121.9, 135.4, 143.4, 243.8, 270.8, 286.8, 510.4, 567.1, 600.5, 1020.8, 1134.2, 1201.0)),
]

_COLUMNS = [(w, gi) for w in CHANNEL_WIDTHS for gi in GUARD_INTERVALS]

MCS_TABLE: tuple[McsEntry, ...] = tuple(
    McsEntry(idx, mod, Fraction(cr), dict(zip(_COLUMNS, rates))) for idx, mod, cr, rates in _TABLE
)


def _check_phy(width, gi):
    if width not in CHANNEL_WIDTHS:
        raise DomainError(f"unsupported channel width {width!r} MHz")
    if gi not in GUARD_INTERVALS:
        raise DomainError(f"unsupported guard interval {gi!r} us")


def mcs_data_rate(mcs: int, width: int = 20, gi: float = 3.2) -> float:
    """Tabulated single-stream data rate in Mbit/s."""
    if not isinstance(mcs, (int,)) or isinstance(mcs, bool) or not 0 <= mcs < N_MCS:
        raise DomainError(f"mcs must be an integer in [0, 11], got {mcs!r}")
    _check_phy(width, gi)
    return MCS_TABLE[mcs].data_rate[(width, gi)]


def rate_column(width: int = 20, gi: float = 3.2) -> tuple[float, ...]:
    """All 12 rates for one (width, GI) column, indexed by MCS."""
    _check_phy(width, gi)
    return tuple(e.data_rate[(width, gi)] for e in MCS_TABLE)


@dataclass(frozen=True)
class PhyOverhead:
    """Fixed per-transmission costs not covered by the rate table.

    The preamble is charged once per PPDU; the MAC overhead (header + FCS +
    A-MPDU delimiter) once per MPDU. Both values are modelling choices and only
    shift absolute throughput.
    """

    preamble_us: float = 44.0
    mpdu_overhead_bytes: int = 40


@dataclass(frozen=True)
class PhyConfig:
    channel_width: int = 20
    guard_interval: float = 3.2
    payload_size: int = 1500
    band: str = "5 GHz"
    spatial_streams: int = field(default=1, init=False)
    overhead: PhyOverhead = PhyOverhead()

    def __post_init__(self):
        _check_phy(self.channel_width, self.guard_interval)
        if self.payload_size <= 0:
            raise DomainError("payload_size must be positive")

    @property
    def rates(self) -> tuple[float, ...]:
        return rate_column(self.channel_width, self.guard_interval)


def frame_airtime(payload: int, n_aggregated: int, mcs: int, phy: PhyConfig | None = None) -> float:
    """Airtime in microseconds of one (possibly aggregated) data PPDU.

    ``preamble + ceil(8 * (payload + mpdu_overhead) * n_aggregated / rate)``
    """
    if payload <= 0:
        raise DomainError("payload must be positive")
    if n_aggregated < 1:
        raise DomainError("n_aggregated must be at least 1")
    phy = phy or PhyConfig()
    rate = mcs_data_rate(mcs, phy.channel_width, phy.guard_interval)
    bits = 8 * (payload + phy.overhead.mpdu_overhead_bytes) * n_aggregated
    return phy.overhead.preamble_us + math.ceil(bits / rate)
