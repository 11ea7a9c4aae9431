import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ftmrate.core import (CHANNEL_WIDTHS, GUARD_INTERVALS, MCS_TABLE, DomainError, PhyConfig, PhyOverhead,
                          frame_airtime, mcs_data_rate, rate_column)

# Single-stream 802.11ax data rates (Mbit/s): rows MCS 0..11, columns
# (20, 40, 80, 160) MHz x (3.2, 1.6, 0.8) us GI.
GOLDEN = [
    [7.3, 8.1, 8.6, 14.6, 16.3, 17.2, 30.6, 34.0, 36.0, 61.3, 68.1, 72.1],
    [14.6, 16.3, 17.2, 29.3, 32.5, 34.4, 61.3, 68.1, 72.1, 122.5, 136.1, 144.1],
    [21.9, 24.4, 25.8, 43.9, 48.8, 51.6, 91.9, 102.1, 108.1, 183.8, 204.2, 216.2],
    [29.3, 32.5, 34.4, 58.5, 65.0, 68.8, 122.5, 136.1, 144.1, 245.0, 272.2, 288.2],
    [43.9, 48.8, 51.6, 87.8, 97.5, 103.2, 183.8, 204.2, 216.2, 367.5, 408.3, 432.4],
    [58.5, 65.0, 68.8, 117.0, 130.0, 137.6, 245.0, 272.2, 288.2, 490.0, 544.4, 576.5],
    [65.8, 73.1, 77.4, 131.6, 146.3, 154.9, 275.6, 306.3, 324.4, 551.3, 612.5, 648.5],
    [73.1, 81.3, 86.0, 146.3, 162.5, 172.1, 306.3, 340.3, 360.3, 612.5, 680.6, 720.6],
    [87.8, 97.5, 103.2, 175.5, 195.0, 206.5, 367.5, 408.3, 432.4, 735.0, 816.7, 864.7],
    [97.5, 108.3, 114.7, 195.0, 216.7, 229.4, 408.3, 453.7, 480.4, 816.6, 907.4, 960.7],
    [109.7, 121.9, 129.0, 219.4, 243.8, 258.1, 459.4, 510.4, 540.4, 918.8, 1020.8, 1080.9],
    [121.9, 135.4, 143.4, 243.8, 270.8, 286.8, 510.4, 567.1, 600.5, 1020.8, 1134.2, 1201.0],
]
COLUMNS = [(w, gi) for w in CHANNEL_WIDTHS for gi in GUARD_INTERVALS]

# HE data subcarriers per width, bits per subcarrier per modulation
DATA_SUBCARRIERS = {20: 234, 40: 468, 80: 980, 160: 1960}
BITS = {"BPSK": 1, "QPSK": 2, "16-QAM": 4, "64-QAM": 6, "256-QAM": 8, "1024-QAM": 10}


def test_golden_rate_table():
    assert len(MCS_TABLE) == 12
    for mcs, row in enumerate(GOLDEN):
        for (w, gi), rate in zip(COLUMNS, row):
            assert mcs_data_rate(mcs, w, gi) == rate, (mcs, w, gi)


def test_rates_match_ofdm_arithmetic():
    # independent oracle: subcarriers * bits * coding rate / (12.8 us + GI)
    off = set()
    for e in MCS_TABLE:
        for (w, gi), rate in e.data_rate.items():
            exact = DATA_SUBCARRIERS[w] * BITS[e.modulation] * e.coding_rate / (Fraction(128, 10) + Fraction(str(gi)))
            if abs(rate - float(exact)) >= 0.1:
                off.add((e.mcs_index, w, gi))
                assert abs(rate - float(exact)) < 0.2
    # the published value 324.4 rounds 324.26 up by more than one digit
    assert off == {(6, 80, 0.8)}


def test_spot_values():
    assert mcs_data_rate(0, 20, 3.2) == 7.3
    assert mcs_data_rate(11, 20, 0.8) == 143.4
    assert mcs_data_rate(7, 160, 0.8) == 720.6


@pytest.mark.parametrize("w,gi", COLUMNS)
def test_monotone_in_mcs(w, gi):
    col = rate_column(w, gi)
    assert all(a < b for a, b in zip(col, col[1:]))


def test_monotone_in_width_and_gi():
    for e in MCS_TABLE:
        for gi in GUARD_INTERVALS:
            by_width = [e.data_rate[(w, gi)] for w in CHANNEL_WIDTHS]
            assert all(a < b for a, b in zip(by_width, by_width[1:]))
        for w in CHANNEL_WIDTHS:
            by_gi = [e.data_rate[(w, gi)] for gi in GUARD_INTERVALS]  # 3.2, 1.6, 0.8
            assert all(a < b for a, b in zip(by_gi, by_gi[1:]))


@pytest.mark.parametrize("args", [(12, 20, 3.2), (-1, 20, 3.2), (0, 30, 3.2), (0, 20, 0.4), (1.0, 20, 3.2)])
def test_domain_errors(args):
    with pytest.raises(DomainError):
        mcs_data_rate(*args)


def test_airtime_example_without_mac_overhead():
    phy = PhyConfig(guard_interval=0.8, overhead=PhyOverhead(preamble_us=44.0, mpdu_overhead_bytes=0))
    assert frame_airtime(1500, 1, 11, phy) == 44.0 + 84
    # the default charges 40 B of MAC overhead per MPDU
    assert frame_airtime(1500, 1, 11, PhyConfig(guard_interval=0.8)) == 44.0 + math.ceil(8 * 1540 / 143.4)


def test_airtime_rejects_empty():
    with pytest.raises(DomainError):
        frame_airtime(1500, 0, 0)
    with pytest.raises(DomainError):
        frame_airtime(0, 1, 0)


@given(st.integers(1, 65535), st.integers(1, 32), st.integers(0, 11), st.sampled_from(COLUMNS))
def test_aggregation_shares_preamble(payload, n, mcs, col):
    phy = PhyConfig(channel_width=col[0], guard_interval=col[1])
    one, two = frame_airtime(payload, n, mcs, phy), frame_airtime(payload, 2 * n, mcs, phy)
    assert one < two < 2 * one


def test_phy_defaults():
    phy = PhyConfig()
    assert (phy.channel_width, phy.guard_interval, phy.payload_size, phy.spatial_streams) == (20, 3.2, 1500, 1)
    assert phy.rates == tuple(row[0] for row in GOLDEN)
