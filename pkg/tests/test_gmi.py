import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sclwdm.gmi import (
    ConstellationError,
    FecModel,
    calibrate_penalty,
    default_rate_grid,
    gmi_monte_carlo,
    gmi_table,
    gray_pam,
    parse_constellation,
    select_code_rate,
    square_qam,
    throughput,
)
from tests.oracles import gh_gmi_2d


def test_qpsk_high_snr():
    assert gmi_monte_carlo(square_qam(4), 40.0) == pytest.approx(2.0, abs=1e-3)


def test_16qam_matches_quadrature():
    c = square_qam(16)
    mc = gmi_monte_carlo(c, 10.0, samples=200_000, seed=3)
    assert mc == pytest.approx(gh_gmi_2d(c, 10.0), abs=0.01)


@pytest.mark.parametrize("M", [4, 16, 64])
def test_below_capacity_across_sweep(M):
    c = square_qam(M)
    snr = np.arange(-5.0, 31.0, 5.0)
    n = 50_000
    g, std = gmi_monte_carlo(c, snr, samples=n, seed=1, return_std=True)
    half = 3 * std / math.sqrt(n)
    cap = np.minimum(c.bits, np.log2(1 + 10 ** (snr / 10)))
    assert np.all(g <= cap + half + 1e-12)
    assert np.all(np.diff(g) >= 0)


def test_seed_reproducible():
    c = square_qam(16)
    assert gmi_monte_carlo(c, 8.0, 20_000, seed=7) == gmi_monte_carlo(c, 8.0, 20_000, seed=7)


def test_non_finite_snr_rejected():
    with pytest.raises(ValueError):
        gmi_monte_carlo(square_qam(4), math.nan)


def test_table_interpolates_and_guards_range():
    tab = gmi_table(square_qam(16), 9.9, 12.1, step=0.25, samples=20_000)
    assert tab.snr_db[0] <= 9.9 and tab.snr_db[-1] >= 12.1
    assert tab(11.0) == pytest.approx(float(gmi_monte_carlo(square_qam(16), 11.0, 20_000)), abs=2e-3)
    with pytest.raises(ValueError):
        tab(20.0)


# ---- parser ----------------------------------------------------------------

QPSK_TEXT = """# comment line
m=2
00  1  1
01 -1  1   # trailing comment
11 -1 -1
10  1 -1
"""


def test_parse_normalises_energy():
    c = parse_constellation(QPSK_TEXT)
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)
    assert c.bits == 2


@pytest.mark.parametrize(
    "text, needle",
    [
        ("m=2\n00 1 1\n01 -1 1\n11 -1 -1\n", "power of two"),
        ("m=2\n00 1 1\n00 -1 1\n11 -1 -1\n10 1 -1\n", "duplicate label"),
        ("m=2\n00 1 1\n01 x 1\n11 -1 -1\n10 1 -1\n", "line 3"),
        ("2\n", "header"),
        ("m=3\n00 1 1\n", "3-bit"),
        ("", "empty"),
    ],
)
def test_parse_errors(text, needle):
    with pytest.raises(ConstellationError) as err:
        parse_constellation(text, source="line" if needle == "line 3" else None)
    msg = str(err.value)
    assert (needle in msg) or (needle == "line 3" and err.value.line == 3)


def test_text_round_trip():
    c = square_qam(64)
    back = parse_constellation(c.to_text())
    assert np.allclose(back.points, c.points, atol=1e-11)
    assert np.array_equal(back.labels, c.labels)


def test_gray_pam_neighbours_differ_by_one_bit():
    _, lab = gray_pam(32)
    assert np.all(np.abs(np.diff(lab.astype(int), axis=0)).sum(axis=1) == 1)


# ---- FEC -------------------------------------------------------------------

def test_rate_grid_contains_nominal_and_punctured():
    grid = default_rate_grid()
    assert 0.25 in grid and 0.9 in grid and 0.5 in grid
    assert np.all(np.diff(grid) > 0)


@given(g=st.floats(0, 8), pen=st.floats(0, 0.2))
def test_selected_rate_respects_penalty(g, pen):
    fec = FecModel(implementation_penalty=pen)
    rate, factor = select_code_rate(g, 8, fec)
    assert rate <= g / 8 * (1 - pen) + 1e-9
    assert factor <= g + 1e-9


@given(a=st.floats(0, 8), b=st.floats(0, 8))
def test_selected_rate_monotone(a, b):
    lo, hi = sorted((a, b))
    assert select_code_rate(lo, 8, FecModel())[0] <= select_code_rate(hi, 8, FecModel())[0]


def test_zero_gmi_zero_rate():
    rep = throughput(("C",) * 3, np.full(3, -np.inf), np.zeros(3), 4, 32.0, FecModel())
    assert rep.total_air == 0 and rep.total_net == 0 and rep.decoded_ratio == 0


def test_calibrated_penalty_hits_ratio():
    rng = np.random.default_rng(0)
    g = rng.uniform(5.5, 7.5, 300)
    bands = ("S",) * 100 + ("C",) * 100 + ("L",) * 100
    p = calibrate_penalty(bands, np.full(300, 20.0), g, 10, 32.0, FecModel(), 0.937)
    rep = throughput(bands, np.full(300, 20.0), g, 10, 32.0, FecModel(implementation_penalty=p))
    assert rep.decoded_ratio == pytest.approx(0.937, abs=0.002)
