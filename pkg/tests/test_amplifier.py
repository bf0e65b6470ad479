import numpy as np
import pytest
from hypothesis import given, strategies as st

from sclwdm.amplifier import (
    H_PLANCK,
    AmplifierError,
    AmplifierSpec,
    AseRecord,
    amplify,
    ase_power,
    osnr,
)


def test_ase_hand_formula():
    # NF 5 dB, G 20 dB, 193.4 THz, 12.5 GHz: n_sp h f (G-1) B with both polarisations
    nf, g = 10 ** 0.5, 100.0
    hand = nf * H_PLANCK * 193.4e12 * (g - 1) * 12.5e9 * 1e3
    assert ase_power(5.0, 20.0, 193.4, 12.5) == pytest.approx(hand, rel=1e-12)
    # about -33 dBm for these numbers
    assert 10 * np.log10(hand) == pytest.approx(-33.0, abs=0.1)


def test_unity_gain_adds_no_ase():
    assert ase_power(5.0, 0.0, 193.4, 12.5) == 0.0


def test_osnr_of_lone_amplifier():
    # textbook OSNR = 58 + P_in - NF (dB, 0.1 nm) near 1550 nm
    p_in = np.array([1e-2])  # -20 dBm
    stage = amplify(p_in, AmplifierSpec("C", 5.0), np.array([0.0]), np.array([193.4]))
    assert osnr(stage.output, stage.ase) == pytest.approx(58.0 - 20.0 - 5.0, abs=0.1)


def test_reaches_targets_without_clamp():
    p_in = np.full(4, 1e-2)
    stage = amplify(p_in, AmplifierSpec("C"), np.zeros(4), np.linspace(192, 193, 4))
    assert stage.clamp is None
    assert np.allclose(stage.gains_db, 20.0)


@given(n=st.integers(1, 40), target=st.floats(-5, 15), cap=st.floats(0, 20))
def test_clamp_holds_total_and_ratios(n, target, cap):
    p_in = np.full(n, 1e-2) * np.linspace(1, 2, n)
    targets = np.full(n, target) + np.linspace(0, 1, n)
    stage = amplify(p_in, AmplifierSpec("S", max_total_output=cap, max_gain=60),
                    targets, np.linspace(195, 199, n))
    total = 10 * np.log10(stage.output.sum())
    assert total <= cap + 1e-9
    if stage.clamp is not None:
        assert total == pytest.approx(cap)
        assert stage.clamp.scale_db < 0
        unclamped = amplify(p_in, AmplifierSpec("S", max_total_output=99, max_gain=60),
                            targets, np.linspace(195, 199, n))
        assert np.allclose(stage.output / unclamped.output, stage.output[0] / unclamped.output[0])


def test_dark_channels_get_mean_gain_and_ase():
    p_in = np.array([1e-2, 0.0, 1e-2])
    stage = amplify(p_in, AmplifierSpec("C"), np.array([0.0, 0.0, 3.0]), np.array([193.0, 193.05, 193.1]))
    assert stage.output[1] == 0.0
    assert stage.ase.power[1] > 0
    assert 20.0 < stage.gains_db[1] < 23.0


def test_flat_gain_mode():
    p_in = np.array([1e-2, 2e-2])
    stage = amplify(p_in, AmplifierSpec("C", gain_mode="flat-gain"), np.array([0.0, 0.0]),
                    np.array([193.0, 193.1]))
    assert stage.gains_db[0] == pytest.approx(stage.gains_db[1])


def test_nf_floor_and_bad_inputs():
    with pytest.raises(AmplifierError):
        AmplifierSpec("C", noise_figure=2.0)
    with pytest.raises(AmplifierError):
        amplify(np.array([-1.0]), AmplifierSpec("C"), np.array([0.0]), np.array([193.0]))


def test_ase_record_bandwidth_rescale():
    rec = AseRecord(np.array([1.0]), 12.5) + AseRecord(np.array([1.0]), 25.0)
    assert rec.power[0] == pytest.approx(1.5)
    assert rec.rescaled(32.0).power[0] == pytest.approx(1.5 * 32 / 12.5)
