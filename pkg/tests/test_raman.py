import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from sclwdm.raman import (
    DB_PER_NEPER,
    FibreError,
    FibreSpec,
    RamanProfile,
    StepSizeError,
    attenuation_at,
    net_loss,
    propagate,
)
from sclwdm.spectral import Band, LaunchProfile, apply_launch_profile, build_plan, frequency_to_wavelength

LOSSLESS = ((1400.0, 1e-12), (1700.0, 1e-12))


def _plan(total=20.0, tilt=0.0, bands=(Band("S", 1490, 1500, 20), Band("L", 1590, 1600, 20))):
    return apply_launch_profile(build_plan(bands), LaunchProfile(total, tilt), override=True)


@given(total=st.floats(0, 25), tilt=st.floats(-6, 6))
def test_photon_flux_conserved_without_loss(total, tilt):
    plan = _plan(total, tilt)
    evo = propagate(plan, FibreSpec(50.0, attenuation_table=LOSSLESS), step=0.5)
    flux = evo.powers / evo.frequencies
    assert np.all(np.abs(flux.sum(axis=1) / flux[0].sum() - 1) < 1e-9)


def test_raman_moves_power_to_long_wavelengths():
    plan = _plan(20.0)
    evo = propagate(plan, FibreSpec(50.0, attenuation_table=LOSSLESS), step=0.5)
    gain = evo.output / evo.launch
    s, l = plan.band_mask("S"), plan.band_mask("L")
    assert gain[s].max() < 1 < gain[l].min()


def _oracle(plan, spec, length):
    f = plan.frequencies
    alpha = attenuation_at(spec, frequency_to_wavelength(f)) / DB_PER_NEPER
    m = spec.gain_matrix(f) * 1e-3

    def rhs(_, p):
        return p * (m @ p - alpha)

    sol = solve_ivp(rhs, (0, length), plan.powers_mw, method="DOP853", rtol=1e-13, atol=1e-16)
    return sol.y[:, -1]


def test_two_channel_fine_step_oracle():
    plan = _plan(23.0, 0.0, (Band("S", 1500, 1501, 1), Band("L", 1600, 1601, 1)))
    spec = FibreSpec(40.0)
    evo = propagate(plan, spec, step=0.1)
    ref = _oracle(plan, spec, 40.0)
    assert np.max(np.abs(evo.output / ref - 1)) < 1e-6


def test_raman_off_gives_pure_attenuation():
    plan = _plan(17.0)
    spec = FibreSpec(39.0, raman=RamanProfile(slope=0.0), point_losses=((19.5, 3.6), (39.0, 3.6)))
    evo = propagate(plan, spec)
    alpha_db = attenuation_at(spec, plan.wavelengths)
    assert np.allclose(net_loss(plan, evo), 39.0 * alpha_db + 7.2, atol=1e-9)


def test_point_loss_recorded_twice():
    plan = _plan(10.0)
    evo = propagate(plan, FibreSpec(10.0, point_losses=((5.0, 3.0),)), step=1.0)
    k = np.flatnonzero(np.diff(evo.distances) == 0)
    assert k.size == 1
    assert np.allclose(evo.powers[k[0]] / evo.powers[k[0] + 1], 10**0.3)


def test_dark_channels_stay_dark():
    plan = _plan(17.0)
    launch = plan.powers_mw.copy()
    launch[3] = 0.0
    evo = propagate(plan, FibreSpec(39.0), launch_mw=launch)
    assert np.all(evo.powers[:, 3] == 0.0)
    assert np.isnan(net_loss(plan, evo)[3])


def test_step_too_large_raises():
    plan = _plan(35.0, bands=(Band("S", 1480, 1520, 120), Band("L", 1570, 1615, 120)))
    spec = FibreSpec(100.0, attenuation_table=LOSSLESS, raman=RamanProfile(slope=0.5))
    with pytest.raises(StepSizeError):
        propagate(plan, spec, step=50.0)


def test_fibre_validation():
    with pytest.raises(FibreError):
        FibreSpec(-1.0)
    with pytest.raises(FibreError):
        FibreSpec(10.0, point_losses=((20.0, 1.0),))
    with pytest.raises(FibreError):
        RamanProfile(shape="gaussian")


def test_tabulated_profile_matches_triangle():
    tri = RamanProfile()
    x = np.linspace(0, 18, 181)
    tab = RamanProfile(shape="tabulated", table=tuple(zip(x, tri.gain(x))))
    q = np.array([0.5, 3.3, 13.9, 15.2, 17.7])
    assert np.allclose(tab.gain(q), tri.gain(q), atol=1e-4)
