import numpy as np
import pytest
from hypothesis import given, strategies as st

from sclwdm.spectral import (
    NDFF_BANDS,
    Band,
    LaunchProfile,
    Notch,
    NotchPlan,
    PlanError,
    SafetyCapError,
    apply_launch_profile,
    build_plan,
    calibrate_band_offsets,
    carve_notches,
    dbm_to_mw,
    frequency_to_wavelength,
    mw_to_dbm,
    probe_notches,
    retilt,
    wavelength_to_frequency,
)


def test_ndff_counts_and_grid():
    plan = build_plan(NDFF_BANDS)
    assert len(plan) == 482
    assert {b: int(plan.band_mask(b).sum()) for b in "SCL"} == {"S": 187, "C": 140, "L": 155}
    gaps = np.diff(plan.frequencies)
    inside = np.array([plan.bands[i] == plan.bands[i + 1] for i in range(len(plan) - 1)])
    assert np.allclose(gaps[inside], 0.0325)
    assert plan.occupied_bandwidth == pytest.approx(15.665)


def test_empty_and_overlapping_bands_rejected():
    with pytest.raises(PlanError):
        build_plan([])
    with pytest.raises(PlanError):
        build_plan([Band("A", 1530, 1550, 10), Band("B", 1540, 1560, 10)])


def test_symbol_rate_must_fit_grid():
    with pytest.raises(PlanError):
        build_plan([Band("C", 1530, 1566, 10)], spacing=25.0, symbol_rate=32.0)


def test_safety_cap_and_override():
    plan = build_plan(NDFF_BANDS)
    with pytest.raises(SafetyCapError):
        apply_launch_profile(plan, LaunchProfile(21.5))
    hot = apply_launch_profile(plan, LaunchProfile(21.5), override=True)
    assert hot.total_power_dbm() == pytest.approx(21.5)


def test_tilt_endpoints():
    plan = apply_launch_profile(build_plan(NDFF_BANDS), LaunchProfile(17.0, 5.0))
    p = plan.powers_dbm
    assert p[np.argmax(plan.frequencies)] - p[np.argmin(plan.frequencies)] == pytest.approx(5.0)


def test_band_offsets_hit_targets():
    plan = build_plan(NDFF_BANDS)
    prof = LaunchProfile(17.0, 5.0)
    targets = {"S": 13.9, "C": 11.3, "L": 10.8}
    offs = calibrate_band_offsets(plan, prof, targets)
    got = apply_launch_profile(plan, LaunchProfile(17.0, 5.0, offs)).band_powers_dbm()
    # targets hold up to one common renormalisation
    shift = {b: got[b] - targets[b] for b in targets}
    assert max(shift.values()) - min(shift.values()) < 1e-9


@given(
    total=st.floats(-5, 20),
    tilt=st.floats(-8, 8),
    off=st.floats(-3, 3),
)
def test_total_power_preserved(total, tilt, off):
    plan = build_plan(NDFF_BANDS)
    out = apply_launch_profile(plan, LaunchProfile(total, tilt, {"S": off}))
    assert out.total_power_dbm() == pytest.approx(total, abs=1e-9)


@given(tilt=st.floats(-6, 6), delta=st.floats(-6, 6))
def test_retilt_adds_and_keeps_total(tilt, delta):
    plan = apply_launch_profile(build_plan(NDFF_BANDS), LaunchProfile(17.0, tilt))
    again = retilt(plan, delta)
    ref = apply_launch_profile(build_plan(NDFF_BANDS), LaunchProfile(17.0, tilt + delta))
    assert np.allclose(again.powers_dbm, ref.powers_dbm, atol=1e-9)


@given(st.floats(1450, 1650))
def test_wavelength_frequency_round_trip(lam):
    assert frequency_to_wavelength(wavelength_to_frequency(lam)) == pytest.approx(lam, rel=1e-12)


@given(st.floats(-30, 30))
def test_dbm_round_trip(p):
    assert mw_to_dbm(dbm_to_mw(p)) == pytest.approx(p, abs=1e-9)


def test_probe_notches_ten_per_band():
    plan = apply_launch_profile(build_plan(NDFF_BANDS), LaunchProfile(17.0))
    probed = carve_notches(plan, probe_notches(plan, 10))
    for b in "SCL":
        assert int((probed.suppressed & probed.band_mask(b)).sum()) == 10
    # carving does not change powers of the lit channels
    assert np.array_equal(probed.powers_dbm, plan.powers_dbm)


def test_notch_outside_plan_rejected(small_plan):
    with pytest.raises(PlanError):
        carve_notches(small_plan, NotchPlan((Notch(150.0, 50.0),)))


def test_notch_in_guard_band_rejected():
    plan = build_plan([Band("C", 1530, 1531, 3), Band("L", 1532, 1533, 3)])
    guard = 0.5 * (plan.frequencies[2] + plan.frequencies[3])
    with pytest.raises(PlanError, match="guard"):
        carve_notches(plan, NotchPlan((Notch(float(guard), 10.0),)))


def test_subset_keeps_band_specs(small_plan):
    keep = np.ones(len(small_plan), dtype=bool)
    keep[:2] = False
    sub = small_plan.subset(keep)
    assert len(sub) == len(small_plan) - 2
    assert sub.band_names == small_plan.band_names
