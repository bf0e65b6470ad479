import json

import numpy as np
import pytest

from sclwdm.scenario import Scenario, ScenarioError

MINIMAL = """
plan:
  bands:
    - {name: C, start_wavelength: 1530, end_wavelength: 1566, channel_count: 40}
"""


def test_minimal_scenario_fills_defaults():
    sc = Scenario.from_text(MINIMAL)
    d = sc.data
    assert d["fibre"]["length"] == 39.0
    assert d["amplifiers"]["inline"]["C"]["noise_figure"] == 5.0
    assert d["amplifiers"]["preamp"]["C"] == d["amplifiers"]["inline"]["C"]
    assert d["snr"]["transceiver"] == {"C": 23.0}
    assert d["throughput"]["constellations"] == {"C": "builtin:gs2048"}
    assert len(sc.plan()) == 40


def test_unknown_key_reported_with_line():
    text = MINIMAL + "fibre:\n  length: 39\n  lenght: 40\n"
    with pytest.raises(ScenarioError) as err:
        Scenario.from_text(text, source="x.yaml")
    msg = str(err.value)
    assert "x.yaml:7" in msg and "fibre.lenght" in msg


def test_nested_unknown_key():
    text = MINIMAL + "amplifiers:\n  inline:\n    C: {noise_fig: 5}\n"
    with pytest.raises(ScenarioError, match="amplifiers.inline.C.noise_fig"):
        Scenario.from_text(text)


def test_missing_plan_section():
    with pytest.raises(ScenarioError, match="plan"):
        Scenario.from_text("fibre: {length: 10}\n")


def test_empty_bands_rejected():
    with pytest.raises(ScenarioError, match="at least one band"):
        Scenario.from_text("plan: {bands: []}\n")


def test_missing_constellation_file_names_band(tmp_path):
    text = MINIMAL + "throughput:\n  constellations: {C: nowhere.txt}\n"
    with pytest.raises(ScenarioError, match="band C"):
        Scenario.from_text(text, base_dir=tmp_path)


def test_relative_constellation_resolved(tmp_path):
    (tmp_path / "q.txt").write_text("m=2\n00 1 1\n01 -1 1\n11 -1 -1\n10 1 -1\n")
    text = MINIMAL + "throughput:\n  constellations: {C: q.txt}\n"
    sc = Scenario.from_text(text, base_dir=tmp_path)
    assert sc.data["throughput"]["constellations"]["C"] == str((tmp_path / "q.txt").resolve())
    assert sc.throughput_settings().constellations["C"].size == 4


def test_flat_source_needs_values():
    with pytest.raises(ScenarioError, match="flat_snr"):
        Scenario.from_text(MINIMAL + "throughput: {snr_source: flat}\n")


def test_yaml_syntax_error():
    with pytest.raises(ScenarioError):
        Scenario.from_text("plan: [\n")


def test_echo_is_closed(ndff):
    again = Scenario.from_text(json.dumps(ndff.echo()))
    assert again.data == ndff.data


def test_band_targets_become_offsets(ndff):
    plan = ndff.plan()
    got = plan.band_powers_dbm()
    for b, want in {"S": 13.9, "C": 11.3, "L": 10.8}.items():
        assert got[b] == pytest.approx(want, abs=0.01)
    assert ndff.data["launch"]["band_targets"] is None


def test_seed_override(ndff):
    assert ndff.with_seed(42).seed == 42 and ndff.seed == 0


def test_plan_csv_round_trip(tmp_path, ndff):
    from sclwdm.cli import cmd_plan

    cmd_plan(ndff, tmp_path, "csv")
    d = ndff.echo()
    d["plan"]["csv"] = str(tmp_path / "plan.csv")
    back = Scenario.from_text(json.dumps(d)).plan()
    ref = ndff.plan()
    assert np.array_equal(back.frequencies, ref.frequencies)
    assert np.array_equal(back.powers_dbm, ref.powers_dbm)
    assert back.bands == ref.bands


def test_plan_csv_errors(tmp_path):
    bad = tmp_path / "p.csv"
    bad.write_text("index,band\n")
    text = MINIMAL + f"  csv: {bad}\n"
    with pytest.raises(ScenarioError, match="header"):
        Scenario.from_text(text).plan()
    with pytest.raises(ScenarioError, match="does not exist"):
        Scenario.from_text(MINIMAL + f"  csv: {tmp_path / 'none.csv'}\n")
