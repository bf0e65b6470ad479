"""Scenario files: parsing, validation, default resolution and model building.

A scenario is YAML (JSON is accepted too, being a YAML subset). Every
section is optional except ``plan``; omitted keys take the defaults below.
The resolved scenario (defaults filled in, file references made absolute)
is itself a valid scenario and is echoed into run reports.
"""

from __future__ import annotations

import copy
import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .amplifier import AmplifierSpec
from .gmi import Constellation, FecModel, default_rate_grid, load_constellation, parse_constellation, square_qam
from .link import LinkConfig
from .nli import NliParams
from .raman import DEFAULT_ATTENUATION, FibreSpec, RamanProfile
from .spectral import Band, ChannelPlan, LaunchProfile, PlanError, build_plan, calibrate_band_offsets
from .system import System, ThroughputSettings
from .tilt import TiltScenario


class ScenarioError(ValueError):
    pass


_ANY = object()  # free-form value
_BANDMAP = "bandmap"  # mapping keyed by band name

_AMP = {
    "noise_figure": 5.0,
    "max_total_output": 23.0,
    "max_gain": 35.0,
    "gain_mode": "per-channel-target",
    "nf_floor": 3.01,
}

SCHEMA = {
    "plan": {
        "spacing": 32.5,
        "symbol_rate": 32.0,
        "bands": _ANY,
        "csv": None,
    },
    "launch": {
        "total_power": 17.0,
        "tilt": 0.0,
        "per_band_offset": _ANY,
        "band_targets": None,
        "safety_cap": 20.9,
        "override": False,
    },
    "fibre": {
        "length": 39.0,
        "effective_area": 80.0,
        "attenuation_table": [list(r) for r in DEFAULT_ATTENUATION],
        "raman": {"slope": 0.028, "peak_shift": 14.0, "falloff": 4.0, "shape": "triangular", "table": []},
        "point_losses": [[0.0, 7.2]],
        "step": 0.1,
    },
    "amplifiers": {
        "inline": (_BANDMAP, _AMP),
        "preamp": (_BANDMAP, _AMP),
        "rx_loss": 10.0,
    },
    "nli": {
        "enabled": True,
        "gamma": 1.2,
        "dispersion": 17.0,
        "dispersion_slope": 0.067,
        "reference_wavelength": 1550.0,
        "span_count": 1,
    },
    "snr": {
        "transceiver": _ANY,
        "probes_per_band": 10,
    },
    "fec": {
        "pilot_overhead": 0.0464,
        "outer_overhead": 0.005,
        "implementation_penalty": 0.058,
        "puncture_step": 0.01,
        "rate_grid": None,
        "target_ratio": None,
    },
    "throughput": {
        "constellations": _ANY,
        "snr_source": "estimate",
        "flat_snr": None,
        "samples": 200_000,
        "table_step": 0.25,
    },
    "optimizer": {
        "tilts": [float(t) for t in range(9)],
        "trims": _ANY,
        "objective": "shannon-estimate",
    },
    "output": {
        "dir": "out",
        "format": "both",
        "seed": 0,
    },
}

_AMP_DEFAULTS = {
    "S": {"noise_figure": 7.0},
    "C": {"noise_figure": 5.0},
    "L": {"noise_figure": 5.0},
}

DEFAULT_TRX = {"S": 19.0, "C": 23.0, "L": 21.0}
DEFAULT_CONSTELLATIONS = {"S": "builtin:gs1024", "C": "builtin:gs2048", "L": "builtin:gs2048"}


def _node_to_python(node, path, lines):
    """Convert a composed YAML node to Python, recording key line numbers."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k))
            if key in out:
                raise ScenarioError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            out[key] = _node_to_python(v, path + (str(key),), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_node_to_python(v, path + (str(i),), lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _where(source, lines, path):
    line = lines.get(tuple(path))
    loc = ".".join(path) or "<root>"
    return f"{source}:{line}: {loc}" if line else f"{source}: {loc}"


def _merge(schema, data, path, source, lines):
    """Fill defaults from ``schema`` and reject unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{_where(source, lines, path)}: expected a mapping")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        p = path + [str(unknown[0])]
        raise ScenarioError(f"{_where(source, lines, p)}: unknown key {unknown[0]!r}")
    out = {}
    for key, default in schema.items():
        val = data.get(key)
        if isinstance(default, tuple) and default and default[0] == _BANDMAP:
            sub = val or {}
            if not isinstance(sub, dict):
                raise ScenarioError(f"{_where(source, lines, path + [key])}: expected a mapping of bands")
            out[key] = {b: _merge(default[1], v, path + [key, b], source, lines) for b, v in sub.items()}
        elif isinstance(default, dict):
            out[key] = _merge(default, val, path + [key], source, lines)
        elif default is _ANY:
            out[key] = copy.deepcopy(val)
        else:
            out[key] = copy.deepcopy(default) if key not in data else val
    return out


def _resolve_constellation(ref: str, base: Path) -> str:
    if ref.startswith("builtin:") or ref.startswith("qam:"):
        return ref
    p = Path(ref)
    if not p.is_absolute():
        p = base / p
    return str(p.resolve())


def constellation_from_ref(ref: str) -> Constellation:
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        try:
            text = resources.files("sclwdm").joinpath("data", f"{name}.txt").read_text()
        except FileNotFoundError:
            raise ScenarioError(f"unknown built-in constellation {name!r}") from None
        return parse_constellation(text, name=name, source=ref)
    if ref.startswith("qam:"):
        return square_qam(int(ref.split(":", 1)[1]))
    return load_constellation(ref)


@dataclass(frozen=True)
class Scenario:
    data: dict  # resolved, JSON-serialisable
    source: str = "<scenario>"

    # ---- construction -------------------------------------------------
    @classmethod
    def from_text(cls, text: str, source: str = "<scenario>", base_dir: Path | None = None) -> "Scenario":
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{source}: {exc}") from None
        lines: dict = {}
        raw = {} if node is None else _node_to_python(node, (), lines)
        if not isinstance(raw, dict):
            raise ScenarioError(f"{source}: top level must be a mapping")
        if "plan" not in raw:
            raise ScenarioError(f"{source}: missing required section 'plan'")
        data = _merge(SCHEMA, raw, [], source, lines)
        base = Path(base_dir) if base_dir else Path.cwd()
        _finish(data, base, source, lines)
        return cls(data, source)

    @classmethod
    def from_file(cls, path) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
        return cls.from_text(text, str(path), path.parent.resolve())

    def echo(self) -> dict:
        return copy.deepcopy(self.data)

    def with_seed(self, seed: int) -> "Scenario":
        d = self.echo()
        d["output"]["seed"] = int(seed)
        return Scenario(d, self.source)

    # ---- model objects ------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.data["output"]["seed"])

    @property
    def band_names(self) -> list[str]:
        return [b["name"] for b in self.data["plan"]["bands"]]

    def bands(self) -> tuple[Band, ...]:
        return tuple(
            Band(b["name"], float(b["start_wavelength"]), float(b["end_wavelength"]), int(b["channel_count"]))
            for b in self.data["plan"]["bands"]
        )

    def fibre(self) -> FibreSpec:
        f = self.data["fibre"]
        r = f["raman"]
        raman = RamanProfile(
            float(r["slope"]), float(r["peak_shift"]), float(r["falloff"]), r["shape"],
            tuple(tuple(map(float, row)) for row in r["table"]),
        )
        return FibreSpec(
            float(f["length"]),
            tuple(tuple(map(float, row)) for row in f["attenuation_table"]),
            float(f["effective_area"]),
            raman,
            tuple(tuple(map(float, row)) for row in f["point_losses"]),
        )

    def link(self) -> LinkConfig:
        a = self.data["amplifiers"]
        inline = {b: AmplifierSpec(b, **{k: v for k, v in spec.items()}) for b, spec in a["inline"].items()}
        preamp = {b: AmplifierSpec(b, **spec) for b, spec in a["preamp"].items()}
        n = self.data["nli"]
        nli = None
        if n["enabled"]:
            nli = NliParams(
                float(n["gamma"]), float(n["dispersion"]), float(n["dispersion_slope"]),
                float(n["reference_wavelength"]), int(n["span_count"]),
            )
        return LinkConfig(
            fibre=self.fibre(),
            inline=inline,
            preamp=preamp,
            rx_loss=float(a["rx_loss"]),
            nli=nli,
            snr_trx={k: float(v) for k, v in self.data["snr"]["transceiver"].items()},
            step=float(self.data["fibre"]["step"]),
        )

    def launch_profile(self) -> LaunchProfile:
        l = self.data["launch"]
        return LaunchProfile(float(l["total_power"]), float(l["tilt"]), dict(l["per_band_offset"]))

    def system(self) -> System:
        p = self.data["plan"]
        l = self.data["launch"]
        return System(
            bands=self.bands(),
            link=self.link(),
            launch=self.launch_profile(),
            spacing=float(p["spacing"]),
            symbol_rate=float(p["symbol_rate"]),
            safety_cap=None if l["safety_cap"] is None else float(l["safety_cap"]),
            override=bool(l["override"]),
            probes_per_band=int(self.data["snr"]["probes_per_band"]),
        )

    def plan(self) -> ChannelPlan:
        """Launch plan, read from ``plan.csv`` when given."""
        csv_path = self.data["plan"]["csv"]
        if csv_path:
            return read_plan_csv(csv_path, self.bands(), float(self.data["plan"]["spacing"]),
                                 float(self.data["plan"]["symbol_rate"]))
        return self.system().launch_plan()

    def fec(self) -> FecModel:
        f = self.data["fec"]
        grid = f["rate_grid"]
        grid = tuple(map(float, grid)) if grid else default_rate_grid(float(f["puncture_step"]))
        return FecModel(grid, float(f["pilot_overhead"]), float(f["outer_overhead"]),
                        float(f["implementation_penalty"]))

    def throughput_settings(self) -> ThroughputSettings:
        t = self.data["throughput"]
        consts = {b: constellation_from_ref(ref) for b, ref in t["constellations"].items()}
        return ThroughputSettings(consts, self.fec(), int(t["samples"]), float(t["table_step"]))

    def tilt_scenario(self) -> TiltScenario:
        o = self.data["optimizer"]
        return TiltScenario(tuple(o["tilts"]), {b: tuple(v) for b, v in o["trims"].items()}, o["objective"])


def _require_bands(mapping, names, what, source):
    missing = [b for b in names if b not in mapping]
    if missing:
        raise ScenarioError(f"{source}: {what} missing for band(s) {', '.join(missing)}")
    extra = [b for b in mapping if b not in names]
    if extra:
        raise ScenarioError(f"{source}: {what} names unknown band(s) {', '.join(map(str, extra))}")


def _finish(data, base: Path, source, lines):
    """Band-keyed defaults, reference resolution and cross-section checks."""
    p = data["plan"]
    if p["csv"]:
        path = Path(p["csv"])
        path = path if path.is_absolute() else base / path
        if not path.exists():
            raise ScenarioError(f"{_where(source, lines, ['plan', 'csv'])}: file {path} does not exist")
        p["csv"] = str(path.resolve())
    bands = p["bands"]
    if not bands:
        raise ScenarioError(f"{_where(source, lines, ['plan', 'bands'])}: at least one band is required")
    keys = {"name", "start_wavelength", "end_wavelength", "channel_count"}
    for i, b in enumerate(bands):
        if not isinstance(b, dict) or set(b) != keys:
            got = sorted(b) if isinstance(b, dict) else type(b).__name__
            raise ScenarioError(
                f"{_where(source, lines, ['plan', 'bands', str(i)])}: band needs exactly {sorted(keys)}, got {got}"
            )
    names = [b["name"] for b in bands]
    if len(set(names)) != len(names):
        raise ScenarioError(f"{source}: duplicate band names {names}")

    l = data["launch"]
    offsets = l["per_band_offset"] or {}
    if set(offsets) - set(names):
        raise ScenarioError(f"{source}: launch.per_band_offset names unknown bands")
    l["per_band_offset"] = {b: float(offsets.get(b, 0.0)) for b in names}
    if l["band_targets"] is not None:
        _require_bands(l["band_targets"], names, "launch.band_targets", source)
        # targets replace the offsets; record the calibrated values
        tmp = Scenario(data, source)
        plan = build_plan(tmp.bands(), float(p["spacing"]), float(p["symbol_rate"]))
        offs = calibrate_band_offsets(plan, tmp.launch_profile(), l["band_targets"])
        l["per_band_offset"] = {b: round(offs[b], 12) for b in names}
        l["band_targets"] = None

    a = data["amplifiers"]
    for stage in ("inline", "preamp"):
        got = a[stage]
        for b in got:
            if b not in names:
                raise ScenarioError(f"{_where(source, lines, ['amplifiers', stage, str(b)])}: unknown band {b!r}")
        full = {}
        for b in names:
            if b in got:
                spec = got[b]
                # the band default NF applies when the file leaves it out
                raw_nf = (lines.get(("amplifiers", stage, b, "noise_figure")) is None)
                if raw_nf and b in _AMP_DEFAULTS:
                    spec = {**spec, **_AMP_DEFAULTS[b]}
                full[b] = spec
            elif stage == "preamp" and b in a["inline"]:
                full[b] = copy.deepcopy(a["inline"][b])
            else:
                full[b] = {**_AMP, **_AMP_DEFAULTS.get(b, {})}
        a[stage] = full

    s = data["snr"]
    trx = s["transceiver"] if s["transceiver"] is not None else {b: DEFAULT_TRX.get(b) for b in names}
    if any(v is None for v in trx.values()):
        raise ScenarioError(f"{source}: snr.transceiver needs a value for every band")
    _require_bands(trx, names, "snr.transceiver", source)
    s["transceiver"] = {b: float(trx[b]) for b in names}

    t = data["throughput"]
    consts = t["constellations"] if t["constellations"] is not None else \
        {b: DEFAULT_CONSTELLATIONS.get(b, "qam:64") for b in names}
    _require_bands(consts, names, "throughput.constellations", source)
    resolved = {}
    for b in names:
        ref = _resolve_constellation(str(consts[b]), base)
        if not (ref.startswith("builtin:") or ref.startswith("qam:")) and not Path(ref).exists():
            raise ScenarioError(
                f"{_where(source, lines, ['throughput', 'constellations', b])}: "
                f"constellation file for band {b} not found: {ref}"
            )
        resolved[b] = ref
    t["constellations"] = resolved
    if t["snr_source"] not in ("estimate", "flat"):
        raise ScenarioError(f"{_where(source, lines, ['throughput', 'snr_source'])}: must be 'estimate' or 'flat'")
    if t["snr_source"] == "flat":
        if t["flat_snr"] is None:
            raise ScenarioError(f"{source}: throughput.flat_snr is required when snr_source is 'flat'")
        _require_bands(t["flat_snr"], names, "throughput.flat_snr", source)
        t["flat_snr"] = {b: float(t["flat_snr"][b]) for b in names}

    o = data["optimizer"]
    trims = o["trims"] or {}
    for b in trims:
        if b not in names:
            raise ScenarioError(f"{source}: optimizer.trims names unknown band {b!r}")
    o["trims"] = {b: [int(r) for r in trims[b]] for b in names if b in trims}
    o["tilts"] = [float(x) for x in o["tilts"]]

    out = data["output"]
    if out["format"] not in ("csv", "json", "both"):
        raise ScenarioError(f"{_where(source, lines, ['output', 'format'])}: must be csv, json or both")


PLAN_COLUMNS = ["index", "band", "center_frequency_THz", "wavelength_nm", "launch_power_dBm", "suppressed"]


def plan_csv_rows(plan: ChannelPlan):
    rows = []
    for i, (f, lam, b, p, s) in enumerate(
        zip(plan.frequencies, plan.wavelengths, plan.bands, plan.powers_dbm, plan.suppressed)
    ):
        rows.append([i, b, f"{f:.17g}", f"{lam:.17g}", f"{p:.17g}", int(s)])
    return PLAN_COLUMNS, rows


def read_plan_csv(path, bands, spacing: float, symbol_rate: float) -> ChannelPlan:
    """Re-read a plan written by :func:`plan_csv_rows` (full precision)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PLAN_COLUMNS:
            raise ScenarioError(f"{path}:1: expected header {','.join(PLAN_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(PLAN_COLUMNS):
                raise ScenarioError(f"{path}:{lineno}: expected {len(PLAN_COLUMNS)} columns")
            try:
                rows.append((row[1], float(row[2]), float(row[4]), row[5] == "1"))
            except ValueError:
                raise ScenarioError(f"{path}:{lineno}: malformed number") from None
    if not rows:
        raise ScenarioError(f"{path}: plan has no channels")
    by_name = {b.name: b for b in bands}
    used = [b for b in dict.fromkeys(r[0] for r in rows)]
    unknown = [b for b in used if b not in by_name]
    if unknown:
        raise ScenarioError(f"{path}: bands {unknown} are not declared in the scenario")
    try:
        return ChannelPlan(
            frequencies=np.array([r[1] for r in rows]),
            bands=tuple(r[0] for r in rows),
            band_specs=tuple(by_name[b] for b in sorted(used, key=lambda n: [x.name for x in bands].index(n))),
            spacing=spacing,
            symbol_rate=symbol_rate,
            powers_dbm=np.array([r[2] for r in rows]),
            suppressed=np.array([r[3] for r in rows]),
        )
    except PlanError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
