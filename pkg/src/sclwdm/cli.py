"""Command-line entry point.

Subcommands ``plan``, ``estimate``, ``throughput``, ``optimize`` and
``plotdata`` all read one scenario file and write CSV and/or JSON reports
into the output directory. Exit status is 0 on success, 1 for validation
errors and 2 for runtime or numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .amplifier import AmplifierError
from .gmi import ConstellationError, calibrate_penalty
from .nli import NliError
from .raman import FibreError
from .scenario import Scenario, ScenarioError, plan_csv_rows
from .snr import InterpolationError
from .spectral import C_NM_THZ, PlanError, mw_to_dbm
from .system import compute_throughput
from .tilt import GridError, optimize

logger = logging.getLogger("sclwdm")

VALIDATION_ERRORS = (
    ScenarioError, PlanError, ConstellationError, GridError, AmplifierError, FibreError, NliError,
)
FIGURES = ("fig3", "fig4", "fig5")


class RunError(RuntimeError):
    pass


# ---- serialisation ------------------------------------------------------

def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return x


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return f"{v:.6f}"
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


class EventLog:
    """Collects pipeline warnings and clamp events, each recorded once."""

    def __init__(self):
        self.events: list[dict] = []
        self._seen = set()

    def add(self, kind: str, message: str):
        key = (kind, message)
        if key not in self._seen:
            self._seen.add(key)
            self.events.append({"kind": kind, "message": message})

    def capture(self, fn, *args, **kwargs):
        handler = _ListHandler()
        logger.addHandler(handler)
        # record warnings even when the caller has raised the log level
        level = logger.level
        if level == logging.NOTSET or level > logging.WARNING:
            logger.setLevel(logging.WARNING)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                out = fn(*args, **kwargs)
        finally:
            logger.removeHandler(handler)
            logger.setLevel(level)
        for w in caught:
            self.add("warning", str(w.message))
        for msg in handler.messages:
            self.add("warning", msg)
        return out


class _ListHandler(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def report(command: str, sc: Scenario, events: EventLog, columns, rows, aggregates, extra=None) -> dict:
    out = {
        "tool": "sclwdm",
        "version": __version__,
        "command": command,
        "seed": sc.seed,
        "scenario": sc.echo(),
        "events": events.events,
        "aggregates": aggregates,
        "channels": {"columns": list(columns), "rows": [list(r) for r in rows]},
    }
    if extra:
        out.update(extra)
    return out


def emit(out_dir: Path, stem: str, fmt: str, rep: dict, columns, rows):
    written = []
    if fmt in ("csv", "both"):
        _write(out_dir / f"{stem}.csv", csv_text(columns, rows))
        written.append(out_dir / f"{stem}.csv")
    if fmt in ("json", "both"):
        _write(out_dir / f"{stem}.json", json_text(rep))
        written.append(out_dir / f"{stem}.json")
    return written


# ---- subcommands --------------------------------------------------------

def cmd_plan(sc: Scenario, out_dir: Path, fmt: str):
    events = EventLog()
    plan = events.capture(sc.plan)
    for w in plan.warnings:
        events.add("warning", w)
    columns, rows = plan_csv_rows(plan)
    agg = {
        "channels": len(plan),
        "per_band": {b: int(plan.band_mask(b).sum()) for b in plan.band_names},
        "occupied_bandwidth_THz": plan.occupied_bandwidth,
        "total_power_dBm": plan.total_power_dbm(),
        "band_power_dBm": plan.band_powers_dbm(),
    }
    rep = report("plan", sc, events, columns, rows, agg)
    # the plan CSV keeps full precision so it can be read back exactly
    written = []
    if fmt in ("csv", "both"):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows([columns] + rows)
        _write(out_dir / "plan.csv", buf.getvalue())
        written.append(out_dir / "plan.csv")
    if fmt in ("json", "both"):
        _write(out_dir / "plan.json", json_text(rep))
        written.append(out_dir / "plan.json")
    return rep, written


ESTIMATE_COLUMNS = [
    "index", "band", "wavelength_nm", "lit", "launch_dBm", "fibre_out_dBm", "received_dBm",
    "osnr_dB", "snr_ase_dB", "snr_nli_dB", "snr_trx_dB", "snr_link_dB", "snr_total_dB",
]
PROBE_COLUMNS = ["probe", "wavelength_nm", "probe_osnr_dB", "snr_link_dB", "snr_total_dB", "snr_trx_dB"]


def run_estimate(sc: Scenario, events: EventLog):
    system = sc.system()
    plan = events.capture(sc.plan)
    for w in plan.warnings:
        events.add("warning", w)
    est = events.capture(system.estimate, plan)
    for c in est.link.clamps:
        events.add("clamp", c.describe())
    return plan, est


def cmd_estimate(sc: Scenario, out_dir: Path, fmt: str):
    events = EventLog()
    plan, est = run_estimate(sc, events)
    link, probes = est.link, est.probes
    lit = link.plan.active
    rows = []
    for i in range(len(plan)):
        rows.append([
            i, plan.bands[i], plan.wavelengths[i], int(lit[i]),
            mw_to_dbm(link.evolution.launch[i]) if lit[i] else -math.inf,
            mw_to_dbm(link.evolution.output[i]) if lit[i] else -math.inf,
            mw_to_dbm(link.received_mw[i]) if lit[i] else -math.inf,
            link.osnr_db[i], link.snr_ase[i], link.snr_nli[i], link.snr_trx[i],
            probes.snr_link[i], probes.snr_total[i],
        ])
    trx = {b: sc.data["snr"]["transceiver"][b] for b in plan.band_names}
    probe_tables = {}
    for b in plan.band_names:
        sel = [k for k, pb in enumerate(probes.probe_band) if pb == b]
        probe_tables[b] = [
            [n, probes.probe_wavelength[k], probes.probe_osnr[k],
             probes.snr_link[probes.probe_index[k]], probes.snr_total[probes.probe_index[k]], trx[b]]
            for n, k in enumerate(sel)
        ]
    snr_tot = probes.snr_total
    agg = {
        "band_mean_snr_dB": {b: float(np.mean(snr_tot[plan.band_mask(b)])) for b in plan.band_names},
        "transceiver_snr_dB": trx,
        "shannon_Tbps": est.shannon_total(),
        "band_shannon_Tbps": {
            b: float(np.sum(est.shannon()[plan.band_mask(b)])) / 1e3 for b in plan.band_names
        },
    }
    rep = report("estimate", sc, events, ESTIMATE_COLUMNS, rows, agg,
                 {"probes": {b: {"columns": PROBE_COLUMNS, "rows": r} for b, r in probe_tables.items()}})
    written = emit(out_dir, "estimate", fmt, rep, ESTIMATE_COLUMNS, rows)
    if fmt in ("csv", "both"):
        for b, r in probe_tables.items():
            _write(out_dir / f"estimate_probes_{b}.csv", csv_text(PROBE_COLUMNS, r))
            written.append(out_dir / f"estimate_probes_{b}.csv")
    return rep, written


THROUGHPUT_COLUMNS = [
    "index", "band", "wavelength_nm", "snr_dB", "gmi_bits", "gmi_rate_Gbps", "code_rate",
    "decoded_rate_Gbps", "shannon_Gbps",
]


def cmd_throughput(sc: Scenario, out_dir: Path, fmt: str):
    events = EventLog()
    t = sc.data["throughput"]
    if t["snr_source"] == "flat":
        plan = events.capture(sc.plan)
        snr = np.array([t["flat_snr"][b] for b in plan.bands], dtype=float)
    else:
        plan, est = run_estimate(sc, events)
        snr = est.snr_total
    settings = sc.throughput_settings()
    extra = {}
    if sc.data["fec"].get("target_ratio") is not None:
        from .system import gmi_per_channel

        g, bits, _ = gmi_per_channel(plan.bands, snr, settings, sc.seed)
        p = calibrate_penalty(plan.bands, snr, g, bits, plan.symbol_rate, settings.fec,
                              float(sc.data["fec"]["target_ratio"]))
        settings = replace(settings, fec=replace(settings.fec, implementation_penalty=p))
        extra["calibrated_implementation_penalty"] = p
    rep_t, _ = compute_throughput(plan.bands, snr, plan.symbol_rate, settings, sc.seed)
    if not np.all(np.isfinite(rep_t.air)):
        raise RunError("non-finite rate in throughput computation")
    rows = [
        [i, plan.bands[i], plan.wavelengths[i], snr[i], rep_t.gmi[i], rep_t.air[i],
         rep_t.code_rate[i], rep_t.net_rate[i], rep_t.shannon[i]]
        for i in range(len(plan))
    ]
    agg = {
        "snr_source": t["snr_source"],
        "band_gmi_Tbps": rep_t.band_air,
        "band_decoded_Tbps": rep_t.band_net,
        "total_gmi_Tbps": rep_t.total_air,
        "total_decoded_Tbps": rep_t.total_net,
        "decoded_ratio": rep_t.decoded_ratio,
        "total_shannon_Tbps": float(np.sum(rep_t.shannon)) / 1e3,
        "constellations": {b: settings.constellations[b].name for b in plan.band_names},
    }
    rep = report("throughput", sc, events, THROUGHPUT_COLUMNS, rows, agg, extra)
    return rep, emit(out_dir, "throughput", fmt, rep, THROUGHPUT_COLUMNS, rows)


def cmd_optimize(sc: Scenario, out_dir: Path, fmt: str):
    if sc.data["plan"]["csv"]:
        raise ScenarioError(f"{sc.source}: optimize rebuilds plans from plan.bands; remove plan.csv")
    events = EventLog()
    grid = sc.tilt_scenario()
    settings = sc.throughput_settings() if grid.objective == "gmi-estimate" else None
    res = events.capture(optimize, sc.system(), grid, settings, sc.seed)
    names = sorted(res.best_trims)
    columns = ["tilt_dB"] + [f"trim_{b}" for b in names] + ["throughput_Tbps"]
    rows = [[t] + [tr[b] for b in names] + [v] for t, tr, v in res.table]
    agg = {"best_tilt_dB": res.best_tilt, "best_trims": res.best_trims, "best_throughput_Tbps": res.objective,
           "objective": grid.objective, "evaluations": len(res.table)}
    rep = report("optimize", sc, events, columns, rows, agg)
    return rep, emit(out_dir, "optimize", fmt, rep, columns, rows)


# ---- plot data ----------------------------------------------------------

FIG_COLUMNS = {
    "fig3": ["band", "wavelength_nm", "snr_interpolated_dB", "snr_transceiver_dB", "is_probe", "probe_snr_dB"],
    "fig4": ["band", "wavelength_nm", "fibre_in_dBm_per_nm", "fibre_out_dBm_per_nm", "received_dBm_per_nm"],
    "fig5": ["band", "wavelength_nm", "snr_dB", "gmi_rate_Gbps", "decoded_rate_Gbps"],
}


def _table(rep):
    cols = rep["channels"]["columns"]
    return [dict(zip(cols, r)) for r in rep["channels"]["rows"]]


def _num(v):
    return float(v)  # also parses "nan" / "inf"


def figure_rows(fig: str, rep: dict | None):
    if rep is None:
        return []
    rows = []
    spacing = float(rep["scenario"]["plan"]["spacing"])
    if fig == "fig3":
        probe_nm = {}
        for b, tab in rep.get("probes", {}).items():
            for r in tab["rows"]:
                probe_nm[(b, round(_num(r[1]), 9))] = _num(r[4])
        for r in _table(rep):
            key = (r["band"], round(_num(r["wavelength_nm"]), 9))
            rows.append([r["band"], _num(r["wavelength_nm"]), _num(r["snr_total_dB"]), _num(r["snr_trx_dB"]),
                         int(key in probe_nm), probe_nm.get(key, math.nan)])
    elif fig == "fig4":
        for r in _table(rep):
            if not r["lit"]:
                continue
            lam = _num(r["wavelength_nm"])
            # channel slot width in nm
            dnm = 10 * math.log10(lam**2 * spacing * 1e-3 / C_NM_THZ)
            rows.append([r["band"], lam] + [_num(r[k]) - dnm for k in ("launch_dBm", "fibre_out_dBm", "received_dBm")])
    elif fig == "fig5":
        for r in _table(rep):
            rows.append([r["band"], _num(r["wavelength_nm"]), _num(r["snr_dB"]), _num(r["gmi_rate_Gbps"]),
                         _num(r["decoded_rate_Gbps"])])
    return rows


def svg_plot(title: str, xlabel: str, ylabel: str, series, width=640, height=400) -> str:
    """Minimal SVG with axes and one polyline (or marker set) per series.

    ``series`` is a list of ``(label, xs, ys, style)`` with style "line" or "marker".
    """
    ml, mr, mt, mb = 60, 20, 30, 45
    pts = [(x, y) for _, xs, ys, _ in series for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>']
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
        x1, y1 = (x1 if x1 > x0 else x0 + 1), (y1 if y1 > y0 else y0 + 1)

        def sx(x):
            return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

        def sy(y):
            return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb)

        out.append(f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
                   'fill="none" stroke="black"/>')
        for v in np.linspace(x0, x1, 5):
            out.append(f'<text x="{sx(v):.1f}" y="{height - mb + 15}" text-anchor="middle" font-size="10">{v:.1f}</text>')
        for v in np.linspace(y0, y1, 5):
            out.append(f'<text x="{ml - 5}" y="{sy(v) + 3:.1f}" text-anchor="end" font-size="10">{v:.1f}</text>')
        colours = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
        for k, (label, xs, ys, style) in enumerate(series):
            col = colours[k % len(colours)]
            good = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
            if style == "marker":
                out += [f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{col}"/>' for a, b in good]
            elif good:
                dash = ' stroke-dasharray="5,3"' if style == "dashed" else ""
                path = " ".join(f"{a:.1f},{b:.1f}" for a, b in good)
                out.append(f'<polyline points="{path}" fill="none" stroke="{col}"{dash}/>')
            out.append(f'<text x="{width - mr - 5}" y="{mt + 14 * (k + 1)}" text-anchor="end" '
                       f'font-size="10" fill="{col}">{label}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {height / 2:.1f})">{ylabel}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _svg_for(fig, rows):
    cols = FIG_COLUMNS[fig]
    bands = list(dict.fromkeys(r[0] for r in rows))
    series = []
    for b in bands:
        sub = [r for r in rows if r[0] == b]
        xs = [r[1] for r in sub]
        if fig == "fig3":
            series.append((f"{b} interpolated", xs, [r[2] for r in sub], "line"))
            series.append((f"{b} transceiver", xs, [r[3] for r in sub], "dashed"))
            pr = [r for r in sub if r[4]]
            series.append((f"{b} probes", [r[1] for r in pr], [r[5] for r in pr], "marker"))
        else:
            for j in range(2, len(cols)):
                series.append((f"{b} {cols[j]}", xs, [r[j] for r in sub], "line"))
    labels = {"fig3": "SNR (dB)", "fig4": "power density (dBm/nm)", "fig5": "rate (Gb/s)"}
    return svg_plot(fig, "wavelength (nm)", labels[fig], series)


def cmd_plotdata(out_dir: Path, figures, reports: dict, svg: bool = True):
    """Write ``<fig>.csv`` (and ``<fig>.svg``) from estimate/throughput reports."""
    written = []
    for fig in figures:
        if fig not in FIGURES:
            raise ScenarioError(f"unknown figure id {fig!r}; valid ids are {', '.join(FIGURES)}")
        source = reports.get("throughput" if fig == "fig5" else "estimate")
        rows = figure_rows(fig, source)
        _write(out_dir / f"{fig}.csv", csv_text(FIG_COLUMNS[fig], rows))
        written.append(out_dir / f"{fig}.csv")
        if svg:
            _write(out_dir / f"{fig}.svg", _svg_for(fig, rows))
            written.append(out_dir / f"{fig}.svg")
    return written


# ---- driver -------------------------------------------------------------

def _load_report(path: Path):
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}: malformed report: {exc.msg}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="sclwdm", description="multi-band WDM link budget and throughput tool")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("plan", "estimate", "throughput", "optimize", "plotdata"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=name != "plotdata", help="scenario YAML/JSON file")
        p.add_argument("--out", help="output directory (default: scenario output.dir)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides output.seed)")
        p.add_argument("--format", choices=("csv", "json", "both"), help="report format")
        if name == "plotdata":
            p.add_argument("--figures", nargs="+", default=list(FIGURES), help="figure ids")
            p.add_argument("--report", nargs="+", help="report JSON files (default: those in --out)")
            p.add_argument("--no-svg", action="store_true", help="skip SVG renderings")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = Scenario.from_file(args.scenario) if args.scenario else None
        if sc is not None and args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ScenarioError("--seed must be an unsigned 64-bit integer")
            sc = sc.with_seed(args.seed)
        out_dir = Path(args.out or (sc.data["output"]["dir"] if sc else "out"))
        fmt = args.format or (sc.data["output"]["format"] if sc else "both")
        if args.command == "plotdata":
            paths = [Path(p) for p in args.report] if args.report else \
                [out_dir / "estimate.json", out_dir / "throughput.json"]
            reports = {}
            for p in paths:
                rep = _load_report(p)
                if rep is not None:
                    reports[rep.get("command")] = rep
                elif args.report:
                    raise ScenarioError(f"report {p} does not exist")
            written = cmd_plotdata(out_dir, args.figures, reports, not args.no_svg)
        else:
            fn = {"plan": cmd_plan, "estimate": cmd_estimate, "throughput": cmd_throughput,
                  "optimize": cmd_optimize}[args.command]
            _, written = fn(sc, out_dir, fmt)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RunError, InterpolationError, ArithmeticError, RuntimeError, ValueError, KeyError) as exc:
        tag = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{tag}]: {exc}", file=sys.stderr)
        return 2
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
