"""Scenario-level model tying plan, link, notch estimate and throughput together."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .gmi import Constellation, FecModel, GmiTable, gmi_bracketing_table, throughput
from .link import LinkConfig, LinkResult, simulate_link
from .snr import NotchProbeResult, notch_sweep, shannon_rate
from .spectral import (
    Band,
    ChannelPlan,
    LaunchProfile,
    PlanError,
    apply_launch_profile,
    build_plan,
    carve_notches,
    probe_notches,
)


@dataclass(frozen=True, eq=False)
class Estimate:
    """Notch-sweep estimate for one launch plan."""

    plan: ChannelPlan  # without probe notches
    link: LinkResult  # simulated with probe notches carved
    probes: NotchProbeResult

    @property
    def snr_total(self) -> np.ndarray:
        return self.probes.snr_total

    def shannon(self) -> np.ndarray:
        return shannon_rate(self.snr_total, self.plan.symbol_rate)

    def shannon_total(self) -> float:
        """Aggregate in Tb/s."""
        return float(np.sum(self.shannon())) / 1e3


@dataclass(frozen=True)
class System:
    bands: tuple[Band, ...]
    link: LinkConfig
    launch: LaunchProfile
    spacing: float = 32.5
    symbol_rate: float = 32.0
    safety_cap: float | None = 20.9
    override: bool = False
    probes_per_band: int = 10

    def base_plan(self) -> ChannelPlan:
        return build_plan(self.bands, self.spacing, self.symbol_rate)

    def launch_plan(self, tilt: float | None = None, trims: Mapping[str, int] | None = None) -> ChannelPlan:
        """Launch plan with ``tilt`` (defaults to the profile's) after dropping
        ``trims[band]`` channels from each edge of that band."""
        plan = self.base_plan()
        if trims:
            keep = np.ones(len(plan), dtype=bool)
            for name, r in trims.items():
                if r < 0:
                    raise PlanError(f"trim for band {name} must be >= 0")
                idx = np.flatnonzero(plan.band_mask(name))
                if idx.size == 0:
                    raise PlanError(f"trim names unknown band {name}")
                if 2 * r >= idx.size:
                    raise PlanError(f"trim {r} removes every channel of band {name}")
                if r:
                    keep[idx[:r]] = False
                    keep[idx[-r:]] = False
            plan = plan.subset(keep)
        profile = self.launch if tilt is None else replace(self.launch, tilt=float(tilt))
        return apply_launch_profile(plan, profile, self.safety_cap, self.override)

    def estimate(self, plan: ChannelPlan) -> Estimate:
        probed = carve_notches(plan, probe_notches(plan, self.probes_per_band))
        link = simulate_link(probed, self.link)
        probes = notch_sweep(probed, link.received_mw, link.noise_mw, link.snr_trx, self.probes_per_band)
        return Estimate(plan, link, probes)


@dataclass(frozen=True)
class ThroughputSettings:
    constellations: Mapping[str, Constellation]
    fec: FecModel = field(default_factory=FecModel)
    samples: int = 200_000
    table_step: float = 0.25


def gmi_per_channel(bands, snr_db, settings: ThroughputSettings, seed: int):
    """GMI per channel from per-constellation tables at the SNRs present.

    Channels at -inf dB carry zero GMI. Each constellation gets its own
    seed derived from ``seed`` and its name, so results do not depend on
    band order.
    """
    snr = np.asarray(snr_db, dtype=float)
    bands = tuple(bands)
    gmi = np.zeros(snr.size)
    bits = np.zeros(snr.size, dtype=int)
    tables: dict[str, GmiTable] = {}
    by_const: dict[str, list[int]] = {}
    for i, b in enumerate(bands):
        if b not in settings.constellations:
            raise KeyError(f"no constellation configured for band {b}")
        by_const.setdefault(settings.constellations[b].name, []).append(i)
    for name, idx in sorted(by_const.items()):
        c = settings.constellations[bands[idx[0]]]
        idx = np.array(idx)
        bits[idx] = c.bits
        s = snr[idx]
        if np.any(np.isnan(s)) or np.any(s == np.inf):
            raise ValueError(f"channels using {name} have NaN or +inf SNR")
        live = np.isfinite(s)
        if live.any():
            sub_seed = np.random.SeedSequence([seed, *name.encode()]).generate_state(1)[0]
            tables[name] = gmi_bracketing_table(c, s[live], settings.table_step, settings.samples, int(sub_seed))
            vals = np.zeros(s.size)
            vals[live] = tables[name](s[live])
            gmi[idx] = vals
    return gmi, bits, tables


def compute_throughput(bands, snr_db, symbol_rate: float, settings: ThroughputSettings, seed: int):
    gmi, bits, tables = gmi_per_channel(bands, snr_db, settings, seed)
    return throughput(bands, snr_db, gmi, bits, symbol_rate, settings.fec), tables
