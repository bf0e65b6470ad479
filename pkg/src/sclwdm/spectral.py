"""Multi-band WDM channel grid, launch-power profiles and WSS notch plans.

Frequencies are in THz, wavelengths in nm, powers in dBm. Anything that gets
summed is converted to linear mW first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

#: speed of light in nm*THz
C_NM_THZ = 299792.458

BAND_NAMES = ("S", "C", "L")


class PlanError(ValueError):
    """Raised for an inconsistent channel plan, profile or notch plan."""


class SafetyCapError(PlanError):
    """Raised when a launch budget exceeds the configured safety cap."""


def wavelength_to_frequency(wavelength):
    """Convert wavelength in nm to frequency in THz."""
    lam = np.asarray(wavelength, dtype=float)
    if np.any(~(lam > 0)):
        raise ValueError(f"wavelength must be positive, got {wavelength!r}")
    f = C_NM_THZ / lam
    return float(f) if f.ndim == 0 else f


def frequency_to_wavelength(frequency):
    """Convert frequency in THz to wavelength in nm."""
    f = np.asarray(frequency, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError(f"frequency must be positive, got {frequency!r}")
    lam = C_NM_THZ / f
    return float(lam) if lam.ndim == 0 else lam


def dbm_to_mw(p_dbm):
    return np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(p_mw, dtype=float))


@dataclass(frozen=True)
class Band:
    name: str
    start_wavelength: float
    end_wavelength: float
    channel_count: int

    def __post_init__(self):
        if not self.start_wavelength < self.end_wavelength:
            raise PlanError(
                f"band {self.name}: start_wavelength {self.start_wavelength} nm "
                f"must be below end_wavelength {self.end_wavelength} nm"
            )
        if int(self.channel_count) != self.channel_count or self.channel_count < 1:
            raise PlanError(f"band {self.name}: channel_count must be a positive integer")

    @property
    def low_frequency(self) -> float:
        return wavelength_to_frequency(self.end_wavelength)

    @property
    def high_frequency(self) -> float:
        return wavelength_to_frequency(self.start_wavelength)

    def anchor_frequency(self, spacing_ghz: float) -> float:
        """Centre of the first slot above the long-wavelength edge."""
        return self.low_frequency + 0.5 * spacing_ghz * 1e-3


@dataclass(frozen=True)
class Channel:
    index: int
    center_frequency: float
    band: str
    symbol_rate: float
    launch_power: float
    suppressed: bool = False

    @property
    def wavelength(self) -> float:
        return frequency_to_wavelength(self.center_frequency)


@dataclass(frozen=True)
class LaunchProfile:
    """Total launch budget with a linear-in-dB tilt across the whole spectrum.

    ``tilt`` is the dB difference between the highest- and lowest-frequency
    channel; positive tilt launches short wavelengths hotter.
    """

    total_power: float
    tilt: float = 0.0
    per_band_offset: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Notch:
    center_frequency: float
    width: float  # GHz

    def __post_init__(self):
        if not self.width > 0:
            raise PlanError(f"notch width must be positive, got {self.width}")

    def contains(self, f_thz, half_bw_thz):
        lo = self.center_frequency - 0.5e-3 * self.width
        hi = self.center_frequency + 0.5e-3 * self.width
        eps = 1e-9
        return (f_thz - half_bw_thz >= lo - eps) & (f_thz + half_bw_thz <= hi + eps)


@dataclass(frozen=True)
class NotchPlan:
    notches: tuple[Notch, ...] = ()
    purpose: str = "signal-placement"

    def __post_init__(self):
        if self.purpose not in ("signal-placement", "osnr-probe"):
            raise PlanError(f"unknown notch purpose {self.purpose!r}")
        object.__setattr__(self, "notches", tuple(self.notches))


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ChannelPlan:
    """Immutable WDM grid. Arrays are read-only and indexed by channel index."""

    frequencies: np.ndarray
    bands: tuple[str, ...]
    band_specs: tuple[Band, ...]
    spacing: float
    symbol_rate: float
    powers_dbm: np.ndarray
    suppressed: np.ndarray
    notch_plans: tuple[NotchPlan, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frequencies", _frozen(self.frequencies))
        object.__setattr__(self, "powers_dbm", _frozen(self.powers_dbm))
        object.__setattr__(self, "suppressed", _frozen(self.suppressed, bool))
        object.__setattr__(self, "bands", tuple(self.bands))
        n = self.frequencies.size
        if self.powers_dbm.size != n or self.suppressed.size != n or len(self.bands) != n:
            raise PlanError("plan arrays have mismatched lengths")
        if n > 1 and np.any(np.diff(self.frequencies) <= 0):
            raise PlanError("channel frequencies must ascend with index")

    def __len__(self):
        return int(self.frequencies.size)

    @property
    def wavelengths(self) -> np.ndarray:
        return frequency_to_wavelength(self.frequencies) if len(self) else np.zeros(0)

    @property
    def band_names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.band_specs)

    @property
    def powers_mw(self) -> np.ndarray:
        p = dbm_to_mw(self.powers_dbm)
        return np.where(self.suppressed, 0.0, p)

    @property
    def active(self) -> np.ndarray:
        return ~self.suppressed

    def band_mask(self, name: str) -> np.ndarray:
        return np.array([b == name for b in self.bands], dtype=bool)

    @property
    def channels(self) -> list[Channel]:
        return [
            Channel(i, float(f), b, self.symbol_rate, float(p), bool(s))
            for i, (f, b, p, s) in enumerate(
                zip(self.frequencies, self.bands, self.powers_dbm, self.suppressed)
            )
        ]

    @property
    def occupied_bandwidth(self) -> float:
        """Total slot bandwidth in THz (channels x spacing)."""
        return len(self) * self.spacing * 1e-3

    def total_power_dbm(self) -> float:
        return float(mw_to_dbm(self.powers_mw.sum()))

    def band_powers_dbm(self) -> dict[str, float]:
        p = self.powers_mw
        return {name: float(mw_to_dbm(p[self.band_mask(name)].sum())) for name in self.band_names}

    def band_edges_nm(self) -> dict[str, tuple[float, float]]:
        """Occupied slot edges per band, short wavelength first."""
        out = {}
        half = 0.5e-3 * self.spacing
        for name in self.band_names:
            f = self.frequencies[self.band_mask(name)]
            if f.size:
                out[name] = (
                    frequency_to_wavelength(f.max() + half),
                    frequency_to_wavelength(f.min() - half),
                )
        return out

    def subset(self, keep: np.ndarray) -> "ChannelPlan":
        keep = np.asarray(keep, dtype=bool)
        return replace(
            self,
            frequencies=self.frequencies[keep],
            bands=tuple(b for b, k in zip(self.bands, keep) if k),
            powers_dbm=self.powers_dbm[keep],
            suppressed=self.suppressed[keep],
        )


def _check_disjoint(bands: Sequence[Band]):
    ordered = sorted(bands, key=lambda b: b.start_wavelength)
    for a, b in zip(ordered, ordered[1:]):
        if b.start_wavelength < a.end_wavelength:
            raise PlanError(f"bands {a.name} and {b.name} overlap")
    names = [b.name for b in bands]
    if len(set(names)) != len(names):
        raise PlanError(f"duplicate band names in {names}")


def build_plan(bands: Iterable[Band], spacing: float = 32.5, symbol_rate: float = 32.0) -> ChannelPlan:
    """Lay out ``channel_count`` slots per band from the long-wavelength edge.

    Channel counts win over the nominal short-wavelength edge; when the count
    overruns the band by more than one slot a warning is recorded on the plan.
    """
    bands = list(bands)
    if not bands:
        raise PlanError("at least one band is required")
    if symbol_rate > spacing:
        raise PlanError(f"symbol rate {symbol_rate} GBaud exceeds grid spacing {spacing} GHz")
    _check_disjoint(bands)

    step = spacing * 1e-3
    freqs, names, warnings = [], [], []
    for band in sorted(bands, key=lambda b: b.low_frequency):
        f0 = band.anchor_frequency(spacing)
        f = f0 + step * np.arange(band.channel_count)
        extent = band.high_frequency - band.low_frequency
        overrun = band.channel_count * step - extent
        if overrun > step:
            warnings.append(
                f"band {band.name}: {band.channel_count} channels overrun the "
                f"{band.start_wavelength:g}-{band.end_wavelength:g} nm edges by "
                f"{overrun / step:.2f} slots"
            )
        freqs.append(f)
        names.extend([band.name] * band.channel_count)
    freqs = np.concatenate(freqs)
    if np.any(np.diff(freqs) < step - 1e-9):
        raise PlanError("band channel grids overlap in frequency")
    n = freqs.size
    return ChannelPlan(
        frequencies=freqs,
        bands=tuple(names),
        band_specs=tuple(sorted(bands, key=lambda b: b.low_frequency)),
        spacing=float(spacing),
        symbol_rate=float(symbol_rate),
        powers_dbm=np.zeros(n),
        suppressed=np.zeros(n, dtype=bool),
        warnings=tuple(warnings),
    )


def tilt_shape(frequencies: np.ndarray, tilt: float) -> np.ndarray:
    """Relative dB shape, 0 at the lowest frequency and ``tilt`` at the highest."""
    f = np.asarray(frequencies, dtype=float)
    if f.size < 2 or f.max() == f.min():
        return np.zeros_like(f)
    return tilt * (f - f.min()) / (f.max() - f.min())


def _normalise(powers_dbm, active, total_dbm):
    lin = np.where(active, dbm_to_mw(powers_dbm), 0.0)
    return powers_dbm + (total_dbm - float(mw_to_dbm(lin.sum())))


def apply_launch_profile(
    plan: ChannelPlan,
    profile: LaunchProfile,
    safety_cap: float | None = 20.9,
    override: bool = False,
) -> ChannelPlan:
    """Set per-channel launch powers from ``profile``.

    The tilt line spans the full occupied spectrum (guard bands included),
    band offsets are added on top, then everything is scaled so that the
    linear sum over active channels equals ``profile.total_power``.
    """
    if len(plan) == 0:
        raise PlanError("cannot apply a launch profile to an empty plan")
    if safety_cap is not None and profile.total_power > safety_cap + 1e-12 and not override:
        raise SafetyCapError(
            f"total launch power {profile.total_power} dBm exceeds the safety cap "
            f"of {safety_cap} dBm; pass override=True to proceed"
        )
    unknown = set(profile.per_band_offset) - set(plan.band_names)
    if unknown:
        raise PlanError(f"per_band_offset names unknown bands: {sorted(unknown)}")
    if not plan.active.any():
        raise PlanError("every channel is suppressed")
    shape = tilt_shape(plan.frequencies, profile.tilt)
    offsets = np.array([profile.per_band_offset.get(b, 0.0) for b in plan.bands])
    p = _normalise(shape + offsets, plan.active, profile.total_power)
    return replace(plan, powers_dbm=p)


def retilt(plan: ChannelPlan, delta_tilt: float) -> ChannelPlan:
    """Add ``delta_tilt`` dB of extra tilt while keeping the total power."""
    total = plan.total_power_dbm()
    p = plan.powers_dbm + tilt_shape(plan.frequencies, delta_tilt)
    return replace(plan, powers_dbm=_normalise(p, plan.active, total))


def calibrate_band_offsets(
    plan: ChannelPlan, profile: LaunchProfile, band_targets: Mapping[str, float]
) -> dict[str, float]:
    """Band offsets (dB) that make per-band launch sums hit ``band_targets``.

    The targets are matched up to the common renormalisation to
    ``profile.total_power``.
    """
    base = apply_launch_profile(
        plan, replace(profile, per_band_offset={}), safety_cap=None
    ).band_powers_dbm()
    return {name: float(band_targets[name] - base[name]) for name in band_targets}


def _slot_half_width(plan: ChannelPlan) -> float:
    return 0.5e-3 * plan.symbol_rate


def carve_notches(plan: ChannelPlan, notch_plan: NotchPlan) -> ChannelPlan:
    """Suppress every channel whose signal band lies fully inside a notch."""
    if not notch_plan.notches:
        return plan
    half_slot = 0.5e-3 * plan.spacing
    lo = plan.frequencies.min() - half_slot
    hi = plan.frequencies.max() + half_slot
    suppressed = plan.suppressed.copy()
    half_bw = _slot_half_width(plan)
    for notch in notch_plan.notches:
        if not lo <= notch.center_frequency <= hi:
            raise PlanError(f"notch at {notch.center_frequency:.4f} THz lies outside all bands")
        near = np.abs(plan.frequencies - notch.center_frequency) <= half_slot + 1e-9
        if not near.any():
            raise PlanError(f"notch at {notch.center_frequency:.4f} THz lies in a guard band")
        suppressed |= notch.contains(plan.frequencies, half_bw)
    return replace(
        plan,
        suppressed=suppressed,
        notch_plans=plan.notch_plans + (notch_plan,),
    )


def probe_notches(plan: ChannelPlan, per_band: int = 10, slots: int = 1) -> NotchPlan:
    """Uniformly placed OSNR-probe notches, ``per_band`` per band.

    Probes sit on channel centres so each suppresses ``slots`` channels; the
    first and last probe keep one live neighbour inside the band.
    """
    if per_band < 1:
        raise PlanError("need at least one probe per band")
    notches = []
    for name in plan.band_names:
        idx = np.flatnonzero(plan.band_mask(name))
        if idx.size < 3:
            raise PlanError(f"band {name} is too narrow for probe notches")
        picks = np.unique(np.round(np.linspace(idx[1], idx[-2], per_band)).astype(int))
        for i in picks:
            notches.append(Notch(float(plan.frequencies[i]), slots * plan.spacing))
    return NotchPlan(tuple(notches), purpose="osnr-probe")


NDFF_BANDS = (
    Band("S", 1480.0, 1526.0, 187),
    Band("C", 1530.0, 1566.0, 140),
    Band("L", 1572.0, 1615.0, 155),
)
