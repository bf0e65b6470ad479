"""SNR budgeting, notch-sweep OSNR estimation and Shannon mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amplifier import OSNR_REFERENCE_BW
from .spectral import ChannelPlan


class InterpolationError(ValueError):
    pass


def _lin(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def combine_snr(*terms_db):
    """Inverse-linear sum of SNR terms in dB. +inf terms drop out."""
    if not terms_db:
        raise ValueError("need at least one SNR term")
    with np.errstate(divide="ignore", over="ignore"):
        inv = sum(1.0 / _lin(t) for t in terms_db)
        out = -10.0 * np.log10(inv)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class SnrBudget:
    snr_trx: np.ndarray
    snr_ase: np.ndarray
    snr_nli: np.ndarray

    @property
    def snr_total(self) -> np.ndarray:
        return combine_snr(self.snr_trx, self.snr_ase, self.snr_nli)


def shannon_rate(snr_db, symbol_rate: float):
    """Dual-polarisation Shannon rate in Gb/s for ``symbol_rate`` GBaud."""
    snr = _lin(snr_db)
    out = 2.0 * symbol_rate * np.log2(1.0 + snr)
    return float(out) if np.ndim(out) == 0 else out


def osnr_to_snr(osnr_db, symbol_rate: float, reference_bandwidth: float = OSNR_REFERENCE_BW):
    """ASE-limited SNR for a channel of ``symbol_rate`` GBaud."""
    return np.asarray(osnr_db, dtype=float) + 10 * np.log10(reference_bandwidth / symbol_rate)


@dataclass(frozen=True, eq=False)
class NotchProbeResult:
    """Probe readings and their interpolation onto every channel.

    ``probe_index`` are the suppressed channel indices used as probes;
    ``snr_link`` is the interpolated ASE+NLI SNR and ``snr_total`` adds the
    transceiver term.
    """

    probe_index: np.ndarray
    probe_band: tuple[str, ...]
    probe_wavelength: np.ndarray
    probe_osnr: np.ndarray
    snr_link: np.ndarray
    snr_total: np.ndarray


def _neighbour_signal(idx, signal, lit, band_idx):
    pos = np.searchsorted(band_idx, idx)
    vals = []
    for step in (-1, 1):
        j = pos + step
        while 0 <= j < band_idx.size and not lit[band_idx[j]]:
            j += step
        if 0 <= j < band_idx.size:
            vals.append(signal[band_idx[j]])
    if not vals:
        raise InterpolationError(f"probe at channel {idx} has no lit neighbour")
    return float(np.mean(vals))


def notch_sweep(
    plan: ChannelPlan,
    signal_mw,
    noise_mw,
    snr_trx_db,
    probes_per_band: int = 10,
) -> NotchProbeResult:
    """Estimate per-channel SNR from the noise floor in probe notches.

    Parameters
    ----------
    plan : ChannelPlan
        Plan whose last ``osnr-probe`` notch plan marks the probe slots.
    signal_mw : array
        Received signal power per channel (mW, 0 where suppressed).
    noise_mw : array
        Received noise (ASE plus NLI) per channel slot, in the symbol-rate
        bandwidth (mW). Inside a notch this is the measured floor.
    snr_trx_db : array
        Transceiver SNR per channel (dB).
    probes_per_band : int
        Expected probes in every band.
    """
    probe_plans = [n for n in plan.notch_plans if n.purpose == "osnr-probe"]
    if not probe_plans:
        raise InterpolationError("plan carries no osnr-probe notches")
    notch_plan = probe_plans[-1]
    signal = np.asarray(signal_mw, dtype=float)
    noise = np.asarray(noise_mw, dtype=float)
    lit = ~plan.suppressed
    lam = plan.wavelengths
    scale = plan.symbol_rate / OSNR_REFERENCE_BW

    p_idx, p_band, p_osnr = [], [], []
    snr_link = np.full(len(plan), np.nan)
    for name in plan.band_names:
        band_idx = np.flatnonzero(plan.band_mask(name))
        probes = []
        for notch in notch_plan.notches:
            k = int(np.argmin(np.abs(plan.frequencies - notch.center_frequency)))
            if plan.bands[k] == name and plan.suppressed[k] and k not in probes:
                probes.append(k)
        if len(probes) < 2:
            raise InterpolationError(f"band {name} has {len(probes)} probe(s); need at least 2")
        if len(probes) != probes_per_band:
            raise InterpolationError(
                f"band {name} has {len(probes)} probes, expected {probes_per_band}"
            )
        probes.sort()
        osnr = []
        for k in probes:
            s = _neighbour_signal(k, signal, lit, band_idx)
            osnr.append(10 * np.log10(s / (noise[k] / scale)))
        osnr = np.array(osnr)
        snr = osnr + 10 * np.log10(1.0 / scale)
        # np.interp wants ascending x; wavelength falls with index
        x = lam[probes][::-1]
        snr_link[band_idx] = np.interp(lam[band_idx], x, snr[::-1])
        p_idx += probes
        p_band += [name] * len(probes)
        p_osnr += list(osnr)

    p_idx = np.array(p_idx, dtype=int)
    total = combine_snr(np.asarray(snr_trx_db, dtype=float), snr_link)
    return NotchProbeResult(
        probe_index=p_idx,
        probe_band=tuple(p_band),
        probe_wavelength=lam[p_idx],
        probe_osnr=np.array(p_osnr),
        snr_link=snr_link,
        snr_total=total,
    )
