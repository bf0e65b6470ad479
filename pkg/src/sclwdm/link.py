"""End-to-end single-span link: fibre, in-line amplifier, receiver pre-amplifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .amplifier import AmplifierSpec, AseRecord, ClampEvent, amplify, osnr
from .nli import NliParams, nli_closed_form
from .raman import FibreSpec, PowerEvolution, propagate
from .snr import combine_snr, shannon_rate
from .spectral import ChannelPlan, mw_to_dbm

logger = logging.getLogger(__name__)


def _default_inline():
    return {
        "S": AmplifierSpec("S", noise_figure=7.0, max_total_output=13.0),
        "C": AmplifierSpec("C", noise_figure=5.0, max_total_output=23.0),
        "L": AmplifierSpec("L", noise_figure=5.0, max_total_output=23.0),
    }


@dataclass(frozen=True)
class LinkConfig:
    """Everything downstream of the launch plan.

    ``rx_loss`` (dB) sits between the in-line amplifier and the receiver
    pre-amplifier. Missing pre-amplifier entries copy the in-line spec.
    """

    fibre: FibreSpec
    inline: dict = field(default_factory=_default_inline)
    preamp: dict = field(default_factory=dict)
    rx_loss: float = 10.0
    nli: NliParams | None = field(default_factory=NliParams)
    snr_trx: dict = field(default_factory=lambda: {"S": 19.0, "C": 23.0, "L": 21.0})
    step: float = 0.1

    def preamp_for(self, band: str) -> AmplifierSpec:
        return self.preamp.get(band, self.inline[band])


@dataclass(frozen=True, eq=False)
class LinkResult:
    plan: ChannelPlan
    evolution: PowerEvolution
    inline_out_mw: np.ndarray
    received_mw: np.ndarray
    ase_mw: np.ndarray  # at the receiver, in the symbol-rate bandwidth
    nli_mw: np.ndarray  # at the receiver, in the symbol-rate bandwidth
    snr_trx: np.ndarray
    snr_ase: np.ndarray
    snr_nli: np.ndarray
    osnr_db: np.ndarray
    clamps: tuple[ClampEvent, ...] = ()

    @property
    def snr_total(self) -> np.ndarray:
        return combine_snr(self.snr_trx, self.snr_ase, self.snr_nli)

    @property
    def noise_mw(self) -> np.ndarray:
        return self.ase_mw + self.nli_mw

    def shannon(self) -> np.ndarray:
        return shannon_rate(self.snr_total, self.plan.symbol_rate)


def _fill_dark(values_mw, lit, band_idx):
    """Log-interpolate per-channel powers into dark slots from lit neighbours."""
    out = values_mw.copy()
    good = band_idx[lit[band_idx] & (values_mw[band_idx] > 0)]
    dark = band_idx[~lit[band_idx]]
    if good.size and dark.size:
        out[dark] = 10 ** np.interp(dark, good, np.log10(values_mw[good]))
    return out


def simulate_link(plan: ChannelPlan, config: LinkConfig) -> LinkResult:
    """Propagate ``plan`` and account ASE and NLI at the receiver.

    Both amplifiers target the launch profile per channel. Suppressed
    channels carry no signal but still collect ASE and an interpolated NLI
    floor, which is what a notch measurement sees.
    """
    evo = propagate(plan, config.fibre, step=config.step)
    f = plan.frequencies
    n = len(plan)
    bw = plan.symbol_rate
    lit = plan.active
    inline_out = np.zeros(n)
    received = np.zeros(n)
    ase = np.zeros(n)
    clamps = []
    rx_drop = 10 ** (-config.rx_loss / 10)
    for name in plan.band_names:
        m = plan.band_mask(name)
        if name not in config.inline:
            raise KeyError(f"no in-line amplifier configured for band {name}")
        s1 = amplify(evo.output[m], config.inline[name], plan.powers_dbm[m], f[m], bw)
        s2 = amplify(s1.output * rx_drop, config.preamp_for(name), plan.powers_dbm[m], f[m], bw)
        clamps += [c for c in (s1.clamp, s2.clamp) if c is not None]
        inline_out[m] = s1.output
        received[m] = s2.output
        ase[m] = s1.ase.power * rx_drop * 10 ** (s2.gains_db / 10) + s2.ase.power

    nli_rx = np.zeros(n)
    if config.nli is not None:
        est = nli_closed_form(plan, config.fibre, config.nli)
        with np.errstate(divide="ignore", invalid="ignore"):
            nli_rx = np.where(lit, est.nli_mw * received / est.launch_mw, 0.0)
        for name in plan.band_names:
            nli_rx = _fill_dark(nli_rx, lit, np.flatnonzero(plan.band_mask(name)))

    with np.errstate(divide="ignore", invalid="ignore"):
        snr_ase = np.where(lit, mw_to_dbm(received) - mw_to_dbm(ase), np.nan)
        snr_nli = np.where(lit & (nli_rx > 0), mw_to_dbm(received) - mw_to_dbm(nli_rx), np.inf)
    snr_nli = np.where(lit, snr_nli, np.nan)
    trx = np.array([config.snr_trx[b] for b in plan.bands], dtype=float)
    return LinkResult(
        plan=plan,
        evolution=evo,
        inline_out_mw=inline_out,
        received_mw=received,
        ase_mw=ase,
        nli_mw=nli_rx,
        snr_trx=trx,
        snr_ase=snr_ase,
        snr_nli=snr_nli,
        osnr_db=np.where(lit, osnr(received, AseRecord(ase, bw)), np.nan),
        clamps=tuple(clamps),
    )
