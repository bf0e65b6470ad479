"""Lumped band amplifiers: gain setting, output clamping and ASE noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import dbm_to_mw, mw_to_dbm

H_PLANCK = 6.62607015e-34  # J s
OSNR_REFERENCE_BW = 12.5  # GHz


class AmplifierError(ValueError):
    pass


@dataclass(frozen=True)
class AmplifierSpec:
    """One band amplifier.

    ``max_total_output`` (dBm) caps the summed output of the channels the
    amplifier serves; ``max_gain`` (dB) caps each channel's gain.
    """

    band: str
    noise_figure: float = 5.0
    max_total_output: float = 23.0
    max_gain: float = 35.0
    gain_mode: str = "per-channel-target"
    nf_floor: float = 3.01

    def __post_init__(self):
        if self.gain_mode not in ("per-channel-target", "flat-gain"):
            raise AmplifierError(f"unknown gain mode {self.gain_mode!r}")
        if self.noise_figure < self.nf_floor:
            raise AmplifierError(
                f"noise figure {self.noise_figure} dB is below the {self.nf_floor} dB floor"
            )
        if not np.isfinite(self.max_total_output):
            raise AmplifierError("max_total_output must be finite")


@dataclass(frozen=True, eq=False)
class AseRecord:
    """Per-channel ASE power (mW) measured in ``reference_bandwidth`` GHz."""

    power: np.ndarray
    reference_bandwidth: float

    def rescaled(self, bandwidth: float) -> "AseRecord":
        return AseRecord(self.power * (bandwidth / self.reference_bandwidth), bandwidth)

    def __add__(self, other: "AseRecord") -> "AseRecord":
        other = other.rescaled(self.reference_bandwidth)
        return AseRecord(self.power + other.power, self.reference_bandwidth)


@dataclass(frozen=True)
class ClampEvent:
    band: str
    requested_dbm: float
    limit_dbm: float

    @property
    def scale_db(self) -> float:
        return self.limit_dbm - self.requested_dbm

    def describe(self) -> str:
        return (
            f"{self.band}-band amplifier clamped: requested {self.requested_dbm:.2f} dBm, "
            f"limit {self.limit_dbm:.2f} dBm ({self.scale_db:+.2f} dB on every channel)"
        )


@dataclass(frozen=True, eq=False)
class AmplifierStage:
    """Result of :func:`amplify`; unpacks as ``(output, gains_db, ase)``."""

    output: np.ndarray
    gains_db: np.ndarray
    ase: AseRecord
    clamp: ClampEvent | None = None

    def __iter__(self):
        return iter((self.output, self.gains_db, self.ase))


def ase_power(noise_figure_db, gain_db, frequency_thz, bandwidth_ghz):
    """ASE in mW over both polarisations: 2 (NF/2) h f (G - 1) B."""
    nf = 10 ** (np.asarray(noise_figure_db, dtype=float) / 10)
    g = 10 ** (np.asarray(gain_db, dtype=float) / 10)
    f = np.asarray(frequency_thz, dtype=float) * 1e12
    return 2 * (nf / 2) * H_PLANCK * f * np.clip(g - 1, 0.0, None) * bandwidth_ghz * 1e9 * 1e3


def amplify(
    input_powers,
    spec: AmplifierSpec,
    targets,
    frequencies,
    reference_bandwidth: float = OSNR_REFERENCE_BW,
) -> AmplifierStage:
    """Amplify one band's channels towards per-channel targets.

    Parameters
    ----------
    input_powers : array
        Input powers in mW. Dark channels (0 mW) get the band's mean gain so
        that ASE in their slots is still accounted for.
    spec : AmplifierSpec
    targets : array
        Target output powers in dBm.
    frequencies : array
        Channel frequencies in THz.
    reference_bandwidth : float
        Bandwidth (GHz) in which ASE is reported.

    Returns
    -------
    AmplifierStage
    """
    p_in = np.asarray(input_powers, dtype=float)
    targets = np.asarray(targets, dtype=float)
    f = np.asarray(frequencies, dtype=float)
    if p_in.shape != targets.shape or p_in.shape != f.shape:
        raise AmplifierError("inputs, targets and frequencies must have the same shape")
    if np.any(p_in < 0) or not np.all(np.isfinite(p_in)):
        raise AmplifierError("input powers must be finite and non-negative")
    lit = p_in > 0
    if np.any(~np.isfinite(targets[lit])):
        raise AmplifierError("targets must be finite")
    if not lit.any():
        zero = np.zeros_like(p_in)
        return AmplifierStage(zero, zero.copy(), AseRecord(zero.copy(), reference_bandwidth))

    gains = np.zeros_like(p_in)
    gains[lit] = targets[lit] - mw_to_dbm(p_in[lit])
    if spec.gain_mode == "flat-gain":
        want = float(mw_to_dbm(dbm_to_mw(targets[lit]).sum()) - mw_to_dbm(p_in[lit].sum()))
        gains[lit] = want
    gains = np.clip(gains, 0.0, spec.max_gain)
    gains[~lit] = float(mw_to_dbm(np.mean(dbm_to_mw(gains[lit]))))

    clamp = None
    total = float(mw_to_dbm((p_in * dbm_to_mw(gains)).sum()))
    if total > spec.max_total_output:
        # a common back-off keeps the channel ratios; may dip below 0 dB
        gains = gains + (spec.max_total_output - total)
        clamp = ClampEvent(spec.band, total, spec.max_total_output)

    out = p_in * dbm_to_mw(gains)
    ase = ase_power(spec.noise_figure, gains, f, reference_bandwidth)
    return AmplifierStage(out, gains, AseRecord(ase, reference_bandwidth), clamp)


def osnr(signal, ase: AseRecord, reference_bandwidth: float = OSNR_REFERENCE_BW):
    """Signal over ASE in ``reference_bandwidth`` (dB); +inf where ASE is zero."""
    s = np.asarray(signal, dtype=float)
    n = ase.rescaled(reference_bandwidth).power
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 10 * np.log10(s / n)
    out = np.where(n > 0, out, np.inf)
    return float(out) if out.ndim == 0 else out
