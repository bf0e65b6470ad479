"""Single-span power propagation with attenuation, point losses and ISRS."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import ChannelPlan, frequency_to_wavelength, mw_to_dbm

logger = logging.getLogger(__name__)

DB_PER_NEPER = 10.0 / math.log(10.0)
REFERENCE_AREA = 80.0  # um^2


class FibreError(ValueError):
    pass


class StepSizeError(RuntimeError):
    pass


# SSMF-like loss: flat 0.2 dB/km through 1550-1575 nm, rising towards both edges.
DEFAULT_ATTENUATION = (
    (1450.0, 0.245),
    (1470.0, 0.228),
    (1490.0, 0.216),
    (1510.0, 0.208),
    (1530.0, 0.203),
    (1550.0, 0.200),
    (1575.0, 0.200),
    (1600.0, 0.202),
    (1625.0, 0.208),
    (1650.0, 0.225),
)


@dataclass(frozen=True)
class RamanProfile:
    """Raman gain versus frequency offset.

    ``slope`` is in 1/(W km THz) referenced to an 80 um^2 effective area. The
    triangular shape rises linearly to ``peak_shift`` and falls back to zero
    over ``falloff`` THz. A tabulated profile interpolates ``table`` rows of
    (offset THz, gain 1/(W km)) and is used as-is.
    """

    slope: float = 0.028
    peak_shift: float = 14.0
    falloff: float = 4.0
    shape: str = "triangular"
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.shape not in ("triangular", "tabulated"):
            raise FibreError(f"unknown Raman shape {self.shape!r}")
        if self.shape == "tabulated" and len(self.table) < 2:
            raise FibreError("tabulated Raman profile needs at least two rows")
        if self.slope < 0 or self.peak_shift <= 0 or self.falloff <= 0:
            raise FibreError("Raman slope must be >= 0 and peak/falloff > 0")

    def gain(self, df):
        """Gain in 1/(W km) at offset ``df`` THz (zero for df <= 0)."""
        df = np.asarray(df, dtype=float)
        if self.shape == "tabulated":
            x, y = np.array(self.table, dtype=float).T
            g = np.interp(df, x, y, left=0.0, right=0.0)
        else:
            rise = self.slope * df
            fall = self.slope * self.peak_shift * (1.0 - (df - self.peak_shift) / self.falloff)
            g = np.where(df <= self.peak_shift, rise, np.clip(fall, 0.0, None))
        return np.where(df > 0, g, 0.0)


@dataclass(frozen=True)
class FibreSpec:
    length: float
    attenuation_table: tuple[tuple[float, float], ...] = DEFAULT_ATTENUATION
    effective_area: float = REFERENCE_AREA
    raman: RamanProfile = field(default_factory=RamanProfile)
    point_losses: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attenuation_table", tuple(tuple(map(float, r)) for r in self.attenuation_table))
        object.__setattr__(self, "point_losses", tuple(tuple(map(float, r)) for r in self.point_losses))
        if self.length < 0:
            raise FibreError("fibre length must be non-negative")
        if any(a <= 0 for _, a in self.attenuation_table):
            raise FibreError("attenuation values must be positive")
        if self.effective_area <= 0:
            raise FibreError("effective area must be positive")
        for z, loss in self.point_losses:
            if loss < 0 or not 0 <= z <= self.length:
                raise FibreError(f"point loss ({z} km, {loss} dB) is outside [0, {self.length}] km or negative")

    @property
    def total_point_loss(self) -> float:
        return sum(loss for _, loss in self.point_losses)

    def gain_matrix(self, frequencies) -> np.ndarray:
        """Coupling matrix M (1/(W km)) with dP_i/dz = P_i (sum_j M_ij P_j) for the Raman part."""
        f = np.asarray(frequencies, dtype=float)
        df = f[None, :] - f[:, None]  # f_j - f_i
        g = self.raman.gain(np.abs(df)) * (REFERENCE_AREA / self.effective_area)
        ratio = f[:, None] / f[None, :]
        return np.where(df > 0, g, -ratio * g)


def attenuation_at(spec: FibreSpec, wavelength):
    """Piecewise-linear attenuation (dB/km) at ``wavelength`` nm.

    Queries outside the table are clamped to the end values with a warning.
    """
    if not spec.attenuation_table:
        raise FibreError("attenuation table is empty")
    tab = np.array(sorted(spec.attenuation_table), dtype=float)
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam < tab[0, 0]) or np.any(lam > tab[-1, 0]):
        logger.warning("wavelength outside attenuation table %g-%g nm; clamped", tab[0, 0], tab[-1, 0])
    a = np.interp(lam, tab[:, 0], tab[:, 1])
    return float(a) if a.ndim == 0 else a


@dataclass(frozen=True, eq=False)
class PowerEvolution:
    """Power samples along the span.

    ``powers`` has shape (samples, channels) in mW. A point loss produces two
    samples at the same distance (before and after the drop).
    """

    distances: np.ndarray
    powers: np.ndarray
    frequencies: np.ndarray

    @property
    def output(self) -> np.ndarray:
        return self.powers[-1]

    @property
    def launch(self) -> np.ndarray:
        return self.powers[0]

    def to_csv_rows(self):
        header = ["distance_km"] + [str(i) for i in range(self.powers.shape[1])]
        rows = [[f"{z:.6f}"] + [f"{p:.9e}" for p in row] for z, row in zip(self.distances, self.powers)]
        return header, rows


def _rk4_step(q, z, h, alpha, m):
    """Integrating-factor RK4 on q = P * exp(alpha z); exact for pure attenuation."""

    def rhs(qq, zz):
        p = qq * np.exp(-alpha * zz)
        return qq * (m @ p)

    k1 = rhs(q, z)
    k2 = rhs(q + 0.5 * h * k1, z + 0.5 * h)
    k3 = rhs(q + 0.5 * h * k2, z + 0.5 * h)
    k4 = rhs(q + h * k3, z + h)
    return q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate(plan: ChannelPlan, spec: FibreSpec, step: float = 0.1, launch_mw=None) -> PowerEvolution:
    """Integrate the coupled ISRS power equations over one span.

    Parameters
    ----------
    plan : ChannelPlan
        Channels and launch powers; suppressed channels carry zero power.
    spec : FibreSpec
        Fibre description.
    step : float
        Nominal RK4 step in km. The span is split into equal steps no longer
        than ``step``; point losses are applied at the nearest step boundary.
    launch_mw : array, optional
        Overrides the plan's launch powers (mW).

    Returns
    -------
    PowerEvolution
    """
    if step <= 0:
        raise FibreError("step must be positive")
    if len(plan) == 0:
        raise FibreError("cannot propagate an empty plan")
    p0 = plan.powers_mw if launch_mw is None else np.asarray(launch_mw, dtype=float)
    f = plan.frequencies
    alpha = attenuation_at(spec, frequency_to_wavelength(f)) / DB_PER_NEPER  # 1/km
    m = spec.gain_matrix(f) * 1e-3  # 1/(mW km)

    n_steps = max(1, math.ceil(spec.length / step - 1e-9)) if spec.length > 0 else 0
    h = spec.length / n_steps if n_steps else 0.0
    events: dict[int, float] = {}
    for z_ev, loss in spec.point_losses:
        k = int(round(z_ev / h)) if h > 0 else 0
        events[k] = events.get(k, 0.0) + loss

    distances = [0.0]
    samples = [p0.copy()]
    p = p0.copy()
    if 0 in events:
        p = p * 10 ** (-events[0] / 10)
        distances.append(0.0)
        samples.append(p.copy())
    for k in range(n_steps):
        z = k * h
        # q is re-based at each step start so exp(alpha z) never overflows
        q = _rk4_step(p, 0.0, h, alpha, m) * np.exp(-alpha * h)
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            bad = int(np.flatnonzero(~(q >= 0))[0])
            raise StepSizeError(
                f"negative or non-finite power on channel {bad} at z={z + h:.3f} km; "
                f"reduce the step (currently {h:.4g} km)"
            )
        p = q
        distances.append((k + 1) * h)
        samples.append(p.copy())
        if k + 1 in events:
            p = p * 10 ** (-events[k + 1] / 10)
            distances.append((k + 1) * h)
            samples.append(p.copy())
    return PowerEvolution(np.array(distances), np.array(samples), np.array(f))


def net_loss(plan: ChannelPlan, evo: PowerEvolution) -> np.ndarray:
    """Launch minus output power per channel in dB (NaN for dark channels)."""
    if evo.powers.shape[1] != len(plan) or not np.allclose(evo.frequencies, plan.frequencies):
        raise FibreError("power evolution does not belong to this plan")
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = mw_to_dbm(evo.launch) - mw_to_dbm(evo.output)
    return np.where(evo.launch > 0, loss, np.nan)
