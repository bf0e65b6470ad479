"""Nonlinear interference for a single amplified span.

Two routes are provided: a closed-form ISRS-aware GN approximation (SPM + XPM
terms per channel of interest), and a brute-force evaluation of the GN double
integral over the interfering PSD pairs, driven by the numerically propagated
power profile. The second is slow and only meant for small plans.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .raman import DB_PER_NEPER, REFERENCE_AREA, FibreSpec, attenuation_at, propagate
from .spectral import C_NM_THZ, ChannelPlan, frequency_to_wavelength

logger = logging.getLogger(__name__)

C_M_S = 299792458.0
MAX_ORACLE_CHANNELS = 9


class NliError(ValueError):
    pass


@dataclass(frozen=True)
class NliParams:
    gamma: float = 1.2  # 1/(W km)
    dispersion: float = 17.0  # ps/(nm km)
    dispersion_slope: float = 0.067  # ps/(nm^2 km)
    reference_wavelength: float = 1550.0  # nm
    span_count: int = 1

    def __post_init__(self):
        if self.gamma < 0:
            raise NliError("gamma must be non-negative")
        if int(self.span_count) != self.span_count or self.span_count < 1:
            raise NliError("span_count must be a positive integer")

    def betas(self):
        """(beta2 [s^2/m], beta3 [s^3/m]) at the reference wavelength."""
        lam = self.reference_wavelength * 1e-9
        d = self.dispersion * 1e-6  # s/m^2
        s = self.dispersion_slope * 1e3  # s/m^3
        beta2 = -d * lam**2 / (2 * math.pi * C_M_S)
        beta3 = lam**2 / (2 * math.pi * C_M_S) ** 2 * (lam**2 * s + 2 * lam * d)
        return beta2, beta3

    @property
    def reference_frequency(self) -> float:
        return C_NM_THZ / self.reference_wavelength  # THz


@dataclass(frozen=True, eq=False)
class NliEstimate:
    nli_mw: np.ndarray  # NLI power in the channel bandwidth, referred to the span input
    launch_mw: np.ndarray

    @property
    def snr_nli_db(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            snr = self.launch_mw / self.nli_mw
        snr = np.where(self.nli_mw > 0, snr, np.inf)
        return np.where(self.launch_mw > 0, 10 * np.log10(snr), np.nan)


def _span_input(plan: ChannelPlan, fibre: FibreSpec) -> np.ndarray:
    """Launch powers (mW) after any point loss sitting at the span input."""
    drop = sum(loss for z, loss in fibre.point_losses if z <= 1e-9)
    mid = [z for z, _ in fibre.point_losses if z > 1e-9]
    if mid:
        logger.warning("closed-form NLI ignores %d mid-span point losses", len(mid))
    return plan.powers_mw * 10 ** (-drop / 10)


def _profile_terms(a, a_bar, kappa, length):
    """Two-exponential ISRS profile rho(z) = sum_m A_m exp(-a_m z).

    Returns (amplitudes, rates), each of shape (2, n); ``kappa`` is the
    linearised ISRS depletion for each channel.
    """
    amps = np.stack([1.0 - kappa, kappa])
    rates = np.stack([a, a + a_bar])
    return amps, rates


def _mu_sq(phi, amps, rates, length):
    """|integral_0^L rho(z) exp(j phi z) dz|^2 for the two-exponential profile.

    ``phi`` has shape (n, k); amps/rates have shape (2, n).
    """
    mu = 0.0
    for am, rm in zip(amps, rates):
        s = rm[:, None] - 1j * phi
        mu = mu + am[:, None] * -np.expm1(-s * length) / s
    return np.abs(mu) ** 2


def _lorentz_pair_integral(t, a, a_bar, x):
    """Integral over [-x, x] of (t + phi^2) / ((a^2 + phi^2)((a + a_bar)^2 + phi^2))."""
    ab = a + a_bar
    return 2.0 / (a_bar * (2 * a + a_bar)) * (
        (t - a**2) / a * np.arctan(x / a) + (ab**2 - t) / ab * np.arctan(x / ab)
    )


def _finite_span_xpm_integral(amps, rates, a, a_bar, x, length):
    """Integral of |mu_L(phi)|^2 over [-x, x] for a span of finite length.

    Splits |mu_L|^2 = |mu_inf|^2 + |E|^2 - 2 Re(mu_inf E*): the first two keep
    the rational form, the oscillating cross term is integrated over the
    whole line by residues (valid for x * length >> 1).
    """
    a1, a2 = rates
    A1, A2 = amps
    t_inf = (A1 * a2 + A2 * a1) ** 2
    main = _lorentz_pair_integral(t_inf, a, a_bar, x)
    e1, e2 = A1 * np.exp(-a1 * length), A2 * np.exp(-a2 * length)
    s_end = e1 + e2
    with np.errstate(divide="ignore", invalid="ignore"):
        t_end = np.where(s_end != 0, ((e1 * a2 + e2 * a1) / s_end) ** 2, 0.0)
    tail = s_end**2 * _lorentz_pair_integral(t_end, a, a_bar, x)
    cross = 0.0
    for am, rm in zip(amps, rates):
        for an, rn in zip(amps, rates):
            cross = cross + am * an * np.exp(-(rm + rn) * length) / (rm + rn)
    return main + tail - 4 * math.pi * cross


# log-spaced nodes for the product distribution over a channel's own band
_S_NODES = np.exp(np.linspace(math.log(1e-10), 0.0, 2001))


def _spm_integral(kappa_disp, half_bw, amps, rates, length):
    """Integral of |mu_L(phi)|^2 over the SPM hexagon |x|,|y|,|x+y| <= half_bw.

    With phi = kappa_disp * x * y the hexagon splits into two triangles
    (x*y > 0) and two squares (x*y < 0); |mu|^2 is even in phi, so only the
    distribution of the product |x y| is needed. Its densities are
    2 atanh(sqrt(1 - 4 s)) on the triangles and ln(1/s) on the squares, with
    s = |x y| / half_bw^2.
    """
    s = _S_NODES
    dens = np.log(1.0 / s)
    tri = s < 0.25
    dens = dens + np.where(tri, 2 * np.arctanh(np.sqrt(np.clip(1 - 4 * s, 0, 1))), 0.0)
    h2 = half_bw**2
    phi = np.abs(kappa_disp)[:, None] * h2[:, None] * s[None, :]
    f = _mu_sq(phi, amps, rates, length)
    # trapezoid in u = ln s, so ds = s du
    g = f * dens[None, :] * s[None, :]
    du = np.diff(np.log(s))
    body = np.sum(0.5 * (g[:, 1:] + g[:, :-1]) * du[None, :], axis=1)
    s0 = s[0]
    head = f[:, 0] * 2 * s0 * (1 + math.log(1 / s0))
    return 2 * h2 * (body + head)


def nli_closed_form(plan: ChannelPlan, fibre: FibreSpec, params: NliParams) -> NliEstimate:
    """ISRS-aware GN estimate of per-channel NLI power for one span.

    The power profile of every channel is linearised in the ISRS tilt
    (Raman slope times total power, frequencies relative to the power
    centroid), giving a two-exponential profile per channel. XPM uses the
    closed-form arctan expressions plus an exact finite-span correction;
    SPM integrates the same finite-span kernel over the channel's own band
    with a one-dimensional quadrature. Dispersion phases use frequencies
    relative to the dispersion reference wavelength.
    """
    p_in = _span_input(plan, fibre)
    lit = p_in > 0
    out = np.zeros(len(plan))
    if not lit.any() or params.gamma == 0:
        return NliEstimate(out, p_in)

    f_thz = plan.frequencies[lit]
    p = p_in[lit] * 1e-3  # W
    b = np.full(f_thz.size, plan.symbol_rate * 1e9)  # Hz
    a = attenuation_at(fibre, frequency_to_wavelength(f_thz)) / DB_PER_NEPER * 1e-3  # 1/m
    a_bar = a
    length = fibre.length * 1e3
    gamma = params.gamma * 1e-3  # 1/(W m)
    beta2, beta3 = params.betas()
    cr = fibre.raman.slope * (REFERENCE_AREA / fibre.effective_area) * 1e-3 * 1e-12  # 1/(W m Hz)

    ptot = p.sum()
    f_disp = (f_thz - params.reference_frequency) * 1e12
    f_isrs = (f_thz - np.sum(p * f_thz) / ptot) * 1e12
    if np.any(np.abs(f_thz - params.reference_frequency) > 15.0):
        logger.warning("channels more than 15 THz from the dispersion reference")

    kappa = ptot * cr * f_isrs / a_bar
    amps, rates = _profile_terms(a, a_bar, kappa, length)

    kappa_disp = 4 * math.pi**2 * (beta2 + 2 * math.pi * beta3 * f_disp)
    spm = 16.0 / 27.0 * gamma**2 / b**2 * _spm_integral(kappa_disp, 0.5 * b, amps, rates, length)

    # cross-phase: row i = channel of interest, column k = interferer
    fi = f_disp[:, None]
    fk = f_disp[None, :]
    phi_ik = np.abs(2 * math.pi**2 * (fk - fi) * (beta2 + math.pi * beta3 * (fi + fk)))
    np.fill_diagonal(phi_ik, 1.0)
    x = phi_ik * b[:, None]
    amps_k = tuple(am[None, :] for am in amps)
    rates_k = tuple(rm[None, :] for rm in rates)
    integral = _finite_span_xpm_integral(amps_k, rates_k, a[None, :], a_bar[None, :], x, length)
    term = (p[None, :] / p[:, None]) ** 2 * gamma**2 / (b[None, :] * phi_ik) * integral
    np.fill_diagonal(term, 0.0)
    xpm = 16.0 / 27.0 * term.sum(axis=1)

    eta = (spm + xpm) * params.span_count
    out[lit] = eta * p**3 * 1e3  # mW
    return NliEstimate(out, p_in)


def _segment_integral(log_amp, z, phase):
    """Exact integral of exp(log_amp(z) + j*phase*z) for piecewise-linear log_amp.

    ``log_amp`` has shape (..., nz) sampled at ``z`` (nz,); ``phase`` has the
    leading shape. Zero-length segments (point losses) contribute nothing.
    """
    h = np.diff(z)
    la0 = log_amp[..., :-1]
    slope = np.where(h > 0, np.diff(log_amp, axis=-1) / np.where(h > 0, h, 1.0), 0.0)
    s = slope + 1j * phase[..., None]
    sh = s * h
    small = np.abs(sh) < 1e-6
    ratio = np.where(small, h * (1 + 0.5 * sh), np.expm1(sh) / np.where(small, 1.0, s))
    return np.sum(np.exp(la0 + 1j * phase[..., None] * z[:-1]) * ratio, axis=-1)


def nli_integral_oracle(
    plan: ChannelPlan,
    fibre: FibreSpec,
    params: NliParams,
    nodes_per_channel: int = 48,
    z_step: float = 0.1,
    z_stride: int = 5,
    terms: str = "all",
) -> NliEstimate:
    """Numeric GN double integral for small plans.

    For each lit channel i the NLI PSD at its centre frequency is

        (16/27) gamma^2 ∬ G(f1) G(f2) G(f1+f2-fi) |mu(f1, f2)|^2 df1 df2

    with mu the z-integral of sqrt(rho1 rho2 rho3 / rho_i) exp(j phi z), rho
    being the normalised power profiles from :func:`propagate`. The frequency
    integral is trapezoidal on a grid with ``nodes_per_channel`` nodes across
    each channel; the z-integral treats each ``z_stride`` block of propagation
    samples as exponential, which is exact for pure attenuation.

    ``terms="spm_xpm"`` keeps only the self- and cross-channel regions of the
    integration domain (no multi-channel mixing), for diagnostics.
    """
    if terms not in ("all", "spm_xpm"):
        raise NliError(f"unknown terms selector {terms!r}")
    lit = plan.powers_mw > 0
    if lit.sum() > MAX_ORACLE_CHANNELS:
        raise NliError(
            f"oracle is limited to {MAX_ORACLE_CHANNELS} lit channels, plan has {int(lit.sum())}; "
            "use nli_closed_form for larger plans"
        )
    out = np.zeros(len(plan))
    p_launch = plan.powers_mw
    if not lit.any() or params.gamma == 0:
        return NliEstimate(out, _span_input(plan, fibre))

    evo = propagate(plan, fibre, step=z_step)
    z = evo.distances
    keep = np.unique(np.r_[np.arange(0, z.size, z_stride), z.size - 1,
                           np.flatnonzero(np.diff(z) == 0), np.flatnonzero(np.diff(z) == 0) + 1])
    z = z[keep]
    pw = evo.powers[keep][:, lit]
    with np.errstate(divide="ignore"):
        log_rho = np.log(pw / p_launch[lit][None, :]).T  # (ch, nz)
    # reference the NLI to the span input (after any z=0 loss), like the closed form
    p_in = _span_input(plan, fibre)
    start = int(np.flatnonzero(z == 0)[-1])
    log_rho_in = log_rho - log_rho[:, start:start + 1]
    z_int = z[start:]
    log_rho_in = log_rho_in[:, start:]

    f_thz = plan.frequencies[lit]
    bw = plan.symbol_rate * 1e-3  # THz
    psd = p_in[lit] * 1e-3 / (bw * 1e12)  # W/Hz
    gamma = params.gamma * 1e-3
    beta2, beta3 = params.betas()

    n = nodes_per_channel
    u = np.linspace(-0.5, 0.5, n + 1) * bw  # THz offsets inside a channel
    w = np.full(n + 1, bw / n)
    w[[0, -1]] *= 0.5
    grid = (f_thz[:, None] + u[None, :]).ravel()  # THz
    wts = np.tile(w, f_thz.size) * 1e12  # Hz
    owner = np.repeat(np.arange(f_thz.size), n + 1)
    lo_edges = f_thz - 0.5 * bw
    hi_edges = f_thz + 0.5 * bw

    result = np.zeros(f_thz.size)
    for i, fi in enumerate(f_thz):
        f1 = grid[:, None]
        f2 = grid[None, :]
        f3 = f1 + f2 - fi
        k3 = np.searchsorted(lo_edges, f3, side="right") - 1
        valid = (k3 >= 0) & (f3 <= hi_edges[np.clip(k3, 0, None)] + 1e-12)
        i1, i2 = np.nonzero(valid)
        kk3 = k3[i1, i2]
        k1 = owner[i1]
        k2 = owner[i2]
        if terms == "spm_xpm":
            sel = ((k1 == i) & (k2 == kk3)) | ((k2 == i) & (k1 == kk3))
            i1, i2, kk3, k1, k2 = i1[sel], i2[sel], kk3[sel], k1[sel], k2[sel]
        ff1 = grid[i1]
        ff2 = grid[i2]
        df1 = (ff1 - fi) * 1e12
        df2 = (ff2 - fi) * 1e12
        fs = (ff1 + ff2 - 2 * params.reference_frequency) * 1e12
        phase = -4 * math.pi**2 * df1 * df2 * (beta2 + math.pi * beta3 * fs)

        # exponent profile per (k1, k2, k3) triple, shared by many grid points
        codes = (k1 * f_thz.size + k2) * f_thz.size + kk3
        uniq, inv = np.unique(codes, return_inverse=True)
        u1 = uniq // f_thz.size**2
        u2 = (uniq // f_thz.size) % f_thz.size
        u3 = uniq % f_thz.size
        la = 0.5 * (log_rho_in[u1] + log_rho_in[u2] + log_rho_in[u3] - log_rho_in[i])
        mu = np.empty(i1.size, dtype=complex)
        for chunk in np.array_split(np.arange(i1.size), max(1, i1.size // 20000)):
            mu[chunk] = _segment_integral(la[inv[chunk]], z_int * 1e3, phase[chunk])
        integrand = psd[k1] * psd[k2] * psd[kk3] * np.abs(mu) ** 2
        g_nli = 16.0 / 27.0 * gamma**2 * np.sum(integrand * wts[i1] * wts[i2])
        result[i] = g_nli * bw * 1e12  # W in the channel bandwidth

    out[lit] = result * params.span_count * 1e3
    return NliEstimate(out, p_in)
