"""Placeholder geometrically shaped constellations.

Builds separable GS-QAM sets as the product of two Gray-labelled PAMs whose
level positions maximise the bit-metric GMI at a design SNR. With Gray
labels on each axis the bit metrics of a product constellation factor per
axis, so the 2-D GMI is the sum of two 1-D GMIs, each evaluated exactly by
Gauss-Hermite quadrature.

Run ``python -m sclwdm.shaping <outdir>`` to regenerate the bundled files.
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .gmi import Constellation, gray_pam, product_constellation

GH_NODES = 48


def pam_gmi(levels, labels, energy: float, snr_db: float, nodes: int = GH_NODES) -> float:
    """Bit-metric GMI of a 1-D PAM carrying ``energy`` of a unit-energy 2-D set.

    Noise per real dimension has variance N0/2 with N0 = 1/snr, and the
    decoder metric is exp(-(y - x)^2 / N0).
    """
    x = np.asarray(levels, dtype=float)
    x = x * math.sqrt(energy / np.mean(x**2))
    n0 = 10 ** (-snr_db / 10)
    t, w = np.polynomial.hermite.hermgauss(nodes)
    w = w / math.sqrt(math.pi)
    # y[a, q] = x_a + sqrt(N0) t_q
    y = x[:, None] + math.sqrt(n0) * t[None, :]
    metric = -((y[:, :, None] - x[None, None, :]) ** 2) / n0
    lse_all = logsumexp(metric, axis=2)
    k = labels.shape[1]
    loss = 0.0
    for b in range(k):
        col = labels[:, b].astype(bool)
        for v in (False, True):
            sel = col == v
            lse_b = logsumexp(metric[:, :, sel], axis=2)
            rows = np.flatnonzero(sel)
            loss += np.sum(w[None, :] * (lse_all[rows] - lse_b[rows]))
    return k - loss / (x.size * math.log(2))


def _levels_from_params(theta, n):
    # positive half of a symmetric PAM from positive increments
    steps = np.exp(theta)
    pos = np.cumsum(steps) - 0.5 * steps[0]
    return np.concatenate([-pos[::-1], pos]) if n > 1 else pos


def optimise_pam(n: int, energy: float, snr_db: float, iters: int = 400):
    """Symmetric Gray-labelled ``n``-PAM maximising 1-D GMI at ``snr_db``."""
    _, labels = gray_pam(n)
    theta0 = np.zeros(n // 2)

    def cost(theta):
        return -pam_gmi(_levels_from_params(theta, n), labels, energy, snr_db)

    res = minimize(cost, theta0, method="L-BFGS-B", options={"maxiter": iters})
    levels = _levels_from_params(res.x, n)
    levels = levels * math.sqrt(energy / np.mean(levels**2))
    return levels, labels, -res.fun


def gs_qam(n_i: int, n_q: int, snr_db: float, name: str) -> Constellation:
    """Separable GS-QAM with ``n_i`` x ``n_q`` points designed at ``snr_db``.

    For unequal axes the energy split between I and Q is optimised as well.
    """
    if n_i == n_q:
        li, lab_i, _ = optimise_pam(n_i, 0.5, snr_db)
        return product_constellation(li, lab_i, li, lab_i, name)
    best = None
    for e_i in np.linspace(0.48, 0.60, 4):
        li, lab_i, g_i = optimise_pam(n_i, e_i, snr_db)
        lq, lab_q, g_q = optimise_pam(n_q, 1.0 - e_i, snr_db)
        if best is None or g_i + g_q > best[0]:
            best = (g_i + g_q, li, lab_i, lq, lab_q)
    _, li, lab_i, lq, lab_q = best
    return product_constellation(li, lab_i, lq, lab_q, name)


BUNDLED = {
    "gs1024.txt": (32, 32, 19.0),
    "gs2048.txt": (64, 32, 22.0),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description="regenerate the bundled shaped constellations")
    ap.add_argument("outdir", nargs="?", default=str(Path(__file__).parent / "data"))
    ap.add_argument("--only", nargs="*", help="regenerate only these files")
    args = ap.parse_args(argv)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for fname, (n_i, n_q, snr) in BUNDLED.items():
        if args.only and fname not in args.only:
            continue
        c = gs_qam(n_i, n_q, snr, Path(fname).stem)
        header = f"# separable GS-{c.size}QAM, {n_i}x{n_q} Gray PAM, designed at {snr:g} dB\n"
        with open(out / fname, "w", newline="\n") as fh:
            fh.write(header + c.to_text())
        print(f"wrote {out / fname}")


if __name__ == "__main__":
    main()
