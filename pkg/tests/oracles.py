"""Independent reference computations shared by the tests."""

import math

import numpy as np


def gh_gmi_2d(c, snr_db, nodes=40):
    """Bit-metric GMI by tensor Gauss-Hermite quadrature over complex AWGN."""
    n0 = 10 ** (-snr_db / 10)
    t, w = np.polynomial.hermite.hermgauss(nodes)
    w = w / math.sqrt(math.pi)
    tt = (t[:, None] + 1j * t[None, :]).ravel()
    ww = (w[:, None] * w[None, :]).ravel()
    x = c.points
    loss = 0.0
    for a in range(c.size):
        y = x[a] + math.sqrt(n0) * tt
        metric = -np.abs(y[:, None] - x[None, :]) ** 2 / n0
        top = metric.max(axis=1, keepdims=True)
        e = np.exp(metric - top)
        tot = e.sum(axis=1)
        for k in range(c.bits):
            same = c.labels[:, k] == c.labels[a, k]
            loss += np.sum(ww * np.log2(tot / e[:, same].sum(axis=1)))
    return c.bits - loss / c.size


def flat_shannon_tbps(counts, snr_db, symbol_rate=32.0):
    """Dual-polarisation Shannon aggregate for per-band channel counts and SNRs."""
    total = 0.0
    for band, n in counts.items():
        total += n * 2 * symbol_rate * math.log2(1 + 10 ** (snr_db[band] / 10))
    return total / 1e3
