import numpy as np
import pytest

from sclwdm.gmi import gmi_monte_carlo, gray_pam, square_qam
from sclwdm.scenario import constellation_from_ref
from sclwdm.shaping import optimise_pam, pam_gmi


def test_uniform_pam_quadrature_matches_monte_carlo():
    # square QAM is two Gray PAMs, so its GMI is twice the per-axis value
    lv, lab = gray_pam(8)
    quad = 2 * pam_gmi(lv, lab, 0.5, 15.0)
    mc = gmi_monte_carlo(square_qam(64), 15.0, samples=200_000, seed=5)
    assert quad == pytest.approx(mc, abs=0.01)


def test_optimised_pam_beats_uniform():
    lv, lab = gray_pam(16)
    uniform = pam_gmi(lv, lab, 0.5, 14.0)
    _, _, shaped = optimise_pam(16, 0.5, 14.0, iters=100)
    assert shaped > uniform + 0.01


@pytest.mark.parametrize("name, size", [("gs1024", 1024), ("gs2048", 2048)])
def test_bundled_sets_load(name, size):
    c = constellation_from_ref(f"builtin:{name}")
    assert c.size == size
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)


def test_shaped_1024_beats_square_at_design_snr():
    gs = constellation_from_ref("builtin:gs1024")
    sq = square_qam(1024)
    g = gmi_monte_carlo(gs, 19.0, 100_000, seed=2)
    assert g > gmi_monte_carlo(sq, 19.0, 100_000, seed=2)
