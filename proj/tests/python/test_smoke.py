import math
from pathlib import Path

import numpy as np
import pytest

import lensdeg

DATA = Path(__file__).resolve().parents[2] / "data"


@pytest.fixture(scope="module")
def doublet():
    return lensdeg.load_prescription(str(DATA / "doublet.lens"))


def test_paraxial(doublet):
    s = lensdeg.paraxial_solve(doublet)
    assert s["efl_mm"] == pytest.approx(100.0, abs=0.01)
    single = lensdeg.parse_prescription(
        "wavelengths 550\nfields 0\nreference 550\nglass G constant 1.5\n"
        "0 obj AIR 10 40 0\n1 s1 G 1 40 50\n2 stop G 149 10 0\n3 img G 0 40 0\n"
    )
    assert lensdeg.paraxial_solve(single)["efl_mm"] == pytest.approx(150.0, rel=1e-12)


def test_psf_is_unit_sum(doublet):
    psf, pitch = lensdeg.compute_psf(doublet, 0.0, 1.0, 531.0, size=64, pupil_samples=32)
    assert psf.shape == (64, 64)
    assert pitch > 0
    assert psf.sum() == pytest.approx(1.0, abs=1e-9)
    assert (psf >= 0).all()
    assert lensdeg.rmse(psf, psf) == 0.0


def test_export_round_trip(tmp_path, doublet):
    psf, pitch = lensdeg.compute_psf(doublet, 0.0, 0.0, 656.0, size=32, pupil_samples=32)
    lensdeg.export_psf(psf, pitch, 656.0, str(tmp_path / "p"))
    back, back_pitch, nm = lensdeg.load_reference_psf(str(tmp_path / "p.json"))
    assert np.array_equal(back, psf)
    assert (back_pitch, nm) == (pitch, 656.0)


def test_chart_edge_oracle():
    image, rois = lensdeg.make_test_chart(480, 288, blur_sigma_px=1.0)
    assert image.shape == (288, 480, 3)
    assert len(rois) == 15
    expected = math.sqrt(math.log(2) / 2) / (math.pi * 1.0)
    assert lensdeg.mtf50(np.ascontiguousarray(image[:, :, 0]), rois[0]) == pytest.approx(expected, rel=0.05)


def test_delta_grid_is_identity():
    rng = np.random.default_rng(3)
    image = rng.random((48, 64, 3), dtype=np.float32)
    grid = np.zeros((3, 4, 16, 16))
    grid[:, :, 8, 8] = 1.0
    out = lensdeg.degrade_image(image, [grid, grid, grid], [656.0, 531.0, 486.0])
    assert np.array_equal(out, image)
    assert lensdeg.mean_brightness(out) == pytest.approx(lensdeg.mean_brightness(image))


def test_error_mapping(doublet):
    with pytest.raises(OSError):
        lensdeg.load_prescription("/nonexistent/lens.txt")
    with pytest.raises(ValueError):
        lensdeg.parse_prescription("not a lens")
    with pytest.raises(ValueError):
        lensdeg.rmse(np.zeros(3), np.zeros(4))
    with pytest.raises(ArithmeticError):
        lensdeg.render_psf_grid(doublet, 1, 2, 60.0, 531.0, cell_px=32, pupil_samples=16)
