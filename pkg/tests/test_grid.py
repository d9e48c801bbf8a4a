import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastdiff.grid import (Field, GridError, build_grid, from_function, lr_norm, mass, read_field_csv,
                           resample, second_moment, write_field_csv, zeros)
from fastdiff.params import ModelParams
from fastdiff.profiles import rho_profile


def test_single_cell_disk():
    g = build_grid(2, 1.0, 1)
    assert g.cells == 1
    assert g.volumes[0] == pytest.approx(math.pi)


def test_ball_volume_sum():
    g = build_grid(3, 2.0, 16)
    assert g.volumes.sum() == pytest.approx(4.0 / 3.0 * math.pi * 8.0, rel=1e-14)


def test_geometric_width_ratio():
    g = build_grid(2, 10.0, 256, "geometric(1.02)")
    assert np.all(np.diff(g.faces) > 0.0)
    assert g.widths[-1] / g.widths[0] == pytest.approx(1.02**255, rel=1e-10)
    assert g.R_max == 10.0


def test_refined_halves_every_width():
    g = build_grid(2, 5.0, 40, "geometric(1.05)")
    fine = g.refined()
    assert fine.cells == 80
    np.testing.assert_allclose(fine.widths[::2], g.widths / 2)
    assert fine.volumes.sum() == pytest.approx(g.volumes.sum(), rel=1e-14)


@pytest.mark.parametrize("bad", [dict(n=1, R_max=1.0, cells=4), dict(n=2, R_max=0.0, cells=4),
                                 dict(n=2, R_max=1.0, cells=0)])
def test_bad_grids(bad):
    with pytest.raises(GridError):
        build_grid(**bad)


def test_bad_grading():
    with pytest.raises(GridError):
        build_grid(2, 1.0, 4, "chebyshev")


def test_field_rejects_negative_and_wrong_shape():
    g = build_grid(2, 1.0, 4)
    with pytest.raises(ValueError):
        Field(g, np.array([1.0, -1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        Field(g, np.ones(3))


def test_mass_of_constant_and_zero():
    g = build_grid(2, 3.0, 50, "geometric(1.03)")
    assert mass(from_function(g, lambda r: np.full_like(r, 2.5))) == pytest.approx(2.5 * math.pi * 9.0, rel=1e-13)
    assert mass(zeros(g)) == 0.0


def test_indicator_l2():
    g = build_grid(2, 4.0, 8)
    vals = np.zeros(8)
    vals[0] = 2.0
    assert lr_norm(Field(g, vals), 2.0) == pytest.approx(2.0 * math.sqrt(g.volumes[0]))


def test_barenblatt_peak_and_mass():
    params = ModelParams(2, 0.75, 2.0)
    theta = (432.0 * math.pi) ** (1.0 / 3.0)
    g = build_grid(2, 400.0, 4096, "geometric(1.002)")
    f = rho_profile(theta, params, g)
    # sup over centers sits at the first center; the continuum peak is (gamma/theta)^4
    assert lr_norm(f, math.inf) == pytest.approx((6.0 / theta) ** 4, rel=1e-5)
    # tail beyond 400: int 2 pi r 6^4 r^-8 dr = 2 pi 6^4 / (6 * 400^6)
    tail = 2.0 * math.pi * 6.0**4 / (6.0 * 400.0**6)
    assert mass(f) == pytest.approx(1.0 - tail, rel=1e-5)


def test_second_moment_constant_and_profile():
    g = build_grid(2, 2.0, 2000)
    const = from_function(g, lambda r: np.full_like(r, 3.0))
    assert second_moment(const) == pytest.approx(3.0 * math.pi * 2.0**4 / 2.0, rel=1e-6)
    assert second_moment(zeros(g)) == 0.0

    from scipy.integrate import quad
    params = ModelParams(2, 0.75, 2.0)
    theta = (432.0 * math.pi) ** (1.0 / 3.0)
    R = 200.0
    oracle = quad(lambda r: 2 * math.pi * r**3 * (6.0 / (r * r + theta)) ** 4, 0.0, R, limit=200)[0]
    g = build_grid(2, R, 4096, "geometric(1.002)")
    assert second_moment(rho_profile(theta, params, g)) == pytest.approx(oracle, rel=1e-5)


def test_field_csv_round_trip(tmp_path):
    g = build_grid(3, 7.0, 33, "geometric(1.01)")
    f = from_function(g, lambda r: np.exp(-r))
    back, header = read_field_csv(write_field_csv(f, tmp_path / "f.csv", t=0.5))
    np.testing.assert_array_equal(back.values, f.values)
    np.testing.assert_array_equal(back.grid.faces, g.faces)
    assert header["t"] == 0.5


def test_resample_identity_on_same_grid():
    g = build_grid(2, 5.0, 64)
    f = from_function(g, lambda r: 1.0 / (1.0 + r**2))
    np.testing.assert_allclose(resample(f, g).values, f.values)


values = st.lists(st.floats(0.0, 1e6), min_size=1, max_size=40)


@settings(max_examples=60)
@given(values, st.floats(1e-3, 1e3))
def test_norms_are_homogeneous(vals, c):
    g = build_grid(2, 3.0, len(vals))
    f = Field(g, np.array(vals))
    scaled = f * c
    assert mass(scaled) == pytest.approx(c * mass(f), rel=1e-12, abs=1e-300)
    assert second_moment(scaled) == pytest.approx(c * second_moment(f), rel=1e-12, abs=1e-300)
    for r in (1.0, 2.0, 3.5, math.inf):
        assert lr_norm(scaled, r) == pytest.approx(c * lr_norm(f, r), rel=1e-10, abs=1e-300)
    assert lr_norm(f, 1.0) == mass(f)


def test_lr_norm_second_order_on_smooth_density():
    exact = math.pi  # int_R2 exp(-r^2)
    errs = []
    for cells in (200, 400, 800):
        g = build_grid(2, 8.0, cells)
        errs.append(abs(mass(from_function(g, lambda r: np.exp(-r * r))) - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)
