import math

import numpy as np
import pytest

from pinr.geometry import make_grid, rotate_coords
from pinr.phantom import (AnalyticPhantom, B0Model, Ellipse, EmptyMaskError, FieldRangeError,
                          GaussianBump, InvalidCountError, eval_phantom, make_b0, make_coils,
                          rotate_phantom_params, shepp_logan, support_mask)
from pinr.train import tv_regularizer


def unit_disk(intensity=1.0):
    return AnalyticPhantom([Ellipse(0.0, 0.0, 0.3, 0.3, 0.0, intensity)])


def test_point_inside_and_outside():
    ph = unit_disk()
    assert eval_phantom(ph, [[0.0, 0.0]])[0] == 1 + 0j
    assert eval_phantom(ph, [[0.49, 0.49]])[0] == 0


def test_overlap_is_additive():
    ph = AnalyticPhantom([Ellipse(0, 0, 0.3, 0.2, 0, 1.0), Ellipse(0.05, 0, 0.1, 0.1, 0, 0.2j)])
    assert eval_phantom(ph, [[0.05, 0.0]])[0] == 1 + 0.2j


def test_tilt_moves_long_axis():
    ph = AnalyticPhantom([Ellipse(0, 0, 0.3, 0.05, 90.0, 1.0)])
    assert eval_phantom(ph, [[0.0, 0.25]])[0] == 1
    assert eval_phantom(ph, [[0.25, 0.0]])[0] == 0


def test_phantom_validation():
    with pytest.raises(ValueError):
        AnalyticPhantom([])
    with pytest.raises(ValueError):
        Ellipse(0, 0, 0.0, 0.1)


def test_shepp_logan_magnitude_finite_nonnegative():
    img = eval_phantom(shepp_logan(), make_grid(64, 64))
    assert np.all(np.isfinite(img))
    assert abs(img).max() == pytest.approx(1.0, abs=0.05)
    # support inscribed in the field of view so every rotation keeps it inside
    g = make_grid(128, 128)
    r = np.linalg.norm(g.coords, axis=1).reshape(g.shape)
    assert np.all(np.abs(eval_phantom(shepp_logan(), g))[r > 0.45] == 0)


@pytest.mark.parametrize("theta", [90.0, 120.0, 180.0, 240.0, 37.0])
def test_rotation_equivariance(theta):
    ph = shepp_logan()
    g = make_grid(64, 64)
    lhs = eval_phantom(ph, rotate_coords(g, theta))
    rhs = eval_phantom(rotate_phantom_params(ph, -theta), g)
    np.testing.assert_array_equal(lhs, rhs)


def test_zero_field():
    fm = make_b0([], [], make_grid(8, 8))
    assert np.all(fm.values == 0)


def test_bump_peak_and_falloff():
    bump = GaussianBump(0.1, -0.1, 0.05, 150.0)
    model = B0Model((), (bump,))
    assert model.evaluate([[0.1, -0.1]])[0] == 150.0
    # oracle: scalar Gaussian at one sigma
    expected = 150.0 * math.exp(-0.5)
    assert expected == pytest.approx(90.98, abs=5e-3)
    assert model.evaluate([[0.15, -0.1]])[0] == pytest.approx(expected, rel=1e-12)


def test_polynomial_terms():
    model = B0Model((1.0, 2.0, 3.0, 4.0, 5.0, 6.0))
    x, y = 0.2, -0.3
    assert model.evaluate([[x, y]])[0] == pytest.approx(1 + 2 * x + 3 * y + 4 * x * x + 5 * x * y + 6 * y * y)


def test_field_range_errors():
    g = make_grid(16, 16)
    with pytest.raises(FieldRangeError):
        make_b0([], [GaussianBump(0, 0, 0.1, 600.0)], g)
    with pytest.raises(FieldRangeError):
        make_b0([], [GaussianBump(0, 0, 0.1, 300.0), GaussianBump(0, 0, 0.1, 300.0)], g)


@pytest.mark.parametrize("theta", [30.0, 90.0, 120.0, 200.0])
def test_field_rotation_matches_rotated_query(theta):
    model = B0Model((5.0, 20.0, -15.0, 40.0, 10.0, -30.0, 7.0), (GaussianBump(-0.1, 0.1, 0.06, 150.0),))
    g = make_grid(32, 32)
    np.testing.assert_allclose(model.evaluate(rotate_coords(g, theta)),
                               model.rotated(-theta).evaluate(g), atol=1e-12)


def test_field_tv_decreases_with_resolution():
    model_args = ((5.0, 20.0, -15.0), [GaussianBump(0.0, 0.1, 0.08, 120.0)])
    tvs = [tv_regularizer(make_b0(*model_args, make_grid(n, n)).values) for n in (16, 32, 64)]
    assert tvs[0] > tvs[1] > tvs[2]


def test_single_coil_is_unit():
    g = make_grid(32, 32)
    c = make_coils(g, 1, seed=3)
    np.testing.assert_allclose(np.abs(c.maps), 1.0, atol=1e-12)


def test_coil_normalization():
    g = make_grid(48, 48)
    c = make_coils(g, 8, seed=0)
    mask = support_mask(eval_phantom(shepp_logan(), g))
    np.testing.assert_allclose(np.sum(np.abs(c.maps) ** 2, axis=0)[mask], 1.0, atol=1e-6)


def test_coil_determinism():
    g = make_grid(16, 16)
    a, b, other = make_coils(g, 8, 1), make_coils(g, 8, 1), make_coils(g, 8, 2)
    np.testing.assert_array_equal(a.maps, b.maps)
    assert not np.allclose(a.maps, other.maps)


def test_zero_coils_rejected():
    with pytest.raises(InvalidCountError):
        make_coils(make_grid(8, 8), 0)


def test_support_mask_examples():
    img = np.array([0.0, 0.5, 1.0])
    np.testing.assert_array_equal(support_mask(img, 0.05), [False, True, True])
    np.testing.assert_array_equal(support_mask(img, 0.6), [False, False, True])
    assert support_mask(np.full((4, 4), 2.0 - 1j)).all()
    with pytest.raises(EmptyMaskError):
        support_mask(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        support_mask(img, 1.5)
