import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab import oracles
from mcflab.errors import InvalidInput, InvalidProfile, UnsupportedFrame
from mcflab.frame import (
    FlowHistory,
    build_curve_frame,
    build_rotational_frame,
    frame_diameter,
    resample_arclength,
)
from mcflab.shapes import circle_points, ellipse_points, ellipse_profile, semicircle_profile


def _ellipse_closed_forms(a, b):
    """Curvature and its first two arclength derivatives, via sympy."""
    th = sp.symbols("theta")
    x, y = a * sp.cos(th), b * sp.sin(th)
    speed = sp.sqrt(sp.diff(x, th) ** 2 + sp.diff(y, th) ** 2)
    kappa = (sp.diff(x, th) * sp.diff(y, th, 2) - sp.diff(y, th) * sp.diff(x, th, 2)) / speed**3
    ks = sp.diff(kappa, th) / speed
    kss = sp.diff(ks, th) / speed
    return [sp.lambdify(th, e, "numpy") for e in (kappa, ks, kss)]


def test_unit_circle_curvature():
    f = build_curve_frame(circle_points(1.0, 256))
    assert f.d == 1 and f.rep == "curve" and f.closed
    assert np.max(np.abs(f.H - 1.0)) < 1e-6
    assert np.max(np.abs(f.gradH)) < 1e-6


def test_clockwise_input_is_reoriented():
    f = build_curve_frame(circle_points(2.0, 128)[::-1])
    assert np.all(f.H > 0)
    assert np.max(np.abs(f.H - 0.5)) < 1e-6


def test_sphere_profile_curvatures():
    f = build_rotational_frame(semicircle_profile(1.0, 101), 2)
    assert f.poles == (True, True) and f.closed
    assert np.max(np.abs(f.lam - 1.0)) < 1e-6
    assert np.max(np.abs(f.H - 2.0)) < 1e-6


def test_cylinder_profile_curvatures():
    P = np.column_stack([np.linspace(-2, 2, 41), np.full(41, 1.0)])
    f = build_rotational_frame(P, 2)
    assert not f.closed and f.poles == (False, False)
    assert np.allclose(f.lam, [0.0, 1.0], atol=1e-12)


def test_ellipsoid_equator_mean_curvature():
    # semi-axes: 1.2 along the axis, 1 across; at the equator the profile
    # curvature is b/a^2 and the rotational curvature is 1/b
    f = build_rotational_frame(ellipse_profile(1.2, 1.0, 201), 2)
    eq = f.n // 2
    assert f.H[eq] == pytest.approx(1.0 / 1.44 + 1.0, abs=1e-6)


def test_ellipse_fields_converge_at_fourth_order():
    a, b = 1.5, 1.0
    kap, ks, kss = _ellipse_closed_forms(a, b)
    errs = []
    for n in (64, 128):
        th = np.arange(n) * 2 * np.pi / n
        f = build_curve_frame(ellipse_points(a, b, n), resample=False)
        errs.append((
            np.max(np.abs(f.H - kap(th))),
            np.max(np.abs(f.gradH[:, 0] - ks(th))),
            np.max(np.abs(f.lapH - kss(th))),
        ))
    for coarse, fine in zip(*errs):
        assert coarse / fine > 8.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0))
def test_curvature_scales_inversely_with_size(s):
    base = build_curve_frame(circle_points(1.0, 64), resample=False)
    scaled = build_curve_frame(circle_points(s, 64), resample=False)
    assert np.allclose(scaled.H * s, base.H, rtol=1e-10)
    assert np.allclose(scaled.lapH * s**3, base.lapH, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 63), st.floats(-5, 5), st.floats(-5, 5))
def test_cyclic_shift_and_translation_invariance(shift, dx, dy):
    P = ellipse_points(1.3, 0.8, 64)
    f = build_curve_frame(P, resample=False)
    g = build_curve_frame(np.roll(P, shift, axis=0) + [dx, dy], resample=False)
    assert np.allclose(np.roll(f.H, shift), g.H, atol=1e-9)


def test_principal_curvatures_sorted():
    f = build_rotational_frame(ellipse_profile(1.5, 1.0, 101), 3)
    assert np.all(np.diff(f.lam, axis=1) >= 0)


def test_resampling_preserves_curvature_and_length():
    f = build_curve_frame(circle_points(1.0, 256))
    g = resample_arclength(f, 128)
    assert g.n == 128
    assert np.max(np.abs(g.H - 1.0)) < 1e-5
    assert g.length == pytest.approx(2 * math.pi, rel=1e-8)


def test_diameter_values():
    assert frame_diameter(build_curve_frame(circle_points(1.0, 128))) == pytest.approx(2.0, abs=1e-6)
    assert frame_diameter(build_rotational_frame(semicircle_profile(1.0, 81), 2)) == pytest.approx(2.0, abs=1e-6)
    assert frame_diameter(build_rotational_frame(ellipse_profile(1.2, 1.0, 129), 2)) == pytest.approx(2.4, abs=1e-4)


def test_open_frame_has_no_diameter():
    f = oracles.grim_reaper_frame(t=0.0, truncation=1.2, resolution=128)
    assert f.diameter is None
    with pytest.raises(UnsupportedFrame):
        frame_diameter(f)


def test_pole_samples_are_umbilic_and_flagged():
    f = build_rotational_frame(ellipse_profile(1.3, 1.0, 81), 2)
    assert f.pole_mask()[0] and f.pole_mask()[-1]
    assert np.all(f.gradH[0] == 0) and f.lam[0, 0] == pytest.approx(f.lam[0, 1], rel=1e-5)


@pytest.mark.parametrize(
    "points, message",
    [
        (circle_points(1.0, 8), "too few"),
        (np.vstack([circle_points(1.0, 32)[:-1], [[np.nan, 0.0]]]), "non-finite"),
        (np.vstack([circle_points(1.0, 32), circle_points(1.0, 32)[-1:]]), "repeated"),
    ],
)
def test_invalid_curves_rejected(points, message):
    with pytest.raises(InvalidInput, match=message):
        build_curve_frame(points)


def test_invalid_profiles_rejected():
    P = semicircle_profile(1.0, 41)
    bad = P.copy()
    bad[5, 1] = -0.1
    with pytest.raises(InvalidProfile):
        build_rotational_frame(bad, 2)
    slanted = np.column_stack([np.linspace(0, 1, 41), np.linspace(0, 1, 41)])
    with pytest.raises(InvalidProfile):
        build_rotational_frame(slanted, 2)
    with pytest.raises(InvalidInput):
        build_rotational_frame(P, 1)


def test_frames_are_read_only():
    f = build_curve_frame(circle_points(1.0, 64))
    with pytest.raises(ValueError):
        f.H[0] = 3.0


def test_history_rejects_unordered_times():
    f0 = oracles.sphere_frame(2, t=0.1)
    f1 = oracles.sphere_frame(2, t=0.0)
    with pytest.raises(InvalidInput):
        FlowHistory((f0, f1))
