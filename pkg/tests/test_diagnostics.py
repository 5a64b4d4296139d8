import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab import diagnostics as diag
from mcflab import oracles
from mcflab.errors import HypothesisViolated, InvalidInput, UnsupportedFrame
from mcflab.frame import FlowHistory, build_curve_frame, build_rotational_frame, frame_from_profile
from mcflab.shapes import circle_points, ellipse_profile


def test_pinching_ratio_examples():
    assert diag.pinching_ratios(oracles.sphere_frame(2), 1)[0] == pytest.approx(0.5)
    assert diag.pinching_ratios(oracles.cylinder_frame(2, truncation=2.0), 1)[0] == 0.0
    assert diag.pinching_ratios(oracles.cylinder_frame(3, truncation=2.0), 2)[0] == pytest.approx(0.5)


def test_pinching_ties_break_at_lowest_index():
    assert diag.pinching_ratios(oracles.sphere_frame(3), 1)[1] == 0


def test_pinching_rejects_bad_input():
    f = oracles.sphere_frame(2)
    with pytest.raises(InvalidInput):
        diag.pinching_ratios(f, 2)
    with pytest.raises(HypothesisViolated):
        diag.pinching_ratios(f.replace_fields(H=-np.asarray(f.H)), 1)


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_pinching_is_scale_invariant(s):
    f = build_rotational_frame(ellipse_profile(1.4, 1.0, 81), 3)
    g = frame_from_profile(f, s * np.asarray(f.profile), 0.0)
    for k in (1, 2):
        assert diag.pinching_ratios(g, k)[0] == pytest.approx(diag.pinching_ratios(f, k)[0], rel=1e-12)


def test_inequality_chain_on_nonconvex_profile():
    x = np.linspace(-2, 2, 81)
    f = build_rotational_frame(np.column_stack([x, 1 - 0.4 * np.exp(-x**2)]), 3)
    assert diag.pinching_ratios(f, 1)[0] < 0
    assert diag.inequality_chain_holds(f, 1)


def test_sphere_history_has_no_violations():
    h = oracles.oracle_history(oracles.OracleSpec("sphere", 3), np.linspace(0, 0.1, 11))
    for k in (1, 2):
        assert diag.pinching_monotonicity(h, k).passed


def test_injected_drop_is_the_only_flag():
    h = oracles.oracle_history(oracles.OracleSpec("sphere", 2), np.linspace(0, 0.1, 11))
    frames = list(h.frames)
    f = frames[6]
    lam = np.array(f.lam)
    lam[:, 0] -= 0.05 * f.H
    lam[:, 1] += 0.05 * f.H
    frames[6] = f.replace_fields(lam=lam)
    rep = diag.pinching_monotonicity(FlowHistory(tuple(frames)), 1)
    assert [(a, b) for a, b, _ in rep.violations] == [(5, 6)]


def test_perturbed_run_pinching(perturbed_run):
    rep = diag.pinching_monotonicity(perturbed_run, 1)
    assert rep.passed
    assert rep.minima[-1] > rep.minima[0]


def test_diameter_examples():
    assert diag.diameter(oracles.sphere_frame(2)) == pytest.approx(2.0, abs=1e-6)
    assert diag.diameter(build_curve_frame(circle_points(1.0, 128))) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(UnsupportedFrame):
        diag.diameter(oracles.cylinder_frame(2, truncation=2.0))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_diameter_decay_sphere_margin(d):
    # an even sample count contains antipodal pairs, so the sampled diameter is exact
    h = oracles.oracle_history(oracles.OracleSpec("sphere", d, resolution=128), np.linspace(0, 0.1, 21))
    rep = diag.diameter_decay_check(h)
    assert rep.passed
    assert rep.worst_margin == pytest.approx(4 * d, rel=1e-6)


def test_diameter_decay_flags_growth():
    h = oracles.oracle_history(oracles.OracleSpec("sphere", 2), [0.0, 0.05])
    grown = h[1].replace_fields(profile=np.asarray(h[1].profile) * 2)
    assert not diag.diameter_decay_check(FlowHistory((h[0], grown))).passed


def test_ancient_sphere_conditions():
    h = oracles.oracle_history(oracles.OracleSpec("sphere", 2, ancient=True), np.linspace(-2, -0.1, 20))
    rep = diag.sphere_conditions(h)
    assert np.allclose(rep.maxH_diam, 4.0, atol=1e-9)
    assert np.allclose(rep.sqrt_neg_t_maxH, 1.0, atol=1e-9)
    assert np.allclose(rep.maxH_over_minH, 1.0, atol=1e-12)
    assert rep.window["maxH*diam"]["mean"] == pytest.approx(4.0)


def test_cylinder_conditions_flag_unsupported_diameter():
    h = oracles.oracle_history(oracles.OracleSpec("cylinder", 2, truncation=2.0), [0.0, 0.1])
    rep = diag.sphere_conditions(h)
    assert not rep.diameter_supported and np.all(np.isnan(rep.maxH_diam))
    assert np.allclose(rep.maxH_over_minH, 1.0)


def test_umbilicity_examples():
    assert diag.umbilicity_residual(oracles.sphere_frame(2)) < 1e-6
    assert diag.umbilicity_residual(oracles.cylinder_frame(2, truncation=2.0)) == pytest.approx(math.sqrt(0.5))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 5.0), min_size=2, max_size=4))
def test_umbilicity_zero_iff_equal(values):
    f = oracles.sphere_frame(len(values), resolution=33)
    lam = np.tile(np.sort(values), (f.n, 1))
    g = f.replace_fields(lam=lam, H=lam.sum(axis=1))
    resid = diag.umbilicity_residual(g)
    if np.ptp(values) == 0:
        assert resid == 0
    else:
        assert resid > 0
    equal = f.replace_fields(lam=np.full_like(lam, values[0]), H=np.full(f.n, values[0] * len(values)))
    assert diag.umbilicity_residual(equal) == pytest.approx(0.0, abs=1e-15)


def test_flatness_examples():
    cyl = oracles.oracle_history(oracles.OracleSpec("cylinder", 2, truncation=2.0), [0.0, 0.1])
    assert diag.flatness_profile(cyl, 1, [0.01, 0.1]) == {0.01: 1.0, 0.1: 1.0}
    sph = oracles.oracle_history(oracles.OracleSpec("sphere", 2), [0.0, 0.1])
    assert diag.flatness_profile(sph, 1, [0.1]) == {0.1: 1.0}
    # one offending sample with H / phi = 0.05 and Q_1 = -0.2
    f = sph[0]
    H = np.ones(f.n)
    H[3] = 0.05
    lam = np.tile([0.5, 0.5], (f.n, 1)) * H[:, None]
    lam[3] = [-0.01, 0.06]
    synth = FlowHistory((f.replace_fields(lam=lam, H=H),))
    assert diag.flatness_profile(synth, 1, [0.1])[0.1] == pytest.approx(0.05)


def test_rescaled_sphere_has_unit_curvature():
    h = oracles.oracle_history(oracles.OracleSpec("sphere", 2, ancient=True), np.linspace(-2, -0.5, 7))
    a, b = diag.rescale(h, [h.times[1], h.times[5]])
    assert a.maxH == pytest.approx(1.0, abs=1e-12) and a.t == 0.0
    assert np.allclose(a.positions, b.positions, atol=1e-9)
    assert np.allclose(a.H, b.H, atol=1e-9)


def test_rescaled_frames_respect_unit_bound(perturbed_run):
    h = perturbed_run
    times = h.times[[1, len(h) // 2, -1]]
    frames = diag.rescale(h, times)
    assert all(f.maxH <= 1 + 1e-9 for f in frames)
    # the selected point sits at the origin
    for f, t in zip(frames, times):
        p = diag.pinching_ratios(h[h.index_of(t)], 1)[1]
        assert np.allclose(f.positions[p], 0.0, atol=1e-12)


def test_rescaled_umbilicity_decreases(perturbed_run):
    h = perturbed_run
    idx = np.linspace(0, len(h) - 1, 6).astype(int)
    resid = [diag.umbilicity_residual(f) for f in diag.rescale(h, h.times[idx])]
    assert all(b < a for a, b in zip(resid, resid[1:]))


def test_rescale_selector_validation():
    h = oracles.oracle_history(oracles.OracleSpec("sphere", 2), [0.0, 0.1])
    with pytest.raises(InvalidInput):
        diag.rescale(h, [0.0], selector=10_000)
    with pytest.raises(InvalidInput):
        diag.rescale(h, [0.0], selector="middle")
    with pytest.raises(InvalidInput):
        diag.rescale(h, [0.05])
