import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from archseg.bezier import (
    BezierCurve,
    arc_length,
    arc_length_params,
    bezier_derivative,
    bezier_eval,
    bezier_sample_uniform,
    fit_bezier,
    reparametrize,
)


def arch_like_curve(seed):
    """Random curve with monotone-x control points (a jaw-like open arc)."""
    rng = np.random.default_rng(seed)
    ctrl = rng.uniform(-1, 1, (4, 3))
    ctrl[:, 0] = np.sort(rng.uniform(-1, 1, 4))
    return BezierCurve(ctrl)


LINE = BezierCurve(np.array([[0.0, 0, 0], [1 / 3, 0, 0], [2 / 3, 0, 0], [1.0, 0, 0]]))


class TestEval:
    def test_endpoints(self):
        c = arch_like_curve(0)
        assert np.allclose(bezier_eval(c, np.array([0.0]))[0], c.control[0])
        assert np.allclose(bezier_eval(c, np.array([1.0]))[0], c.control[3])

    def test_convex_hull(self):
        c = arch_like_curve(1)
        t = np.linspace(0, 1, 101)
        pts = bezier_eval(c, t)
        lo, hi = c.control.min(axis=0), c.control.max(axis=0)
        assert (pts >= lo - 1e-12).all() and (pts <= hi + 1e-12).all()

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            bezier_eval(arch_like_curve(0), np.array([1.2]))

    def test_derivative_finite_difference(self):
        c = arch_like_curve(2)
        t = np.linspace(0.1, 0.9, 9)
        h = 1e-6
        fd = (bezier_eval(c, t + h) - bezier_eval(c, t - h)) / (2 * h)
        assert np.allclose(bezier_derivative(c, t), fd, atol=1e-6)


class TestArcLength:
    def test_straight_line(self):
        assert arc_length(LINE) == pytest.approx(1.0, rel=1e-9)

    def test_uniform_sampling_even_spacing(self):
        c = arch_like_curve(3)
        pts = bezier_sample_uniform(c, 32)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        assert seg.std() / seg.mean() < 0.01

    def test_arc_length_params_inverts_fractions(self):
        # on a straight line, parameter equals arc-length fraction
        t = arc_length_params(LINE, np.array([0.25, 0.5, 0.75]))
        assert np.allclose(t, [0.25, 0.5, 0.75], atol=1e-6)


class TestReparametrize:
    def test_identity(self):
        c = arch_like_curve(4)
        r = reparametrize(c, 0.0, 1.0)
        assert np.allclose(r.control, c.control, atol=1e-12)

    def test_segment_matches_curve(self):
        c = arch_like_curve(5)
        r = reparametrize(c, 0.2, 0.7)
        s = np.linspace(0, 1, 11)
        assert np.allclose(
            bezier_eval(r, s), bezier_eval(c, 0.2 + s * 0.5), atol=1e-12
        )


class TestFit:
    @pytest.mark.parametrize("seed", range(8))
    def test_round_trip_exact_samples(self, seed):
        c = arch_like_curve(seed)
        targets = bezier_eval(c, np.linspace(0, 1, 16))
        fitted, residual = fit_bezier(targets)
        assert residual < 1e-8
        t = np.linspace(0, 1, 64)
        dev = np.linalg.norm(bezier_eval(fitted, t) - bezier_eval(c, t), axis=1)
        assert dev.max() < 1e-6

    def test_residual_reported_matches_targets(self):
        c = arch_like_curve(20)
        targets = bezier_eval(c, np.linspace(0, 1, 10)) + 0.005
        # constant offset: curve shifts, residual ~0
        fitted, residual = fit_bezier(targets)
        assert residual < 1e-6

    def test_noisy_fit_bounded(self):
        rng = np.random.default_rng(6)
        c = arch_like_curve(6)
        sigma = 0.01
        targets = bezier_eval(c, np.linspace(0, 1, 24)) + rng.normal(
            0, sigma, (24, 3)
        )
        _, residual = fit_bezier(targets)
        assert residual < 2 * sigma

    def test_too_few_targets(self):
        with pytest.raises(ValueError):
            fit_bezier(np.zeros((3, 3)))

    @given(st.integers(0, 10_000))
    @settings(max_examples=15, deadline=None)
    def test_round_trip_property(self, seed):
        c = arch_like_curve(seed)
        targets = bezier_eval(c, np.linspace(0, 1, 16))
        _, residual = fit_bezier(targets)
        assert residual < 1e-7
