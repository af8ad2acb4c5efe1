import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from postal_hw import beta_elliptic as be
from postal_hw.errors import DegenerateGeometryError, FitFailure, InvalidInputError
from postal_hw.trajectory import VelocityProfile


def beta_params():
    return st.builds(
        lambda t0, dur, p, q, k: be.BetaParams(t0, t0 + dur, p, q, k),
        st.floats(-50, 50), st.floats(0.1, 50), st.floats(0.1, 20), st.floats(0.1, 20), st.floats(0.01, 100))


# Beta law --------------------------------------------------------------

def test_beta_eval_examples():
    assert be.beta_eval(1.0, be.BetaParams(0, 2, 1, 1, 1)) == 1.0
    bp = be.BetaParams(0.3, 4.1, 2.7, 0.9, 1.0)
    assert be.beta_eval(bp.tc, bp) == pytest.approx(1.0, abs=1e-12)
    assert be.beta_eval(2.5, be.BetaParams(0, 2, 1, 1, 1)) == 0.0
    assert be.beta_eval(0.5, be.BetaParams(0, 2, 1, 1, 1)) == 0.75


def test_inflexion_examples():
    assert be.inflexion_time(be.BetaParams(1, 5, 2.5, 2.5)) == 3.0
    assert be.inflexion_time(be.BetaParams(0, 4, 3, 1)) == 3.0
    assert be.inflexion_time(be.BetaParams(0, 4, 1, 3)) == 1.0


@pytest.mark.parametrize("bad", [(1, 1, 1, 1, 1), (0, 1, 0, 1, 1), (0, 1, 1, -1, 1), (0, 1, 1, 1, 0),
                                 (0, math.inf, 1, 1, 1)])
def test_invalid_beta_params(bad):
    with pytest.raises(ValueError):
        be.BetaParams(*bad)


@settings(max_examples=200, deadline=None)
@given(beta_params())
def test_beta_peak_support_and_unimodality(bp):
    assert be.beta_eval(bp.tc, bp) == pytest.approx(bp.k, rel=1e-9)
    assert be.beta_eval(bp.t0 - 1e-9 - abs(bp.t0) * 1e-12, bp) == 0.0
    assert be.beta_eval(bp.t1 + 1 + abs(bp.t1) * 1e-12, bp) == 0.0
    t = np.linspace(bp.t0, bp.t1, 401)
    v = be.beta_eval(t, bp)
    rise, fall = v[t <= bp.tc], v[t >= bp.tc]
    assert np.all(np.diff(rise) >= -1e-12 * bp.k)
    assert np.all(np.diff(fall) <= 1e-12 * bp.k)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.5, 20), st.floats(0.2, 10), st.floats(0.01, 10), st.floats(0, 1))
def test_beta_symmetric_when_p_equals_q(t0, dur, p, k, frac):
    bp = be.BetaParams(t0, t0 + dur, p, p, k)
    d = frac * dur / 2
    assert be.beta_eval(bp.tc + d, bp) == pytest.approx(be.beta_eval(bp.tc - d, bp), abs=1e-12 * max(k, 1))


@settings(max_examples=50, deadline=None)
@given(beta_params())
def test_jacobian_matches_finite_differences(bp):
    assume(min(bp.p, bp.q) > 1.2)                   # derivatives smooth at the support ends
    t = np.linspace(bp.t0, bp.t1, 41)[1:-1]
    x = bp.as_array()
    jac = be.beta_jacobian(t, bp)
    for i in range(5):
        h = 1e-6 * max(abs(x[i]), 1.0)
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        fd = (be.beta_eval(t, be.BetaParams(*up)) - be.beta_eval(t, be.BetaParams(*dn))) / (2 * h)
        scale = np.abs(fd).max() + 1e-8 * bp.k
        assert np.abs(jac[:, i] - fd).max() <= 1e-4 * scale


# ellipse geometry -----------------------------------------------------

def test_ellipse_eval_examples():
    ep = be.EllipseParams(3.0, 1.5, 0.0)
    assert np.allclose(be.ellipse_eval(0.0, ep), [3.0, 0.0])
    assert np.allclose(be.ellipse_eval(math.pi / 2, ep), [0.0, 1.5])
    assert np.allclose(be.ellipse_eval(0.0, be.EllipseParams(2, 1, math.pi / 2)), [0.0, 2.0])


def test_fit_ellipse_exact_points():
    ep = be.EllipseParams(5, 2, 0.3, 1, 1)
    pts = be.ellipse_eval(np.linspace(0, 2 * math.pi, 12, endpoint=False), ep)
    fit = be.fit_ellipse(pts)
    got = fit.params
    assert np.allclose([got.a, got.b, got.theta, got.cx, got.cy], [5, 2, 0.3, 1, 1], atol=1e-6)
    local = be.to_ellipse_frame(pts, got)
    assert np.abs(local[:, 0] ** 2 / got.a ** 2 + local[:, 1] ** 2 / got.b ** 2 - 1).max() <= 1e-6
    assert fit.residual <= 1e-6


def test_fit_ellipse_circle_and_degenerate():
    ang = np.linspace(0, 2 * math.pi, 9, endpoint=False)
    circ = be.fit_ellipse(np.column_stack([4 * np.cos(ang) - 2, 4 * np.sin(ang) + 7])).params
    assert circ.a == pytest.approx(4, abs=1e-9) and circ.b == pytest.approx(4, abs=1e-9)
    assert 0 <= circ.theta < math.pi
    with pytest.raises(DegenerateGeometryError):
        be.fit_ellipse(np.column_stack([np.arange(5.0), 2 * np.arange(5.0)]))
    with pytest.raises(DegenerateGeometryError):
        be.fit_ellipse(np.zeros((4, 2)))


@settings(max_examples=80, deadline=None)
@given(st.floats(1, 50), st.floats(0.2, 1), st.floats(-10, 10), st.floats(-20, 20), st.floats(-20, 20),
       st.floats(0.6, 1.0))
def test_fit_ellipse_recovers_random_arcs(a, ratio, theta, cx, cy, cover):
    ep = be.EllipseParams(a, a * ratio, theta, cx, cy)
    pts = be.ellipse_eval(np.linspace(0, 2 * math.pi * cover, 30), ep)
    got = be.fit_ellipse(pts).params
    local = be.to_ellipse_frame(pts, got)
    assert np.abs(local[:, 0] ** 2 / got.a ** 2 + local[:, 1] ** 2 / got.b ** 2 - 1).max() <= 1e-6
    assert got.a >= got.b > 0 and 0 <= got.theta < math.pi
    assert got.a == pytest.approx(a, rel=1e-6) and got.b == pytest.approx(a * ratio, rel=1e-6)


# segmentation and fitting ---------------------------------------------

def _profile(betas, t):
    return VelocityProfile(be.superpose(t, betas), t=t)


def test_segment_single_and_double_bump():
    t = np.arange(0, 20.0, 0.1)
    one = _profile([be.BetaParams(0, 19.9, 2, 2, 1)], t)
    assert be.segment_strokes(one) == [(0, len(t) - 1)]
    two = _profile([be.BetaParams(0, 10, 2, 2, 1), be.BetaParams(9, 19.9, 2, 2, 1)], t)
    spans = be.segment_strokes(two)
    assert len(spans) == 2 and spans[0][1] == spans[1][0]
    assert abs(t[spans[0][1]] - 9.5) <= 0.5


def test_segment_three_overlapped_bumps_align_with_peaks():
    t = np.arange(0, 30.0, 0.1)
    betas = [be.BetaParams(0, 11, 2, 2.5, 1.0), be.BetaParams(9, 20, 2.2, 2, 1.3),
             be.BetaParams(18, 29.9, 2, 2, 0.9)]
    vp = _profile(betas, t)
    spans = be.segment_strokes(vp)
    assert len(spans) == 3
    for (a, b), bp in zip(spans, betas):
        peak = a + int(np.argmax(vp.v[a:b + 1]))
        assert abs(peak - round(bp.tc / 0.1)) <= 2


def test_short_profile_falls_back_to_one_stroke():
    vp = VelocityProfile(np.array([0.0, 1.0, 0.5]))
    assert be.segment_strokes(vp) == [(0, 2)]


def test_pen_up_is_always_a_boundary():
    vp = VelocityProfile(np.array([0, 1, 2, 1, 0.5, 0, 1, 2, 1, 0.1]), breaks=[5])
    spans = be.segment_strokes(vp)
    assert spans == [(0, 4), (6, 9)]


def test_fit_beta_exact_profile():
    t = np.arange(-1.0, 11.0 + 1e-9, 0.02)
    true = be.BetaParams(0, 10, 2, 2, 3)
    fit = be.fit_beta(_profile([true], t), (0, len(t) - 1))
    assert np.allclose(fit.params.as_array(), true.as_array(), rtol=1e-3, atol=1e-2)
    assert fit.rms < 1e-9


def test_fit_beta_zero_profile_fails():
    with pytest.raises(FitFailure):
        be.fit_beta(VelocityProfile(np.zeros(50)), (0, 49))


def test_fit_beta_gradient_vanishes_at_optimum():
    t = np.arange(0, 12.0, 0.05)
    noisy = be.superpose(t, [be.BetaParams(1, 11, 2.5, 1.8, 2)])
    noisy = noisy + np.random.default_rng(1).normal(0, 0.02, t.size)
    vp = VelocityProfile(noisy, t=t)
    bp = be.fit_beta(vp, (0, len(t) - 1)).params
    x = bp.as_array()

    def cost(y):
        return 0.5 * np.sum((be.beta_eval(t, be.BetaParams(*y)) - noisy) ** 2)

    grad = be.beta_jacobian(t, bp).T @ (be.beta_eval(t, bp) - noisy)
    fd = np.array([(cost(x + h) - cost(x - h)) / (2e-6) for h in np.eye(5) * 1e-6])
    assert np.allclose(grad, fd, rtol=1e-4, atol=1e-4 * np.abs(noisy).sum())


# reconstruction and files ---------------------------------------------

def _stroke(t0, t1, a=10.0, b=5.0, cx=0.0):
    return be.Stroke(be.BetaParams(t0, t1, 2, 2, 1), be.EllipseParams(a, b, 0.0, cx, 0.0), (0.0, math.pi))


def test_reconstruct_single_and_disjoint():
    one = be.BetaEllipticModel([_stroke(0, 10)])
    rec = be.reconstruct(one, 101)
    assert np.array_equal(rec.v, be.beta_eval(rec.t, one.strokes[0].beta))
    assert np.allclose(rec.points[0], [10, 0]) and np.allclose(rec.points[-1], [-10, 0])
    two = be.BetaEllipticModel([_stroke(0, 4), _stroke(6, 10, cx=-20.0)])
    rec = be.reconstruct(two, 101)
    gap = (rec.t > 4) & (rec.t < 6)
    assert (rec.v[gap] == 0).all()
    assert rec.snr is None
    assert be.reconstruct(two, 101, reference=rec.v).snr == math.inf
    with pytest.raises(InvalidInputError):
        be.reconstruct(one, 1)


def test_fit_model_recovers_generator_bumps():
    model = be.BetaEllipticModel([_stroke(0, 12, 30, 12), _stroke(10, 22, 20, 15, -40)])
    rec = be.reconstruct(model, 400)
    vp = VelocityProfile(rec.v, t=np.arange(len(rec.v), dtype=float))
    fitted, report = be.fit_model(rec.points, vp)
    assert len(fitted) == 2 and all(r["status"] == "ok" for r in report)
    again = be.superpose(vp.t, [s.beta for s in fitted.strokes])
    assert be.snr_db(vp.v, again) >= 15


def test_model_json_round_trip_is_exact(tmp_path):
    model = be.BetaEllipticModel([_stroke(0.1, 10 / 3), _stroke(2.0, 7.123456789012345, 7.7, 1.1, 2 ** 0.5)])
    path = tmp_path / "m.model.json"
    be.save_model(path, model, meta={"label": "x"})
    text = path.read_text()
    assert text.index('"t0"') < text.index('"t1"') < text.index('"arc1"')
    back = be.load_model(path)
    assert back == model
    assert be.model_to_json(back, {"label": "x"}) == text
