"""Beta velocity profiles, elliptic stroke geometry, fitting and reconstruction.

A stroke pairs a Beta bump in the time domain,

    beta(t) = k * ((t - t0) / (tc - t0))**p * ((t1 - t) / (t1 - tc))**q   on [t0, t1]
    tc      = (p * t1 + q * t0) / (p + q)

with an arc of an ellipse ``center + R(theta) @ (a cos phi, b sin phi)`` in
the plane.  A word is a time-ordered list of strokes whose velocity bumps may
overlap and superimpose.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares

from .errors import DegenerateGeometryError, FitFailure, InvalidInputError

SMOOTH_WINDOW = 5
MAX_ITER = 200
TOL = 1e-8
P_BOUNDS = (0.05, 100.0)


@dataclass(frozen=True)
class BetaParams:
    t0: float
    t1: float
    p: float
    q: float
    k: float = 1.0

    def __post_init__(self):
        vals = (self.t0, self.t1, self.p, self.q, self.k)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite beta parameters {vals}")
        if not self.t0 < self.t1:
            raise ValueError(f"beta support needs t0 < t1, got {self.t0} >= {self.t1}")
        if self.p <= 0 or self.q <= 0 or self.k <= 0:
            raise ValueError(f"beta shape/amplitude must be positive: p={self.p} q={self.q} k={self.k}")

    @property
    def tc(self):
        return inflexion_time(self)

    def as_array(self):
        return np.array([self.t0, self.t1, self.p, self.q, self.k])


@dataclass(frozen=True)
class EllipseParams:
    a: float
    b: float
    theta: float
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"ellipse axes must be positive, got a={self.a} b={self.b}")

    @property
    def center(self):
        return (self.cx, self.cy)

    def normalized(self):
        """Same curve with a >= b and theta in [0, pi)."""
        a, b, th = self.a, self.b, self.theta
        if b > a:
            a, b, th = b, a, th + math.pi / 2
        th = math.fmod(th, math.pi)
        if th < 0:
            th += math.pi
        return EllipseParams(a, b, th, self.cx, self.cy)


@dataclass(frozen=True)
class Stroke:
    beta: BetaParams
    ellipse: EllipseParams
    arc: tuple = (0.0, math.pi)        # eccentric angles at entry and exit

    def midpoint(self):
        """Point of the elliptic arc at the middle eccentric angle."""
        return ellipse_eval(0.5 * (self.arc[0] + self.arc[1]), self.ellipse)


@dataclass
class BetaEllipticModel:
    strokes: list = field(default_factory=list)

    def __post_init__(self):
        for s0, s1 in zip(self.strokes[:-1], self.strokes[1:]):
            if s1.beta.t0 < s0.beta.t0:
                raise ValueError("strokes must be ordered by start time")

    def __len__(self):
        return len(self.strokes)


# --------------------------------------------------------------------------
# Beta law
# --------------------------------------------------------------------------

def inflexion_time(bp):
    return (bp.p * bp.t1 + bp.q * bp.t0) / (bp.p + bp.q)


def beta_eval(t, bp):
    """Beta velocity contribution at time(s) t; exactly 0 outside [t0, t1]."""
    t = np.asarray(t, dtype=float)
    tc = inflexion_time(bp)
    inside = (t >= bp.t0) & (t <= bp.t1)
    u = np.where(inside, (t - bp.t0) / (tc - bp.t0), 0.0)
    w = np.where(inside, (bp.t1 - t) / (bp.t1 - tc), 0.0)
    out = np.where(inside, bp.k * u ** bp.p * w ** bp.q, 0.0)
    return float(out) if out.ndim == 0 else out


def beta_jacobian(t, bp):
    """d beta / d (t0, t1, p, q, k) at each t, shape (n, 5).

    With D = t1 - t0 and the substitution tc - t0 = p D/(p+q), t1 - tc = q D/(p+q):
        dlog/dt0 = -p/(t-t0) + (p+q)/D      dlog/dp = log u
        dlog/dt1 =  q/(t1-t) - (p+q)/D      dlog/dq = log w      dlog/dk = 1/k
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    jac = np.zeros((t.size, 5))
    inside = (t > bp.t0) & (t < bp.t1)
    if not inside.any():
        return jac
    ti = t[inside]
    tc = inflexion_time(bp)
    d = bp.t1 - bp.t0
    s = bp.p + bp.q
    u = (ti - bp.t0) / (tc - bp.t0)
    w = (bp.t1 - ti) / (bp.t1 - tc)
    val = bp.k * u ** bp.p * w ** bp.q
    jac[inside, 0] = val * (-bp.p / (ti - bp.t0) + s / d)
    jac[inside, 1] = val * (bp.q / (bp.t1 - ti) - s / d)
    jac[inside, 2] = val * np.log(u)
    jac[inside, 3] = val * np.log(w)
    jac[inside, 4] = val / bp.k
    return jac


# --------------------------------------------------------------------------
# Ellipse geometry
# --------------------------------------------------------------------------

def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def ellipse_eval(angle, ep):
    """Point(s) center + R(theta) (a cos angle, b sin angle)."""
    angle = np.asarray(angle, dtype=float)
    local = np.stack([ep.a * np.cos(angle), ep.b * np.sin(angle)], axis=-1)
    pts = local @ _rot(ep.theta).T + np.array([ep.cx, ep.cy])
    return pts


def to_ellipse_frame(points, ep):
    """Coordinates (X, Y) of points in the ellipse's own axes."""
    pts = np.asarray(points, dtype=float) - np.array([ep.cx, ep.cy])
    return pts @ _rot(ep.theta)


def eccentric_angles(points, ep):
    """Unwrapped eccentric angle of each point along the sequence."""
    local = to_ellipse_frame(points, ep)
    return np.unwrap(np.arctan2(local[:, 1] / ep.b, local[:, 0] / ep.a))


@dataclass(frozen=True)
class EllipseFit:
    params: EllipseParams
    residual: float         # mean |X^2/a^2 + Y^2/b^2 - 1| over the points


def conic_to_ellipse(coef):
    """(A, B, C, D, E, F) of A x^2 + B xy + C y^2 + D x + E y + F = 0 -> EllipseParams."""
    A, B, C, D, E, F = coef
    if B * B - 4 * A * C >= 0:
        raise DegenerateGeometryError("conic is not an ellipse")
    x0, y0 = np.linalg.solve([[2 * A, B], [B, 2 * C]], [-D, -E])
    f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F
    lam, vec = np.linalg.eigh([[A, B / 2], [B / 2, C]])
    ax2 = -f0 / lam
    if np.any(ax2 <= 0):
        raise DegenerateGeometryError("imaginary ellipse")
    axes = np.sqrt(ax2)
    major = int(np.argmax(axes))
    theta = math.atan2(vec[1, major], vec[0, major])
    return EllipseParams(float(axes.max()), float(axes.min()), theta, float(x0), float(y0)).normalized()


def fit_ellipse(points):
    """Direct least-squares ellipse (Halir-Flusser formulation of Fitzgibbon's fit).

    Coordinates are centred and scaled before the fit for conditioning.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 5:
        raise DegenerateGeometryError(f"need at least 5 points, got {len(pts)}")
    mean = pts.mean(axis=0)
    centred = pts - mean
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < 1e-9:
        raise DegenerateGeometryError("points are collinear")
    scale = math.sqrt(float(np.mean(np.sum(centred ** 2, axis=1))))
    x, y = (centred / scale).T
    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1, s2, s3 = d1.T @ d1, d1.T @ d2, d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("singular scatter matrix") from exc
    m = s1 + s2 @ t
    m = np.array([m[2] / 2, -m[1], m[0] / 2])
    vals, vecs = np.linalg.eig(m)
    vecs = np.real(vecs)
    cond = 4 * vecs[0] * vecs[2] - vecs[1] ** 2
    ok = np.nonzero(cond > 0)[0]
    if ok.size == 0:
        raise DegenerateGeometryError("no elliptic solution")
    a1 = vecs[:, ok[np.argmin(np.abs(np.real(vals[ok])))]]
    A, B, C, D, E, F = np.concatenate([a1, t @ a1])
    # undo x' = (x - mx)/s, y' = (y - my)/s
    mx, my = mean
    sc = scale
    A2, B2, C2 = A / sc ** 2, B / sc ** 2, C / sc ** 2
    D2, E2 = D / sc, E / sc
    coef = (
        A2, B2, C2,
        -2 * A2 * mx - B2 * my + D2,
        -2 * C2 * my - B2 * mx + E2,
        A2 * mx * mx + B2 * mx * my + C2 * my * my - D2 * mx - E2 * my + F,
    )
    params = conic_to_ellipse(coef)
    local = to_ellipse_frame(pts, params)
    resid = float(np.mean(np.abs(local[:, 0] ** 2 / params.a ** 2 + local[:, 1] ** 2 / params.b ** 2 - 1)))
    return EllipseFit(params, resid)


def fit_arc(points, flat_ratio=1e-3):
    """Ellipse plus entry/exit eccentric angles for an ordered stroke span.

    Nearly straight spans (no ellipse) fall back to a very flat ellipse whose
    major axis is the chord, traversed from angle pi to 2 pi.
    """
    pts = np.asarray(points, dtype=float)
    try:
        ep = fit_ellipse(pts).params
        ang = eccentric_angles(pts, ep)
        return ep, (float(ang[0]), float(ang[-1]))
    except DegenerateGeometryError:
        pass
    chord = pts[-1] - pts[0]
    half = 0.5 * float(np.hypot(*chord))
    if half == 0:
        span = pts.max(axis=0) - pts.min(axis=0)
        half = max(0.5 * float(np.hypot(*span)), 0.5)
        chord = np.array([1.0, 0.0])
    mid = 0.5 * (pts[0] + pts[-1])
    ep = EllipseParams(half, half * flat_ratio, math.atan2(chord[1], chord[0]), float(mid[0]), float(mid[1]))
    norm = ep.normalized()
    # normalizing theta may flip the axis direction by pi
    arc = (math.pi, 2 * math.pi) if abs(norm.theta - ep.theta) < 1e-12 else (0.0, math.pi)
    return norm, arc


# --------------------------------------------------------------------------
# Stroke segmentation and Beta fitting
# --------------------------------------------------------------------------

def _plateau_extrema(s):
    """Indices (plateau centres) of interior strict local minima and maxima."""
    s = np.asarray(s, dtype=float)
    if len(s) < 3:
        return [], []
    change = np.concatenate([[True], np.diff(s) != 0])
    starts = np.nonzero(change)[0]
    vals = s[starts]
    ends = np.concatenate([starts[1:] - 1, [len(s) - 1]])
    mins, maxs = [], []
    for j in range(1, len(vals) - 1):
        centre = int((starts[j] + ends[j]) // 2)
        if vals[j] < vals[j - 1] and vals[j] < vals[j + 1]:
            mins.append(centre)
        elif vals[j] > vals[j - 1] and vals[j] > vals[j + 1]:
            maxs.append(centre)
    return mins, maxs


def _pieces(vp):
    bounds = [-1] + list(vp.breaks) + [len(vp.v)]
    return [(a + 1, b - 1) for a, b in zip(bounds[:-1], bounds[1:]) if b - 1 >= a + 1]


def segment_strokes(vp, window=SMOOTH_WINDOW, min_depth=0.0):
    """Split a velocity profile into single-bump spans (start, end), inclusive.

    Boundaries sit at local minima of the moving-average-smoothed profile and
    at every pen-up.  Neighbouring spans share their boundary sample.  A
    minimum whose dip below the lower adjacent peak is under ``min_depth``
    times that peak is ignored.
    """
    spans = []
    for a, b in _pieces(vp):
        seg = vp.v[a:b + 1]
        if len(seg) < 4:
            spans.append((a, b))
            continue
        s = ndimage.uniform_filter1d(seg, size=window, mode="nearest") if window > 1 else seg
        mins, maxs = _plateau_extrema(s)
        cuts = [0] + mins + [len(s) - 1]
        # merge spans that hold no interior maximum or only a shallow dip
        changed = True
        while changed and len(cuts) > 2:
            changed = False
            for j in range(1, len(cuts) - 1):
                left = [m for m in maxs if cuts[j - 1] < m < cuts[j]]
                right = [m for m in maxs if cuts[j] < m < cuts[j + 1]]
                shallow = False
                if left and right:
                    peak = min(s[left].max(), s[right].max())
                    shallow = peak > 0 and (peak - s[cuts[j]]) < min_depth * peak
                if not left or not right or shallow:
                    del cuts[j]
                    changed = True
                    break
        spans.extend((a + c0, a + c1) for c0, c1 in zip(cuts[:-1], cuts[1:]))
    return spans


@dataclass(frozen=True)
class BetaFit:
    params: BetaParams
    rms: float
    nfev: int = 0


def _initial_guess(t, v):
    ipk = int(np.argmax(v))
    t0, t1 = float(t[0]), float(t[-1])
    tpk = float(t[ipk])
    eps = 1e-3 * (t1 - t0)
    tpk = min(max(tpk, t0 + eps), t1 - eps)
    p = 2.0
    q = p * (t1 - tpk) / (tpk - t0)
    q = float(np.clip(q, *P_BOUNDS))
    return np.array([t0, t1, p, q, float(v.max())]), tpk


def fit_beta(vp, span, pin_k=False, max_iter=MAX_ITER, tol=TOL):
    """Least-squares Beta bump on the samples of ``span`` (inclusive indices).

    Returns a BetaFit with the residual RMS.  Raises FitFailure on a profile
    with no positive sample or when the optimizer does not converge; the
    exception carries the best parameters found.
    """
    i0, i1 = span
    t = vp.t[i0:i1 + 1]
    v = vp.v[i0:i1 + 1]
    if len(v) < 3 or not np.any(v > 0):
        raise FitFailure("degenerate velocity span: no bump to fit", best=None)
    x0, tpk = _initial_guess(t, v)
    dur = float(t[-1] - t[0])
    margin = 1e-6 * dur
    lo = [t[0] - dur, tpk + margin, P_BOUNDS[0], P_BOUNDS[0], 1e-12]
    hi = [tpk - margin, t[-1] + dur, P_BOUNDS[1], P_BOUNDS[1], np.inf]
    free = [0, 1, 2, 3] if pin_k else [0, 1, 2, 3, 4]
    k_fixed = 1.0

    def full(x):
        y = np.empty(5)
        y[free] = x
        if pin_k:
            y[4] = k_fixed
        return BetaParams(*y)

    def resid(x):
        return beta_eval(t, full(x)) - v

    def jac(x):
        return beta_jacobian(t, full(x))[:, free]

    start = np.clip(x0[free], np.array(lo)[free] + 1e-12, np.array(hi)[free] - 1e-12)
    res = least_squares(resid, start, jac=jac, bounds=(np.array(lo)[free], np.array(hi)[free]),
                        method="trf", x_scale="jac", ftol=tol, xtol=tol, gtol=tol,
                        max_nfev=max_iter)
    best = full(res.x)
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    if res.status <= 0:
        raise FitFailure(f"beta fit did not converge in {max_iter} evaluations", best=best, residual=rms)
    return BetaFit(best, rms, int(res.nfev))


def superpose(t, betas):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for bp in betas:
        out = out + beta_eval(t, bp)
    return out


def refine_betas(vp, betas, max_iter=MAX_ITER, tol=TOL):
    """Jointly adjust all bumps so their superposition fits the whole profile."""
    if not betas:
        return list(betas)
    x0 = np.concatenate([b.as_array() for b in betas])
    t, v = vp.t, vp.v
    n = len(betas)
    lo, hi = [], []
    for b in betas:
        tc = b.tc
        lo += [b.t0 - (b.t1 - b.t0), tc + 1e-6, P_BOUNDS[0], P_BOUNDS[0], 1e-12]
        hi += [tc - 1e-6, b.t1 + (b.t1 - b.t0), P_BOUNDS[1], P_BOUNDS[1], np.inf]
    lo, hi = np.array(lo), np.array(hi)
    x0 = np.clip(x0, lo + 1e-12, hi - 1e-12)

    def unpack(x):
        return [BetaParams(*x[5 * i:5 * i + 5]) for i in range(n)]

    def resid(x):
        return superpose(t, unpack(x)) - v

    def jac(x):
        return np.hstack([beta_jacobian(t, bp) for bp in unpack(x)])

    res = least_squares(resid, x0, jac=jac, bounds=(lo, hi), method="trf", x_scale="jac",
                        ftol=tol, xtol=tol, gtol=tol, max_nfev=max_iter)
    return unpack(res.x)


# --------------------------------------------------------------------------
# Reconstruction
# --------------------------------------------------------------------------

@dataclass
class Reconstruction:
    t: np.ndarray
    v: np.ndarray
    points: np.ndarray
    snr: float | None = None


def snr_db(reference, estimate):
    reference = np.asarray(reference, dtype=float)
    err = reference - np.asarray(estimate, dtype=float)
    num = float(np.sum(reference ** 2))
    den = float(np.sum(err ** 2))
    if den == 0:
        return math.inf
    return 10.0 * math.log10(num / den)


def _arc_table(stroke, samples=512):
    phi = np.linspace(stroke.arc[0], stroke.arc[1], samples)
    pts = ellipse_eval(phi, stroke.ellipse)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    return s, pts


def arc_point(stroke, fraction, samples=512):
    """Point(s) at the given arc-length fraction(s) of a stroke's elliptic arc."""
    s, pts = _arc_table(stroke, samples)
    target = np.asarray(fraction, dtype=float) * s[-1]
    if s[-1] == 0:
        return np.broadcast_to(pts[0], np.shape(target) + (2,)).copy()
    return np.stack([np.interp(target, s, pts[:, 0]), np.interp(target, s, pts[:, 1])], axis=-1)


def arc_length(stroke, samples=512):
    return float(_arc_table(stroke, samples)[0][-1])


def reconstruct(model, n, reference=None, t=None):
    """Velocity as the sum of the Beta bumps; trace as chained elliptic arcs.

    Each stroke advances along its own arc with arc length proportional to
    its accumulated Beta area, and simultaneous strokes add their
    displacements, so consecutive arcs join end to start.
    """
    if n < 2:
        raise InvalidInputError("reconstruction needs at least 2 samples")
    if not model.strokes:
        raise InvalidInputError("empty model")
    if t is None:
        t = np.linspace(min(s.beta.t0 for s in model.strokes),
                        max(s.beta.t1 for s in model.strokes), n)
    t = np.asarray(t, dtype=float)
    v = superpose(t, [s.beta for s in model.strokes])
    origin = arc_point(model.strokes[0], 0.0)
    pos = np.tile(origin, (len(t), 1))
    for st in model.strokes:
        b = beta_eval(t, st.beta)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (b[1:] + b[:-1]) * np.diff(t))])
        frac = cum / cum[-1] if cum[-1] > 0 else (t >= st.beta.t1).astype(float)
        pos += arc_point(st, frac) - arc_point(st, 0.0)
    snr = snr_db(reference, v) if reference is not None else None
    return Reconstruction(t, v, pos, snr)


# --------------------------------------------------------------------------
# Trace -> model
# --------------------------------------------------------------------------

def fit_model(points, vp, spans=None, pin_k=False, refine=True, min_depth=0.0, refine_iter=MAX_ITER):
    """Fit one stroke per velocity span.

    ``points`` are the trace samples behind ``vp`` (velocity sample j spans
    points j..j+1 within a pen-down piece, with a zero sample at each pen-up).
    Returns (model, report) where report lists per-stroke residuals.
    """
    pts = np.asarray(points, dtype=float)
    if spans is None:
        spans = segment_strokes(vp, min_depth=min_depth)
    starts = _point_index(vp, len(pts))
    fits, arcs, report = [], [], []
    for span in spans:
        try:
            fit = fit_beta(vp, span, pin_k=pin_k)
            bp, rms = fit.params, fit.rms
        except FitFailure as exc:
            if exc.best is None:
                report.append({"span": span, "status": "failed"})
                continue
            bp, rms = exc.best, exc.residual
        i0, i1 = span
        p0 = starts[i0]
        p1 = starts[i1] + 1
        seg = pts[p0:p1 + 1]
        ep, arc = fit_arc(seg)
        fits.append(bp)
        arcs.append((ep, arc))
        report.append({"span": span, "status": "ok", "rms": rms})
    if refine and fits and not pin_k:
        fits = refine_betas(vp, fits, max_iter=refine_iter)
    strokes = [Stroke(bp, ep, arc) for bp, (ep, arc) in zip(fits, arcs)]
    strokes.sort(key=lambda s: s.beta.t0)
    return BetaEllipticModel(strokes), report


def _point_index(vp, npts):
    """Start-point index of each velocity sample (pen-up zeros map to the next point)."""
    idx = np.empty(len(vp.v), dtype=int)
    breaks = set(vp.breaks)
    p = 0
    for j in range(len(vp.v)):
        if j in breaks:
            p += 1
            idx[j] = p
            continue
        idx[j] = p
        p += 1
    return np.minimum(idx, max(npts - 2, 0))


# --------------------------------------------------------------------------
# JSON model files
# --------------------------------------------------------------------------

_FIELDS = ("t0", "t1", "p", "q", "k", "theta", "a", "b", "cx", "cy", "arc0", "arc1")


def _num(x):
    return format(float(x), ".16e")


def stroke_record(st):
    b, e = st.beta, st.ellipse
    return dict(zip(_FIELDS, (b.t0, b.t1, b.p, b.q, b.k, e.theta, e.a, e.b, e.cx, e.cy, st.arc[0], st.arc[1])))


def model_to_json(model, meta=None):
    """Serialize with fixed field order and 17 significant digits."""
    rows = []
    for st in model.strokes:
        rec = stroke_record(st)
        rows.append("{" + ", ".join(f'"{k}": {_num(rec[k])}' for k in _FIELDS) + "}")
    head = ""
    if meta:
        head = '"meta": ' + json.dumps(meta, sort_keys=True) + ",\n "
    return "{" + head + '"strokes": [\n  ' + ",\n  ".join(rows) + "\n]}\n"


def model_from_json(text):
    doc = json.loads(text)
    strokes = []
    for r in doc["strokes"]:
        strokes.append(Stroke(
            BetaParams(r["t0"], r["t1"], r["p"], r["q"], r["k"]),
            EllipseParams(r["a"], r["b"], r["theta"], r["cx"], r["cy"]),
            (r["arc0"], r["arc1"]),
        ))
    return BetaEllipticModel(strokes)


def save_model(path, model, meta=None):
    Path(path).write_text(model_to_json(model, meta))


def load_model(path):
    return model_from_json(Path(path).read_text())
