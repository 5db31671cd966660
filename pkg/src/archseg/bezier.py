"""Cubic Bézier curves: evaluation, arc-length sampling, least-squares fitting."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BezierCurve:
    """Cubic Bézier curve defined by 4 control points, rows of a (4, 3) array."""

    control: np.ndarray

    def __post_init__(self):
        ctrl = np.asarray(self.control, dtype=np.float64)
        if ctrl.shape != (4, 3):
            raise ValueError(f"expected (4, 3) control points, got {ctrl.shape}")
        if not np.isfinite(ctrl).all():
            raise ValueError("control points must be finite")
        ctrl.setflags(write=False)
        object.__setattr__(self, "control", ctrl)


def _bernstein(t: np.ndarray) -> np.ndarray:
    """Cubic Bernstein basis, shape (len(t), 4)."""
    t = np.asarray(t, dtype=np.float64)
    s = 1.0 - t
    return np.stack([s**3, 3 * s**2 * t, 3 * s * t**2, t**3], axis=-1)


def bezier_eval(curve: BezierCurve, t):
    """Evaluate the curve at parameter t in [0, 1] (scalar or array)."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t must lie in [0, 1]")
    out = _bernstein(np.atleast_1d(t_arr)) @ curve.control
    return out[0] if t_arr.ndim == 0 else out


def bezier_derivative(curve: BezierCurve, t) -> np.ndarray:
    p = curve.control
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    s = 1.0 - t
    d = (
        3 * s[:, None] ** 2 * (p[1] - p[0])
        + 6 * (s * t)[:, None] * (p[2] - p[1])
        + 3 * t[:, None] ** 2 * (p[3] - p[2])
    )
    return d


def bezier_second_derivative(curve: BezierCurve, t) -> np.ndarray:
    p = curve.control
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return 6 * (1.0 - t)[:, None] * (p[2] - 2 * p[1] + p[0]) + 6 * t[:, None] * (
        p[3] - 2 * p[2] + p[1]
    )


def _arc_length_table(curve: BezierCurve, segments: int = 1024):
    """Dense parameter grid and cumulative piecewise-linear arc length."""
    t = np.linspace(0.0, 1.0, segments + 1)
    pts = _bernstein(t) @ curve.control
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return t, cum


def arc_length(curve: BezierCurve, segments: int = 1024) -> float:
    return float(_arc_length_table(curve, segments)[1][-1])


def arc_length_params(curve: BezierCurve, fractions, segments: int = 1024) -> np.ndarray:
    """Parameters t at which arc length reaches the given fractions of total."""
    t, cum = _arc_length_table(curve, segments)
    total = cum[-1]
    if total <= 0:
        # degenerate curve (all control points coincide)
        return np.asarray(fractions, dtype=np.float64)
    return np.interp(np.asarray(fractions, dtype=np.float64) * total, cum, t)


def bezier_sample_uniform(curve: BezierCurve, n: int, segments: int = 1024) -> np.ndarray:
    """n points uniformly spaced in arc length (not in parameter t)."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    ts = arc_length_params(curve, np.linspace(0.0, 1.0, n), segments)
    return _bernstein(ts) @ curve.control


def _project_params(curve: BezierCurve, targets: np.ndarray, t0: np.ndarray,
                    newton_steps: int = 10) -> np.ndarray:
    """Per-target nearest-point parameters via safeguarded Newton on the
    foot-point equation f(t) = (B(t) - p) . B'(t) = 0, clamped to [0, 1].

    A Newton step is only accepted if it does not increase the distance, so
    the overall fit residual is monotone.  Each target is additionally seeded
    from the nearest point on a dense parameter grid, which lets the search
    escape local minima of the foot-point equation."""
    t = t0.copy()
    best_d = np.linalg.norm(_bernstein(t) @ curve.control - targets, axis=1)
    grid = np.linspace(0.0, 1.0, 257)
    grid_pts = _bernstein(grid) @ curve.control
    d_grid = np.linalg.norm(targets[:, None, :] - grid_pts[None, :, :], axis=2)
    gi = np.argmin(d_grid, axis=1)
    g_best = d_grid[np.arange(len(targets)), gi]
    take = g_best < best_d
    t = np.where(take, grid[gi], t)
    best_d = np.where(take, g_best, best_d)
    for _ in range(newton_steps):
        b = _bernstein(t) @ curve.control
        d1 = bezier_derivative(curve, t)
        d2 = bezier_second_derivative(curve, t)
        diff = b - targets
        f = np.einsum("ij,ij->i", diff, d1)
        fp = np.einsum("ij,ij->i", d1, d1) + np.einsum("ij,ij->i", diff, d2)
        step = np.where(np.abs(fp) > 1e-300, f / np.where(fp == 0, 1.0, fp), 0.0)
        t_new = np.clip(t - step, 0.0, 1.0)
        d_new = np.linalg.norm(_bernstein(t_new) @ curve.control - targets, axis=1)
        accept = d_new <= best_d
        t = np.where(accept, t_new, t)
        best_d = np.where(accept, d_new, best_d)
    return t


def _polish_joint(pts: np.ndarray, ctrl: np.ndarray, t: np.ndarray,
                  iters: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Levenberg-Marquardt refinement over control points and parameters jointly.

    Alternating projection/solve converges only linearly; a few damped
    Gauss-Newton steps on the joint residual bring the fit to machine
    precision quickly.  The reparametrization gauge direction is handled by
    the damping term."""
    n = len(pts)
    lam = 1e-6
    curve = BezierCurve(ctrl)
    resid = (_bernstein(t) @ curve.control - pts).ravel()
    cost = resid @ resid
    for _ in range(iters):
        basis = _bernstein(t)  # (n, 4)
        deriv = bezier_derivative(curve, t)  # (n, 3)
        jac = np.zeros((3 * n, 12 + n))
        for k in range(3):
            jac[k::3, 4 * k : 4 * k + 4] = basis
            jac[k::3, 12 + np.arange(n)] = np.diag(deriv[:, k])
        g = jac.T @ resid
        h = jac.T @ jac
        step = np.linalg.solve(h + lam * np.eye(12 + n), -g)
        ctrl_new = curve.control + step[:12].reshape(3, 4).T
        t_new = t + step[12:]
        resid_new = (_bernstein(t_new) @ ctrl_new - pts).ravel()
        cost_new = resid_new @ resid_new
        if cost_new < cost:
            curve = BezierCurve(ctrl_new)
            t, resid = t_new, resid_new
            if cost - cost_new < 1e-30:
                cost = cost_new
                break
            cost = cost_new
            lam = max(lam * 0.3, 1e-12)
        else:
            lam *= 10.0
            if lam > 1e8:
                break
    return curve.control, t


def fit_bezier(targets, max_iters: int = 20, tol: float = 1e-14) -> tuple[BezierCurve, float]:
    """Least-squares cubic Bézier fit by alternating projection and solve.

    Parameters are initialized by chord length over the targets in their
    given order, then refined by nearest-point projection; with parameters
    fixed the 4 control points solve a linear least-squares system.  A short
    joint Levenberg-Marquardt polish finishes the convergence (it converges
    quadratically, so only a modest number of alternating iterations are
    needed to reach its basin).  Returns the final curve and the
    root-mean-square point-to-curve distance.
    """
    pts = np.asarray(targets, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) targets, got {pts.shape}")
    if len(pts) < 4:
        raise ValueError("need at least 4 target points for a cubic fit")

    chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(chord)])
    if cum[-1] <= 0:
        raise ValueError("targets are fully coincident")
    t = cum / cum[-1]

    curve = None
    prev_residual = np.inf
    residual = np.inf
    for it in range(max_iters):
        basis = _bernstein(t)
        gram = basis.T @ basis
        rhs = basis.T @ pts
        try:
            ctrl = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            warnings.warn("singular normal system in fit_bezier; ridge-regularizing")
            ctrl = np.linalg.solve(gram + 1e-9 * np.eye(4), rhs)
        curve = BezierCurve(ctrl)
        t = _project_params(curve, pts, t)
        residual = float(
            np.sqrt(np.mean(np.sum((_bernstein(t) @ ctrl - pts) ** 2, axis=1)))
        )
        if prev_residual - residual < tol:
            break
        prev_residual = residual
    ctrl, t = _polish_joint(pts, curve.control, t)
    curve = BezierCurve(ctrl)
    # The fit is only determined up to affine reparametrization; canonicalize
    # so the extreme targets sit at the parameter endpoints.  The polish may
    # leave parameters slightly outside [0, 1]; reparametrizing first keeps
    # every target on the canonical segment.
    if abs(t[-1] - t[0]) > 1e-12:
        curve = reparametrize(curve, float(t[0]), float(t[-1]))
        t = (t - t[0]) / (t[-1] - t[0])
    t = _project_params(curve, pts, np.clip(t, 0.0, 1.0))
    residual = float(
        np.sqrt(np.mean(np.sum((_bernstein(t) @ curve.control - pts) ** 2, axis=1)))
    )
    return curve, residual


def _blossom(control: np.ndarray, u: float, v: float, w: float) -> np.ndarray:
    """Polar form of the cubic: generalized De Casteljau with mixed arguments."""
    a = control[:3] * (1 - u) + control[1:] * u
    b = a[:2] * (1 - v) + a[1:] * v
    return b[0] * (1 - w) + b[1] * w


def reparametrize(curve: BezierCurve, u0: float, u1: float) -> BezierCurve:
    """Cubic Bézier tracing t -> B(u0 + t * (u1 - u0)), as new control points."""
    p = curve.control
    ctrl = np.stack(
        [
            _blossom(p, u0, u0, u0),
            _blossom(p, u0, u0, u1),
            _blossom(p, u0, u1, u1),
            _blossom(p, u1, u1, u1),
        ]
    )
    return BezierCurve(ctrl)
