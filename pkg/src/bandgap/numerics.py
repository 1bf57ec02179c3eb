"""Shared numerical kernel.

Special functions, dense complex linear algebra, periodic and singular
quadrature, root finding and decay-rate fitting.  Everything here is pure and
reentrant; no function keeps state between calls.

Dense linear algebra is backed by LAPACK through numpy/scipy, wrapped so that
failure modes surface as package exceptions with explicit residual checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special

from .errors import (
    ConvergenceError,
    DomainError,
    NoBracketError,
    QuadratureBudgetError,
    SingularMatrixError,
)

MAX_BESSEL_ORDER = 60

# 16-point Gauss-Legendre panels, geometric grading 0.15 toward each
# singularity, hard cap of 4096 panels.
GAUSS_ORDER = 16
GRADING_RATIO = 0.15
PANEL_CAP = 4096

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)


@dataclass(frozen=True)
class FitResult:
    """Least-squares line through (distance, log magnitude) samples."""

    slope: float
    intercept: float
    residual: float
    window: tuple[int, int]


def bessel_j(order: int, x):
    """Bessel function of the first kind J_order(x) for integer orders.

    Orders are capped at |order| <= 60; x must be finite and >= 0.
    Accepts scalars or arrays.
    """
    order = int(order)
    if abs(order) > MAX_BESSEL_ORDER:
        raise DomainError(f"Bessel order {order} exceeds cap {MAX_BESSEL_ORDER}")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j requires finite arguments")
    if np.any(arr < 0):
        raise DomainError("bessel_j requires x >= 0")
    out = scipy.special.jv(order, arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def eig_dense(a):
    """Eigenpairs of a dense complex matrix.

    Returns a list of (eigenvalue, eigenvector) with unit-norm vectors and a
    validated residual ||A v - lam v|| <= 1e-10 ||A|| per pair.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("eig_dense requires a square matrix")
    if not np.all(np.isfinite(a)):
        raise DomainError("eig_dense requires finite entries")
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    norm = np.linalg.norm(a, 2) if a.size else 0.0
    residuals = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    if norm > 0 and np.any(residuals > 1e-10 * norm):
        raise ConvergenceError(
            f"eigenpair residual {residuals.max():.3e} exceeds 1e-10*||A|| = {1e-10 * norm:.3e}"
        )
    return [(vals[i], vecs[:, i]) for i in range(len(vals))]


def svd_sigma_min(a) -> float:
    """Smallest singular value of a dense matrix."""
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise DomainError("svd_sigma_min requires finite entries")
    try:
        sigma = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    return float(sigma[-1])


def solve_linear(a, b):
    """Solve A x = b with residual check ||Ax-b|| <= 1e-9 (||A|| ||x|| + ||b||).

    Raises SingularMatrixError when sigma_min/sigma_max < 1e-14.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular matrix in solve: {exc}") from exc
    norm_a = np.linalg.norm(a, np.inf)
    resid = np.linalg.norm(a @ x - b)
    if resid > 1e-9 * (norm_a * np.linalg.norm(x) + np.linalg.norm(b)):
        sigma = np.linalg.svd(a, compute_uv=False)
        if sigma[0] == 0 or sigma[-1] / sigma[0] < 1e-14:
            raise SingularMatrixError(
                f"matrix numerically singular: sigma_min/sigma_max = "
                f"{sigma[-1] / max(sigma[0], 1e-300):.3e}"
            )
        raise ConvergenceError(f"solve residual {resid:.3e} too large")
    return x


def trapezoid_periodic(f, points: int):
    """Trapezoidal rule (2 pi / P) sum f(2 pi j / P) for periodic f on [0, 2pi).

    Spectrally accurate for smooth periodic integrands.  f may return scalars
    or ndarrays (integrated componentwise).
    """
    if points < 4:
        raise DomainError("trapezoid_periodic requires at least 4 points")
    thetas = 2.0 * np.pi * np.arange(points) / points
    acc = None
    for theta in thetas:
        val = f(theta)
        acc = val if acc is None else acc + val
    return acc * (2.0 * np.pi / points)


def _panel_integral(f, a: float, b: float):
    xs = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    vals = [f(x) for x in xs]
    acc = vals[0] * _GL_WEIGHTS[0]
    for w, v in zip(_GL_WEIGHTS[1:], vals[1:]):
        acc = acc + w * v
    return acc * 0.5 * (b - a)


def graded_panels(a: float, b: float, singular_points, ratio: float = GRADING_RATIO,
                  min_len: float = 1e-12):
    """Panel edges on [a, b] graded geometrically toward each singular point.

    Singular points may lie at either endpoint or inside (a, b).  Gauss nodes
    are interior, so panels may touch a singularity without sampling it.
    """
    sings = sorted(s for s in singular_points if a - 1e-12 <= s <= b + 1e-12)
    cuts = [a] + [s for s in sings if a < s < b] + [b]
    edges = []
    for left, right in zip(cuts[:-1], cuts[1:]):
        length = right - left
        if length <= 0:
            continue
        sub = [left, right]
        # grade toward 'left' if it is singular, likewise 'right'
        if any(abs(left - s) <= 1e-12 for s in sings):
            t = length / 2
            while t > min_len * max(1.0, abs(b - a)):
                sub.append(left + t)
                t *= ratio
        if any(abs(right - s) <= 1e-12 for s in sings):
            t = length / 2
            while t > min_len * max(1.0, abs(b - a)):
                sub.append(right - t)
                t *= ratio
        edges.extend(sorted(set(sub)))
    return sorted(set(edges))


def adaptive_gauss_log(f, a: float, b: float, singular_points=(), tol: float = 1e-10):
    """Integrate f over [a, b]; f may have logarithmic singularities exactly at
    singular_points.

    Panels are graded geometrically toward each singular point and refined
    adaptively (bisection, error estimated against the two-half value) until
    the total estimate is below tol.  f may return a complex scalar or an
    ndarray (integrated componentwise; error measured in max-abs).
    """
    if tol < 1e-13:
        raise DomainError("tol below 1e-13 is not attainable in double precision")
    if b <= a:
        raise DomainError("adaptive_gauss_log requires b > a")
    edges = graded_panels(a, b, singular_points)
    panels = []  # (err, left, right, value)
    for left, right in zip(edges[:-1], edges[1:]):
        panels.append((np.inf, left, right, _panel_integral(f, left, right)))

    def refine(entry):
        _, left, right, whole = entry
        mid = 0.5 * (left + right)
        v1 = _panel_integral(f, left, mid)
        v2 = _panel_integral(f, mid, right)
        err = float(np.max(np.abs((v1 + v2) - whole)))
        return (err, left, mid, v1), (err, mid, right, v2)

    # first refinement pass to obtain error estimates
    refined = []
    for entry in panels:
        refined.extend(refine(entry))
    panels = refined
    while True:
        total_err = sum(p[0] for p in panels) / 2.0
        if total_err <= tol:
            break
        if len(panels) > PANEL_CAP:
            raise QuadratureBudgetError(
                f"panel budget {PANEL_CAP} exceeded with error {total_err:.3e} > tol {tol:.3e}"
            )
        panels.sort(key=lambda p: p[0])
        worst = panels.pop()
        panels.extend(refine(worst))
    acc = panels[0][3]
    for p in panels[1:]:
        acc = acc + p[3]
    return acc


def fit_log_decay(samples, window=None) -> FitResult:
    """Least-squares line through (distance, ln magnitude) on a sample window.

    samples: sequence of (distance, magnitude >= 0); window: index range
    (start, stop) into samples, defaulting to everything.  The slope is the
    signed decay rate per unit distance.
    """
    samples = list(samples)
    if window is None:
        window = (0, len(samples))
    start, stop = window
    if not (0 <= start < stop <= len(samples)):
        raise DomainError(f"window {window} outside sample range 0..{len(samples)}")
    pts = [(d, m) for d, m in samples[start:stop] if m > 0]
    if len(pts) < 3:
        raise DomainError("need at least 3 positive-magnitude samples in window")
    xs = np.array([p[0] for p in pts])
    ys = np.log(np.array([p[1] for p in pts]))
    if np.allclose(xs, xs[0]):
        raise DomainError("degenerate window: all distances equal")
    design = np.vstack([xs, np.ones_like(xs)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = float(np.sqrt(np.mean((ys - slope * xs - intercept) ** 2)))
    return FitResult(float(slope), float(intercept), resid, (start, stop))


def brent_root(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Brent's method on [lo, hi]; requires f(lo) f(hi) <= 0."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NoBracketError(
            f"no sign change on [{lo}, {hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}"
        )
    return float(scipy.optimize.brentq(f, lo, hi, xtol=tol))


def branch_sqrt(value) -> complex:
    """Square root on the branch with non-negative imaginary part.

    Roundoff-level imaginary parts are treated as zero, so numerically real
    non-negative inputs return the ordinary positive root.
    """
    root = complex(np.sqrt(complex(value)))
    mag = abs(root)
    if mag == 0.0:
        return 0.0 + 0.0j
    if abs(root.imag) <= 1e-12 * mag:
        return -root if root.real < 0 else root
    return -root if root.imag < 0 else root


def upper_hull(xs, ys):
    """Vertices of the upper convex hull of (xs, ys), left to right."""
    pts = sorted(zip(xs, ys))
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (p[1] - y1) * (x2 - x1) >= (y2 - y1) * (p[0] - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def fit_log_decay_bloch(xs, ys, theta_max: float | None = None) -> float:
    """Slope of y = c + s x + ln|sin(theta x + phi)| fitted to (xs, ys).

    Separates an exponential trend from the bounded oscillation of a Bloch
    eigenvector; returns the trend slope s.  The (theta, phi) pair is located
    on a dense grid and refined twice; (c, s) are solved in closed form.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 6:
        return fit_log_decay(list(zip(xs, np.exp(ys)))).slope
    dx = float(np.min(np.diff(np.sort(xs))))
    t_lo, t_hi = 1e-6, theta_max if theta_max is not None else 1.1 * math.pi / dx
    p_lo, p_hi = 0.0, math.pi
    mx = xs.mean()
    sxx = float(((xs - mx) ** 2).sum())
    slope_best = 0.0
    shape = (288, 96)
    for level in range(3):
        th = np.linspace(t_lo, t_hi, shape[0])
        ph = np.linspace(p_lo, p_hi, shape[1])
        sin_part = np.abs(np.sin(th[:, None, None] * xs[None, None, :] + ph[None, :, None]))
        resid = ys[None, None, :] - np.log(np.maximum(sin_part, 1e-12))
        slope = ((xs - mx)[None, None, :] * resid).sum(axis=2) / sxx
        const = resid.mean(axis=2) - slope * mx
        sse = ((resid - const[:, :, None] - slope[:, :, None] * xs[None, None, :]) ** 2).sum(axis=2)
        i, j = np.unravel_index(int(np.argmin(sse)), sse.shape)
        slope_best = float(slope[i, j])
        dt = (t_hi - t_lo) / (shape[0] - 1)
        dp = (p_hi - p_lo) / (shape[1] - 1)
        t_lo, t_hi = max(1e-6, th[i] - 2 * dt), th[i] + 2 * dt
        p_lo, p_hi = ph[j] - 2 * dp, ph[j] + 2 * dp
        shape = (64, 64)
    return slope_best
