"""Single layer potential of a circular resonator in a multipole basis.

Two assemblies of the matrix S[m, n] = <e^{i m theta}, S[e^{i n phi}]>/(2 pi):
the direct lattice sum (truncation error O(1/N)) and the Kummer-transformed
assembly (O(1/N^3)), plus the generalised capacitance matrix, band and gap
functions, singularity scanning, kernel-field validation and exterior field
evaluation.

The direct entries are

    S[m, n] = (2 pi r / |Y|) sum_q  e^{i psi (n-m)} i^{m+n} (-1)^n
              J_m(r|alpha+q|) J_n(r|alpha+q|) / d_q,
    d_q = k^2 + |beta|^2 - 2 i beta.(alpha+q) - |alpha+q|^2,  psi = arg(alpha+q).

The Kummer assembly integrates  G_K(x(theta, phi))  over the two boundary
angles: a closed-form leading term, a numerically integrated A1+A2 part with
a logarithmic singularity along theta = phi (graded Gauss panels inside a
trapezoidal outer loop) and an absolutely convergent corrected lattice series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import (
    DiluteTruncationWarning,
    DomainError,
    NoBracketError,
    NoKernelError,
    SingularDenominatorError,
    SingularLeadingTermError,
    SingularMatrixError,
)
from .greens2d import (
    UNIT_SQUARE,
    Lattice2D,
    TruncationSpec,
    kummer_a1a2_array,
    rayleigh_singular_betas,
)
from .numerics import branch_sqrt, brent_root, graded_panels, _GL_NODES, _GL_WEIGHTS

_Q_CHUNK = 400_000


@dataclass(frozen=True)
class MultipoleBasis:
    """Fourier basis e^{i n theta}, n in [-M, M], on a circle of radius r."""

    order: int = 5
    radius: float = 0.05

    def __post_init__(self):
        if self.order < 0:
            raise DomainError("multipole order must be >= 0")
        if not 0 < self.radius < 0.5:
            raise DomainError("resonator must fit inside the unit cell (0 < r < 0.5)")

    @property
    def dim(self) -> int:
        return 2 * self.order + 1

    @property
    def ns(self) -> np.ndarray:
        return np.arange(-self.order, self.order + 1)


@dataclass
class SlpMatrix:
    """Dense multipole representation of the single layer potential."""

    entries: np.ndarray
    alpha: tuple[float, float]
    beta: tuple[float, float]
    k: float
    radius: float
    order: int
    method: str


@dataclass
class CapacitanceResult2D:
    """Generalised capacitance value of a single circular resonator."""

    capacitance: complex
    eigenvalue: complex
    omega: complex
    alpha: tuple[float, float]
    beta: tuple[float, float]
    delta: float
    speed: float
    radius: float
    order: int


@dataclass(frozen=True)
class QuadratureSettings:
    """Angular quadrature for the Kummer assembly: trapezoidal outer loop and
    graded 16-point Gauss panels toward the theta = phi singularity."""

    outer_points: int = 64
    min_panel: float = 1e-10

    def __post_init__(self):
        if self.outer_points < 16:
            raise DomainError("need at least 16 outer quadrature points")


def _bessel_block(order: int, x: np.ndarray) -> np.ndarray:
    """J_m(x) for m = -order..order, stacked as (2*order+1, len(x))."""
    out = np.empty((2 * order + 1, len(x)))
    for m in range(order + 1):
        jm = scipy.special.jv(m, x)
        out[order + m] = jm
        if m:
            out[order - m] = (-1) ** m * jm
    return out


def _check_singular(denom: np.ndarray, qs: np.ndarray, what: str):
    bad = np.abs(denom) < 1e-12
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularDenominatorError(
            f"{what} singular at reciprocal lattice point q = {tuple(qs[i])}",
            q=tuple(qs[i]),
        )


def _phase_factors(order: int, kappa: np.ndarray, knorm: np.ndarray) -> np.ndarray:
    """e^{-i n psi} for n = -order..order, psi = arg(kappa), via complex powers."""
    safe = np.where(knorm > 0, knorm, 1.0)
    e_minus = (kappa[:, 0] - 1j * kappa[:, 1]) / safe
    e_minus[knorm == 0] = 1.0
    out = np.empty((2 * order + 1, len(knorm)), dtype=complex)
    out[order] = 1.0
    for m in range(1, order + 1):
        out[order + m] = out[order + m - 1] * e_minus
        out[order - m] = np.conj(out[order + m])
    return out


def _multipole_factor(basis: MultipoleBasis, kappa: np.ndarray,
                      knorm: np.ndarray) -> np.ndarray:
    """u_n = i^n J_n(r|kappa|) e^{-i n psi}; the conjugate factor
    conj(u_n) = i^n (-1)^n J_n e^{+i n psi} closes the entry product."""
    bess = _bessel_block(basis.order, knorm * basis.radius)
    phases = _phase_factors(basis.order, kappa, knorm)
    return (1j ** basis.ns)[:, None] * bess * phases


def _lattice_term(alpha, beta, k, basis, qs, weight=None) -> np.ndarray:
    """(2 pi r / |Y|) sum over the rows of qs of the multipole outer product.

    weight, if given, replaces 1/d_q by the supplied per-q factor.
    """
    acc = np.zeros((basis.dim, basis.dim), dtype=complex)
    for start in range(0, len(qs), _Q_CHUNK):
        q = qs[start:start + _Q_CHUNK]
        kappa = alpha[None, :] + q
        knorm = np.hypot(kappa[:, 0], kappa[:, 1])
        denom = (k * k + beta @ beta) - 2j * (kappa @ beta) - knorm**2
        _check_singular(denom, q, "single layer potential denominator")
        w = weight(q, kappa, knorm, denom) if weight is not None else 1.0 / denom
        u = _multipole_factor(basis, kappa, knorm)
        acc += (u * w[None, :]) @ np.conj(u).T
    return 2.0 * math.pi * basis.radius * acc


def slp_direct(alpha, beta, k: float, basis: MultipoleBasis,
               trunc: TruncationSpec = TruncationSpec(1000),
               lat: Lattice2D = UNIT_SQUARE) -> SlpMatrix:
    """Direct lattice-sum assembly; truncation error O(1/N)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    qs = trunc.points(lat)
    entries = _lattice_term(alpha, beta, k, basis, qs) / lat.area
    return SlpMatrix(entries, tuple(alpha), tuple(beta), k, basis.radius,
                     basis.order, "direct")


_PANEL_CACHE: dict[float, tuple[np.ndarray, np.ndarray]] = {}


def _inner_nodes(min_panel: float):
    """Graded Gauss nodes and weights on (0, 2 pi) with singular endpoints."""
    if min_panel not in _PANEL_CACHE:
        edges = graded_panels(0.0, 2.0 * math.pi, [0.0, 2.0 * math.pi],
                              min_len=min_panel)
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (b - a) * _GL_NODES + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * _GL_WEIGHTS)
        _PANEL_CACHE[min_panel] = (np.concatenate(nodes), np.concatenate(weights))
    return _PANEL_CACHE[min_panel]


def _a_part(alpha, basis: MultipoleBasis, quad: QuadratureSettings,
            series_terms: int) -> np.ndarray:
    """(r / 2 pi) * double integral of e^{-im theta} e^{i alpha.x} (A1+A2)(x)
    e^{in phi} with x = r (e^{i theta} - e^{i phi})."""
    r = basis.radius
    ns = basis.ns
    u_nodes, u_weights = _inner_nodes(quad.min_panel)
    p = quad.outer_points
    thetas = 2.0 * math.pi * np.arange(p) / p
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for theta in thetas:
        phi = theta + u_nodes
        x1 = r * (math.cos(theta) - np.cos(phi))
        x2 = r * (math.sin(theta) - np.sin(phi))
        g = kummer_a1a2_array(x1, x2, series_terms).astype(complex)
        if alpha[0] != 0.0 or alpha[1] != 0.0:
            g = g * np.exp(1j * (alpha[0] * x1 + alpha[1] * x2))
        inner = np.exp(1j * np.outer(ns, phi)) @ (u_weights * g)
        out += np.outer(np.exp(-1j * ns * theta), inner)
    return out * (2.0 * math.pi / p) * (r / (2.0 * math.pi))


def _kummer_lead(alpha, beta, k, basis: MultipoleBasis) -> np.ndarray:
    """Closed form of the leading Kummer term integrated over both angles."""
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    d0 = (k * k + beta @ beta) - 2j * float(beta @ alpha) - float(alpha @ alpha)
    if abs(d0) < 1e-12:
        raise SingularLeadingTermError(
            f"leading Kummer term singular at alpha = {tuple(alpha)}, "
            f"beta = {tuple(beta)}", q=(0.0, 0.0))
    r = basis.radius
    anorm = np.array([float(np.hypot(alpha[0], alpha[1]))])
    u = _multipole_factor(basis, alpha[None, :], anorm)[:, 0]
    return 2.0 * math.pi * r * np.outer(u, np.conj(u)) / d0


def polynomial_term(basis: MultipoleBasis) -> np.ndarray:
    """Angular integrals of the polynomial part of A1+A2 (the value that the
    Kummer assembly subtracts):

        2 pi r (1/12 - ln 2/(2 pi) + r^2/2) delta_m0 delta_n0
        - (r^3 pi / 2)(delta_m1 delta_n1 + delta_m,-1 delta_n,-1).
    """
    r = basis.radius
    m = basis.order
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    out[m, m] = 2.0 * math.pi * r * (1.0 / 12.0 - math.log(2.0) / (2.0 * math.pi)
                                     + r * r / 2.0)
    if m >= 1:
        out[m + 1, m + 1] -= r**3 * math.pi / 2.0
        out[m - 1, m - 1] -= r**3 * math.pi / 2.0
    return out


def slp_kummer(alpha, beta, k: float, basis: MultipoleBasis,
               trunc: TruncationSpec = TruncationSpec(10),
               quad: QuadratureSettings = QuadratureSettings(),
               series_terms: int = 2,
               lat: Lattice2D = UNIT_SQUARE) -> SlpMatrix:
    """Kummer-transformed assembly; truncation error O(1/N^3).

    Requires the unit square lattice (the A1/A2 closed form) and chord vectors
    inside its validity window, i.e. r < 0.25.
    """
    if not lat.is_unit_square:
        raise DomainError("Kummer assembly needs the unit square lattice")
    if basis.radius >= 0.25:
        raise DomainError("Kummer assembly valid for r < 0.25; use slp_direct")
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    lead = _kummer_lead(alpha, beta, k, basis)
    a_part = _a_part(alpha, basis, quad, series_terms)
    qs = trunc.points(lat, exclude_origin=True)

    def corrected(q, kappa, knorm, denom):
        q_sq = np.einsum("ij,ij->i", q, q)
        return 1.0 / denom + 1.0 / q_sq

    series = _lattice_term(alpha, beta, k, basis, qs, weight=corrected)
    return SlpMatrix(lead - a_part + series, tuple(alpha), tuple(beta), k,
                     basis.radius, basis.order, "kummer")


def slp_beta_difference(alpha, beta, k: float, basis: MultipoleBasis,
                        trunc: TruncationSpec = TruncationSpec(10),
                        lat: Lattice2D = UNIT_SQUARE,
                        quad: QuadratureSettings = QuadratureSettings(),
                        series_terms: int = 2) -> SlpMatrix:
    """Accelerated assembly: the O(1/N^3) difference kernel

        (2 i beta.kappa - |beta|^2) / (d_q (k^2 - |kappa|^2))

    plus the beta = 0 single layer potential assembled by the Kummer route.
    Inherits the artificial |alpha| ~ k singularity of the difference kernel.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    gap = abs(k * k - float(alpha @ alpha))
    if gap < 1e-6:
        raise SingularLeadingTermError(
            f"|k^2 - |alpha|^2| = {gap:.2e}: beta-difference assembly singular")
    qs = trunc.points(lat)

    def difference(q, kappa, knorm, denom):
        denom0 = k * k - knorm**2
        _check_singular(denom0.astype(complex), q, "beta = 0 denominator")
        return (2j * (kappa @ beta) - float(beta @ beta)) / (denom * denom0)

    diff = _lattice_term(alpha, beta, k, basis, qs, weight=difference) / lat.area
    base = slp_kummer(alpha, np.zeros(2), k, basis, trunc, quad, series_terms, lat)
    return SlpMatrix(diff + base.entries, tuple(alpha), tuple(beta), k,
                     basis.radius, basis.order, "beta_difference")


def assemble_slp(alpha, beta, k: float, basis: MultipoleBasis, engine: str = "kummer",
                 trunc: TruncationSpec | None = None, **kw) -> SlpMatrix:
    """Dispatch between the assemblies with their customary truncations."""
    if engine == "kummer":
        return slp_kummer(alpha, beta, k, basis, trunc or TruncationSpec(10), **kw)
    if engine == "direct":
        return slp_direct(alpha, beta, k, basis, trunc or TruncationSpec(1000))
    if engine == "beta_difference":
        return slp_beta_difference(alpha, beta, k, basis, trunc or TruncationSpec(10), **kw)
    raise DomainError(f"unknown SLP engine {engine!r}")


def sigma_min_scan(alpha, beta_grid, basis: MultipoleBasis,
                   trunc: TruncationSpec = TruncationSpec(10),
                   engine: str = "kummer"):
    """Smallest singular value of the SLP over a grid of decay vectors.

    A data-parallel map: BANDGAP_THREADS > 1 fans the grid over a thread
    pool (assembly and SVD release the GIL); results keep the grid order.
    """
    import concurrent.futures
    import os

    def one(beta):
        try:
            s = assemble_slp(alpha, beta, 0.0, basis, engine, trunc)
            sigma = float(np.linalg.svd(s.entries, compute_uv=False)[-1])
        except SingularDenominatorError:
            # the Green's function itself is undefined here, not the SLP
            sigma = float("nan")
        return np.asarray(beta, dtype=float), sigma

    try:
        workers = max(1, int(os.environ.get("BANDGAP_THREADS", "1")))
    except ValueError:
        workers = 1
    betas = list(beta_grid)
    if workers == 1 or len(betas) < 4:
        return [one(b) for b in betas]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, betas))


def symmetric_kernel_points(alpha, kappa, basis: MultipoleBasis,
                            trunc: TruncationSpec = TruncationSpec(40),
                            seed_offset: float = 0.05, iterations: int = 4):
    """Singular points of the SLP near a Rayleigh prediction, refined to
    machine precision.

    kappa = alpha + q is the singular channel; its partner -kappa must also be
    alpha-compatible (true at the high-symmetry points).  Along the symmetric
    ray beta = b rot90(kappa) both channel denominators stay real and equal,
    and the kernel condition reduces to a 2 x 2 determinant over the two
    plane-wave channels.  Returns the two roots (beta_odd, beta_even): the
    odd one carries the sin(kappa.x)-type kernel function of the dilute
    limit, the even one the cos type.
    """
    alpha = np.asarray(alpha, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    knorm = float(np.linalg.norm(kappa))
    if knorm < 1e-12:
        raise DomainError("kappa must be nonzero")
    unit = np.array([-kappa[1], kappa[0]]) / knorm
    g = 2.0 * math.pi * basis.radius
    avec = _multipole_factor(basis, kappa[None, :], np.array([knorm]))[:, 0]
    bvec = _multipole_factor(basis, -kappa[None, :], np.array([knorm]))[:, 0]

    def reduced_roots(t: float):
        beta = (knorm + t) * unit
        d = float(beta @ beta) - knorm * knorm
        s = slp_kummer(alpha, beta, 0.0, basis, trunc).entries
        r_mat = s - (g / d) * (np.outer(avec, avec.conj()) + np.outer(bvec, bvec.conj()))
        r_inv = np.linalg.inv(r_mat)
        aa = avec.conj() @ r_inv @ avec
        bb = bvec.conj() @ r_inv @ bvec
        ab = avec.conj() @ r_inv @ bvec
        ba = bvec.conj() @ r_inv @ avec
        disc = np.sqrt((0.5 * (aa - bb)) ** 2 + ab * ba)
        return [-g * (0.5 * (aa + bb) + disc), -g * (0.5 * (aa + bb) - disc)]

    roots = reduced_roots(seed_offset)
    ts = []
    for d_root in roots:
        t = math.sqrt(max(knorm * knorm + d_root.real, 0.0)) - knorm
        for _ in range(iterations):
            candidates = reduced_roots(t if abs(t) > 1e-4 else 1e-4)
            d_now = (knorm + t) ** 2 - knorm * knorm
            d_root = min(candidates, key=lambda z: abs(z - d_now))
            t = math.sqrt(max(knorm * knorm + d_root.real, 0.0)) - knorm
        ts.append(t)

    betas = [(knorm + t) * unit for t in ts]

    def parity(beta):
        res = kernel_field_check(alpha, beta, basis, trunc,
                                 sigma_ratio_threshold=1.0)
        s = np.sin(res.exterior_points @ kappa)
        c = np.cos(res.exterior_points @ kappa)
        v = res.exterior_values
        cs = abs(np.vdot(s.astype(complex), v)) / (np.linalg.norm(s) * np.linalg.norm(v))
        cc = abs(np.vdot(c.astype(complex), v)) / (np.linalg.norm(c) * np.linalg.norm(v))
        return cs - cc

    if parity(betas[0]) >= parity(betas[1]):
        return betas[0], betas[1]
    return betas[1], betas[0]


@dataclass
class KernelFieldResult:
    sigma_min: float
    sigma_max: float
    density: np.ndarray
    interior_max: float
    exterior_max: float
    exterior_points: np.ndarray
    exterior_values: np.ndarray
    interior_points: np.ndarray = None
    interior_values: np.ndarray = None

    def correlation_with_sine(self, kappa) -> float:
        """|<v, sin(kappa.x)>| / (||v|| ||sin||) over the exterior samples."""
        kappa = np.asarray(kappa, dtype=float)
        s = np.sin(self.exterior_points @ kappa)
        v = self.exterior_values
        denom = np.linalg.norm(v) * np.linalg.norm(s)
        if denom == 0:
            return 0.0
        return float(abs(np.vdot(s.astype(complex), v)) / denom)


def kernel_field_check(alpha, beta, basis: MultipoleBasis,
                       trunc: TruncationSpec = TruncationSpec(10),
                       grid_points=None, engine: str = "kummer",
                       sigma_ratio_threshold: float = 1e-2,
                       field_trunc: TruncationSpec = TruncationSpec(100)) -> KernelFieldResult:
    """Extract the near-kernel density at a singular parameter point and
    evaluate its field inside and outside the resonator."""
    s = assemble_slp(alpha, beta, 0.0, basis, engine, trunc)
    u_svd, sigma, vh = np.linalg.svd(s.entries)
    if sigma[-1] > sigma_ratio_threshold * sigma[0]:
        raise NoKernelError(
            f"sigma_min/sigma_max = {sigma[-1] / sigma[0]:.3e} above threshold "
            f"{sigma_ratio_threshold:.1e}: no kernel density here")
    density = vh[-1].conj()
    r = basis.radius
    if grid_points is None:
        g = np.linspace(-0.45, 0.45, 31)
        gx, gy = np.meshgrid(g, g, indexing="ij")
        grid_points = np.column_stack([gx.ravel(), gy.ravel()])
    grid_points = np.asarray(grid_points, dtype=float)
    rad = np.hypot(grid_points[:, 0], grid_points[:, 1])
    interior_pts = grid_points[rad < 0.8 * r]
    if len(interior_pts) < 8:
        angles = 2 * math.pi * np.arange(16) / 16
        rings = np.concatenate([0.25 * r * np.ones(16), 0.6 * r * np.ones(16)])
        ang2 = np.concatenate([angles, angles])
        interior_pts = np.column_stack([rings * np.cos(ang2), rings * np.sin(ang2)])
    exterior_pts = grid_points[rad > 1.2 * r]
    v_int = outside_field(density, interior_pts, alpha, beta, 0.0, r, field_trunc)
    v_ext = outside_field(density, exterior_pts, alpha, beta, 0.0, r, field_trunc)
    return KernelFieldResult(
        sigma_min=float(sigma[-1]), sigma_max=float(sigma[0]), density=density,
        interior_max=float(np.abs(v_int).max()),
        exterior_max=float(np.abs(v_ext).max()),
        exterior_points=exterior_pts, exterior_values=v_ext,
        interior_points=interior_pts, interior_values=v_int)


def _weight_coefficients(beta, r: float, order: int, points: int, sign: float) -> np.ndarray:
    """Fourier coefficients of exp(sign * beta . x) on the circle |x| = r."""
    thetas = 2.0 * math.pi * np.arange(points) / points
    w = np.exp(sign * r * (beta[0] * np.cos(thetas) + beta[1] * np.sin(thetas)))
    ns = np.arange(-order, order + 1)
    return np.exp(-1j * np.outer(ns, thetas)) @ w.astype(complex) / points


def capacitance_2d(alpha, beta, basis: MultipoleBasis,
                   trunc: TruncationSpec = TruncationSpec(10),
                   delta: float = 1e-3, speed: float = 1.0,
                   engine: str = "kummer", weight_points: int = 64) -> CapacitanceResult2D:
    """Generalised capacitance of a single circular resonator.

    Solves S a = coefficients of e^{beta.x} on the boundary and pairs the
    density with e^{-beta.x}:

        C = -(v^2/(pi r^2)) (2 pi r) sum_n a_n chat_minus[-n].

    The sign convention makes C^{alpha, 0} > 0.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    s = assemble_slp(alpha, beta, 0.0, basis, engine, trunc)
    sigma = np.linalg.svd(s.entries, compute_uv=False)
    if sigma[-1] < 1e-12 * sigma[0]:
        raise SingularMatrixError(
            f"single layer potential singular at alpha = {tuple(alpha)}, "
            f"beta = {tuple(beta)} (gap band pole)")
    r = basis.radius
    c_plus = _weight_coefficients(beta, r, basis.order, weight_points, +1.0)
    c_minus = _weight_coefficients(beta, r, basis.order, weight_points, -1.0)
    a = np.linalg.solve(s.entries, c_plus)
    pairing = complex(np.dot(a, c_minus[::-1]))  # sum_n a_n chat_minus[-n]
    cap = -(speed**2 / (math.pi * r * r)) * 2.0 * math.pi * r * pairing
    omega = branch_sqrt(delta * cap)
    return CapacitanceResult2D(cap, cap, omega, tuple(alpha), tuple(beta),
                               delta, speed, r, basis.order)


def band_omega(alpha, beta, basis: MultipoleBasis,
               trunc: TruncationSpec = TruncationSpec(10),
               delta: float = 1e-3, speed: float = 1.0,
               engine: str = "kummer") -> complex:
    """Subwavelength band value omega = sqrt(delta lambda) at (alpha, beta)."""
    return capacitance_2d(alpha, beta, basis, trunc, delta, speed, engine).omega


DEFAULT_BETA_CAP = 3.0 * math.pi


class GapBranch:
    """Gap band omega(b) of one high-symmetry branch along a fixed decay
    direction, sampled once on a b-grid and inverted per frequency.

    Branches are not monotone: the band may rise to a pole of the single
    layer potential (the decay cap) and continue on a falling segment toward
    the free-space Rayleigh point.  Inversion brackets the first continuous
    sign change and refines it with Brent's method; pole jumps are skipped.
    """

    def __init__(self, alpha, direction, basis: MultipoleBasis,
                 trunc: TruncationSpec = TruncationSpec(10),
                 delta: float = 1e-3, speed: float = 1.0, engine: str = "kummer",
                 beta_cap: float = DEFAULT_BETA_CAP, n_grid: int = 120):
        self.alpha = np.asarray(alpha, dtype=float)
        direction = np.asarray(direction, dtype=float)
        self.direction = direction / np.linalg.norm(direction)
        self.basis = basis
        self.trunc = trunc
        self.delta = delta
        self.speed = speed
        self.engine = engine
        b_hi = beta_cap
        try:
            for b in rayleigh_singular_betas(self.alpha, q_window=2):
                norm = float(np.linalg.norm(b))
                if abs(float(b @ self.direction)) > (1.0 - 1e-9) * norm:
                    b_hi = min(b_hi, 0.995 * norm)
        except DomainError:
            pass
        self.b_hi = b_hi
        self.b_grid = np.concatenate([[0.0], np.linspace(b_hi / n_grid, b_hi, n_grid)])
        self.omega_grid = np.array([self._omega(b) for b in self.b_grid])

    def _omega(self, b: float) -> complex:
        try:
            return band_omega(self.alpha, b * self.direction, self.basis,
                              self.trunc, self.delta, self.speed, self.engine)
        except (SingularMatrixError, SingularDenominatorError):
            return complex(np.nan, np.nan)

    def beta_for_omega(self, omega: float, tol: float = 1e-10):
        """Smallest b with Re omega(b) = omega on a continuous segment.

        Returns (b, Im omega(b)); raises NoBracketError when the frequency is
        not reachable on this branch.
        """
        re = self.omega_grid.real
        f = re - omega
        scale = max(abs(omega), float(np.nanmax(np.abs(re))) / 10.0)
        for j in range(len(f) - 1):
            if np.isnan(f[j]) or np.isnan(f[j + 1]):
                continue
            if f[j] == 0.0:
                return float(self.b_grid[j]), float(self.omega_grid[j].imag)
            if f[j] * f[j + 1] < 0:
                # skip pole jumps: require a continuous crossing
                if abs(re[j + 1] - re[j]) > max(1.0 * scale, 10.0 * abs(f[j])):
                    continue
                b_star = brent_root(
                    lambda b: band_omega(self.alpha, b * self.direction, self.basis,
                                         self.trunc, self.delta, self.speed,
                                         self.engine).real - omega,
                    float(self.b_grid[j]), float(self.b_grid[j + 1]), tol)
                val = band_omega(self.alpha, b_star * self.direction, self.basis,
                                 self.trunc, self.delta, self.speed, self.engine)
                if abs(val.real - omega) <= 1e-8:
                    return b_star, float(val.imag)
        raise NoBracketError(
            f"omega = {omega:.6g} not reachable on the branch alpha = "
            f"{tuple(self.alpha)} along {tuple(self.direction)}")


def gap_beta_for_omega(omega: float, alpha, direction, basis: MultipoleBasis,
                       trunc: TruncationSpec = TruncationSpec(10),
                       delta: float = 1e-3, speed: float = 1.0,
                       engine: str = "kummer", beta_cap: float = DEFAULT_BETA_CAP,
                       tol: float = 1e-10, branch: GapBranch | None = None):
    """Invert the gap band along a fixed decay direction.

    Returns (beta_magnitude, Im omega at the root).  A precomputed GapBranch
    may be supplied to amortise the grid scan across frequencies.
    """
    if branch is None:
        branch = GapBranch(alpha, direction, basis, trunc, delta, speed,
                           engine, beta_cap)
    return branch.beta_for_omega(omega, tol)


def outside_field(coefficients, points, alpha, beta, k: float, r: float,
                  trunc: TruncationSpec = TruncationSpec(100),
                  lat: Lattice2D = UNIT_SQUARE) -> np.ndarray:
    """Field of a multipole density through the band-gap Green's function:

        v(x) = sum_n a_n (2 pi r (-i)^n / |Y|)
               sum_q e^{i kappa.x} J_n(r|kappa|) e^{i n arg kappa} / d_q.
    """
    coefficients = np.asarray(coefficients, dtype=complex)
    order = (len(coefficients) - 1) // 2
    if len(coefficients) != 2 * order + 1:
        raise DomainError("coefficient vector must have odd length 2M+1")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if r < 1e-3 and trunc.n < 300:
        warnings.warn(
            f"dilute resonator r = {r:g}: raising lattice truncation from "
            f"{trunc.n} to 300 for the exterior field",
            DiluteTruncationWarning, stacklevel=2)
        trunc = TruncationSpec(300)
    ns = np.arange(-order, order + 1)
    prefactor = 2.0 * math.pi * r * (-1j) ** ns * coefficients / lat.area
    out = np.zeros(len(points), dtype=complex)
    qs = trunc.points(lat)
    for start in range(0, len(qs), _Q_CHUNK // 10):
        q = qs[start:start + _Q_CHUNK // 10]
        kappa = alpha[None, :] + q
        knorm = np.hypot(kappa[:, 0], kappa[:, 1])
        denom = (k * k + beta @ beta) - 2j * (kappa @ beta) - knorm**2
        _check_singular(denom, q, "exterior field denominator")
        bess = _bessel_block(order, knorm * r)
        phases = np.conj(_phase_factors(order, kappa, knorm))  # e^{+i n psi}
        w = (prefactor[:, None] * bess * phases).sum(axis=0) / denom
        out += np.exp(1j * (points @ kappa.T)) @ w
    return out
