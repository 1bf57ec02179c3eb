"""Quasiperiodic band-gap Green's function in two dimensions.

Three evaluation engines for

    G(x) = (1/|Y|) sum_q exp(i (alpha+q).x) / (k^2 + |beta|^2
           - 2 i beta.(alpha+q) - |alpha+q|^2),

the direct Fourier sum (O(1/N) truncation error), the beta-difference
acceleration (O(1/N^3)) and the Kummer transform with the closed-form A1/A2
lattice sum (O(1/N^3), valid at alpha = 0).  The Rayleigh singularity
condition |alpha+q| = |beta|, (alpha+q) perp beta marks parameter points
where the series has a vanishing denominator and the Green's function cannot
be defined.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CancellationRegimeError,
    CancellationRegimeWarning,
    DomainError,
    SingularDenominatorError,
    SingularLeadingTermError,
)

#: |k^2 - |alpha|^2| below this raises in the beta-difference engine
CANCELLATION_HARD = 1e-6
#: ... and below this only warns
CANCELLATION_SOFT = 5e-2

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class Lattice2D:
    """Direct lattice spanned by l1, l2 with duals q1, q2 (q_i . l_j = 2 pi d_ij)."""

    l1: tuple[float, float] = (1.0, 0.0)
    l2: tuple[float, float] = (0.0, 1.0)
    q1: tuple[float, float] = field(init=False)
    q2: tuple[float, float] = field(init=False)
    area: float = field(init=False)

    def __post_init__(self):
        basis = np.array([self.l1, self.l2], dtype=float)
        area = abs(np.linalg.det(basis))
        if area <= 1e-14:
            raise DomainError("lattice vectors must be linearly independent")
        dual = 2.0 * math.pi * np.linalg.inv(basis).T
        object.__setattr__(self, "q1", tuple(dual[0]))
        object.__setattr__(self, "q2", tuple(dual[1]))
        object.__setattr__(self, "area", float(area))

    @property
    def is_unit_square(self) -> bool:
        return self.l1 == (1.0, 0.0) and self.l2 == (0.0, 1.0)


UNIT_SQUARE = Lattice2D()


@dataclass(frozen=True)
class ComplexQuasimomentum2D:
    """Real quasimomentum alpha (reduced to the Brillouin zone) and decay
    vector beta."""

    alpha: tuple[float, float]
    beta: tuple[float, float] = (0.0, 0.0)

    def reduced(self, lat: Lattice2D = UNIT_SQUARE) -> "ComplexQuasimomentum2D":
        dual = np.array([lat.q1, lat.q2])
        frac = np.linalg.solve(dual.T, np.asarray(self.alpha, dtype=float))
        frac = (frac + 0.5) % 1.0 - 0.5
        alpha = dual.T @ frac
        return ComplexQuasimomentum2D(tuple(alpha), self.beta)


@dataclass(frozen=True)
class TruncationSpec:
    """Reciprocal window q = m q1 + n q2, (m, n) in [-N, N]^2."""

    n: int = 10

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("truncation requires N >= 1")

    def points(self, lat: Lattice2D = UNIT_SQUARE, exclude_origin: bool = False):
        """All window points as an (M, 2) array."""
        rng = np.arange(-self.n, self.n + 1)
        mm, nn = np.meshgrid(rng, rng, indexing="ij")
        mm = mm.ravel()
        nn = nn.ravel()
        if exclude_origin:
            keep = ~((mm == 0) & (nn == 0))
            mm, nn = mm[keep], nn[keep]
        q1 = np.asarray(lat.q1)
        q2 = np.asarray(lat.q2)
        return mm[:, None] * q1[None, :] + nn[:, None] * q2[None, :]


def _denominators(kappa: np.ndarray, beta: np.ndarray, k: float) -> np.ndarray:
    """k^2 + |beta|^2 - 2 i beta.kappa - |kappa|^2 for rows kappa."""
    beta_sq = float(beta @ beta)
    return (k * k + beta_sq) - 2j * (kappa @ beta) - np.einsum("ij,ij->i", kappa, kappa)


def _check_denominators(denom: np.ndarray, qs: np.ndarray, what: str):
    bad = np.abs(denom) < _SINGULAR_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularDenominatorError(
            f"{what} singular at reciprocal lattice point q = {tuple(qs[i])}",
            q=tuple(qs[i]),
        )


def greens_direct(x, k: float, q2d: ComplexQuasimomentum2D,
                  lat: Lattice2D = UNIT_SQUARE,
                  trunc: TruncationSpec = TruncationSpec(100)) -> complex:
    """Direct Fourier partial sum of the band-gap Green's function."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(q2d.alpha, dtype=float)
    beta = np.asarray(q2d.beta, dtype=float)
    qs = trunc.points(lat)
    kappa = alpha[None, :] + qs
    denom = _denominators(kappa, beta, k)
    _check_denominators(denom, qs, "Green's function denominator")
    return complex(np.sum(np.exp(1j * (kappa @ x)) / denom) / lat.area)


def greens_beta_difference(x, k: float, q2d: ComplexQuasimomentum2D,
                           lat: Lattice2D = UNIT_SQUARE,
                           trunc: TruncationSpec = TruncationSpec(10)) -> complex:
    """Difference kernel G(alpha, beta) - G(alpha, 0) as a combined fraction.

    Converges like O(1/N^3) but develops an artificial singularity when
    |alpha| ~ k; that regime is flagged.
    """
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(q2d.alpha, dtype=float)
    beta = np.asarray(q2d.beta, dtype=float)
    gap = abs(k * k - float(alpha @ alpha))
    if gap < CANCELLATION_HARD:
        raise CancellationRegimeError(
            f"|k^2 - |alpha|^2| = {gap:.3e}: beta-difference kernel is singular here"
        )
    if gap < CANCELLATION_SOFT:
        warnings.warn(
            f"|k^2 - |alpha|^2| = {gap:.3e}: beta-difference kernel close to its"
            " artificial singularity; expect precision loss",
            CancellationRegimeWarning, stacklevel=2,
        )
    qs = trunc.points(lat)
    kappa = alpha[None, :] + qs
    denom = _denominators(kappa, beta, k)
    _check_denominators(denom, qs, "Green's function denominator")
    denom0 = k * k - np.einsum("ij,ij->i", kappa, kappa)
    _check_denominators(denom0.astype(complex), qs, "beta = 0 denominator")
    beta_sq = float(beta @ beta)
    numer = 2j * (kappa @ beta) - beta_sq
    return complex(np.sum(np.exp(1j * (kappa @ x)) * numer / (denom * denom0)) / lat.area)


def _a_half_array(u, v, terms: int):
    """One of the two symmetric halves of the A1 + A2 closed form."""
    total = np.zeros_like(np.asarray(u, dtype=float))
    for n in range(1, terms + 1):
        total += (np.cos(2 * math.pi * n * u) / n
                  * (np.exp(2 * math.pi * n * v) + np.exp(-2 * math.pi * n * v))
                  / np.expm1(2 * math.pi * n))
    return (1.0 / 24.0 - math.log(2.0) / (4 * math.pi)
            - 0.25 * (v - u) + 0.25 * (2 * v * v - u * u)
            - np.log(np.sinh(math.pi * v) ** 2 + np.sin(math.pi * u) ** 2) / (8 * math.pi)
            + total / (4 * math.pi))


def kummer_a1a2_array(x1, x2, series_terms: int = 2):
    """Vectorised A1(x) + A2(x) = sum_{q != 0} exp(i q.x)/|q|^2 on the unit
    square lattice; exponentially convergent for |x_i| < 1."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return _a_half_array(x1, x2, series_terms) + _a_half_array(x2, x1, series_terms)


def kummer_A1A2(x, series_terms: int = 2) -> float:
    """Closed form for the conditionally convergent sum
    sum_{q in 2 pi Z^2 \\ 0} exp(i q.x)/|q|^2.

    Valid for |x_1|, |x_2| < 1 (excluding lattice points, where the sum has a
    logarithmic singularity); the exponential tails are truncated after
    series_terms terms (default 2, truncation error about 1e-7).
    """
    if series_terms < 1:
        raise DomainError("series_terms must be >= 1")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        raise DomainError(f"A1 + A2 closed form requires |x_i| < 1, got {tuple(x)}")
    return float(kummer_a1a2_array(x[0], x[1], series_terms))


def greens_kummer(x, k: float, q2d: ComplexQuasimomentum2D,
                  lat: Lattice2D = UNIT_SQUARE,
                  trunc: TruncationSpec = TruncationSpec(10),
                  series_terms: int = 2) -> complex:
    """Kummer-transformed Green's function (unit square lattice).

    Leading term exp(i alpha.x)/d0 minus the A1+A2 reconstruction of the
    |q|^-2 sum, plus the absolutely convergent corrected series with O(1/N^3)
    tail.  Remains well-conditioned at alpha = 0 where the beta-difference
    kernel cancels catastrophically.
    """
    if not lat.is_unit_square:
        raise DomainError("Kummer closed form is implemented for the unit square lattice")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        raise DomainError("Kummer evaluation requires |x_i| < 1")
    alpha = np.asarray(q2d.alpha, dtype=float)
    beta = np.asarray(q2d.beta, dtype=float)
    beta_sq = float(beta @ beta)
    d0 = (k * k + beta_sq) - 2j * float(beta @ alpha) - float(alpha @ alpha)
    if abs(d0) < _SINGULAR_TOL:
        raise SingularLeadingTermError(
            f"leading Kummer term singular at alpha = {tuple(alpha)}, beta = {tuple(beta)}",
            q=(0.0, 0.0),
        )
    phase = np.exp(1j * float(alpha @ x))
    lead = phase / d0
    a_part = phase * kummer_A1A2(x, series_terms)
    q = trunc.points(lat, exclude_origin=True)
    kappa = alpha[None, :] + q
    denom = _denominators(kappa, beta, k)
    _check_denominators(denom, q, "corrected-series denominator")
    q_sq = np.einsum("ij,ij->i", q, q)
    series = np.sum(np.exp(1j * (kappa @ x)) * (1.0 / denom + 1.0 / q_sq))
    return complex(lead - a_part + series)


def rayleigh_singular_betas(alpha, lat: Lattice2D = UNIT_SQUARE,
                            q_window: int = 2) -> list[np.ndarray]:
    """All decay vectors beta with |beta| = |alpha+q| and beta perp (alpha+q)
    for q in the window: beta = +- |alpha+q| rot90((alpha+q)/|alpha+q|)."""
    alpha = np.asarray(alpha, dtype=float)
    out = []
    for q in TruncationSpec(q_window).points(lat):
        kappa = alpha + q
        norm = float(np.hypot(kappa[0], kappa[1]))
        if norm < 1e-12:
            raise DomainError(f"alpha = -q for q = {tuple(q)}: kappa degenerates")
        unit = kappa / norm
        rot = np.array([-unit[1], unit[0]])
        out.append(norm * rot)
        out.append(-norm * rot)
    return out
