"""One-dimensional resonator chains.

Quasiperiodic and finite gauge capacitance matrices, closed-form gap
functions, skin-effect / random / harmonic / disordered / SSH predictors and
modal-decay measurement.

Conventions
-----------
A unit cell holds N resonators of lengths ``l_i`` followed by spacings
``s_i`` (the last spacing wraps to the next cell).  The cell length is
``L = sum(l) + sum(s)``.  Complex quasimomentum ``z = alpha + i beta`` acts
through the Floquet factor ``exp(i z L)``; beta > 0 means decay to the right.

The finite gauge capacitance matrix follows the flux-conservation derivation:
row i carries the gauge factors of resonator i,

    phi_plus(g l)  = g l / (1 - exp(-g l)),
    phi_minus(g l) = g l / (1 - exp(+g l)),

which reduces to the free (Neumann) capacitance matrix as gamma -> 0 and
annihilates the constant vector exactly for every chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .numerics import (
    FitResult,
    branch_sqrt,
    eig_dense,
    fit_log_decay,
    fit_log_decay_bloch,
)

#: per-cell log-magnitude below which eigenvector entries are considered to
#: sit on the double-precision floor and are dropped from decay fits
FLOOR_LOG = -30.0


@dataclass(frozen=True)
class ChainSpec:
    """Geometry and material data of a periodic 1D resonator chain."""

    lengths: tuple[float, ...]
    spacings: tuple[float, ...]
    delta: float = 1e-3
    speeds: tuple[float, ...] = ()

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        spacings = tuple(float(x) for x in self.spacings)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "spacings", spacings)
        if not lengths or any(x <= 0 for x in lengths):
            raise DomainError("resonator lengths must be positive")
        if len(spacings) != len(lengths) or any(x <= 0 for x in spacings):
            raise DomainError("periodic chain needs one positive spacing per resonator")
        if self.delta <= 0:
            raise DomainError("contrast delta must be positive")
        if not self.speeds:
            object.__setattr__(self, "speeds", tuple(1.0 for _ in lengths))
        elif len(self.speeds) != len(lengths):
            raise DomainError("need one wave speed per resonator")

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def cell_length(self) -> float:
        return sum(self.lengths) + sum(self.spacings)


@dataclass(frozen=True)
class GaugeProfile:
    """Gauge potential applied inside the resonators.

    kind: 'constant' (value), 'per_resonator' (values, tiled periodically),
    'harmonic' (gamma_i = a/(1+i), i the global resonator index) or 'random'
    (iid uniform on [0, 2*mean], seeded).
    """

    kind: str = "constant"
    value: float = 0.0
    values: tuple[float, ...] = ()
    a: float = 0.0
    mean: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "per_resonator", "harmonic", "random"):
            raise DomainError(f"unknown gauge kind {self.kind!r}")
        if self.kind == "harmonic" and self.a <= 0:
            raise DomainError("harmonic gauge requires a > 0")
        if self.kind == "per_resonator" and not self.values:
            raise DomainError("per_resonator gauge requires values")
        if self.kind == "random" and not math.isfinite(self.mean):
            raise DomainError("random gauge requires a finite mean")

    @property
    def periodic(self) -> bool:
        return self.kind in ("constant", "per_resonator")

    def sample(self, n: int) -> np.ndarray:
        """Gamma value for each of n consecutive resonators."""
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "per_resonator":
            reps = -(-n // len(self.values))
            return np.tile(np.asarray(self.values, dtype=float), reps)[:n]
        if self.kind == "harmonic":
            return self.a / (1.0 + np.arange(1, n + 1, dtype=float))
        rng = np.random.default_rng(self.seed)
        return rng.uniform(0.0, 2.0 * self.mean, size=n)


@dataclass(frozen=True)
class ComplexQuasimomentum1D:
    """alpha reduced to (-pi/L, pi/L]; beta in 1/length units."""

    alpha: float
    beta: float = 0.0

    def reduced(self, cell_length: float) -> "ComplexQuasimomentum1D":
        half = math.pi / cell_length
        alpha = math.fmod(self.alpha + half, 2.0 * half)
        if alpha <= 0:
            alpha += 2.0 * half
        return ComplexQuasimomentum1D(alpha - half, self.beta)

    @property
    def z(self) -> complex:
        return self.alpha + 1j * self.beta


@dataclass
class ModeSet:
    """Eigenfrequencies and modes of a finite chain, sorted by Re(lambda)."""

    frequencies: np.ndarray          # complex, shape (N,)
    modes: np.ndarray                # complex, shape (N, N), one column per mode
    eigenvalues: np.ndarray          # capacitance eigenvalues, shape (N,)
    positions: np.ndarray = field(default=None)  # resonator midpoints


def quasiperiodic_capacitance(spec: ChainSpec, k: ComplexQuasimomentum1D) -> np.ndarray:
    """Quasiperiodic capacitance matrix C^{alpha,beta} of the infinite chain."""
    n = spec.n
    L = spec.cell_length
    z = k.z
    s = spec.spacings

    def sp(j):  # s_j, 1-based with s_0 = s_N
        return s[(j - 1) % n]

    c = np.zeros((n, n), dtype=complex)
    for i in range(1, n + 1):
        c[i - 1, i - 1] += 1.0 / sp(i - 1) + 1.0 / sp(i)
        if i >= 2:
            c[i - 1, i - 2] += -1.0 / sp(i - 1)
        if i <= n - 1:
            c[i - 1, i] += -1.0 / sp(i)
    # corner terms (both land on the single entry when N = 1)
    c[n - 1, 0] += -np.exp(-1j * z * L) / sp(n)
    c[0, n - 1] += -np.exp(1j * z * L) / sp(n)
    return c


def band_function_1d(spec: ChainSpec, k: ComplexQuasimomentum1D) -> list[complex]:
    """Subwavelength band values omega_i = sqrt(delta lambda_i), Im >= 0 branch,
    sorted by real part."""
    pairs = eig_dense(quasiperiodic_capacitance(spec, k))
    lams = sorted((p[0] for p in pairs), key=lambda v: v.real)
    return [branch_sqrt(spec.delta * lam) for lam in lams]


def monomer_gap_beta(omega: float, delta: float, s: float = 1.0, L: float = 2.0) -> float:
    """Gap function of the monomer chain: beta = arcosh(omega^2 s/(2 delta) - 1)/L.

    Defined for omega at or above the band edge omega^2 = 4 delta / s.
    """
    arg = omega * omega * s / (2.0 * delta) - 1.0
    if arg < 1.0 - 1e-12:
        raise DomainError(
            f"omega^2 = {omega * omega:.6g} below the monomer band edge {4 * delta / s:.6g}"
        )
    return math.acosh(max(arg, 1.0)) / L


def dimer_gap_beta(omega: float, delta: float, s1: float, s2: float, L: float) -> float:
    """Gap function inside the dimer gap (alpha L = pi branch).

    beta = arcosh( (s1 s2 / 2) (1/s1^2 + 1/s2^2 - (omega^2/delta - 1/s1 - 1/s2)^2) ) / L
    """
    if s1 == s2:
        raise DomainError("dimer gap requires s1 != s2")
    lam = omega * omega / delta
    arg = (s1 * s2 / 2.0) * (1.0 / s1**2 + 1.0 / s2**2 - (lam - 1.0 / s1 - 1.0 / s2) ** 2)
    if arg < 1.0 - 1e-12:
        raise DomainError(f"frequency omega = {omega:.6g} is not inside the dimer gap")
    return math.acosh(max(arg, 1.0)) / L


def _phi_plus(g: float, l: float) -> float:
    x = g * l
    return 1.0 if abs(x) < 1e-8 else x / (1.0 - math.exp(-x))


def _phi_minus(g: float, l: float) -> float:
    x = g * l
    return -1.0 if abs(x) < 1e-8 else x / (1.0 - math.exp(x))


def gauge_capacitance_finite(lengths, spacings, gauge: GaugeProfile) -> np.ndarray:
    """Gauge capacitance matrix of a finite open chain.

    lengths: N resonator lengths; spacings: at least N-1 gaps (a trailing
    terminal gap is ignored).  Row i carries resonator i's gauge factors; the
    gamma -> 0 limit is the free capacitance matrix and the constant vector is
    an exact kernel element.
    """
    lengths = [float(x) for x in lengths]
    n = len(lengths)
    if n < 2:
        raise DomainError("finite chain needs at least 2 resonators")
    spacings = [float(x) for x in spacings]
    if len(spacings) < n - 1:
        raise DomainError("need at least N-1 spacings for N resonators")
    gam = gauge.sample(n)
    c = np.zeros((n, n))
    for i in range(n):
        pp = _phi_plus(gam[i], lengths[i])
        pm = _phi_minus(gam[i], lengths[i])
        if i == 0:
            c[0, 0] = pp / spacings[0]
            c[0, 1] = -pp / spacings[0]
        elif i == n - 1:
            c[i, i] = -pm / spacings[i - 1]
            c[i, i - 1] = pm / spacings[i - 1]
        else:
            c[i, i] = pp / spacings[i] - pm / spacings[i - 1]
            c[i, i + 1] = -pp / spacings[i]
            c[i, i - 1] = pm / spacings[i - 1]
    return c


def gauge_capacitance_quasiperiodic(cell_lengths, cell_spacings, gammas,
                                    z: complex) -> np.ndarray:
    """Bloch gauge capacitance matrix of the infinite gauged crystal at
    complex quasimomentum z = alpha + i beta.

    At beta equal to the skin-effect prediction the eigenvalues trace the
    (real) bulk bands of the open chain; used to classify finite-chain modes
    as bulk or gap/edge states.
    """
    cl = [float(x) for x in cell_lengths]
    cs = [float(x) for x in cell_spacings]
    n = len(cl)
    L = sum(cl) + sum(cs)
    gam = np.asarray(gammas, dtype=float)
    c = np.zeros((n, n), dtype=complex)
    for i in range(n):
        pp = _phi_plus(gam[i], cl[i])
        pm = _phi_minus(gam[i], cl[i])
        c[i, i] += pp / cs[i % n] - pm / cs[(i - 1) % n]
        c[i, (i + 1) % n] += -pp / cs[i % n] * (np.exp(1j * z * L) if i == n - 1 else 1.0)
        c[i, (i - 1) % n] += pm / cs[(i - 1) % n] * (np.exp(-1j * z * L) if i == 0 else 1.0)
    return c


@dataclass
class FiniteChain:
    """A concrete finite chain assembled from unit cells."""

    lengths: list[float]
    spacings: list[float]          # N-1 interior gaps
    positions: np.ndarray          # resonator midpoints
    cell_index: np.ndarray         # cell number of each resonator
    n_cells: int
    cell_length: float


def build_periodic_chain(cell_lengths, cell_spacings, n_cells: int) -> FiniteChain:
    """Replicate a unit cell n_cells times (the trailing gap is dropped)."""
    lengths, spacings, pos, cells = [], [], [], []
    x = 0.0
    for c in range(n_cells):
        for l, s in zip(cell_lengths, cell_spacings):
            lengths.append(float(l))
            pos.append(x + l / 2.0)
            cells.append(c)
            x += l
            spacings.append(float(s))
            x += s
    return FiniteChain(lengths, spacings[:-1], np.array(pos), np.array(cells),
                       n_cells, sum(cell_lengths) + sum(cell_spacings))


def build_disordered_chain(n_cells: int, dimer_sites, l: float = 1.0,
                           s: float = 1.0) -> FiniteChain:
    """Monomer chain with dimer cells at the given sites.

    Monomer cells are (l, s); dimer cells are (l/2, s/2, l/2, s/2), so every
    cell carries total resonator length l and total length L = l + s.
    """
    dimer_sites = set(int(i) for i in dimer_sites)
    if any(i < 0 or i >= n_cells for i in dimer_sites):
        raise DomainError("dimer sites must lie inside the chain")
    lengths, spacings, pos, cells = [], [], [], []
    x = 0.0
    for c in range(n_cells):
        parts = [(l / 2, s / 2), (l / 2, s / 2)] if c in dimer_sites else [(l, s)]
        for ll, ss in parts:
            lengths.append(ll)
            pos.append(x + ll / 2.0)
            cells.append(c)
            x += ll
            spacings.append(ss)
            x += ss
    return FiniteChain(lengths, spacings[:-1], np.array(pos), np.array(cells),
                       n_cells, l + s)


def ssh_defect_chain(s1: float, s2: float, n_cells: int, l: float = 1.0) -> FiniteChain:
    """Dimerised chain with one geometric defect at the centre.

    Spacings run [s1, s2] * n_cells followed by the mirror [s2, s1] * n_cells,
    which puts exactly one adjacent repeated s2 pair at the interface.
    """
    if s1 == s2:
        raise DomainError("SSH chain requires s1 != s2")
    seq = [s1, s2] * n_cells + [s2, s1] * n_cells
    lengths = [float(l)] * (len(seq) + 1)
    pos, x = [], 0.0
    for i, ll in enumerate(lengths):
        pos.append(x + ll / 2.0)
        x += ll
        if i < len(seq):
            x += seq[i]
    cells = np.arange(len(lengths)) // 2
    return FiniteChain(lengths, [float(v) for v in seq], np.array(pos),
                       cells, n_cells, l * 2 + s1 + s2)


def finite_modes(lengths, spacings, gauge: GaugeProfile, delta: float,
                 positions=None) -> ModeSet:
    """Eigenpairs of the finite gauge capacitance matrix.

    omega_i = sqrt(delta lambda_i) on the Im >= 0 branch; modes normalised to
    max-abs 1 and sorted by Re(lambda).
    """
    c = gauge_capacitance_finite(lengths, spacings, gauge)
    pairs = eig_dense(c)
    order = np.argsort([p[0].real for p in pairs])
    lams = np.array([pairs[i][0] for i in order])
    modes = np.column_stack([pairs[i][1] for i in order])
    modes = modes / np.abs(modes).max(axis=0)
    freqs = np.array([branch_sqrt(delta * lam) for lam in lams])
    return ModeSet(freqs, modes, lams,
                   None if positions is None else np.asarray(positions))


def skin_decay_prediction(spec: ChainSpec, gauge: GaugeProfile) -> float:
    """Mean decay density over a unit cell: beta_bar = (1/2L) sum_i l_i gamma_i."""
    if not gauge.periodic:
        raise DomainError("decay condition needs a cell-periodic gauge")
    gam = gauge.sample(spec.n)
    return float(np.dot(spec.lengths, gam) / (2.0 * spec.cell_length))


def expected_decay_random(spec: ChainSpec, gamma_mean: float) -> float:
    """Almost-sure decay rate for an iid gauge with mean gamma_mean."""
    if not math.isfinite(gamma_mean):
        raise DomainError("gamma mean must be finite")
    return float(sum(spec.lengths) * gamma_mean / (2.0 * spec.cell_length))


def harmonic_gauge_envelope(a: float, n: int) -> float:
    """Algebraic envelope (1+n)^(-a/2) of the non-periodic gauge gamma_i = a/(1+i)."""
    if a <= 0 or n < 0:
        raise DomainError("need a > 0 and n >= 0")
    return float((1.0 + n) ** (-a / 2.0))


def harmonic_cumulative_decay(a: float, n: int) -> float:
    """Cumulative decay exponent (1/2) sum_{i=1..n} a/(1+i) (unit resonator
    length per cell)."""
    if a <= 0 or n < 0:
        raise DomainError("need a > 0 and n >= 0")
    return 0.5 * sum(a / (1.0 + i) for i in range(1, n + 1))


def composite_decay(omega: float, gamma: float, resonator_length: float,
                    side: str, delta: float, L: float, s: float | None = None) -> float:
    """Per-cell log-slope of a defect mode in a gauged monomer chain.

    Skin drift contributes -gamma l / 2 per cell on both sides; the monomer
    gap function contributes +beta(omega) L left of the defect and
    -beta(omega) L right of it.  Inside the monomer band beta(omega) = 0.
    """
    if side not in ("left", "right"):
        raise DomainError("side must be 'left' or 'right'")
    if s is None:
        s = L - resonator_length
    try:
        beta = monomer_gap_beta(omega, delta, s, L)
    except DomainError:
        beta = 0.0
    sign = 1.0 if side == "left" else -1.0
    return -gamma * resonator_length / 2.0 + sign * beta * L


def measure_modal_decay(mode, positions, window=None, cell_length: float | None = None,
                        method: str = "line", floor: float = FLOOR_LOG) -> FitResult:
    """Decay rate of |mode| from per-cell maxima.

    positions: resonator coordinates; cell_length groups resonators into cells
    (one site per cell if omitted).  window: (skip_near, skip_far) cells
    dropped at the two chain ends, default (2, 2).  Samples on the
    double-precision floor are discarded.  method 'line' fits a straight line
    (fit_log_decay); 'bloch' also models the bounded Bloch oscillation and
    returns its trend slope.
    """
    mode = np.abs(np.asarray(mode))
    positions = np.asarray(positions, dtype=float)
    if mode.shape != positions.shape:
        raise DomainError("mode and positions must have matching shapes")
    peak = mode.max()
    if peak <= 0:
        raise DomainError("mode vanishes on the window")
    mode = mode / peak
    skip_near, skip_far = window if window is not None else (2, 2)
    if cell_length is None:
        cells = np.arange(len(mode))
        centers = positions
    else:
        cells = np.floor(np.round(positions / cell_length, 9)).astype(int)
        centers = (cells + 0.5) * cell_length
    n_cells = cells.max() + 1
    xs, ys = [], []
    for c in range(skip_near, n_cells - skip_far):
        sel = cells == c
        if not np.any(sel):
            continue
        val = math.log(max(mode[sel].max(), 1e-300))
        if val > floor:
            xs.append(float(centers[sel][0]))
            ys.append(val)
    if len(xs) < 3:
        raise DomainError("fewer than 3 usable cells in the fit window")
    if method == "bloch":
        slope = fit_log_decay_bloch(xs, ys)
        fit = fit_log_decay([(x, math.exp(y)) for x, y in zip(xs, ys)])
        return FitResult(slope, fit.intercept, fit.residual, (skip_near, n_cells - skip_far))
    return fit_log_decay([(x, math.exp(y)) for x, y in zip(xs, ys)])


def deformed_band_values(cell_lengths, cell_spacings, gammas, beta_bar: float,
                         n_alpha: int = 181) -> np.ndarray:
    """Eigenvalues of the beta_bar-deformed Bloch gauge capacitance over the
    Brillouin zone.

    This deformed spectrum is real for the skin-effect chains and traces the
    bulk bands of the open chain; finite-chain bulk modes accumulate on it
    while gap/edge states keep a finite distance.
    """
    L = sum(cell_lengths) + sum(cell_spacings)
    alphas = np.linspace(-math.pi / L, math.pi / L, n_alpha)
    vals = [
        np.linalg.eigvals(gauge_capacitance_quasiperiodic(
            cell_lengths, cell_spacings, gammas, a + 1j * beta_bar))
        for a in alphas
    ]
    return np.concatenate(vals)


def bulk_band_distance(mode_lambda: float, cell_lengths, cell_spacings, gammas,
                       beta_bar: float, n_alpha: int = 181) -> float:
    """Distance from mode_lambda to the beta_bar-deformed bulk bands."""
    vals = deformed_band_values(cell_lengths, cell_spacings, gammas, beta_bar,
                                n_alpha)
    return float(np.min(np.abs(vals - mode_lambda)))
