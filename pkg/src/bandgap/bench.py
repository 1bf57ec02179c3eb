"""Convergence-order and runtime studies for the single layer potential
assemblies.

Reproduces the truncation-error comparison of the three lattice-sum engines
(direct O(1/N), beta-difference and Kummer O(1/N^3)) and the assembly runtime
trend at desk scale.  Absolute runtime constants are hardware specific and
deliberately not asserted; the study reports the fitted quadratic trend.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .greens2d import TruncationSpec
from .numerics import fit_log_decay
from .slp2d import MultipoleBasis, assemble_slp, slp_kummer

#: probe parameters kept away from band-structure singularities
DEFAULT_PROBES = (
    ((1.3, 0.9), (0.4, -0.3)),
    ((2.1, -0.7), (0.2, 0.5)),
    ((0.8, 1.7), (-0.5, 0.1)),
)


@dataclass
class StudyResult:
    method: str
    ns: list[int]
    values: list[float]          # max-entry error or seconds
    slope: float                 # log-log fitted slope (convergence study)
    residual: float
    quad_coeff: float = 0.0      # a in seconds = a N^2 + c (runtime study)
    quad_const: float = 0.0


def reference_slp(alpha, beta, basis: MultipoleBasis,
                  trunc: TruncationSpec = TruncationSpec(200),
                  series_terms: int = 8) -> np.ndarray:
    """Reference matrix: the fastest-converging assembly at large truncation."""
    return slp_kummer(alpha, beta, 0.0, basis, trunc, series_terms=series_terms).entries


def convergence_study(method: str, ns=(10, 20, 40, 80, 160),
                      basis: MultipoleBasis | None = None,
                      probes=DEFAULT_PROBES,
                      reference_n: int = 200) -> StudyResult:
    """Max-entry SLP truncation error versus lattice size N.

    The error at each N is the maximum over probe points of the max-entry
    difference to the Kummer reference; the log-log slope estimates the
    truncation order.
    """
    ns = sorted(int(n) for n in ns)
    if reference_n < 10 * 0 + max(ns):
        raise DomainError("reference truncation must exceed the study range")
    basis = basis or MultipoleBasis(order=2, radius=0.05)
    refs = [reference_slp(alpha, beta, basis, TruncationSpec(reference_n))
            for alpha, beta in probes]
    errors = []
    for n in ns:
        err = 0.0
        for (alpha, beta), ref in zip(probes, refs):
            mat = assemble_slp(alpha, beta, 0.0, basis, method,
                               TruncationSpec(n)).entries
            err = max(err, float(np.abs(mat - ref).max()))
        errors.append(max(err, 1e-300))
    fit = fit_log_decay([(math.log(n), e) for n, e in zip(ns, errors)])
    return StudyResult(method, list(ns), errors, fit.slope, fit.residual)


def runtime_study(method: str, ns=(50, 100, 200, 400), repetitions: int = 5,
                  basis: MultipoleBasis | None = None,
                  probe=((1.3, 0.9), (0.4, -0.3))) -> StudyResult:
    """Median wall time of one SLP assembly per lattice size N, with a fitted
    quadratic trend a N^2 + c."""
    if repetitions < 3:
        raise DomainError("need at least 3 repetitions for a stable median")
    ns = sorted(int(n) for n in ns)
    basis = basis or MultipoleBasis(order=3, radius=0.05)
    alpha, beta = probe
    times = []
    for n in ns:
        samples = []
        for _ in range(repetitions):
            start = time.perf_counter()
            assemble_slp(alpha, beta, 0.0, basis, method, TruncationSpec(n))
            samples.append(time.perf_counter() - start)
        times.append(float(np.median(samples)))
    design = np.vstack([np.array(ns, dtype=float) ** 2, np.ones(len(ns))]).T
    (a, c), *_ = np.linalg.lstsq(design, np.array(times), rcond=None)
    if len(ns) >= 3:
        fit = fit_log_decay([(math.log(n), t) for n, t in zip(ns, times)])
        slope, resid = fit.slope, fit.residual
    else:
        slope, resid = 0.0, 0.0
    return StudyResult(method, list(ns), times, slope, resid,
                       quad_coeff=float(a), quad_const=float(c))
