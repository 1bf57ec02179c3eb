"""Tests for the single layer potential assemblies, capacitance, gap-band
inversion, singularity scanning and exterior fields."""

import math
import warnings

import numpy as np
import pytest

from bandgap.errors import (
    DomainError,
    NoBracketError,
    NoKernelError,
    SingularLeadingTermError,
)
from bandgap.greens2d import TruncationSpec
from bandgap.slp2d import (
    MultipoleBasis,
    band_omega,
    capacitance_2d,
    gap_beta_for_omega,
    kernel_field_check,
    outside_field,
    polynomial_term,
    sigma_min_scan,
    slp_beta_difference,
    slp_direct,
    slp_kummer,
    _kummer_lead,
    _weight_coefficients,
)

BASIS2 = MultipoleBasis(order=2, radius=0.05)
M_POINT = (math.pi, math.pi)


class TestSlpDirect:
    def test_hermitian_at_beta_zero(self):
        s = slp_direct(M_POINT, (0.0, 0.0), 0.0, BASIS2, TruncationSpec(1000))
        assert np.abs(s.entries - s.entries.conj().T).max() < 1e-8

    def test_non_hermitian_at_finite_beta(self):
        s = slp_direct(M_POINT, (1.0, 0.0), 0.0, BASIS2, TruncationSpec(300))
        assert np.abs(s.entries - s.entries.conj().T).max() > 1e-4

    def test_small_radius_head_term(self):
        # the q = 0 term is the largest single contribution to the (0, 0)
        # entry for small r, and equals (2 pi r) J_0(r|alpha|)^2 / (-|alpha|^2)
        basis = MultipoleBasis(order=0, radius=1e-4)
        alpha = np.array([2.0, 1.0])
        r = basis.radius
        head = 2 * math.pi * r * (scipy_j0(r * np.linalg.norm(alpha)) ** 2
                                  / (-(alpha @ alpha)))
        single = slp_direct(alpha, (0.0, 0.0), 0.0, basis, TruncationSpec(1))
        # subtract the 8 neighbours to isolate the q = 0 term
        qs = TruncationSpec(1).points(exclude_origin=True)
        tail = 0.0
        for q in qs:
            kappa = alpha + q
            tail += (2 * math.pi * r * scipy_j0(r * np.linalg.norm(kappa)) ** 2
                     / (-(kappa @ kappa)))
        q0_term = single.entries[0, 0] - tail
        assert q0_term == pytest.approx(head, rel=1e-10)
        # and it dominates every neighbour term
        for q in qs:
            kappa = alpha + q
            term = abs(2 * math.pi * r * scipy_j0(r * np.linalg.norm(kappa)) ** 2
                       / (kappa @ kappa))
            assert abs(head) > term


def scipy_j0(x):
    import scipy.special
    return scipy.special.j0(x)


class TestSlpKummer:
    def test_leading_term_value(self):
        # alpha = 0, k = 0: constant term contributes exactly 2 pi r / |beta|^2
        beta = (0.6, 0.25)
        lead = _kummer_lead(np.zeros(2), np.asarray(beta), 0.0, BASIS2)
        m = BASIS2.order
        expect = 2 * math.pi * BASIS2.radius / (beta[0] ** 2 + beta[1] ** 2)
        assert lead[m, m] == pytest.approx(expect, rel=1e-12)
        off = lead.copy()
        off[m, m] = 0.0
        assert np.abs(off).max() < 1e-15

    def test_polynomial_term_values(self):
        poly = polynomial_term(BASIS2)
        m = BASIS2.order
        r = BASIS2.radius
        assert poly[m + 1, m + 1] == pytest.approx(-(r**3) * math.pi / 2, rel=1e-12)
        assert poly[m - 1, m - 1] == pytest.approx(-(r**3) * math.pi / 2, rel=1e-12)
        assert poly[m + 1, m - 1] == 0.0
        assert poly[m, m] == pytest.approx(
            2 * math.pi * r * (1 / 12 - math.log(2) / (2 * math.pi) + r * r / 2), rel=1e-12
        )

    def test_cross_method_against_direct(self):
        rng = np.random.default_rng(31)
        for _ in range(3):
            alpha = tuple(rng.uniform(-2.5, 2.5, 2))
            beta = tuple(rng.uniform(-0.8, 0.8, 2))
            sd = slp_direct(alpha, beta, 0.0, BASIS2, TruncationSpec(2000))
            sk = slp_kummer(alpha, beta, 0.0, BASIS2, TruncationSpec(10))
            assert np.abs(sd.entries - sk.entries).max() <= 1e-4

    def test_singular_lead_raises(self):
        with pytest.raises(SingularLeadingTermError):
            slp_kummer((0.0, 0.0), (0.0, 0.0), 0.0, BASIS2, TruncationSpec(5))

    def test_large_radius_rejected(self):
        with pytest.raises(DomainError):
            slp_kummer((1.0, 0.5), (0.0, 0.0), 0.0,
                       MultipoleBasis(order=2, radius=0.3), TruncationSpec(5))


class TestSlpBetaDifference:
    def test_matches_direct(self):
        alpha, beta = (1.4, 0.8), (0.5, -0.3)
        sd = slp_direct(alpha, beta, 0.0, BASIS2, TruncationSpec(2000))
        sb = slp_beta_difference(alpha, beta, 0.0, BASIS2, TruncationSpec(20))
        assert np.abs(sd.entries - sb.entries).max() < 1e-4

    def test_alpha_near_zero_rejected(self):
        with pytest.raises(SingularLeadingTermError):
            slp_beta_difference((1e-5, 0.0), (0.5, 0.1), 0.0, BASIS2, TruncationSpec(5))


class TestCapacitance:
    def test_hermitian_point_positive(self):
        res = capacitance_2d(M_POINT, (0.0, 0.0), BASIS2, TruncationSpec(10))
        assert abs(res.capacitance.imag) < 1e-8 * abs(res.capacitance.real)
        assert res.capacitance.real > 0

    def test_weight_coefficients_beta_zero(self):
        c = _weight_coefficients(np.zeros(2), 0.05, 2, 64, +1.0)
        expect = np.zeros(5, dtype=complex)
        expect[2] = 1.0
        assert np.allclose(c, expect, atol=1e-15)

    def test_band_monotone_on_gamma_m_path(self):
        # first band rises from Gamma toward the corner M of the Brillouin zone
        ts = np.linspace(0.15, 1.0, 8)
        omegas = [band_omega((t * math.pi, t * math.pi), (0.0, 0.0), BASIS2,
                             TruncationSpec(10)).real for t in ts]
        assert all(b > a for a, b in zip(omegas, omegas[1:]))
        # continuity: no jumps larger than the local increments
        diffs = np.diff(omegas)
        assert diffs.max() < 0.8 * omegas[-1]

    def test_engine_consistency(self):
        r1 = capacitance_2d(M_POINT, (0.4, 0.1), BASIS2, TruncationSpec(10),
                            engine="kummer")
        r2 = capacitance_2d(M_POINT, (0.4, 0.1), BASIS2, TruncationSpec(2000),
                            engine="direct")
        assert r1.capacitance == pytest.approx(r2.capacitance, rel=2e-3)


class TestBandOmega:
    def test_zero_at_gamma_limit(self):
        # omega -> 0 with alpha -> 0 at beta = 0 (tiny alpha stands in for the
        # removable Gamma-point limit)
        val = band_omega((1e-3, 1e-3), (0.0, 0.0), BASIS2, TruncationSpec(10))
        edge = band_omega(M_POINT, (0.0, 0.0), BASIS2, TruncationSpec(10))
        assert abs(val) < 0.05 * abs(edge)

    def test_gap_branch_rises_with_beta(self):
        # horizontal decay at the M point: no aligned Rayleigh pole, so the
        # gap band climbs monotonically above the band edge
        direction = np.array([1.0, 0.0])
        edge = band_omega(M_POINT, (0.0, 0.0), BASIS2, TruncationSpec(10)).real
        values = [band_omega(M_POINT, b * direction, BASIS2, TruncationSpec(10)).real
                  for b in (0.8, 1.6, 2.4, 3.2, 4.5)]
        assert all(v > edge for v in values)
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_diagonal_branch_turns_over_at_rayleigh_pole(self):
        # along (1, 1) the branch rises above the edge, then collapses toward
        # the Rayleigh point at |beta| = pi sqrt(2)
        direction = np.array([1.0, 1.0]) / math.sqrt(2.0)
        edge = band_omega(M_POINT, (0.0, 0.0), BASIS2, TruncationSpec(10)).real
        rising = [band_omega(M_POINT, b * direction, BASIS2, TruncationSpec(10)).real
                  for b in (0.8, 1.6, 2.4)]
        assert all(v > edge for v in rising)
        assert all(b > a for a, b in zip(rising, rising[1:]))
        near_pole = band_omega(M_POINT, 4.4 * direction, BASIS2, TruncationSpec(10))
        assert near_pole.real < rising[-1]


class TestGapInversion:
    def test_round_trip(self):
        direction = (1.0, 0.0)
        edge = band_omega(M_POINT, (0.0, 0.0), BASIS2, TruncationSpec(10)).real
        omega = 1.15 * edge
        b, imag = gap_beta_for_omega(omega, M_POINT, direction, BASIS2, TruncationSpec(10))
        back = band_omega(M_POINT, b * np.asarray(direction), BASIS2, TruncationSpec(10))
        assert back.real == pytest.approx(omega, abs=1e-8)

    def test_band_edge_maps_to_zero(self):
        edge = band_omega(M_POINT, (0.0, 0.0), BASIS2, TruncationSpec(10)).real
        b, _ = gap_beta_for_omega(edge * (1 + 1e-9), M_POINT, (1.0, 0.0),
                                  BASIS2, TruncationSpec(10))
        assert b < 1e-3

    def test_unreachable_raises_no_bracket(self):
        # the M branch along e1 tops out near beta_cap; far larger
        # frequencies are unreachable
        with pytest.raises(NoBracketError):
            gap_beta_for_omega(2.5, M_POINT, (1.0, 0.0), BASIS2, TruncationSpec(10))

    def test_gamma_branch_falling_segment(self):
        # the Gamma branch along e1 solves on its falling segment between the
        # interior SLP pole (the decay cap) and the Rayleigh point at 2 pi
        from bandgap.slp2d import GapBranch
        branch = GapBranch((0.0, 0.0), (1.0, 0.0), BASIS2, TruncationSpec(10))
        b, _ = branch.beta_for_omega(0.75)
        val = band_omega((0.0, 0.0), (b, 0.0), BASIS2, TruncationSpec(10))
        assert val.real == pytest.approx(0.75, abs=1e-8)
        assert b < 2 * math.pi


class TestSigmaMinScan:
    def test_invertible_at_small_beta(self):
        scan = sigma_min_scan(M_POINT, [(0.0, 0.0), (0.3, 0.0)], BASIS2,
                              TruncationSpec(10))
        assert all(s > 1e-4 for _, s in scan)

    def test_minimum_near_rayleigh_prediction(self):
        from bandgap.slp2d import symmetric_kernel_points

        basis = MultipoleBasis(order=5, radius=0.005)
        predicted = np.array([math.pi, -math.pi])
        unit = predicted / np.linalg.norm(predicted)
        beta_odd, _ = symmetric_kernel_points(M_POINT, np.asarray(M_POINT), basis)
        # refined singular point lies within one 0.025-cell of a prediction
        dist = min(np.linalg.norm(beta_odd - predicted),
                   np.linalg.norm(beta_odd + predicted))
        assert dist <= 0.025
        beta_odd = beta_odd if np.linalg.norm(beta_odd - predicted) < math.pi else -beta_odd
        # and the scan value there is far below the grid median
        offsets = np.linspace(-0.25, 0.25, 21)
        grid = [predicted + t * unit for t in offsets if abs(t) > 1e-9]
        grid.append(beta_odd)
        scan = sigma_min_scan(M_POINT, grid, basis, TruncationSpec(40))
        sigmas = np.array([s for _, s in scan])
        assert sigmas[-1] < 1e-3 * np.nanmedian(sigmas[:-1])


class TestKernelField:
    def test_interior_null_and_dilute_sine(self):
        from bandgap.slp2d import symmetric_kernel_points

        basis = MultipoleBasis(order=5, radius=0.005)
        beta_odd, beta_even = symmetric_kernel_points(M_POINT, np.asarray(M_POINT), basis)
        res = kernel_field_check(M_POINT, beta_odd, basis, TruncationSpec(40))
        assert res.sigma_min / res.sigma_max < 1e-8
        assert res.interior_max / res.exterior_max < 1e-2
        assert res.correlation_with_sine(np.asarray(M_POINT)) > 0.99
        # the partner point carries the even (cosine) kernel function
        res_even = kernel_field_check(M_POINT, beta_even, basis, TruncationSpec(40))
        c = np.cos(res_even.exterior_points @ np.asarray(M_POINT))
        v = res_even.exterior_values
        corr_cos = abs(np.vdot(c.astype(complex), v)) / (np.linalg.norm(c) * np.linalg.norm(v))
        assert corr_cos > 0.95

    def test_away_from_singularity_reports_no_kernel(self):
        with pytest.raises(NoKernelError):
            kernel_field_check(M_POINT, (0.1, 0.0), BASIS2, TruncationSpec(10))


class TestOutsideField:
    def test_boundary_consistency_with_slp(self):
        # the band-limited trace of the field of the n = 0 density matches
        # the first column of the SLP matrix
        alpha, beta = (1.1, 0.7), (0.3, -0.2)
        trunc = TruncationSpec(400)
        s = slp_direct(alpha, beta, 0.0, BASIS2, trunc)
        coeff = np.zeros(BASIS2.dim, dtype=complex)
        coeff[BASIS2.order] = 1.0  # n = 0
        p = 256
        thetas = 2 * math.pi * np.arange(p) / p
        pts = BASIS2.radius * np.column_stack([np.cos(thetas), np.sin(thetas)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = outside_field(coeff, pts, alpha, beta, 0.0, BASIS2.radius, trunc)
        ns = BASIS2.ns
        dft = np.exp(-1j * np.outer(ns, thetas)) @ trace / p
        expect = s.entries @ coeff
        assert np.abs(dft - expect).max() < 1e-6

    def test_quasiperiodicity(self):
        alpha, beta = (0.9, -0.4), (0.2, 0.1)
        coeff = np.array([0.2, 1.0, 0.1, 0.05, 0.3], dtype=complex)
        pts = np.array([[0.11, 0.21], [0.32, -0.14]])
        v0 = outside_field(coeff, pts, alpha, beta, 0.0, 0.05, TruncationSpec(100))
        v1 = outside_field(coeff, pts + np.array([1.0, 0.0]), alpha, beta, 0.0,
                           0.05, TruncationSpec(100))
        assert np.allclose(v1, v0 * np.exp(1j * alpha[0]), rtol=1e-9, atol=1e-12)

    def test_dilute_warning_raises_truncation(self):
        coeff = np.zeros(3, dtype=complex)
        coeff[1] = 1.0
        with pytest.warns(Warning, match="dilute"):
            outside_field(coeff, [[0.2, 0.1]], (1.0, 0.5), (0.0, 0.0), 0.0,
                          1e-4, TruncationSpec(50))
