"""Command-line surface: every experiment as a reproducible, file-based run.

Each subcommand writes a run-metadata document (metadata.json with the fully
resolved configuration, seed, package versions and timings) plus one or more
CSV result tables into the output directory.  Exit codes: 0 success, 2
configuration/validation error, 3 numerical error (with the error recorded in
metadata.json).  Files are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .errors import BandgapError, NoBracketError, NumericalError, ValidationError
from . import bench, chain1d, defect2d, greens2d, slp2d
from .chain1d import ChainSpec, GaugeProfile
from .greens2d import TruncationSpec
from .slp2d import MultipoleBasis


def max_workers() -> int:
    """Parallelism cap from BANDGAP_THREADS (default 1, serial)."""
    try:
        return max(1, int(os.environ.get("BANDGAP_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows):
    """Atomic CSV write: UTF-8, '.' decimal separator, header row."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)),
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_metadata(out_dir, config, timings, status="ok", error=None):
    meta = {
        "config": config,
        "seed": config.get("seed"),
        "versions": {
            "bandgap": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "timings": timings,
        "status": status,
    }
    try:
        import scipy
        meta["versions"]["scipy"] = scipy.__version__
    except ImportError:
        pass
    if error is not None:
        meta["error"] = error
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, "metadata.json"))


# ---------------------------------------------------------------- handlers

def _measure_all_modes(chain, gauge, delta, method="bloch"):
    ms = chain1d.finite_modes(chain.lengths, chain.spacings, gauge, delta,
                              chain.positions)
    rho = float(np.abs(ms.eigenvalues).max())
    rows = []
    for j in range(ms.modes.shape[1]):
        is_kernel = abs(ms.eigenvalues[j]) < 1e-8 * rho
        try:
            fit = chain1d.measure_modal_decay(
                ms.modes[:, j], chain.positions, cell_length=chain.cell_length,
                method=method)
            slope = fit.slope
        except BandgapError:
            slope = math.nan
        rows.append((j, ms.eigenvalues[j], ms.frequencies[j], slope, is_kernel))
    return ms, rows


def run_band1d(cfg, out):
    spec = ChainSpec(tuple(cfg["lengths"]), tuple(cfg["spacings"]), cfg["delta"])
    L = spec.cell_length
    betas = cfg["betas"]
    rows = []
    for beta in betas:
        for alpha in np.linspace(-math.pi / L, math.pi / L, cfg["n_alpha"]):
            omegas = chain1d.band_function_1d(
                spec, chain1d.ComplexQuasimomentum1D(float(alpha), float(beta)))
            for idx, om in enumerate(omegas):
                rows.append((float(alpha), float(beta), idx, om.real, om.imag))
    write_csv(os.path.join(out, "bands.csv"),
              ["alpha", "beta", "band_index", "omega_re", "omega_im"], rows)


def run_skin(cfg, out):
    chain = chain1d.build_periodic_chain(cfg["cell_lengths"], cfg["cell_spacings"],
                                         cfg["cells"])
    gauge = GaugeProfile("constant", cfg["gamma"])
    spec = ChainSpec(tuple(cfg["cell_lengths"]), tuple(cfg["cell_spacings"]),
                     cfg["delta"])
    prediction = -chain1d.skin_decay_prediction(spec, gauge)
    ms, rows = _measure_all_modes(chain, gauge, cfg["delta"])
    beta_bar = -prediction
    gammas = gauge.sample(len(cfg["cell_lengths"]))
    band_vals = chain1d.deformed_band_values(cfg["cell_lengths"],
                                             cfg["cell_spacings"], gammas,
                                             beta_bar, n_alpha=121)
    out_rows = []
    for j, lam, omega, slope, is_kernel in rows:
        dist = float(np.min(np.abs(band_vals - lam.real)))
        in_band = dist < 0.02 * float(np.abs(ms.eigenvalues).max())
        rel = abs(slope - prediction) / abs(prediction) if prediction else math.nan
        out_rows.append((j, lam.real, omega.real, omega.imag, slope, prediction,
                         rel, int(is_kernel), int(in_band)))
    write_csv(os.path.join(out, "skin.csv"),
              ["mode_index", "lambda", "omega_re", "omega_im", "slope",
               "prediction", "relative_deviation", "is_kernel", "in_bulk_band"],
              out_rows)
    amp_rows = []
    for j in range(ms.modes.shape[1]):
        for i, x in enumerate(chain.positions):
            amp_rows.append((j, int(chain.cell_index[i]), float(x),
                             float(abs(ms.modes[i, j]))))
    write_csv(os.path.join(out, "modes.csv"),
              ["mode_index", "cell_index", "position", "amplitude"], amp_rows)


def run_skin_harmonic(cfg, out):
    chain = chain1d.build_periodic_chain([1.0], [1.0], cfg["cells"])
    gauge = GaugeProfile("harmonic", a=cfg["a"])
    ms = chain1d.finite_modes(chain.lengths, chain.spacings, gauge, cfg["delta"],
                              chain.positions)
    rho = float(np.abs(ms.eigenvalues).max())
    rows = []
    lo, hi = cfg["fit_window"]
    for j in range(ms.modes.shape[1]):
        if abs(ms.eigenvalues[j]) < 1e-8 * rho:
            continue
        mode = np.abs(ms.modes[:, j])
        ns, ys = [], []
        for c in range(lo, min(hi, chain.n_cells)):
            sel = chain.cell_index == c
            val = float(mode[sel].max())
            if val > 1e-290:
                ns.append(1.0 + c)
                ys.append(val)
        if len(ns) < 4:
            continue
        # log-log fit of the envelope exponent
        from .numerics import fit_log_decay
        fit = fit_log_decay([(math.log(n), y) for n, y in zip(ns, ys)])
        rows.append((j, fit.slope, -cfg["a"] / 2.0,
                     abs(fit.slope + cfg["a"] / 2.0) / (cfg["a"] / 2.0)))
    write_csv(os.path.join(out, "harmonic.csv"),
              ["mode_index", "fitted_exponent", "predicted_exponent",
               "relative_deviation"], rows)


def run_skin_random(cfg, out):
    spec = ChainSpec((1.0,), (1.0,), cfg["delta"])
    prediction = -chain1d.expected_decay_random(spec, cfg["gamma_mean"])
    rows = []
    for draw in range(cfg["draws"]):
        chain = chain1d.build_periodic_chain([1.0], [1.0], cfg["cells"])
        gauge = GaugeProfile("random", mean=cfg["gamma_mean"],
                             seed=cfg["seed"] + draw)
        ms = chain1d.finite_modes(chain.lengths, chain.spacings, gauge,
                                  cfg["delta"], chain.positions)
        rho = float(np.abs(ms.eigenvalues).max())
        slopes = []
        for j in range(ms.modes.shape[1]):
            if abs(ms.eigenvalues[j]) < 1e-8 * rho:
                continue
            fit = chain1d.measure_modal_decay(ms.modes[:, j], chain.positions,
                                              cell_length=chain.cell_length)
            slopes.append(fit.slope)
        mean_slope = float(np.mean(slopes))
        rows.append((draw, mean_slope, prediction,
                     abs(mean_slope - prediction) / abs(prediction)))
    write_csv(os.path.join(out, "random.csv"),
              ["draw", "mean_slope", "prediction", "relative_deviation"], rows)


def run_disorder(cfg, out):
    rng = np.random.default_rng(cfg["seed"])
    n_cells = cfg["cells"]
    if cfg.get("dimer_site") is not None:
        site = int(cfg["dimer_site"])
    else:
        site = int(rng.integers(n_cells // 3, 2 * n_cells // 3))
    chain = chain1d.build_disordered_chain(n_cells, {site})
    gauge = GaugeProfile("constant", cfg["gamma"])
    delta = cfg["delta"]
    ms = chain1d.finite_modes(chain.lengths, chain.spacings, gauge, delta,
                              chain.positions)
    percell = np.zeros((n_cells, ms.modes.shape[1]))
    for c in range(n_cells):
        sel = chain.cell_index == c
        percell[c] = np.abs(ms.modes[sel]).max(axis=0)
    rows = []
    L = chain.cell_length
    for j in range(ms.modes.shape[1]):
        lam = ms.eigenvalues[j].real
        omega = math.sqrt(max(delta * lam, 0.0))
        in_gap = lam > 4.0 + 1e-9
        vals = np.log(np.maximum(percell[:, j], 1e-300))
        vals = vals - vals.max()

        def lsq(cells):
            xs = [c for c in cells if vals[c] > chain1d.FLOOR_LOG]
            if len(xs) < 3:
                return math.nan
            return float(np.polyfit(xs, [vals[c] for c in xs], 1)[0])

        left = lsq(range(2, site))
        right = lsq(range(site + 1, n_cells - 2))
        pl = chain1d.composite_decay(omega, cfg["gamma"], 1.0, "left", delta, L) \
            if in_gap else -cfg["gamma"] / 2.0
        pr = chain1d.composite_decay(omega, cfg["gamma"], 1.0, "right", delta, L) \
            if in_gap else -cfg["gamma"] / 2.0
        rows.append((j, lam, omega, "defect" if in_gap else "bulk",
                     left, right, pl, pr))
    write_csv(os.path.join(out, "disorder.csv"),
              ["mode_index", "lambda", "omega", "kind", "slope_left",
               "slope_right", "pred_left", "pred_right"], rows)
    write_metadata_extra = {"dimer_site": site}
    return write_metadata_extra


def run_ssh(cfg, out):
    s1, s2, delta = cfg["s1"], cfg["s2"], cfg["delta"]
    t_mid = 1.0 / s1 + 1.0 / s2
    rows = []
    base_beta = None
    for eps in [0.0] + list(cfg["eps"]):
        chain = chain1d.ssh_defect_chain(s1, s2, cfg["cells"])
        spac = [s * (1 + eps * (-1) ** k) for k, s in enumerate(chain.spacings)]
        ms = chain1d.finite_modes(chain.lengths, spac, GaugeProfile("constant", 0.0),
                                  delta)
        lams = ms.eigenvalues.real
        lam_i = float(lams[np.argmin(np.abs(lams - t_mid))])
        omega_i = math.sqrt(delta * lam_i)
        beta_i = chain1d.dimer_gap_beta(omega_i, delta, s1, s2, chain.cell_length)
        if eps == 0.0:
            base_beta = beta_i
        rows.append((eps, omega_i, beta_i, base_beta,
                     abs(beta_i - base_beta) <= 10.0 * eps * base_beta if eps else True))
    write_csv(os.path.join(out, "ssh.csv"),
              ["eps", "omega_interface", "beta_interface", "beta_base",
               "within_linear_envelope"], rows)


def run_lattice_sum(cfg, out):
    x = np.array(cfg["x"], dtype=float)
    q2d = greens2d.ComplexQuasimomentum2D(tuple(cfg["alpha"]), tuple(cfg["beta"]))
    trunc = TruncationSpec(cfg["trunc"])
    method = cfg["method"]
    if method == "direct":
        val = greens2d.greens_direct(x, cfg["k"], q2d, trunc=trunc)
    elif method == "beta-difference":
        val = greens2d.greens_beta_difference(x, cfg["k"], q2d, trunc=trunc)
    elif method == "a1a2":
        val = complex(greens2d.kummer_A1A2(x, cfg["series_terms"]))
    elif method == "kummer":
        beta_sq = float(np.dot(cfg["beta"], cfg["beta"]))
        alpha_sq = float(np.dot(cfg["alpha"], cfg["alpha"]))
        if cfg["k"] == 0.0 and beta_sq == 0.0 and alpha_sq == 0.0:
            # Laplace point: the leading term is singular; report the finite
            # part, which is -(A1+A2) (the corrected series vanishes)
            val = complex(-greens2d.kummer_A1A2(x, cfg["series_terms"]))
        else:
            val = greens2d.greens_kummer(x, cfg["k"], q2d, trunc=trunc,
                                         series_terms=cfg["series_terms"])
    else:
        raise ValidationError(f"unknown lattice-sum method {method!r}")
    write_csv(os.path.join(out, "lattice_sum.csv"),
              ["method", "x1", "x2", "value_re", "value_im"],
              [(method, x[0], x[1], val.real, val.imag)])


def run_slp_scan(cfg, out):
    basis = MultipoleBasis(cfg["multipole_order"], cfg["radius"])
    center = np.array(cfg["beta_center"], dtype=float)
    span = cfg["beta_span"]
    n = cfg["beta_points"]
    axis = np.linspace(-span / 2, span / 2, n)
    grid = [center + np.array([u, v]) for u in axis for v in axis]
    scan = slp2d.sigma_min_scan(tuple(cfg["alpha"]), grid, basis,
                                TruncationSpec(cfg["trunc"]))
    rows = [(b[0], b[1], s) for b, s in scan]
    write_csv(os.path.join(out, "sigma_scan.csv"),
              ["beta1", "beta2", "sigma_min"], rows)


def run_kernel_field(cfg, out):
    basis = MultipoleBasis(cfg["multipole_order"], cfg["radius"])
    alpha = np.array(cfg["alpha"], dtype=float)
    beta_odd, beta_even = slp2d.symmetric_kernel_points(
        alpha, alpha, basis, TruncationSpec(cfg["trunc"]))
    res = slp2d.kernel_field_check(alpha, beta_odd, basis,
                                   TruncationSpec(cfg["trunc"]))
    rows = [(p[0], p[1], v.real, v.imag, "exterior")
            for p, v in zip(res.exterior_points, res.exterior_values)]
    rows += [(p[0], p[1], v.real, v.imag, "interior")
             for p, v in zip(res.interior_points, res.interior_values)]
    write_csv(os.path.join(out, "kernel_field.csv"),
              ["x1", "x2", "v_re", "v_im", "region"], rows)
    return {
        "beta_star": list(map(float, beta_odd)),
        "beta_even": list(map(float, beta_even)),
        "sigma_min": res.sigma_min,
        "sigma_max": res.sigma_max,
        "interior_max": res.interior_max,
        "exterior_max": res.exterior_max,
        "correlation_sin": res.correlation_with_sine(alpha),
    }


def run_gapband2d(cfg, out):
    basis = MultipoleBasis(cfg["multipole_order"], cfg["radius"])
    label = cfg["alpha_label"]
    alpha = defect2d.HIGH_SYMMETRY[label]
    branch = slp2d.GapBranch(alpha, tuple(cfg["direction"]), basis,
                             TruncationSpec(cfg["trunc"]), cfg["delta"])
    rows = [(label, float(b), om.real, om.imag)
            for b, om in zip(branch.b_grid, branch.omega_grid)
            if not math.isnan(om.real)]
    write_csv(os.path.join(out, "gapband.csv"),
              ["branch", "beta", "omega_re", "omega_im"], rows)


def _defect_pipeline(cfg):
    basis = MultipoleBasis(cfg["multipole_order"], cfg["radius"])
    trunc = TruncationSpec(cfg["trunc"])
    grid = defect2d.qp_capacitance_grid(basis, trunc, cfg["delta"],
                                        tuple(cfg["grid_dims"]))
    rsc = defect2d.inverse_floquet(grid, cfg["l_radius"])
    lattice = defect2d.LatticeTruncation(*cfg["lattice_dims"])
    toeplitz = defect2d.assemble_toeplitz(rsc, lattice)
    return basis, trunc, grid, lattice, toeplitz


def _gap_omegas(grid, cfg):
    edge = math.sqrt(grid.band_range()[1])
    return edge * np.asarray(cfg["omega_factors"], dtype=float)


def run_defect2d(cfg, out):
    basis, trunc, grid, lattice, toeplitz = _defect_pipeline(cfg)
    omegas = _gap_omegas(grid, cfg)
    entries = defect2d.phase_diagram(omegas, toeplitz, lattice)
    branches = {
        name: slp2d.GapBranch(alpha, (1.0, 0.0), basis, trunc, cfg["delta"])
        for name, alpha in defect2d.HIGH_SYMMETRY.items()
    }
    rows = []
    for e in entries:
        best_name, best_beta = None, math.inf
        for name, br in branches.items():
            try:
                b, _ = br.beta_for_omega(e.omega)
            except (NoBracketError, NumericalError):
                continue
            if b < best_beta:
                best_name, best_beta = name, b
        rows.append((e.omega, e.beta_measured,
                     best_beta if best_name else math.nan,
                     best_name or "none"))
    write_csv(os.path.join(out, "defect.csv"),
              ["omega", "beta_measured", "beta_predicted", "branch_alpha"], rows)


def run_line_source(cfg, out):
    basis, trunc, grid, lattice, toeplitz = _defect_pipeline(cfg)
    omegas = _gap_omegas(grid, cfg)
    alpha = defect2d.HIGH_SYMMETRY["M"]
    rows = []
    for omega in omegas:
        g_line = defect2d.discrete_greens(
            toeplitz, float(omega), defect2d.line_source(alpha, lattice), lattice)
        fit_line = defect2d.measure_decay_path(
            g_line, defect2d.vertical_path(lattice), skip_near=0, skip_far=3,
            floor_rel=1e-7)
        g_point = defect2d.discrete_greens(
            toeplitz, float(omega), defect2d.point_source(lattice), lattice)
        fit_point = defect2d.measure_decay_path(
            g_point, defect2d.horizontal_path(lattice))
        rows.append((float(omega), -fit_line.slope, -fit_point.slope,
                     alpha[0], alpha[1]))
    write_csv(os.path.join(out, "line_source.csv"),
              ["omega", "beta_line", "beta_point", "alpha1", "alpha2"], rows)


def run_floquet_scan(cfg, out):
    basis, trunc, grid, lattice, toeplitz = _defect_pipeline(cfg)
    omega = float(cfg["omega_factor"]) * math.sqrt(grid.band_range()[1])
    g = defect2d.discrete_greens(toeplitz, omega,
                                 defect2d.point_source(lattice), lattice)
    fit = defect2d.measure_decay_path(g, defect2d.horizontal_path(lattice))
    alphas1, alphas2, amp, alpha_star = defect2d.amplitude_density_scan(
        g.g, np.array([-fit.slope, 0.0]), lattice, cfg["n_alpha"])
    rows = []
    for i, a1 in enumerate(alphas1):
        for j, a2 in enumerate(alphas2):
            rows.append((float(a1), float(a2), float(amp[i, j])))
    write_csv(os.path.join(out, "floquet.csv"),
              ["alpha1", "alpha2", "amplitude"], rows)
    return {"omega": omega, "beta_measured": -fit.slope,
            "alpha_star": [float(alpha_star[0]), float(alpha_star[1])],
            "label": defect2d.classify_high_symmetry(alpha_star)}


def run_phase_diagram(cfg, out):
    basis, trunc, grid, lattice, toeplitz = _defect_pipeline(cfg)
    omegas = _gap_omegas(grid, cfg)
    entries = defect2d.phase_diagram(omegas, toeplitz, lattice,
                                     n_alpha=cfg["n_alpha"])
    rows = [(e.omega, e.beta_measured, e.alpha_star[0], e.alpha_star[1], e.label)
            for e in entries]
    write_csv(os.path.join(out, "phase.csv"),
              ["omega", "beta_measured", "alpha_star_1", "alpha_star_2", "label"],
              rows)


def run_bench_convergence(cfg, out):
    rows = []
    for method in cfg["methods"]:
        res = bench.convergence_study(method, cfg["ns"])
        for n, v in zip(res.ns, res.values):
            rows.append((method, n, v))
    write_csv(os.path.join(out, "convergence.csv"), ["method", "N", "value"], rows)


def run_bench_runtime(cfg, out):
    rows = []
    for method in cfg["methods"]:
        res = bench.runtime_study(method, cfg["ns"], cfg["repetitions"])
        for n, v in zip(res.ns, res.values):
            rows.append((method, n, v))
    write_csv(os.path.join(out, "runtime.csv"), ["method", "N", "value"], rows)


# ------------------------------------------------------------------ driver

DEFAULTS = {
    "band1d": {"lengths": [1.0], "spacings": [1.0], "delta": 1e-3,
               "betas": [0.0], "n_alpha": 101},
    "skin": {"cell_lengths": [1.0], "cell_spacings": [1.0], "gamma": 1.0,
             "cells": 20, "delta": 1e-3},
    "skin-harmonic": {"a": 10.0, "cells": 60, "delta": 1e-3,
                      "fit_window": [5, 51]},
    "skin-random": {"gamma_mean": 0.25, "cells": 200, "draws": 20,
                    "delta": 1e-3, "seed": 7},
    "disorder": {"cells": 40, "gamma": 1.0, "delta": 1e-3, "seed": 11,
                 "dimer_site": None},
    "ssh": {"s1": 1.0, "s2": 2.0, "cells": 10, "delta": 1e-3,
            "eps": [1e-3, 1e-2]},
    "lattice-sum": {"method": "kummer", "x": [0.3, 0.2], "alpha": [0.0, 0.0],
                    "beta": [0.0, 0.0], "k": 0.0, "trunc": 10,
                    "series_terms": 2},
    "slp-scan": {"alpha": [math.pi, math.pi], "beta_center": [math.pi, -math.pi],
                 "beta_span": 1.0, "beta_points": 11, "radius": 0.005,
                 "multipole_order": 5, "trunc": 10},
    "kernel-field": {"alpha": [math.pi, math.pi], "radius": 0.005,
                     "multipole_order": 5, "trunc": 40},
    "gapband2d": {"alpha_label": "M", "direction": [1.0, 0.0], "radius": 0.05,
                  "multipole_order": 5, "trunc": 10, "delta": 1e-3},
    "defect2d": {"radius": 0.05, "multipole_order": 5, "trunc": 10,
                 "delta": 1e-3, "grid_dims": [32, 32], "l_radius": 8,
                 "lattice_dims": [21, 21],
                 "omega_factors": [1.02, 1.05, 1.1, 1.2, 1.35, 1.5, 1.7, 1.9,
                                   2.2, 2.6, 3.0, 3.5]},
    "line-source": {"radius": 0.05, "multipole_order": 5, "trunc": 10,
                    "delta": 1e-3, "grid_dims": [32, 32], "l_radius": 8,
                    "lattice_dims": [21, 21], "omega_factors": [2.6, 3.0]},
    "floquet-scan": {"radius": 0.05, "multipole_order": 5, "trunc": 10,
                     "delta": 1e-3, "grid_dims": [32, 32], "l_radius": 8,
                     "lattice_dims": [21, 21], "omega_factor": 1.05,
                     "n_alpha": 33},
    "phase-diagram": {"radius": 0.05, "multipole_order": 5, "trunc": 10,
                      "delta": 1e-3, "grid_dims": [32, 32], "l_radius": 8,
                      "lattice_dims": [21, 21], "n_alpha": 33,
                      "omega_factors": [1.02, 1.1, 1.35, 1.7, 2.2, 3.0]},
    "bench-convergence": {"methods": ["direct", "beta_difference", "kummer"],
                          "ns": [10, 20, 40, 80, 160]},
    "bench-runtime": {"methods": ["direct"], "ns": [50, 100, 200, 400],
                      "repetitions": 5},
}

HANDLERS = {
    "band1d": run_band1d,
    "skin": run_skin,
    "skin-harmonic": run_skin_harmonic,
    "skin-random": run_skin_random,
    "disorder": run_disorder,
    "ssh": run_ssh,
    "lattice-sum": run_lattice_sum,
    "slp-scan": run_slp_scan,
    "kernel-field": run_kernel_field,
    "gapband2d": run_gapband2d,
    "defect2d": run_defect2d,
    "line-source": run_line_source,
    "floquet-scan": run_floquet_scan,
    "phase-diagram": run_phase_diagram,
    "bench-convergence": run_bench_convergence,
    "bench-runtime": run_bench_runtime,
}

_FLAG_TYPES = {
    "lengths": (float, "+"), "spacings": (float, "+"), "betas": (float, "+"),
    "cell_lengths": (float, "+"), "cell_spacings": (float, "+"),
    "x": (float, 2), "alpha": (float, 2), "beta": (float, 2),
    "beta_center": (float, 2), "direction": (float, 2),
    "grid_dims": (int, 2), "lattice_dims": (int, 2),
    "omega_factors": (float, "+"), "eps": (float, "+"),
    "ns": (int, "+"), "methods": (str, "+"), "fit_window": (int, 2),
    "alpha_label": (str, None), "method": (str, None), "kind": (str, None),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandgap",
        description="Complex band structure experiments for subwavelength "
                    "resonator crystals")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in DEFAULTS.items():
        p = sub.add_parser(name)
        p.add_argument("--out", required=False, default=None,
                       help="output directory (required unless given in --config)")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        for key, value in defaults.items():
            if key in ("out", "config", "seed"):
                continue
            flag = "--" + key.replace("_", "-")
            if key in _FLAG_TYPES:
                typ, nargs = _FLAG_TYPES[key]
                if nargs is None:
                    p.add_argument(flag, type=typ, default=None)
                else:
                    p.add_argument(flag, type=typ, nargs=nargs, default=None)
            elif isinstance(value, bool):
                p.add_argument(flag, type=int, default=None)
            elif isinstance(value, int):
                p.add_argument(flag, type=int, default=None)
            elif isinstance(value, float):
                p.add_argument(flag, type=float, default=None)
            elif value is None:
                p.add_argument(flag, type=int, default=None)
            else:
                p.add_argument(flag, type=str, default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[dict, str]:
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    cfg.setdefault("seed", 0)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(cfg) - {"out", "seed"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("command", "config", "out") or value is None:
            continue
        cfg[key] = value
    out = args.out or cfg.pop("out", None)
    if not out:
        raise ValidationError("an output directory is required (--out)")
    cfg.pop("out", None)
    return cfg, out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, out = resolve_config(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    timings = {}
    start = time.perf_counter()
    try:
        extra = HANDLERS[args.command](cfg, out)
        timings["total_seconds"] = time.perf_counter() - start
        meta_cfg = dict(cfg)
        if isinstance(extra, dict):
            meta_cfg["results"] = extra
        write_metadata(out, meta_cfg, timings)
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, BandgapError) as exc:
        timings["total_seconds"] = time.perf_counter() - start
        write_metadata(out, cfg, timings, status="error",
                       error={"type": type(exc).__name__, "message": str(exc)})
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
