"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Every tolerance is pinned here; nothing is deferred to later calibration.
Run with `pytest -v tests/test_acceptance.py` (add -s to see the lines).
"""

import time

import numpy as np
import sympy as sp

import latticeweyl as lw
from latticeweyl.cli import _trace_fixtures
from latticeweyl.semiclassics import (BumpFunction, SmoothingKernel, bump_expr,
                                      build_aae, hs_apply, poisson_compare,
                                      stationary_phase_check)
from latticeweyl.util import fit_loglog_slope

from conftest import harmonic_symbol, torus


def report(num, name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:2d} ({name}): {tag}  {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def test_c01_sharp_weyl_law():
    t0 = time.time()
    sym = harmonic_symbol()
    iv = lw.Interval(0.5, 2.5)
    rep = lw.weyl_experiment(sym, iv, [0.1, 0.05, 0.025, 0.0125],
                             {"halfwidth": 3.0, "torus_m": 64,
                              "volume_quad": {"mc_samples": 10_000_000}})
    elapsed = time.time() - t0
    mc_consistent = abs(rep.volume.mc_value - rep.volume.value) \
        < 4.0 * rep.volume.mc_sigma + 1e-3
    detail = (f"slope={rep.slope:.3f} (bound 0.8), V*={rep.volume.value:.6f}, "
              f"sandwich={'ok' if rep.sandwich_ok else 'violated'}, "
              f"runtime={elapsed:.0f}s")
    ok = (rep.slope >= 0.8 and rep.sandwich_ok and mc_consistent
          and elapsed <= 120.0)
    report(1, "sharp Weyl law", ok, detail)


def test_c02_trace_identity():
    t0 = time.time()
    eps = 0.05
    box = lw.LatticeBox(1, eps, 3.0)
    grid = torus(64)
    worst_rel = 0.0
    for label, fix in _trace_fixtures(1):
        r = lw.trace_identity_check(fix, 0.5, box, eps, grid)
        worst_rel = max(worst_rel, r["abs_err"] / abs(r["lhs"]))
    ok = worst_rel <= 1e-10 and time.time() - t0 < 30.0
    report(2, "trace identity", ok, f"worst relative error {worst_rel:.2e}")


def test_c03_trace_asymptotics():
    t0 = time.time()
    grid = torus(64)
    f = BumpFunction(1.5, 1.0, plateau=0.5)
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    plain = lw.trace_f_comparison(harmonic_symbol(), f, eps_list, 3.0, grid)
    with_a1 = lw.builtin_symbol("lattice_laplacian_plus_quadratic",
                                {"c": 1.0, "d": 1, "a1_const": 0.4})
    corr = lw.trace_f_comparison(with_a1, f, eps_list, 3.0, grid)
    elapsed = time.time() - t0
    ok = plain["slope"] >= 1.6 and corr["slope"] >= 1.6 and elapsed <= 60.0
    report(3, "trace asymptotics", ok,
           f"slopes {plain['slope']:.2f} / {corr['slope']:.2f} (bound 1.6), "
           f"runtime={elapsed:.0f}s")


def test_c04_helffer_sjostrand(rng):
    t0 = time.time()
    f = BumpFunction(1.5, 1.0, plateau=0.5)
    aae = build_aae(f, 5)
    worst = 0.0
    for dim in (2, 10, 100):
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim))
                            + 1j * rng.normal(size=(dim, dim)))
        lam = np.linspace(0.2, 3.2, dim) if dim > 2 else np.array([1.2, 1.7])
        a = (q * lam) @ q.conj().T
        err = np.linalg.norm(hs_apply(a, aae) - (q * f(lam)) @ q.conj().T)
        worst = max(worst, err)
    elapsed = time.time() - t0
    ok = worst <= 1e-6 and elapsed <= 30.0
    report(4, "Helffer-Sjostrand oracle equivalence", ok,
           f"worst Frobenius error {worst:.2e} (bound 1e-6), "
           f"runtime={elapsed:.0f}s")


def test_c05_poisson_summation():
    t0 = time.time()
    x = sp.Symbol("x0", real=True)
    a = bump_expr(x, halfwidth=0.8)
    eps_list = [0.1, 0.05, 0.025]
    fixtures = [("zero", sp.Integer(0) * x), ("linear", sp.pi * x),
                ("sine", sp.Float(0.8) * sp.pi * sp.sin(x))]
    all_ok = True
    rems_zero = []
    for label, phi in fixtures:
        for eps in eps_list:
            r = poisson_compare(a, phi, eps, k=1, support=(-0.8, 0.8), var=x)
            all_ok = all_ok and r["pass"]
            if label == "zero":
                rems_zero.append(r["remainder"])
    slope = fit_loglog_slope(eps_list, rems_zero)
    elapsed = time.time() - t0
    ok = all_ok and slope >= 4.0 and elapsed <= 30.0
    report(5, "Poisson summation", ok,
           f"all within bound={all_ok}, zero-phase slope {slope:.2f} (bound 4)")


def test_c06_stationary_phase():
    t0 = time.time()
    t, s = sp.symbols("t s", real=True)
    bt = BumpFunction(0.0, 2.0, plateau=0.4)
    rep = stationary_phase_check(lambda a, b: bt(a) * bt(b), t * s,
                                 [0.1, 0.05, 0.025], ((-2, 2), (-2, 2)),
                                 vars_=(t, s))
    amp_ok = abs(rep["amplitude_constant"] - 2 * np.pi) < 1e-12
    lead_ok = all(abs(r["leading"] - 2 * np.pi * r["eps"] * bt(0.0) ** 2) < 1e-12
                  for r in rep["rows"])
    aa = 0.5
    rep_g = stationary_phase_check(
        lambda a, b: np.exp(-(a ** 2 + b ** 2) / (2 * aa ** 2)),
        (t ** 2 + s ** 2) / 2, [0.01], ((-3, 3), (-3, 3)), vars_=(t, s),
        nodes_cap=9000)
    exact = 2 * np.pi * aa ** 2 * 0.01 / (0.01 - 1j * aa ** 2)
    fres = abs(rep_g["rows"][0]["integral"] - exact) / abs(exact)
    elapsed = time.time() - t0
    ok = (amp_ok and lead_ok and rep["remainder_slope"] >= 1.8
          and fres <= 1e-6 and elapsed <= 60.0)
    report(6, "stationary phase constant", ok,
           f"slope {rep['remainder_slope']:.2f} (bound 1.8), "
           f"Fresnel rel err {fres:.2e} (bound 1e-6)")


def test_c07_hamilton_jacobi():
    t0 = time.time()
    free = lw.builtin_symbol("xi_only", {"profile": "nn_laplacian"})
    hf = lw.Hamiltonian.from_symbol(free)
    xg = np.linspace(-2, 2, 15)
    kg = np.linspace(-np.pi, np.pi, 12, endpoint=False)
    ps = lw.solve_hamilton_jacobi(hf, 0.1, xg, kg, time_slices=4, dt_int=2e-3)
    hv = 2.0 - 2.0 * np.cos(ps.xi_grid)
    exact = xg[None, :, None] * ps.xi_grid[None, None, :] \
        - ps.t_grid[:, None, None] * hv[None, None, :]
    free_err = float(np.max(np.abs(ps.phi - exact)))

    h = lw.Hamiltonian.from_symbol(harmonic_symbol())
    probes = [0.02, 0.05, 0.08, 0.098]
    d = 2e-4
    tg = sorted({0.0} | {sgn * (p + o) for p in probes for o in (-d, 0.0, d)
                 for sgn in (1.0, -1.0)})
    ps2 = lw.solve_hamilton_jacobi(h, 0.1, np.linspace(-3, 3, 41),
                                   np.linspace(-np.pi, np.pi, 16, endpoint=False),
                                   t_grid=tg, dt_int=1e-3)
    resid = ps2.residual_report(max_spacing=5e-4)["max_residual"]
    period = lw.check_phase_periodicity(ps2)["max_violation"]
    elapsed = time.time() - t0
    ok = (free_err <= 1e-8 and resid <= 1e-5 and period <= 1e-5
          and elapsed <= 60.0)
    report(7, "Hamilton-Jacobi and periodicity", ok,
           f"x-indep err {free_err:.2e} (1e-8), residual {resid:.2e} (1e-5), "
           f"periodicity {period:.2e} (1e-5), runtime={elapsed:.0f}s")


def test_c08_parametrix():
    t0 = time.time()
    sym = harmonic_symbol()
    f = BumpFunction(1.5, 1.0, plateau=0.2)
    rep = lw.parametrix_error_sweep(sym, f, [0.0, 0.025, 0.05, -0.025, -0.05],
                                    [0.1, 0.05, 0.025], 3.0, torus_base=64,
                                    symbol_mode="expansion")
    cons = {r["eps"]: r["consistency0"] for r in rep["rows"]}
    elapsed = time.time() - t0
    ok = rep["slope"] >= 0.8 and cons[0.05] <= 1e-3 and elapsed <= 180.0
    report(8, "time parametrix", ok,
           f"sup-error slope {rep['slope']:.2f} (bound 0.8), "
           f"t=0 consistency at eps=0.05: {cons[0.05]:.2e} (bound 1e-3), "
           f"runtime={elapsed:.0f}s")


def test_c09_dos_vs_liouville():
    t0 = time.time()
    sym = harmonic_symbol()
    f = BumpFunction(1.5, 0.85, plateau=0.7)
    psi = SmoothingKernel(0.45)
    lam = np.linspace(1.2, 1.8, 31)
    rep = lw.dos_vs_liouville_sweep(sym, f, psi, lam, [0.1, 0.05, 0.025],
                                    {"halfwidth": 3.0, "torus_m": 64})
    dev_small = rep["rows"][-1]["max_deviation"]
    elapsed = time.time() - t0
    ok = rep["slope"] >= 0.8 and dev_small <= 0.15 and elapsed <= 120.0
    report(9, "smoothed DOS vs Liouville", ok,
           f"slope {rep['slope']:.2f} (bound 0.8), "
           f"relative deviation at eps=0.025: {dev_small:.3f} (bound 0.15), "
           f"runtime={elapsed:.0f}s")


def test_c10_no_clustering():
    t0 = time.time()
    rep = lw.cluster_count_sweep(harmonic_symbol(), 1.5, [0.1, 0.05, 0.025],
                                 1.0, 3.0, torus(64))
    elapsed = time.time() - t0
    ok = rep["max_count"] <= 4 and elapsed <= 60.0
    report(10, "no clustering", ok,
           f"window counts {rep['counts']} (bound 4)")


def test_c11_calculus_suite():
    t0 = time.time()
    grid = torus(32)
    ga = lw.builtin_symbol("gaussian_window_trig", {"trig": "sin", "sigma": 0.8})
    gb = lw.builtin_symbol("gaussian_window_trig", {"trig": "cos", "sigma": 1.0})
    eps_list = [0.2, 0.1, 0.05, 0.025]
    comp = {}
    requant = {}
    for order in (1, 2):
        comp[order] = lw.verify_composition(ga, gb, 0.5, 3.0, eps_list, grid,
                                            order=order)["fitted_order"]
        at = lw.change_quantization(ga, 1.0, 0.0, order)
        errs = []
        for eps in eps_list:
            box = lw.LatticeBox(1, eps, 3.0)
            from latticeweyl.util import spectral_norm
            errs.append(spectral_norm(
                lw.build_operator(ga, 1.0, box, eps, grid).entries
                - lw.build_operator(at, 0.0, box, eps, grid).entries))
        requant[order] = fit_loglog_slope(eps_list, errs)
    slope_ok = all(comp[n] >= n - 0.25 for n in (1, 2)) \
        and all(requant[n] >= n - 0.25 for n in (1, 2))

    eps = 0.05
    box = lw.LatticeBox(1, eps, 3.0)
    op = lw.build_operator(harmonic_symbol(), 0.5, box, eps, torus(64))
    herm_ok = op.hermitian_defect <= 1e-10 * np.max(np.abs(op.entries))

    xo = lw.builtin_symbol("x_only", {"profile": "gaussian"})
    mats = [lw.build_operator(xo, t, box, eps, torus(64)).entries
            for t in (0.0, 0.3, 0.5, 1.0)]
    xonly_dev = max(float(np.max(np.abs(m - mats[0]))) for m in mats[1:])
    elapsed = time.time() - t0
    ok = slope_ok and herm_ok and xonly_dev < 1e-13 and elapsed <= 120.0
    report(11, "calculus property suite", ok,
           f"composition slopes {comp[1]:.2f}/{comp[2]:.2f}, "
           f"requantisation slopes {requant[1]:.2f}/{requant[2]:.2f}, "
           f"hermitian defect rel {op.hermitian_defect:.1e}, "
           f"x-only t-independence {xonly_dev:.1e}, runtime={elapsed:.0f}s")
