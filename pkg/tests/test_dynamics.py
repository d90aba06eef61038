import numpy as np
import pytest

import latticeweyl as lw
from latticeweyl.dynamics import (CausticError, Hamiltonian,
                                  weyl_symbol_from_matrix)
from latticeweyl.semiclassics import BumpFunction
from conftest import harmonic_symbol, torus


def harmonic_oscillator():
    return Hamiltonian(
        1,
        value=lambda x, xi: 0.5 * (x[..., 0] ** 2 + xi[..., 0] ** 2),
        grad_x=lambda x, xi: np.array(x, dtype=float, copy=True),
        grad_xi=lambda x, xi: np.array(xi, dtype=float, copy=True),
        hess_xx=lambda x, xi: np.ones(x.shape[:-1] + (1, 1)),
        hess_x_xi=lambda x, xi: np.zeros(x.shape[:-1] + (1, 1)),
        hess_xi_xi=lambda x, xi: np.ones(x.shape[:-1] + (1, 1)))


def test_flow_free_motion():
    sym = lw.builtin_symbol("xi_only", {"profile": "nn_laplacian"})
    h = Hamiltonian.from_symbol(sym)
    traj = lw.flow_step(h, (np.array([0.3]), np.array([1.0])), 1e-3, 500)
    assert np.max(np.abs(traj.xis - 1.0)) < 1e-12
    want = 0.3 + traj.times * 2 * np.sin(1.0)
    assert np.max(np.abs(traj.xs[:, 0] - want)) < 1e-10


def test_flow_circular_orbit():
    h = harmonic_oscillator()
    traj = lw.flow_step(h, (np.array([1.0]), np.array([0.0])), 1e-3, 6283)
    assert traj.energy_drift < 1e-8
    t = traj.times
    assert np.max(np.abs(traj.xs[:, 0] - np.cos(t))) < 1e-9
    assert np.max(np.abs(traj.xis[:, 0] + np.sin(t))) < 1e-9
    # action integral along the circle: int (sin^2 - 1/2) = -sin(2t)/4
    want = -np.sin(2.0 * t) / 4.0
    assert np.max(np.abs(traj.action - want)) < 1e-8


def test_flow_fourth_order():
    h = harmonic_oscillator()
    errs = []
    for dt in (2e-2, 1e-2):
        traj = lw.flow_step(h, (np.array([1.0]), np.array([0.0])), dt,
                            int(round(1.0 / dt)))
        errs.append(abs(traj.xs[-1, 0] - np.cos(1.0)))
    assert errs[0] / errs[1] > 12.0


def test_hj_x_independent_exact():
    sym = lw.builtin_symbol("xi_only", {"profile": "nn_laplacian"})
    h = Hamiltonian.from_symbol(sym)
    xg = np.linspace(-2, 2, 15)
    kg = np.linspace(-np.pi, np.pi, 12, endpoint=False)
    ps = lw.solve_hamilton_jacobi(h, 0.1, xg, kg, time_slices=4, dt_int=2e-3)
    hvals = 2.0 - 2.0 * np.cos(ps.xi_grid)
    exact = xg[None, :, None] * ps.xi_grid[None, None, :] \
        - ps.t_grid[:, None, None] * hvals[None, None, :]
    assert np.max(np.abs(ps.phi - exact)) < 1e-8
    rep = lw.check_phase_periodicity(ps)
    assert rep["max_violation"] < 1e-10
    assert ps.initial_condition_error() == 0.0


def test_hj_general_fixture_residual_and_periodicity():
    h = Hamiltonian.from_symbol(harmonic_symbol())
    kg = np.linspace(-np.pi, np.pi, 16, endpoint=False)
    probes = [0.03, 0.06, 0.098]
    d = 2e-4
    tg = sorted({0.0} | {s * (p + o) for p in probes for o in (-d, 0.0, d)
                 for s in (1.0, -1.0)})
    ps = lw.solve_hamilton_jacobi(h, 0.1, np.linspace(-3, 3, 31), kg,
                                  t_grid=tg, dt_int=1e-3)
    assert ps.residual_report(max_spacing=5e-4)["max_residual"] < 1e-5
    assert lw.check_phase_periodicity(ps)["max_violation"] < 1e-5
    assert ps.newton_iters_max <= 50


def test_hj_caustic_detection():
    h = harmonic_oscillator()
    with pytest.raises(CausticError):
        lw.solve_hamilton_jacobi(h, 2.0, np.linspace(-1, 1, 9),
                                 np.array([0.0]), time_slices=10,
                                 auto_shrink=False, with_ghosts=False)
    ps = lw.solve_hamilton_jacobi(h, 2.0, np.linspace(-1, 1, 9),
                                  np.array([0.0]), time_slices=10,
                                  auto_shrink=True, with_ghosts=False)
    assert ps.horizon < 2.0 and ps.requested_horizon == 2.0


def _chi_wide(L):
    return BumpFunction(0.0, 0.98 * L, plateau=0.9)


def test_transport_static_when_flow_vanishes():
    # x-only Hamiltonian: the transport field is identically zero
    sym = lw.builtin_symbol("x_only", {"profile": "quadratic"})
    h = Hamiltonian.from_symbol(sym)
    xg = np.linspace(-1.5, 1.5, 21)
    kg = np.linspace(-np.pi, np.pi, 8, endpoint=False)
    ps = lw.solve_hamilton_jacobi(h, 0.05, xg, kg, time_slices=2,
                                  dt_int=1e-3, with_ghosts=False)
    chi = _chi_wide(1.5)
    c_fn = lambda s, m: np.exp(-s ** 2) + 0.0j
    mu = lw.solve_transport_leading(h, ps, lw.initial_amplitude(ps, chi, c_fn))
    y = xg[::4]
    v0 = mu.mu0(ps.slice_index(0.0), y)
    v1 = mu.mu0(ps.slice_index(0.05), y)
    assert np.max(np.abs(v1 - v0)) < 1e-9


def test_transport_advection_closed_form():
    # x-independent Hamiltonian: mu0 is a pure shift along the group velocity
    sym = lw.builtin_symbol("xi_only", {"profile": "nn_laplacian"})
    h = Hamiltonian.from_symbol(sym)
    xg = np.linspace(-2.5, 2.5, 41)
    kg = np.linspace(-np.pi, np.pi, 8, endpoint=False)
    ps = lw.solve_hamilton_jacobi(h, 0.1, xg, kg, time_slices=2,
                                  dt_int=1e-3, with_ghosts=False)
    chi = _chi_wide(2.5)
    c_fn = lambda s, m: np.exp(-2.0 * s ** 2) + 0.0j
    mu = lw.solve_transport_leading(h, ps, lw.initial_amplitude(ps, chi, c_fn))
    it = ps.slice_index(0.1)
    y = np.array([0.0])
    got = mu.mu0(it, y)[:, 0, :]
    for m, k in enumerate(kg):
        shift = 0.1 * 2.0 * np.sin(k)  # d/dxi of 2(1 - cos xi)
        foot = xg - shift
        want = chi(foot) * chi(0.0) * np.exp(-2.0 * (0.5 * foot) ** 2)
        assert np.max(np.abs(got[:, m] - want)) < 1e-8
    # sup conservation: div F = 0
    assert abs(np.max(np.abs(mu.mu0(it, xg))) -
               np.max(np.abs(mu.mu0(ps.slice_index(0.0), xg)))) < 1e-9


def test_initial_amplitude_consistency():
    h = Hamiltonian.from_symbol(harmonic_symbol())
    xg = np.linspace(-2, 2, 21)
    kg = np.linspace(-np.pi, np.pi, 8, endpoint=False)
    ps = lw.solve_hamilton_jacobi(h, 0.05, xg, kg, time_slices=2,
                                  dt_int=1e-3, with_ghosts=False)
    chi = _chi_wide(2.0)
    c_fn = lambda s, m: (1.0 + 0.2 * np.cos(kg[m])) * np.exp(-s ** 2) + 0.0j
    mu = lw.solve_transport_leading(h, ps, lw.initial_amplitude(ps, chi, c_fn))
    assert mu.initial_check(xg) < 1e-14


def test_weyl_symbol_inversion_roundtrip():
    rng = np.random.default_rng(0)
    N = 7
    a = np.zeros((N, N), dtype=complex)
    for k in range(3):
        v = rng.normal(size=N - k) + 1j * rng.normal(size=N - k)
        a += np.diag(v, k)
    a = 0.5 * (a + a.conj().T)
    box = lw.LatticeBox(1, 0.5, 1.7)
    grid = lw.TorusGrid(1, 8)
    s_coords, table = weyl_symbol_from_matrix(a, box, grid)
    nodes = grid.nodes[:, 0]
    kr = (grid.nodes_per_axis - 1) // 2  # bands past the alias limit fold
    for i in range(N):
        for j in range(N):
            if abs(j - i) > kr:
                continue
            got = np.mean(np.exp(1j * (j - i) * nodes) * table[i + j])
            assert abs(got - a[i, j]) < 1e-12


def test_build_parametrix_zero_amplitude():
    h = Hamiltonian.from_symbol(harmonic_symbol())
    eps = 0.1
    box = lw.LatticeBox(1, eps, 2.0)
    grid = torus(16)
    kg = grid.nodes[:, 0]
    ps = lw.solve_hamilton_jacobi(h, 0.05, box.points[:, 0], kg,
                                  time_slices=2, dt_int=1e-3, with_ghosts=False)
    chi = _chi_wide(2.0)
    mu = lw.solve_transport_leading(
        h, ps, lw.initial_amplitude(ps, chi, lambda s, m: 0.0j * s))
    u = lw.build_parametrix(mu, ps, 0.05, box, eps, grid)
    assert np.max(np.abs(u)) == 0.0


def test_build_parametrix_diagonal_structure():
    # xi-independent amplitude at t = 0 collapses to a diagonal
    sym = lw.builtin_symbol("x_only", {"profile": "quadratic"})
    h = Hamiltonian.from_symbol(sym)
    eps = 0.1
    box = lw.LatticeBox(1, eps, 1.5)
    grid = torus(16)
    ps = lw.solve_hamilton_jacobi(h, 0.02, box.points[:, 0], grid.nodes[:, 0],
                                  time_slices=1, dt_int=1e-3, with_ghosts=False)
    chi = _chi_wide(1.5)
    g = lambda s, m: np.exp(-s ** 2) + 0.0j
    mu = lw.solve_transport_leading(h, ps, lw.initial_amplitude(ps, chi, g))
    u = lw.build_parametrix(mu, ps, 0.0, box, eps, grid)
    x = box.points[:, 0]
    want = np.diag(chi(x) ** 2 * np.exp(-x ** 2))
    assert np.max(np.abs(u - want)) < 1e-12


def test_parametrix_t0_exact_mode():
    sym = harmonic_symbol()
    f = BumpFunction(1.5, 1.0, plateau=0.2)
    rep = lw.parametrix_error_sweep(sym, f, [0.0, 0.05], [0.05], 3.0,
                                    torus_base=128, symbol_mode="exact",
                                    scale_torus=False)
    row = rep["rows"][0]
    assert row["errors"][0.0] < 1e-3
    assert row["consistency0"] < 1e-6
    assert row["u_norm_at_tmax"] < 1.0 + 5 * 0.05


def test_parametrix_amplitude_depth_guard():
    sym = harmonic_symbol()
    f = BumpFunction(1.5, 1.0, plateau=0.2)
    with pytest.raises(NotImplementedError):
        lw.parametrix_error_sweep(sym, f, [0.0], [0.1], 3.0, amplitude_depth=2)
