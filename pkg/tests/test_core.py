import numpy as np
import pytest

import latticeweyl as lw
from latticeweyl.core import RegistryError, fd_derivative, symbol_seminorm_report


def test_lattice_roundtrip_identity():
    box = lw.LatticeBox(2, 0.25, 1.0)
    assert box.points_per_axis == 2 * 4 + 1
    for flat in range(0, box.size, 7):
        iv = box.indices[flat]
        assert box.flat_index(iv) == flat
        assert box.index_of_point(box.points[flat]) == flat


def test_lattice_tolerant_floor():
    # 3.0 / 0.1 lands below 30 in floating point; the count must not drop
    box = lw.LatticeBox(1, 0.1, 3.0)
    assert box.points_per_axis == 61


def test_lattice_rejects_off_lattice_point():
    box = lw.LatticeBox(1, 0.5, 2.0)
    with pytest.raises(ValueError):
        box.index_of_point(np.array([0.3]))


@pytest.mark.parametrize("m", [4, 9, 16])
def test_torus_quadrature_exactness(m):
    grid = lw.TorusGrid(1, m)
    for k in range(0, m):
        vals = np.exp(1j * k * grid.nodes[:, 0])
        integral = grid.integrate(vals)
        expected = 2.0 * np.pi if k == 0 else 0.0
        assert abs(integral - expected) < 1e-12


def test_torus_shift_invariance():
    grid = lw.TorusGrid(1, 8)
    shifted = np.sort(np.mod(grid.axis_nodes + 2 * np.pi / 8 + np.pi, 2 * np.pi) - np.pi)
    assert np.allclose(np.sort(grid.axis_nodes), shifted, atol=1e-12)


def test_eval_symbol_examples(harmonic):
    const = lw.Symbol(1, [lambda x, xi: np.ones(x.shape[:-1])], name="one")
    assert lw.eval_symbol(const, 0.3, 2.0, 0.1) == 1.0
    assert abs(lw.eval_symbol(harmonic, 1.0, 0.0, 0.1) - 1.0) < 1e-14
    with_a1 = lw.builtin_symbol("lattice_laplacian_plus_quadratic",
                                {"c": 1.0, "d": 1, "a1_const": 1.0})
    assert abs(lw.eval_symbol(with_a1, 0.0, np.pi, 0.1) - 4.1) < 1e-14


def test_eval_symbol_is_linear_in_terms(harmonic, rng):
    x = rng.uniform(-2, 2, size=(20, 1))
    xi = rng.uniform(-4, 4, size=(20, 1))
    a = lw.builtin_symbol("xi_only", {"profile": "cos"})
    b = lw.builtin_symbol("x_only", {"profile": "quadratic"})
    comb = lw.Symbol(1, [lambda p, q: 2.0 * a.terms[0].fn(p, q)
                         + 3.0 * b.terms[0].fn(p, q)], name="comb")
    lhs = lw.eval_symbol(comb, x, xi, 0.1)
    rhs = 2.0 * lw.eval_symbol(a, x, xi, 0.1) + 3.0 * lw.eval_symbol(b, x, xi, 0.1)
    assert np.max(np.abs(lhs - rhs)) < 1e-13


def test_xi_reduction_is_structural(harmonic):
    v1 = lw.eval_symbol(harmonic, 0.7, 0.9, 0.05)
    v2 = lw.eval_symbol(harmonic, 0.7, 0.9 + 6 * np.pi, 0.05)
    assert abs(v1 - v2) < 1e-12


def test_check_periodicity_trivia():
    ok = lw.builtin_symbol("xi_only", {"profile": "cos"})
    rep = lw.check_periodicity(ok, 32, 1e-10)
    assert rep["pass"] and rep["max_violation"] < 1e-12

    bad = lw.builtin_symbol("xi_only", {"expr": "k0"})
    rep = lw.check_periodicity(bad, 16, 1e-10)
    assert not rep["pass"]
    assert abs(rep["max_violation"] - 2 * np.pi) < 1e-9

    xonly = lw.builtin_symbol("x_only", {"profile": "quadratic"})
    rep = lw.check_periodicity(xonly, 16, 1e-12)
    assert rep["pass"] and rep["max_violation"] == 0.0


def test_elliptic_shift_unit_order_function():
    sym = lw.builtin_symbol("gaussian_window_trig", {"trig": "cos"})
    rep = lw.check_elliptic_shifted(sym, {"x_box": 3.0}, [0.1])
    assert rep["inf_ratio"] >= 1.0 - 1e-12

    zero = lw.Symbol(1, [lambda x, xi: np.zeros(x.shape[:-1])], name="zero")
    rep = lw.check_elliptic_shifted(zero, {"x_box": 2.0}, [0.1])
    assert abs(rep["inf_ratio"] - 1.0) < 1e-12


def test_elliptic_shift_flagship_vs_dense_oracle(harmonic):
    rep = lw.check_elliptic_shifted(harmonic, {"x_box": 3.0, "x_samples": 61,
                                               "xi_samples": 61}, [0.1, 0.05])
    # dense-grid minimisation oracle for |a0 + i| / (1 + x^2)
    x = np.linspace(-3, 3, 1201)[:, None]
    xi = np.linspace(-np.pi, np.pi, 1201)[None, :]
    a0 = 2 - 2 * np.cos(xi) + x ** 2
    oracle = np.min(np.abs(a0 + 1j) / (1 + x ** 2))
    assert rep["inf_ratio"] > 0.4
    assert abs(rep["inf_ratio"] - oracle) < 0.05


def test_ess_bound_examples(harmonic):
    iv = lw.Interval(0.0, 3.0)
    rep = lw.check_ess_bound(harmonic, iv, 2.0)
    assert rep["pass"] and abs(rep["inf_outside"] - 4.0) < 1e-9

    flat = lw.builtin_symbol("xi_only", {"profile": "one"})
    rep = lw.check_ess_bound(flat, iv, 2.0)
    assert not rep["pass"] and abs(rep["inf_outside"] - 1.0) < 1e-12

    xsq = lw.builtin_symbol("x_only", {"profile": "quadratic"})
    rep = lw.check_ess_bound(xsq, iv, 1.5)
    assert not rep["pass"] and abs(rep["inf_outside"] - 2.25) < 1e-9


def test_order_function_tempering(harmonic, rng):
    rep = harmonic.order_function.check_tempering(1, rng, samples=400)
    assert rep["pass"]


def test_registry_values_and_errors():
    d2 = lw.builtin_symbol("lattice_laplacian_plus_quadratic", {"c": 1.0, "d": 2})
    v = lw.eval_symbol(d2, np.zeros(2), np.array([np.pi, np.pi]), 0.1)
    assert abs(v - 8.0) < 1e-13

    dw = lw.builtin_symbol("cosine_double_well", {"c": 1.0, "w": 1.0})
    assert abs(lw.eval_symbol(dw, 1.0, 0.0, 0.1)) < 1e-13

    with pytest.raises(RegistryError):
        lw.builtin_symbol("no_such_symbol")
    with pytest.raises(RegistryError):
        lw.builtin_symbol("xi_only", {"profile": "bogus"})


def test_x_only_has_zero_xi_derivatives():
    sym = lw.builtin_symbol("x_only", {"expr": "x0**2"})
    d = sym.term_derivative(0, (0,), (1,))
    x = np.linspace(-2, 2, 9).reshape(-1, 1)
    xi = np.linspace(-3, 3, 9).reshape(-1, 1)
    assert np.max(np.abs(d(x, xi))) < 1e-12


def test_analytic_derivatives_match_fd(harmonic):
    x = np.array([[0.7]])
    xi = np.array([[1.1]])
    exact = harmonic.term_derivative(0, (1,), (1,))(x, xi)
    raw = harmonic.terms[0].fn
    fd = fd_derivative(raw, (1,), (1,))(x, xi)
    assert abs(exact - fd) < 1e-7
    # pure xi second derivative
    exact2 = harmonic.term_derivative(0, (0,), (2,))(x, xi)
    assert abs(exact2 - 2 * np.cos(1.1)) < 1e-12


def test_seminorm_report_knob(harmonic):
    rep = symbol_seminorm_report(harmonic, orders=((0, 0), (1, 0), (0, 1)),
                                 grid={"x_box": 2.0, "x_samples": 21,
                                       "xi_samples": 21})
    assert set(rep) == {(0, 0), (1, 0), (0, 1)}
    assert all(np.isfinite(v) for v in rep.values())


def test_interval_validation():
    with pytest.raises(ValueError):
        lw.Interval(1.0, 1.0)
    iv = lw.Interval(0.0, 2.0)
    assert iv.contains(1.0) and not iv.contains(3.0)
