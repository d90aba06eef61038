"""Lattices, torus grids, order functions and symbols.

The configuration space is the scaled lattice eps*Z^d truncated to a box;
momentum lives on the torus T^d = [-pi, pi)^d. A symbol is a finite
expansion a(x, xi; eps) = sum_j eps^j a_j(x, xi) with each coefficient
2*pi-periodic in xi.
"""

import itertools

import numpy as np
import sympy as sp

from .util import TWO_PI, as_points, reduce_torus

__all__ = [
    "LatticeBox", "TorusGrid", "OrderFunction", "Symbol", "SymbolTerm",
    "ExprTerm", "Interval", "eval_symbol", "check_periodicity",
    "check_elliptic_shifted", "check_ess_bound", "builtin_symbol",
    "symbol_seminorm_report", "RegistryError",
]


class RegistryError(KeyError):
    """Unknown builtin symbol name or bad parameter."""


# ---------------------------------------------------------------------------
# Discretised phase space
# ---------------------------------------------------------------------------

class LatticeBox:
    """Finite box truncation of the scaled lattice eps*Z^d.

    Points carry max-norm <= L. Indices are stored as exact integers and
    points are derived as eps*index, so the lattice structure is never
    subject to float drift.
    """

    def __init__(self, dim, spacing, halfwidth):
        if dim < 1 or spacing <= 0 or halfwidth <= 0:
            raise ValueError("need dim >= 1, spacing > 0, halfwidth > 0")
        self.dim = int(dim)
        self.spacing = float(spacing)
        self.halfwidth = float(halfwidth)
        # tolerant floor: L/eps = 29.999999... must count as 30
        self.n_half = int(np.floor(halfwidth / spacing + 1e-9))
        self.points_per_axis = 2 * self.n_half + 1
        axes = [np.arange(-self.n_half, self.n_half + 1)] * self.dim
        self.indices = np.array(list(itertools.product(*axes)), dtype=np.int64)
        self.size = self.indices.shape[0]
        self._strides = np.array(
            [self.points_per_axis ** (self.dim - 1 - k) for k in range(self.dim)],
            dtype=np.int64)

    @property
    def points(self):
        return self.spacing * self.indices.astype(float)

    def flat_index(self, index_vector):
        iv = np.asarray(index_vector, dtype=np.int64)
        if np.any(np.abs(iv) > self.n_half):
            raise IndexError("lattice index outside box")
        return int(np.dot(iv + self.n_half, self._strides))

    def index_of_point(self, x):
        iv = np.rint(np.asarray(x, dtype=float) / self.spacing).astype(np.int64)
        if not np.allclose(self.spacing * iv, x, atol=1e-9 * max(1.0, self.spacing)):
            raise ValueError("point is not on the lattice")
        return self.flat_index(iv)


class TorusGrid:
    """Uniform quadrature grid on T^d with trapezoid weights.

    The nodes xi_k = -pi + 2*pi*k/M integrate e^{i k.xi} exactly to zero
    for 0 < |k_j| < M, which makes the quantisation kernels of
    trigonometric-polynomial symbols exact.
    """

    def __init__(self, dim, nodes_per_axis):
        if nodes_per_axis < 1:
            raise ValueError("need at least one node per axis")
        self.dim = int(dim)
        self.nodes_per_axis = int(nodes_per_axis)
        self.axis_nodes = -np.pi + TWO_PI * np.arange(self.nodes_per_axis) / self.nodes_per_axis
        self.nodes = np.array(list(itertools.product(*([self.axis_nodes] * self.dim))))
        self.weight = (TWO_PI / self.nodes_per_axis) ** self.dim

    @property
    def size(self):
        return self.nodes.shape[0]

    def integrate(self, values):
        """Trapezoid quadrature of node samples over T^d."""
        return self.weight * np.sum(values, axis=-1)


class Interval:
    """Spectral window [alpha, beta]."""

    def __init__(self, alpha, beta):
        if not alpha < beta:
            raise ValueError("need alpha < beta")
        self.alpha = float(alpha)
        self.beta = float(beta)

    def __repr__(self):
        return f"Interval({self.alpha}, {self.beta})"

    def contains(self, lam):
        return (self.alpha <= lam) & (lam <= self.beta)


class OrderFunction:
    """Positive weight m(x, xi) tempered under translation.

    growth constants (C, M) assert m(x, xi) <= C <x - y>^M m(y, mu).
    """

    def __init__(self, fn, growth_c=1.0, growth_m=0):
        self.fn = fn
        self.growth_c = float(growth_c)
        self.growth_m = int(growth_m)

    def __call__(self, x, xi):
        return self.fn(x, xi)

    def check_tempering(self, dim, rng, samples=200, box=3.0, tol=1e-9):
        """Sampled proxy of the tempering bound on random point pairs."""
        x = rng.uniform(-box, box, size=(samples, dim))
        y = rng.uniform(-box, box, size=(samples, dim))
        xi = rng.uniform(-np.pi, np.pi, size=(samples, dim))
        mu = rng.uniform(-np.pi, np.pi, size=(samples, dim))
        jap = np.sqrt(1.0 + np.sum((x - y) ** 2, axis=-1))
        lhs = np.asarray(self.fn(x, xi), dtype=float)
        rhs = self.growth_c * jap ** self.growth_m * np.asarray(self.fn(y, mu), dtype=float)
        ratio = np.max(lhs / rhs)
        return {"max_ratio": float(ratio), "pass": bool(ratio <= 1.0 + tol)}


def unit_order_function():
    return OrderFunction(lambda x, xi: np.ones(np.shape(np.asarray(x)[..., 0])), 1.0, 0)


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------

def _fd_step(coord):
    return 1e-4 * np.maximum(1.0, np.abs(coord))


def _fd_axis(fn, slot, axis):
    """4th-order central difference in one coordinate of one slot (0=x, 1=xi)."""

    def dfn(x, xi):
        base = x if slot == 0 else xi
        h = _fd_step(base[..., axis])

        def shifted(c):
            b = np.array(base, dtype=float, copy=True)
            b[..., axis] = b[..., axis] + c * h
            return fn(b, xi) if slot == 0 else fn(x, b)

        return (-shifted(2.0) + 8.0 * shifted(1.0) - 8.0 * shifted(-1.0)
                + shifted(-2.0)) / (12.0 * h)

    return dfn


def fd_derivative(fn, ax, axi):
    """Nested finite-difference partial derivative d^ax_x d^axi_xi fn."""
    g = fn
    for axis, order in enumerate(ax):
        for _ in range(order):
            g = _fd_axis(g, 0, axis)
    for axis, order in enumerate(axi):
        for _ in range(order):
            g = _fd_axis(g, 1, axis)
    return g


class SymbolTerm:
    """One expansion coefficient a_j(x, xi).

    `fn` maps arrays of shape (..., d) x (..., d) to values of shape (...).
    `deriv_factory(ax, axi)` may return an analytic partial derivative; when
    absent, a finite-difference fallback is used.
    """

    def __init__(self, fn, deriv_factory=None):
        self.fn = fn
        self._deriv_factory = deriv_factory

    def derivative(self, ax, axi):
        ax = tuple(int(k) for k in ax)
        axi = tuple(int(k) for k in axi)
        if not any(ax) and not any(axi):
            return self.fn
        if self._deriv_factory is not None:
            g = self._deriv_factory(ax, axi)
            if g is not None:
                return g
        return fd_derivative(self.fn, ax, axi)


class ExprTerm(SymbolTerm):
    """Symbol coefficient backed by a sympy expression.

    Partial derivatives of any order are generated lazily and cached, so
    builtin symbols come with exact derivative callbacks.
    """

    def __init__(self, expr, xvars, kvars):
        self.expr = sp.sympify(expr)
        self.xvars = list(xvars)
        self.kvars = list(kvars)
        self._cache = {}
        super().__init__(self._lambdify(self.expr), self._factory)

    def _lambdify(self, expr):
        f = sp.lambdify(self.xvars + self.kvars, expr, modules="numpy")

        def fn(x, xi):
            args = [x[..., i] for i in range(len(self.xvars))]
            args += [xi[..., i] for i in range(len(self.kvars))]
            out = f(*args)
            shape = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
            return np.broadcast_to(np.asarray(out), shape).copy()

        return fn

    def _factory(self, ax, axi):
        key = (ax, axi)
        if key not in self._cache:
            e = self.expr
            for v, k in zip(self.xvars, ax):
                if k:
                    e = sp.diff(e, v, k)
            for v, k in zip(self.kvars, axi):
                if k:
                    e = sp.diff(e, v, k)
            self._cache[key] = self._lambdify(sp.simplify(e))
        return self._cache[key]


class Symbol:
    """Finite expansion a(x, xi; eps) = sum_{j<J} eps^j a_j(x, xi).

    Momentum arguments are reduced to [-pi, pi) before term dispatch, so
    periodicity is structural for evaluation; `check_periodicity` probes
    the raw terms.
    """

    def __init__(self, dim, terms, order_function=None, is_real=True,
                 name="custom", params=None):
        if len(terms) < 1:
            raise ValueError("need at least one expansion term")
        self.dim = int(dim)
        self.terms = [t if isinstance(t, SymbolTerm) else SymbolTerm(t) for t in terms]
        self.num_terms = len(self.terms)
        self.order_function = order_function or unit_order_function()
        self.is_real = bool(is_real)
        self.period_tested = False
        self.name = name
        self.params = dict(params or {})

    def term_value(self, j, x, xi, reduce_xi=True):
        x, single = as_points(x, self.dim)
        xi, _ = as_points(xi, self.dim)
        if reduce_xi:
            xi = reduce_torus(xi)
        v = self.terms[j].fn(x, xi)
        return complex(v.reshape(-1)[0]) if single and np.ndim(v) else v

    def term_derivative(self, j, ax, axi):
        """Callable for d^ax_x d^axi_xi a_j, with xi reduction applied."""
        raw = self.terms[j].derivative(ax, axi)

        def fn(x, xi):
            x, single = as_points(x, self.dim)
            xi, _ = as_points(xi, self.dim)
            v = raw(x, reduce_torus(xi))
            return complex(v.reshape(-1)[0]) if single and np.ndim(v) else v

        return fn

    def __call__(self, x, xi, eps):
        return eval_symbol(self, x, xi, eps)

    def hamiltonian(self):
        """Leading-order term packaged for the classical flow (see dynamics)."""
        from .dynamics import Hamiltonian
        return Hamiltonian.from_symbol(self)


def eval_symbol(sym, x, xi, eps):
    """Evaluate sum_j eps^j a_j(x, xi) with xi reduced to the torus."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x, single = as_points(x, sym.dim)
    xi, _ = as_points(xi, sym.dim)
    xi = reduce_torus(xi)
    out = None
    for j, term in enumerate(sym.terms):
        v = np.asarray(term.fn(x, xi), dtype=complex) * (eps ** j)
        out = v if out is None else out + v
    if single:
        out = complex(out.reshape(-1)[0])
        return out.real if abs(out.imag) == 0.0 else out
    return out


# ---------------------------------------------------------------------------
# Hypothesis-style sampled checks
# ---------------------------------------------------------------------------

def check_periodicity(sym, sample_count=64, tol=1e-10, rng=None, box=3.0):
    """Max violation of 2*pi periodicity of the raw terms over random samples."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = rng or np.random.default_rng(0)
    x = rng.uniform(-box, box, size=(sample_count, sym.dim))
    xi = rng.uniform(-np.pi, np.pi, size=(sample_count, sym.dim))
    worst = 0.0
    for term in sym.terms:
        base = np.asarray(term.fn(x, xi))
        for axis in range(sym.dim):
            shifted = np.array(xi)
            shifted[..., axis] += TWO_PI
            diff = np.max(np.abs(np.asarray(term.fn(x, shifted)) - base))
            worst = max(worst, float(diff))
    passed = worst <= tol
    sym.period_tested = bool(passed)
    return {"max_violation": worst, "pass": bool(passed)}


def _sample_grid(sym, grid_spec):
    """Build the (x, xi) product sample set from a sampling spec dict."""
    spec = dict(grid_spec or {})
    box = float(spec.get("x_box", 3.0))
    nx = int(spec.get("x_samples", 41))
    nxi = int(spec.get("xi_samples", 41))
    ax = np.linspace(-box, box, nx)
    axi = np.linspace(-np.pi, np.pi, nxi, endpoint=False)
    x = np.array(list(itertools.product(*([ax] * sym.dim))))
    xi = np.array(list(itertools.product(*([axi] * sym.dim))))
    X = np.repeat(x, xi.shape[0], axis=0)
    XI = np.tile(xi, (x.shape[0], 1))
    return X, XI


def check_elliptic_shifted(sym, grid=None, eps_list=(0.1,)):
    """inf over samples of |a(x,xi;eps) + i| / m(x,xi).

    The imaginary shift mirrors the self-adjointness hypothesis on a + i;
    the caller judges the ratio against a threshold.
    """
    X, XI = _sample_grid(sym, grid)
    m = np.asarray(sym.order_function(X, XI), dtype=float)
    worst = np.inf
    for eps in eps_list:
        vals = eval_symbol(sym, X, XI, eps)
        ratio = np.abs(vals + 1j) / m
        worst = min(worst, float(np.min(ratio)))
    return {"inf_ratio": worst}


def check_ess_bound(sym, j_interval, radius, grid=None):
    """inf of a_0 over sampled |x| > R; pass iff above sup J.

    The sample set includes |x| = R, so the reported infimum is conservative
    for the open region.
    """
    if radius <= 0:
        raise ValueError("R must be positive")
    spec = dict(grid or {})
    outer = float(spec.get("x_outer", radius + 2.0))
    nx = int(spec.get("x_samples", 61))
    # an even momentum count keeps xi = 0 (the generic minimiser of the
    # kinetic part) on the sample grid
    nxi = int(spec.get("xi_samples", 40))
    ax = np.linspace(-outer, outer, nx)
    x = np.array(list(itertools.product(*([ax] * sym.dim))))
    keep = np.linalg.norm(x, axis=-1) >= radius * (1.0 - 1e-12)
    # ensure the boundary sphere itself is probed along the axes
    ring = []
    for axis in range(sym.dim):
        e = np.zeros(sym.dim)
        e[axis] = radius
        ring += [e, -e]
    x = np.vstack([x[keep], np.array(ring)])
    axi = np.linspace(-np.pi, np.pi, nxi, endpoint=False)
    xi = np.array(list(itertools.product(*([axi] * sym.dim))))
    X = np.repeat(x, xi.shape[0], axis=0)
    XI = np.tile(xi, (x.shape[0], 1))
    vals = np.real(np.asarray(sym.term_value(0, X, XI)))
    inf_outside = float(np.min(vals))
    return {"inf_outside": inf_outside, "pass": bool(inf_outside > j_interval.beta)}


def symbol_seminorm_report(sym, orders=((0, 0), (1, 0), (0, 1), (2, 0), (0, 2)),
                           grid=None, eps=0.1):
    """Sampled sup |d^a a| / m for a configurable finite set of orders.

    Which finite family controls the operator-norm constant is left open;
    the orders probed here are a config knob, not a canonical choice.
    """
    X, XI = _sample_grid(sym, grid)
    m = np.asarray(sym.order_function(X, XI), dtype=float)
    report = {}
    for ox, oxi in orders:
        ax = (ox,) + (0,) * (sym.dim - 1)
        axi = (oxi,) + (0,) * (sym.dim - 1)
        total = np.zeros(X.shape[0], dtype=complex)
        for j in range(sym.num_terms):
            total += (eps ** j) * np.asarray(
                sym.term_derivative(j, ax, axi)(X, XI), dtype=complex)
        report[(ox, oxi)] = float(np.max(np.abs(total) / m))
    return report


# ---------------------------------------------------------------------------
# Builtin symbol registry
# ---------------------------------------------------------------------------

def _xvars(d):
    return sp.symbols(f"x0:{d}", real=True)


def _kvars(d):
    return sp.symbols(f"k0:{d}", real=True)


_XI_PROFILES = {
    "nn_laplacian": lambda kv: sum(2 - 2 * sp.cos(k) for k in kv),
    "cos": lambda kv: sum(sp.cos(k) for k in kv),
    "sin": lambda kv: sum(sp.sin(k) for k in kv),
    "cos2": lambda kv: sum(sp.cos(2 * k) for k in kv),
    "two_plus_cos": lambda kv: sum(2 + sp.cos(k) for k in kv),
    "one": lambda kv: sp.Integer(1),
}


def _x_profile_expr(xv, params):
    profile = params.get("profile", "quadratic")
    if "expr" in params:
        loc = {str(v): v for v in xv}
        return sp.sympify(params["expr"], locals=loc)
    c = sp.Float(params.get("c", 1.0))
    if profile == "quadratic":
        return c * sum(v ** 2 for v in xv)
    if profile == "quartic":
        w = sp.Float(params.get("w", 1.0))
        return c * (sum(v ** 2 for v in xv) - w ** 2) ** 2
    if profile == "gaussian":
        amp = sp.Float(params.get("amp", 1.0))
        sigma = sp.Float(params.get("sigma", 1.0))
        return amp * sp.exp(-sum(v ** 2 for v in xv) / (2 * sigma ** 2))
    if profile == "linear":
        return c * sum(xv)
    raise RegistryError(f"unknown x profile {profile!r}")


def _maybe_a1_terms(d, params, xv, kv):
    terms = []
    a1c = params.get("a1_const", 0.0)
    a1p = params.get("a1_profile")
    if a1c:
        terms.append(ExprTerm(sp.Float(a1c), xv, kv))
    elif a1p:
        if a1p not in _XI_PROFILES:
            raise RegistryError(f"unknown a1 profile {a1p!r}")
        terms.append(ExprTerm(_XI_PROFILES[a1p](kv), xv, kv))
    return terms


def builtin_symbol(name, params=None):
    """Registry of test Hamiltonians with exact derivative callbacks.

    Names: lattice_laplacian_plus_quadratic, cosine_double_well, x_only,
    xi_only, gaussian_window_trig. Parameters are checked; unknown names
    or missing parameters raise RegistryError.
    """
    params = dict(params or {})
    d = int(params.get("d", 1))
    xv, kv = list(_xvars(d)), list(_kvars(d))

    if name == "lattice_laplacian_plus_quadratic":
        c = float(params.get("c", 1.0))
        a0 = sum(2 - 2 * sp.cos(k) for k in kv) + sp.Float(c) * sum(v ** 2 for v in xv)
        m = OrderFunction(
            lambda x, xi, c=c: 1.0 + c * np.sum(np.asarray(x) ** 2, axis=-1),
            growth_c=2.0 * max(1.0, c), growth_m=2)
        terms = [ExprTerm(a0, xv, kv)] + _maybe_a1_terms(d, params, xv, kv)
        return Symbol(d, terms, order_function=m, name=name, params=params)

    if name == "cosine_double_well":
        c = float(params.get("c", 1.0))
        w = float(params.get("w", 1.0))
        s2 = sum(v ** 2 for v in xv)
        a0 = sum(2 - 2 * sp.cos(k) for k in kv) + sp.Float(c) * (s2 - w ** 2) ** 2
        m = OrderFunction(
            lambda x, xi, c=c, w=w: 1.0 + c * (np.sum(np.asarray(x) ** 2, axis=-1) - w ** 2) ** 2,
            growth_c=16.0 * max(1.0, c) * (1.0 + w ** 2) ** 2, growth_m=4)
        terms = [ExprTerm(a0, xv, kv)] + _maybe_a1_terms(d, params, xv, kv)
        return Symbol(d, terms, order_function=m, name=name, params=params)

    if name == "x_only":
        expr = _x_profile_expr(xv, params)
        grows = params.get("profile", "quadratic") in ("quadratic", "quartic", "linear") \
            and "expr" not in params
        if grows:
            f = sp.lambdify(xv, 1 + abs(expr), "numpy")
            m = OrderFunction(
                lambda x, xi, f=f: np.asarray(f(*[np.asarray(x)[..., i] for i in range(d)]),
                                              dtype=float) + 0 * np.asarray(x)[..., 0],
                growth_c=16.0 * (1.0 + float(params.get("c", 1.0))), growth_m=4)
        else:
            m = unit_order_function()
        return Symbol(d, [ExprTerm(expr, xv, kv)], order_function=m,
                      name=name, params=params)

    if name == "xi_only":
        profile = params.get("profile", "nn_laplacian")
        if "expr" in params:
            loc = {str(v): v for v in kv}
            expr = sp.sympify(params["expr"], locals=loc)
        elif profile in _XI_PROFILES:
            expr = _XI_PROFILES[profile](kv)
        else:
            raise RegistryError(f"unknown xi profile {profile!r}")
        return Symbol(d, [ExprTerm(expr, xv, kv)], name=name, params=params)

    if name == "gaussian_window_trig":
        amp = sp.Float(params.get("amp", 1.0))
        sigma = sp.Float(params.get("sigma", 1.0))
        trig = params.get("trig", "cos")
        if trig not in _XI_PROFILES:
            raise RegistryError(f"unknown trig profile {trig!r}")
        expr = amp * sp.exp(-sum(v ** 2 for v in xv) / (2 * sigma ** 2)) * _XI_PROFILES[trig](kv)
        return Symbol(d, [ExprTerm(expr, xv, kv)], name=name, params=params)

    raise RegistryError(f"unknown builtin symbol {name!r}")
