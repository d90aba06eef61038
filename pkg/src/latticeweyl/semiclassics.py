"""Almost-analytic extensions, resolvent functional calculus, Poisson
summation with a computable error bound, stationary phase and scaled
Fourier transforms.

Bump profiles are built from the standard exp(-1/(1-t^2)) family; their
derivatives come from sympy, so every order is exact.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate as spi
import sympy as sp

from .util import worker_count

__all__ = [
    "BumpFunction", "SmoothingKernel", "AlmostAnalyticExtension",
    "build_aae", "hs_apply", "poisson_compare", "stationary_phase_check",
    "scaled_fourier", "bump_expr",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Smooth step and bump profiles
# ---------------------------------------------------------------------------

class _SmoothStep:
    """S(v) = theta(v) / (theta(v) + theta(1-v)) with theta(v) = exp(-1/v).

    Identically 0 for v <= 0 and 1 for v >= 1; derivatives of any order are
    generated symbolically and cached. Below v = 1e-3 (and above 1 - 1e-3)
    every derivative is under double-precision resolution, so evaluation
    clips to that window.
    """

    _CLIP = 1e-3

    def __init__(self):
        self._v = sp.Symbol("v", real=True)
        th = sp.exp(-1 / self._v)
        th1 = sp.exp(-1 / (1 - self._v))
        self._expr = th / (th + th1)
        self._fns = {}

    def deriv(self, n):
        if n not in self._fns:
            self._fns[n] = sp.lambdify(self._v, sp.diff(self._expr, self._v, n), "numpy")
        return self._fns[n]

    def __call__(self, v, n=0):
        v = np.asarray(v, dtype=float)
        inner = np.clip(v, self._CLIP, 1.0 - self._CLIP)
        with np.errstate(all="ignore"):
            core = np.nan_to_num(np.asarray(self.deriv(n)(inner), dtype=float))
        if n == 0:
            return np.where(v <= 0.0, 0.0, np.where(v >= 1.0, 1.0, core))
        return np.where((v <= self._CLIP) | (v >= 1.0 - self._CLIP), 0.0, core)


_STEP = _SmoothStep()


class BumpFunction:
    """Smooth compactly supported bump with a flat plateau.

    Zero outside [center - halfwidth, center + halfwidth], identically one
    on the plateau fraction, values in [0, 1]. derivative(n) returns an
    exact callable for any n.
    """

    def __init__(self, center=0.0, halfwidth=1.0, plateau=0.5):
        if halfwidth <= 0 or not 0.0 <= plateau < 1.0:
            raise ValueError("need halfwidth > 0 and plateau fraction in [0, 1)")
        self.center = float(center)
        self.halfwidth = float(halfwidth)
        self.plateau = float(plateau)
        self.rise = (1.0 - plateau) * halfwidth
        self.support = (self.center - self.halfwidth, self.center + self.halfwidth)

    def _args(self, x):
        x = np.asarray(x, dtype=float)
        ul = (x - (self.center - self.halfwidth)) / self.rise
        ur = ((self.center + self.halfwidth) - x) / self.rise
        return ul, ur

    def __call__(self, x):
        ul, ur = self._args(x)
        return _STEP(ul) * _STEP(ur)

    def derivative(self, n):
        if n == 0:
            return self.__call__
        r = self.rise

        def dn(x, n=n):
            ul, ur = self._args(x)
            out = np.zeros(np.shape(ul), dtype=float)
            for k in range(n + 1):
                out = out + (math.comb(n, k) * r ** (-n) * (-1.0) ** (n - k)
                             * _STEP(ul, k) * _STEP(ur, n - k))
            return out

        return dn


def bump_expr(var, halfwidth=1.0, center=0.0):
    """Sympy Piecewise bump exp(-1/(1-u^2)) on |var - center| < halfwidth."""
    u = (var - center) / halfwidth
    return sp.Piecewise((sp.exp(-1 / (1 - u ** 2)), abs(u) < 1), (0, True))


# ---------------------------------------------------------------------------
# Smoothing kernel psi = autocorrelation of a bump
# ---------------------------------------------------------------------------

class SmoothingKernel:
    """Compactly supported psi with psi(0) = 1 and nonnegative transform.

    psi is the normalised autocorrelation (1/sqrt(2 pi)) g * g~ of a bump g
    on [-T/2, T/2], so its Fourier transform equals |F g|^2 >= 0 and the
    support halfwidth is T.
    """

    def __init__(self, support_halfwidth=0.3, plateau=0.3, nonneg_transform=True,
                 quad_nodes=240):
        self.support_halfwidth = float(support_halfwidth)
        self.nonneg_transform = bool(nonneg_transform)
        self._g = BumpFunction(0.0, 0.5 * support_halfwidth, plateau)
        self._nodes, self._weights = np.polynomial.legendre.leggauss(quad_nodes)
        raw0 = self._raw_psi(np.array([0.0]))[0]
        self._scale = 1.0 / raw0

    def _gl(self, lo, hi):
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        return mid + half * self._nodes, half * self._weights

    def _raw_psi(self, t):
        h = self._g.halfwidth
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, ti in np.ndenumerate(t):
            lo, hi = max(-h, ti - h), min(h, ti + h)
            if lo >= hi:
                continue
            nodes, w = self._gl(lo, hi)
            out[i] = np.sum(w * self._g(nodes) * self._g(nodes - ti)) / _SQRT2PI
        return out

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        v = self._scale * self._raw_psi(np.atleast_1d(t))
        return float(v[0]) if scalar else v

    def _fourier_g(self, s):
        """F_1 g on an array of frequencies, with oscillation-adapted nodes."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        shape = s.shape
        s = s.reshape(-1)
        h = self._g.halfwidth
        n = int(max(240, 10 * np.max(np.abs(s)) * h + 60))
        nodes, weights = np.polynomial.legendre.leggauss(min(n, 6000))
        nodes = h * nodes
        weights = h * weights
        gv = self._g(nodes)
        ph = np.exp(-1j * s[:, None] * nodes[None, :])
        return ((ph * (weights * gv)).sum(axis=1) / _SQRT2PI).reshape(shape)

    def fourier1(self, s):
        """F_1 psi = |F_1 g|^2, rescaled so that psi(0) = 1."""
        scalar = np.ndim(s) == 0
        v = self._scale * np.abs(self._fourier_g(s)) ** 2
        return float(v.reshape(-1)[0]) if scalar else v

    def fourier_eps(self, lam, eps):
        """F_eps psi via the scaling identity F_eps psi(l) = F_1 psi(l/eps)."""
        return self.fourier1(np.asarray(lam, dtype=float) / eps)

    def check(self, sample=None):
        sample = np.linspace(-60.0, 60.0, 301) if sample is None else sample
        f1 = self.fourier1(sample)
        return {
            "psi0_err": abs(self(0.0) - 1.0),
            "min_fourier": float(np.min(f1)),
            "support_ok": bool(abs(self(self.support_halfwidth * 1.0001)) < 1e-300),
        }


def scaled_fourier(psi, lam, eps):
    """(F_eps psi)(lam) by adaptive quadrature of the defining integral."""
    t_max = getattr(psi, "support_halfwidth", 1.0)
    omega = lam / eps
    re = spi.quad(psi, -t_max, t_max, weight="cos", wvar=omega, limit=400)[0]
    im = -spi.quad(psi, -t_max, t_max, weight="sin", wvar=omega, limit=400)[0]
    return (re + 1j * im) / _SQRT2PI


# ---------------------------------------------------------------------------
# Almost analytic extension and Helffer-Sjostrand integral
# ---------------------------------------------------------------------------

@dataclass
class AlmostAnalyticExtension:
    """Taylor-with-cutoff extension of f to the complex plane.

    f~(x + i y) = chi(y/sigma) sum_{k<=N} f^(k)(x) (i y)^k / k!, so dbar f~
    vanishes to order N at the real axis with constant c_n.
    """
    f: object
    order: int
    cutoff_width: float
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    dbar_values: np.ndarray
    c_n: float
    real_symmetric: bool = True
    _derivs: list = field(default_factory=list, repr=False)
    _chi: object = None

    def evaluate(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        chi = self._chi(y / self.cutoff_width)
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape), dtype=complex)
        for k in range(self.order + 1):
            out = out + self._derivs[k](x) * (1j * y) ** k / math.factorial(k)
        return chi * out

    def dbar(self, x, y):
        """(d/dx + i d/dy)/2 of the extension; exact formulas, no FD."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        sig = self.cutoff_width
        chi = self._chi(y / sig)
        chi1 = self._chi.derivative(1)(y / sig)
        n = self.order
        lead = 0.5 * chi * self._derivs[n + 1](x) * (1j * y) ** n / math.factorial(n)
        tail = np.zeros(np.broadcast_shapes(x.shape, y.shape), dtype=complex)
        for k in range(n + 1):
            tail = tail + self._derivs[k](x) * (1j * y) ** k / math.factorial(k)
        return lead + 0.5j * chi1 / sig * tail


def build_aae(f, order, cutoff_width=None, grid=None):
    """Construct the extension and sample it on a midpoint rectangle grid.

    f must expose derivative(k) callables up to order + 1 (BumpFunction
    does). The cutoff must stay well inside the divergence radius of the
    truncated Taylor sum; for the Gevrey-type bump profiles used here
    that means a width of about rise/order, which is the default.
    """
    support = getattr(f, "support", None)
    if support is None:
        raise ValueError("f must expose a compact support interval")
    rise = getattr(f, "rise", 0.25 * (support[1] - support[0]))
    if cutoff_width is None:
        cutoff_width = rise / max(2, order)
    spec = dict(grid or {})
    dx = float(spec.get("x_step", min(0.01, rise / 100.0)))
    dy = float(spec.get("y_step", cutoff_width / 80.0))
    pad = float(spec.get("x_pad", 0.0))
    x_lo, x_hi = support[0] - pad, support[1] + pad
    nx = max(2, int(np.ceil((x_hi - x_lo) / dx)))
    ny = max(2, int(np.ceil(2.0 * cutoff_width / dy)))
    ny += ny % 2  # keep the real axis between midpoint rows
    x = x_lo + (np.arange(nx) + 0.5) * (x_hi - x_lo) / nx
    y = -cutoff_width + (np.arange(ny) + 0.5) * (2.0 * cutoff_width) / ny

    derivs = [f.derivative(k) for k in range(order + 2)]
    chi = BumpFunction(0.0, 1.0, plateau=0.5)
    aae = AlmostAnalyticExtension(
        f=f, order=order, cutoff_width=float(cutoff_width), x=x, y=y,
        values=None, dbar_values=None, c_n=0.0, _derivs=derivs, _chi=chi)
    # terms are separable in (x, y); fill the grid from 1-d samples
    dk = np.array([derivs[k](x) for k in range(order + 2)])  # (order+2, nx)
    iy = np.array([(1j * y) ** k / math.factorial(k) for k in range(order + 1)])
    chi_y = chi(y / cutoff_width)
    chi1_y = chi.derivative(1)(y / cutoff_width)
    taylor = dk[:order + 1].T @ iy  # (nx, ny)
    aae.values = chi_y[None, :] * taylor
    lead = 0.5 * np.outer(dk[order + 1], chi_y * (1j * y) ** order / math.factorial(order))
    aae.dbar_values = lead + 0.5j / cutoff_width * chi1_y[None, :] * taylor
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(aae.dbar_values) / np.abs(y[None, :]) ** order
    aae.c_n = float(np.nanmax(ratio))
    return aae


def hs_apply(a_matrix, aae):
    """f(A) = -(1/pi) int dbar f~ (z) (z - A)^{-1} dL(z) by midpoint rule.

    A must be Hermitian. For the real-symmetric extensions built here only
    the upper half plane is solved; the lower half is its conjugate.
    """
    a = np.asarray(a_matrix, dtype=complex)
    if np.max(np.abs(a - a.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(a))):
        raise ValueError("hs_apply needs a Hermitian matrix")
    n = a.shape[0]
    x, y = aae.x, aae.y
    cell = (x[1] - x[0]) * (y[1] - y[0]) if len(x) > 1 and len(y) > 1 else 0.0
    w = aae.dbar_values
    upper = aae.real_symmetric
    ys = y[y > 0] if upper else y
    cols = {yy: j for j, yy in enumerate(y)}
    tasks = []
    for yy in ys:
        j = cols[yy]
        wcol = w[:, j]
        keep = np.abs(wcol) > 0.0
        if np.any(keep):
            tasks.append((x[keep], yy, wcol[keep]))

    eye = np.eye(n, dtype=complex)

    # One unitary tridiagonalisation makes every resolvent solve O(n^2);
    # the accumulated sum is conjugated back once at the end.
    use_banded = n > 24
    if use_banded:
        from scipy.linalg import hessenberg, solve_banded
        hmat, qmat = hessenberg(a, calc_q=True)
        sub = np.diag(hmat, -1)
        diag = np.real(np.diag(hmat)).astype(complex)
        sup_band = np.conj(sub)

        def accumulate(task):
            xs, yy, ws = task
            acc = np.zeros((n, n), dtype=complex)
            ab = np.zeros((3, n), dtype=complex)
            ab[0, 1:] = -sup_band
            ab[2, :-1] = -sub
            for xv, wv in zip(xs, ws):
                ab[1] = (xv + 1j * yy) - diag
                acc += wv * solve_banded((1, 1), ab, eye)
            return acc
    else:
        def accumulate(task, block=192):
            xs, yy, ws = task
            acc = np.zeros((n, n), dtype=complex)
            for start in range(0, len(xs), block):
                xv = xs[start:start + block]
                wv = ws[start:start + block]
                lhs = (xv[:, None, None] + 1j * yy) * eye[None, :, :] - a[None, :, :]
                res = np.linalg.solve(lhs, np.broadcast_to(eye, lhs.shape))
                acc += np.tensordot(wv, res, axes=(0, 0))
            return acc

    nw = worker_count()
    if nw > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            partials = list(ex.map(accumulate, tasks))
    else:
        partials = [accumulate(t) for t in tasks]
    total = np.sum(partials, axis=0) if partials else np.zeros((n, n), dtype=complex)
    if use_banded:
        total = qmat @ total @ qmat.conj().T
    total *= -cell / np.pi
    if upper:
        total = total + total.conj().T
    return total


# ---------------------------------------------------------------------------
# Poisson summation with the integration-by-parts bound
# ---------------------------------------------------------------------------

def _quad_complex(fn, lo, hi, **kw):
    re = spi.quad(lambda x: np.real(fn(x)), lo, hi, **kw)[0]
    im = spi.quad(lambda x: np.imag(fn(x)), lo, hi, **kw)[0]
    return re + 1j * im


def poisson_compare(a_expr, phi_expr, eps, k=1, support=(-1.0, 1.0),
                    dual_shells=3, var=None, grad_samples=2001):
    """Lattice sum of e^{i phi/eps} a against its integral, with the
    certified error bound from iterated integration by parts.

    One dimension; a_expr and phi_expr are sympy expressions in `var`.
    The phase must satisfy sup |phi'| < 2 pi on the support.
    """
    x = var if var is not None else sorted(a_expr.free_symbols | phi_expr.free_symbols,
                                           key=str)[0]
    lo, hi = float(support[0]), float(support[1])
    a_fn = sp.lambdify(x, a_expr, "numpy")
    phi_fn = sp.lambdify(x, phi_expr, "numpy")
    dphi_fn = sp.lambdify(x, sp.diff(phi_expr, x), "numpy")

    xs = np.linspace(lo, hi, grad_samples)
    with np.errstate(all="ignore"):
        sup_grad = float(np.nanmax(np.abs(np.asarray(dphi_fn(xs), dtype=float))))
    if not sup_grad < 2.0 * np.pi:
        raise ValueError(f"phase slope {sup_grad:.4f} violates the < 2 pi condition")

    def osc(t):
        with np.errstate(all="ignore"):
            return np.nan_to_num(a_fn(t)) * np.exp(1j * phi_fn(t) / eps)

    j_lo = int(np.floor(lo / eps)) - 1
    j_hi = int(np.ceil(hi / eps)) + 1
    pts = eps * np.arange(j_lo, j_hi + 1)
    lattice_sum = eps * complex(np.sum(osc(pts)))
    integral = _quad_complex(osc, lo, hi, limit=1500, epsabs=1e-14, epsrel=1e-12)
    remainder = abs(lattice_sum - integral)

    # W_eps^k a, symbolically: repeated d^2/dx^2 of a / w_eps(x, xi)
    xi_s, eps_s = sp.symbols("xi_s eps_s", real=True)
    w = sp.I * eps_s * sp.diff(phi_expr, x, 2) - (sp.diff(phi_expr, x) - xi_s) ** 2
    b = a_expr
    for _ in range(k):
        b = sp.diff(b / w, x, 2)
    b_fn = sp.lambdify((x, xi_s, eps_s), b, "numpy")

    bound = 0.0
    shells = []
    for m in range(1, dual_shells + 1):
        shell = 0.0
        for xi_val in (2.0 * np.pi * m, -2.0 * np.pi * m):
            def absb(t, xv=xi_val):
                with np.errstate(all="ignore"):
                    return np.abs(np.nan_to_num(np.asarray(b_fn(t, xv, eps), dtype=complex)))
            shell += spi.quad(absb, lo, hi, limit=800)[0]
        shells.append(eps ** (2 * k) * shell)
        bound += shells[-1]

    slack = 1e-10 + 1e-12 * (abs(lattice_sum) + abs(integral))
    return {
        "sum": lattice_sum, "integral": integral, "remainder": remainder,
        "bound": bound, "tail_last_shell": shells[-1] if shells else 0.0,
        "sup_grad": sup_grad, "pass": bool(remainder <= bound + slack),
    }


# ---------------------------------------------------------------------------
# Stationary phase in two variables
# ---------------------------------------------------------------------------

def _gl2d(fn, dom, n, block=256):
    (t_lo, t_hi), (s_lo, s_hi) = dom
    nodes, weights = np.polynomial.legendre.leggauss(n)
    tn = 0.5 * (t_hi + t_lo) + 0.5 * (t_hi - t_lo) * nodes
    tw = 0.5 * (t_hi - t_lo) * weights
    sn = 0.5 * (s_hi + s_lo) + 0.5 * (s_hi - s_lo) * nodes
    sw = 0.5 * (s_hi - s_lo) * weights
    total = 0.0 + 0.0j
    for start in range(0, n, block):
        tt = tn[start:start + block][:, None]
        vals = fn(tt, sn[None, :])
        total += np.sum((tw[start:start + block][:, None] * sw[None, :]) * vals)
    return total


def stationary_phase_check(u_fn, phi_expr, eps_list, domain, crit_guess=(0.0, 0.0),
                           vars_=None, nodes_cap=5000):
    """Oscillatory 2-D integral against eps * A * e^{i phi(x*)/eps} u(x*).

    phi_expr is a sympy expression in two variables with one nondegenerate
    critical point inside the domain; u_fn is a vectorised callable. The
    prefactor uses A = 2 pi e^{i pi sigma / 4} / sqrt(|det Hessian|).
    """
    ts = vars_ if vars_ is not None else sorted(phi_expr.free_symbols, key=str)
    if len(ts) != 2:
        raise ValueError("phase must depend on exactly two variables")
    t, s = ts
    phi = sp.lambdify((t, s), phi_expr, "numpy")
    grad = [sp.lambdify((t, s), sp.diff(phi_expr, v), "numpy") for v in (t, s)]
    hess_expr = [[sp.diff(phi_expr, a, b) for b in (t, s)] for a in (t, s)]
    hess = [[sp.lambdify((t, s), e, "numpy") for e in row] for row in hess_expr]

    # Newton for the critical point
    z = np.array(crit_guess, dtype=float)
    for _ in range(60):
        g = np.array([grad[0](*z), grad[1](*z)], dtype=float)
        h = np.array([[hess[0][0](*z), hess[0][1](*z)],
                      [hess[1][0](*z), hess[1][1](*z)]], dtype=float)
        step = np.linalg.solve(h, g)
        z = z - step
        if np.max(np.abs(step)) < 1e-13:
            break
    h = np.array([[hess[0][0](*z), hess[0][1](*z)],
                  [hess[1][0](*z), hess[1][1](*z)]], dtype=float)
    det = float(np.linalg.det(h))
    if abs(det) < 1e-10:
        raise ValueError("degenerate Hessian at the critical point")
    signature = int(np.sum(np.sign(np.linalg.eigvalsh(h))))
    amp = 2.0 * np.pi * np.exp(1j * np.pi * signature / 4.0) / np.sqrt(abs(det))

    (t_lo, t_hi), (s_lo, s_hi) = domain
    gt = np.linspace(t_lo, t_hi, 41)[:, None]
    gs = np.linspace(s_lo, s_hi, 41)[None, :]
    max_grad = max(float(np.max(np.abs(grad[0](gt, gs)))),
                   float(np.max(np.abs(grad[1](gt, gs)))))
    span = max(t_hi - t_lo, s_hi - s_lo)

    rows = []
    for eps in eps_list:
        cycles = span * max_grad / (2.0 * np.pi * eps)
        n = int(min(nodes_cap, max(300, 14 * cycles + 200)))
        integral = _gl2d(lambda a, b: u_fn(a, b) * np.exp(1j * phi(a, b) / eps),
                         domain, n)
        leading = eps * amp * np.exp(1j * phi(*z) / eps) * complex(u_fn(z[0], z[1]))
        rows.append({"eps": eps, "integral": integral, "leading": leading,
                     "abs_err": abs(integral - leading), "nodes": n})
    from .util import fit_loglog_slope
    slope = fit_loglog_slope([r["eps"] for r in rows], [r["abs_err"] for r in rows]) \
        if len(rows) >= 2 else float("nan")
    return {"rows": rows, "critical_point": z.tolist(), "hessian_det": det,
            "signature": signature, "amplitude_constant": amp,
            "remainder_slope": slope}
