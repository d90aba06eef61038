"""Discrete t-quantisation on a lattice box and the symbol calculus.

An operator matrix entry couples lattice points x, y through the torus
quadrature of e^{i(y-x).xi/eps} a(t x + (1-t) y, xi; eps). Entries with
|y - x|/eps beyond the grid's alias limit are zeroed and counted.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Symbol, SymbolTerm, eval_symbol
from .util import fit_loglog_slope, reduce_torus, spectral_norm

__all__ = [
    "OperatorMatrix", "SharpProductResult", "kernel_entry", "build_operator",
    "change_quantization", "sharp_product", "verify_composition",
    "conjugated_symbol_leading",
]


@dataclass
class OperatorMatrix:
    """Dense realisation of the quantised symbol on a lattice box."""
    lattice: object
    eps: float
    t: float
    entries: np.ndarray
    hermitian_defect: float = 0.0
    symbol_name: str = ""
    aliasing_count: int = 0
    torus_m: int = 0

    @property
    def size(self):
        return self.entries.shape[0]

    def trace(self):
        return complex(np.trace(self.entries))


def _alias_limit(grid):
    # entries with any |k_j| >= M/2 alias on an M-node axis
    return (grid.nodes_per_axis - 1) // 2


def kernel_entry(sym, t, x, y, eps, grid):
    """Single kernel value via torus quadrature; aliased pairs give 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = np.rint((y - x) / eps).astype(np.int64)
    if np.any(np.abs(k) > _alias_limit(grid)):
        return 0.0 + 0.0j
    mid = t * x + (1 - t) * y
    vals = eval_symbol(sym, np.broadcast_to(mid, grid.nodes.shape), grid.nodes, eps)
    phase = np.exp(1j * grid.nodes @ k.astype(float))
    return complex(np.sum(phase * vals) / grid.size)


def _k_vectors(kr, dim):
    axes = [np.arange(-kr, kr + 1)] * dim
    return np.array(list(itertools.product(*axes)), dtype=np.int64)


def _phase_matrix(grid, kvecs):
    return np.exp(1j * grid.nodes @ kvecs.T.astype(float))


def _flatten(vecs, offset, width, dim):
    strides = np.array([width ** (dim - 1 - a) for a in range(dim)], dtype=np.int64)
    return (vecs + offset) @ strides


def build_operator(sym, t, lattice, eps, grid):
    """Assemble the dense matrix of the t-quantisation on the box.

    Fast paths: t in {0, 1} (midpoint frozen to a row/column) and t = 1/2
    (midpoint depends only on x + y). General t evaluates one symbol table
    per admissible lattice offset.
    """
    if abs(lattice.spacing - eps) > 1e-12 * max(1.0, eps):
        raise ValueError("lattice spacing and eps disagree")
    d, n = lattice.dim, lattice.n_half
    idx = lattice.indices
    N = lattice.size
    kr = min(_alias_limit(grid), 2 * n)
    kvecs = _k_vectors(kr, d)
    E = _phase_matrix(grid, kvecs) / grid.size  # (M^d, nk)

    pair_i = np.repeat(np.arange(N), N)
    pair_j = np.tile(np.arange(N), N)
    kpair = idx[pair_j] - idx[pair_i]
    ok = np.all(np.abs(kpair) <= kr, axis=1)
    kflat = _flatten(kpair[ok], kr, 2 * kr + 1, d)
    aliasing = int(N * N - ok.sum())

    if t in (0.0, 1.0):
        pts = lattice.points
        base = np.broadcast_to(pts[:, None, :], (N, grid.size, d))
        vals = eval_symbol(sym, base, np.broadcast_to(grid.nodes, (N, grid.size, d)), eps)
        table = vals @ E  # (N, nk)
        rows = pair_i[ok] if t == 1.0 else pair_j[ok]
        flat = table[rows, kflat]
    elif t == 0.5:
        s_vecs = _k_vectors(2 * n, d)  # x+y index sums
        mids = 0.5 * eps * s_vecs.astype(float)
        vals = eval_symbol(sym, np.broadcast_to(mids[:, None, :], (len(s_vecs), grid.size, d)),
                           np.broadcast_to(grid.nodes, (len(s_vecs), grid.size, d)), eps)
        table = vals @ E  # (n_s, nk)
        sflat = _flatten(idx[pair_i[ok]] + idx[pair_j[ok]], 2 * n, 4 * n + 1, d)
        flat = table[sflat, kflat]
    else:
        pts = lattice.points
        table = np.empty((N, len(kvecs)), dtype=complex)
        for col, k in enumerate(kvecs):
            # midpoint t x + (1-t) y = y - t eps k for k = (y - x)/eps
            mid = pts - t * eps * k.astype(float)
            vals = eval_symbol(sym, np.broadcast_to(mid[:, None, :], (N, grid.size, d)),
                               np.broadcast_to(grid.nodes, (N, grid.size, d)), eps)
            table[:, col] = vals @ E[:, col]
        flat = table[pair_j[ok], kflat]

    entries = np.zeros((N, N), dtype=complex)
    entries[pair_i[ok], pair_j[ok]] = flat
    defect = float(np.max(np.abs(entries - entries.conj().T))) if N else 0.0
    return OperatorMatrix(lattice=lattice, eps=eps, t=float(t), entries=entries,
                          hermitian_defect=defect, symbol_name=sym.name,
                          aliasing_count=aliasing, torus_m=grid.nodes_per_axis)


# ---------------------------------------------------------------------------
# Symbol calculus
# ---------------------------------------------------------------------------

def _compositions(total, dim):
    """All multi-indices alpha in N_0^dim with |alpha| = total."""
    if dim == 1:
        return [(total,)]
    out = []
    for head in range(total + 1):
        for rest in _compositions(total - head, dim - 1):
            out.append((head,) + rest)
    return out


def _multifact(alpha):
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


def change_quantization(sym, s, t, order):
    """Symbol of the same operator in t-quantisation, truncated expansion.

    Order-j contribution: (-i)^j (s-t)^j sum_{|alpha|=j} (1/alpha!)
    d^alpha_x d^alpha_xi applied to the source terms; the leading term is
    the source symbol itself. The sign follows from the kernel relation
    (midpoint shift -(s-t) eps k against e^{i k.xi}) and is fixed by the
    operator-equality check, which terminates exactly on x-linear symbols.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    d = sym.dim
    shift = s - t
    new_terms = []
    for n in range(order):
        pieces = []  # (coefficient, callable)
        for j in range(n + 1):
            l = n - j
            if l >= sym.num_terms:
                continue
            if j == 0:
                pieces.append((1.0 + 0.0j, sym.terms[l].fn))
                continue
            if shift == 0:
                continue
            coef_j = ((-1j) ** j) * (shift ** j)
            for alpha in _compositions(j, d):
                fn = sym.terms[l].derivative(alpha, alpha)
                pieces.append((coef_j / _multifact(alpha), fn))
        if not pieces:
            def zero(x, xi):
                return np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]), dtype=complex)
            new_terms.append(SymbolTerm(zero))
            continue

        def term_fn(x, xi, pieces=tuple(pieces)):
            out = None
            for c, fn in pieces:
                v = c * np.asarray(fn(x, xi), dtype=complex)
                out = v if out is None else out + v
            return out

        new_terms.append(SymbolTerm(term_fn))
    real = sym.is_real and (shift == 0 or order == 1)
    return Symbol(d, new_terms, order_function=sym.order_function, is_real=real,
                  name=f"{sym.name}~q{t}", params=sym.params)


@dataclass
class SharpProductResult:
    """Truncated expansion of the composed symbol a #_t b."""
    symbol: Symbol
    order: int
    terms: list = field(default_factory=list)


def _sharp_piece(a_term, b_term, k, t, d):
    """Callables and coefficients of the order-k bidifferential term."""
    pieces = []
    for ka in range(k + 1):
        kb = k - ka
        for alpha in _compositions(ka, d):
            for beta in _compositions(kb, d):
                coef = ((1j ** k) * ((-1.0) ** sum(beta))
                        * (t ** sum(alpha)) * ((1 - t) ** sum(beta))
                        / (_multifact(alpha) * _multifact(beta)))
                fa = a_term.derivative(beta, alpha)   # d^beta_x d^alpha_xi a
                fb = b_term.derivative(alpha, beta)   # d^alpha_x d^beta_xi b
                pieces.append((coef, fa, fb))
    return pieces


def sharp_product(a, b, t, order):
    """Expansion of a #_t b to the requested number of eps powers.

    At t = 1/2 the first correction is (i/2) times the Poisson bracket
    {a, b} = sum_i (d_xi a d_x b - d_x a d_xi b).
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    d = a.dim
    new_terms = []
    for n in range(order):
        pieces = []
        for k in range(n + 1):
            for l in range(n - k + 1):
                m = n - k - l
                if l >= a.num_terms or m >= b.num_terms:
                    continue
                pieces.extend(_sharp_piece(a.terms[l], b.terms[m], k, t, d))

        def term_fn(x, xi, pieces=tuple(pieces)):
            out = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]), dtype=complex)
            for c, fa, fb in pieces:
                out = out + c * np.asarray(fa(x, xi), dtype=complex) \
                    * np.asarray(fb(x, xi), dtype=complex)
            return out

        new_terms.append(SymbolTerm(term_fn))
    sym = Symbol(d, new_terms, is_real=False, name=f"({a.name}#{b.name})",
                 params={})
    return SharpProductResult(symbol=sym, order=order, terms=new_terms)


def verify_composition(a, b, t, halfwidth, eps_list, grid, order=1):
    """Operator-norm error of Op(a)Op(b) - Op(a #_t b) across an eps sweep."""
    from .core import LatticeBox
    sharp = sharp_product(a, b, t, order).symbol
    errors = []
    for eps in eps_list:
        box = LatticeBox(a.dim, eps, halfwidth)
        opa = build_operator(a, t, box, eps, grid).entries
        opb = build_operator(b, t, box, eps, grid).entries
        opc = build_operator(sharp, t, box, eps, grid).entries
        errors.append(spectral_norm(opa @ opb - opc))
    slope = fit_loglog_slope(eps_list, errors) if len(eps_list) >= 2 else float("nan")
    return {"eps": list(eps_list), "errors": errors, "fitted_order": slope}


def conjugated_symbol_leading(q, gradphi, t_val, eta, check_samples=32, tol=1e-8):
    """Leading symbol of e^{i phi/eps} Op(q) e^{-i phi/eps}.

    gradphi(t, x, eta) must differ from eta by a 2*pi-periodic function of
    eta; this is probed by sampling before the shifted symbol is built.
    """
    d = q.dim
    rng = np.random.default_rng(7)
    x = rng.uniform(-2.0, 2.0, size=(check_samples, d))
    eta_s = rng.uniform(-np.pi, np.pi, size=(check_samples, d))
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = 2.0 * np.pi
        g1 = np.asarray(gradphi(t_val, x, eta_s + e), dtype=float)
        g0 = np.asarray(gradphi(t_val, x, eta_s), dtype=float)
        if np.max(np.abs(g1 - g0 - e)) > tol:
            raise ValueError("gradphi - eta is not 2*pi periodic in eta")

    eta_vec = np.atleast_1d(np.asarray(eta, dtype=float))

    def fn(x, xi):
        shift = np.asarray(gradphi(t_val, x, np.broadcast_to(eta_vec, x.shape)), dtype=float)
        return q.terms[0].fn(x, reduce_torus(xi + shift))

    return Symbol(d, [SymbolTerm(fn)], order_function=q.order_function,
                  is_real=q.is_real, name=f"{q.name}~conj", params=q.params)
