"""Eigendecomposition, counting, traces and exact functional calculus.

Everything here treats the truncated box matrix as the operator; the
truncation is validated separately by `truncation_convergence`.
"""

from dataclasses import dataclass

import numpy as np

from .core import Interval, LatticeBox
from .quantize import build_operator
from .util import fit_loglog_slope

__all__ = [
    "SpectralDecomposition", "CountResult", "eigendecompose",
    "count_eigenvalues", "trace_identity_check", "apply_function_exact",
    "trace_f_comparison", "propagator", "cluster_count_sweep",
    "truncation_convergence",
]


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: str
    residual: float
    unitarity_defect: float
    hermitian_defect: float
    matrix: np.ndarray

    @property
    def size(self):
        return len(self.eigenvalues)


@dataclass
class CountResult:
    interval: Interval
    eps: float
    count: int
    boundary_gap: float


def eigendecompose(op, defect_tol=1e-8):
    """Full Hermitian eigendecomposition of the symmetrised matrix.

    The quadrature can leave a tiny non-Hermitian defect; the matrix is
    symmetrised before solving and the defect is kept on record. A defect
    beyond `defect_tol` (relative to the largest entry) aborts.
    """
    a = op.entries
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if op.hermitian_defect > defect_tol * scale:
        raise ValueError(
            f"hermitian defect {op.hermitian_defect:.3e} exceeds tolerance")
    h = 0.5 * (a + a.conj().T)
    evals, evecs = np.linalg.eigh(h)
    resid = float(np.max(np.linalg.norm(h @ evecs - evecs * evals, axis=0))) if a.size else 0.0
    unit = float(np.max(np.abs(evecs.conj().T @ evecs - np.eye(len(evals))))) if a.size else 0.0
    return SpectralDecomposition(
        eigenvalues=evals, eigenvectors=evecs,
        source=f"{op.symbol_name}@eps={op.eps}", residual=resid,
        unitarity_defect=unit, hermitian_defect=op.hermitian_defect, matrix=h)


def count_eigenvalues(spec, iv):
    """Closed-interval count with the distance to the endpoints on record."""
    lam = spec.eigenvalues
    inside = (lam >= iv.alpha) & (lam <= iv.beta)
    if len(lam):
        gap = float(np.min(np.minimum(np.abs(lam - iv.alpha), np.abs(lam - iv.beta))))
    else:
        gap = np.inf
    eps = float(spec.source.split("eps=")[-1]) if "eps=" in spec.source else float("nan")
    return CountResult(interval=iv, eps=eps, count=int(inside.sum()), boundary_gap=gap)


def trace_identity_check(sym, t, lattice, eps, grid):
    """Matrix trace against the phase-space sum (2pi)^-d sum_x int a dxi.

    Both sides use the same torus quadrature, so for any symbol the match
    is limited only by round-off.
    """
    op = build_operator(sym, t, lattice, eps, grid)
    lhs = op.trace()
    pts = lattice.points
    vals = np.asarray(
        sym(np.broadcast_to(pts[:, None, :], (lattice.size, grid.size, lattice.dim)),
            np.broadcast_to(grid.nodes, (lattice.size, grid.size, lattice.dim)), eps))
    rhs = complex(grid.weight * vals.sum() / (2.0 * np.pi) ** lattice.dim)
    return {"lhs": lhs, "rhs": rhs, "abs_err": abs(lhs - rhs)}


def apply_function_exact(spec, f):
    """Spectral-theorem evaluation sum_j f(lambda_j) v_j v_j*."""
    fl = np.asarray(f(spec.eigenvalues), dtype=complex)
    return (spec.eigenvectors * fl) @ spec.eigenvectors.conj().T


def propagator(spec, t, eps):
    """Exact unitary e^{i t P / eps} from the decomposition."""
    ph = np.exp(1j * t * spec.eigenvalues / eps)
    return (spec.eigenvectors * ph) @ spec.eigenvectors.conj().T


def trace_f_comparison(sym, f, eps_list, halfwidth, grid, f_prime=None,
                       x_quad_halfwidth=None):
    """Semiclassical trace expansion of f(P) against phase-space integrals.

    Per eps: remainder = (2 pi eps)^d tr f(P) - int f(a0) - eps int f'(a0) a1.
    The fitted log-log slope of the remainder is the quantity of interest.
    """
    from .weyl import phase_space_integral
    d = sym.dim
    xw = x_quad_halfwidth or halfwidth
    leading = phase_space_integral(
        lambda x, xi: np.real(f(np.real(sym.term_value(0, x, xi)))), d, xw)
    correction = 0.0
    if sym.num_terms > 1:
        if f_prime is None:
            f_prime = getattr(f, "derivative", lambda k: None)(1)
        if f_prime is None:
            raise ValueError("need f' to form the first-order correction")
        correction = phase_space_integral(
            lambda x, xi: np.real(f_prime(np.real(sym.term_value(0, x, xi))))
            * np.real(np.asarray(sym.term_value(1, x, xi))), d, xw)

    rows = []
    for eps in eps_list:
        box = LatticeBox(d, eps, halfwidth)
        spec = eigendecompose(build_operator(sym, 0.5, box, eps, grid))
        tr = float(np.sum(np.real(f(spec.eigenvalues))))
        scaled = (2.0 * np.pi * eps) ** d * tr
        rows.append({
            "eps": eps, "trace": tr, "leading": leading / (2.0 * np.pi * eps) ** d,
            "correction": eps * correction / (2.0 * np.pi * eps) ** d,
            "remainder": scaled - leading - eps * correction,
        })
    slope = fit_loglog_slope(eps_list, [abs(r["remainder"]) for r in rows]) \
        if len(eps_list) >= 2 else float("nan")
    return {"rows": rows, "leading_integral": leading,
            "correction_integral": correction, "slope": slope}


def cluster_count_sweep(sym, lambda0, eps_list, window_width_factor,
                        halfwidth, grid):
    """Eigenvalue counts in the shrinking window lambda0 +- w*eps/2."""
    counts = []
    for eps in eps_list:
        box = LatticeBox(sym.dim, eps, halfwidth)
        spec = eigendecompose(build_operator(sym, 0.5, box, eps, grid))
        half = 0.5 * window_width_factor * eps
        lo, hi = lambda0 - half, lambda0 + half
        counts.append(int(np.sum((spec.eigenvalues >= lo) & (spec.eigenvalues <= hi))))
    return {"eps": list(eps_list), "counts": counts,
            "max_count": max(counts) if counts else 0}


def truncation_convergence(sym, iv, eps, halfwidth_list, grid):
    """Counts in the window for growing boxes; the top two must agree."""
    counts = []
    for L in halfwidth_list:
        box = LatticeBox(sym.dim, eps, L)
        spec = eigendecompose(build_operator(sym, 0.5, box, eps, grid))
        counts.append(count_eigenvalues(spec, iv).count)
    stable = len(counts) >= 2 and counts[-1] == counts[-2]
    return {"halfwidths": list(halfwidth_list), "counts": counts, "stable": bool(stable)}
