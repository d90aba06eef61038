"""Phase-space volumes, Liouville surface measure, the sharp counting
experiment and the smoothed density of states.

Indicator-set volumes use midpoint counting plus an independent
counter-based Monte Carlo estimate; energy-shell measures use a grid
contour extraction weighted by 1/|grad a0| and a central difference of
the volume function as mutually checking routes.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate as spi
from skimage import measure as skmeasure

from .core import Interval, LatticeBox
from .quantize import build_operator
from .spectral import count_eigenvalues, eigendecompose, truncation_convergence
from .util import fit_loglog_slope, philox_uniform

__all__ = [
    "VolumeResult", "WeylReport", "phase_space_volume", "liouville_measure",
    "liouville_curve", "weyl_experiment", "smoothed_dos",
    "dos_vs_liouville_sweep", "phase_space_integral",
]


def _a0_fn(sym):
    term = sym.terms[0]

    def fn(x, xi):
        return np.real(np.asarray(term.fn(x, xi)))

    return fn


def phase_space_integral(fn, dim, x_halfwidth, n_xi=256, epsabs=1e-11,
                         n_x_cells=400):
    """integral over R^d_x x T^d_xi of fn(x, xi).

    d = 1 uses adaptive quadrature in x around a spectrally accurate
    periodic trapezoid in xi; d = 2 falls back to a midpoint product grid.
    """
    if dim == 1:
        xi = (-np.pi + 2.0 * np.pi * np.arange(n_xi) / n_xi).reshape(-1, 1)

        def inner(xv):
            x = np.full((n_xi, 1), xv)
            return (2.0 * np.pi / n_xi) * float(np.sum(fn(x, xi)))

        val, _ = spi.quad(inner, -x_halfwidth, x_halfwidth,
                          epsabs=epsabs, epsrel=1e-10, limit=400)
        return val
    if dim == 2:
        ax = -x_halfwidth + (np.arange(n_x_cells) + 0.5) * (2 * x_halfwidth / n_x_cells)
        axi = -np.pi + (np.arange(n_xi) + 0.5) * (2 * np.pi / n_xi)
        cell = (2 * x_halfwidth / n_x_cells) ** 2 * (2 * np.pi / n_xi) ** 2
        total = 0.0
        X1, X2 = np.meshgrid(ax, ax, indexing="ij")
        for k1 in axi:
            for k2 in axi:
                xi = np.stack([np.full_like(X1, k1), np.full_like(X1, k2)], axis=-1)
                x = np.stack([X1, X2], axis=-1)
                total += float(np.sum(fn(x, xi)))
        return total * cell
    raise NotImplementedError("phase-space quadrature beyond d=2")


class _GridSamples:
    """Midpoint samples of a0 over the phase-space box, kept sorted so that
    any sublevel or window volume is a pair of binary searches."""

    def __init__(self, sym, x_halfwidth, nx=2000, nxi=2000):
        if sym.dim != 1:
            raise NotImplementedError("grid sampling is one-dimensional")
        self.x = -x_halfwidth + (np.arange(nx) + 0.5) * (2 * x_halfwidth / nx)
        self.xi = -np.pi + (np.arange(nxi) + 0.5) * (2 * np.pi / nxi)
        self.dx = 2 * x_halfwidth / nx
        self.dxi = 2 * np.pi / nxi
        fn = _a0_fn(sym)
        self.values = fn(self.x[:, None, None], self.xi[None, :, None])
        self.sorted = np.sort(self.values.reshape(-1))
        self.cell = self.dx * self.dxi

    def vol_window(self, lo, hi):
        n = np.searchsorted(self.sorted, hi, side="right") \
            - np.searchsorted(self.sorted, lo, side="left")
        return float(n) * self.cell

    def vol_below(self, lam):
        return float(np.searchsorted(self.sorted, lam, side="right")) * self.cell


@dataclass
class VolumeResult:
    interval: Interval
    value: float
    mc_value: float
    mc_sigma: float
    refinement_delta: float
    quad: dict = field(default_factory=dict)


def phase_space_volume(sym, iv, x_halfwidth, quad=None):
    """Symplectic volume of {alpha <= a0 <= beta} by dual quadrature.

    Midpoint counting with one step-halving plus a Philox Monte Carlo
    estimate with reported standard error.
    """
    spec = dict(quad or {})
    nx = int(spec.get("x_cells", 2000))
    nxi = int(spec.get("xi_cells", 2000))
    n_mc = int(spec.get("mc_samples", 10_000_000))
    seed = int(spec.get("seed", 20240801))
    if sym.dim != 1:
        return _phase_space_volume_mc_only(sym, iv, x_halfwidth, n_mc, seed)
    coarse = _GridSamples(sym, x_halfwidth, nx, nxi)
    fine = _GridSamples(sym, x_halfwidth, 2 * nx, 2 * nxi)
    v_c = coarse.vol_window(iv.alpha, iv.beta)
    v_f = fine.vol_window(iv.alpha, iv.beta)

    fn = _a0_fn(sym)
    lows = [-x_halfwidth, -np.pi]
    highs = [x_halfwidth, np.pi]
    hits = 0
    for start in range(0, n_mc, 1 << 21):
        m = min(1 << 21, n_mc - start)
        pts = philox_uniform(seed + start // (1 << 21), m, 2, lows, highs)
        vals = fn(pts[:, :1], pts[:, 1:])
        hits += int(np.sum((vals >= iv.alpha) & (vals <= iv.beta)))
    box_vol = (2 * x_halfwidth) * (2 * np.pi)
    p = hits / n_mc
    mc = box_vol * p
    sigma = box_vol * np.sqrt(max(p * (1 - p), 1e-300) / n_mc)
    return VolumeResult(interval=iv, value=v_f, mc_value=mc, mc_sigma=sigma,
                        refinement_delta=abs(v_f - v_c),
                        quad={"x_cells": nx, "xi_cells": nxi, "mc_samples": n_mc,
                              "seed": seed, "x_halfwidth": x_halfwidth})


def _phase_space_volume_mc_only(sym, iv, xw, n_mc, seed):
    d = sym.dim
    fn = _a0_fn(sym)
    lows = [-xw] * d + [-np.pi] * d
    highs = [xw] * d + [np.pi] * d
    hits = 0
    for start in range(0, n_mc, 1 << 21):
        m = min(1 << 21, n_mc - start)
        pts = philox_uniform(seed + start // (1 << 21), m, 2 * d, lows, highs)
        vals = fn(pts[:, :d], pts[:, d:])
        hits += int(np.sum((vals >= iv.alpha) & (vals <= iv.beta)))
    box_vol = (2 * xw) ** d * (2 * np.pi) ** d
    p = hits / n_mc
    sigma = box_vol * np.sqrt(max(p * (1 - p), 1e-300) / n_mc)
    return VolumeResult(interval=iv, value=box_vol * p, mc_value=box_vol * p,
                        mc_sigma=sigma, refinement_delta=float("nan"),
                        quad={"mc_samples": n_mc, "seed": seed})


# ---------------------------------------------------------------------------
# Liouville measure on energy shells
# ---------------------------------------------------------------------------

def _grad_norm_fn(sym):
    gx = sym.term_derivative(0, (1,), (0,))
    gxi = sym.term_derivative(0, (0,), (1,))

    def fn(x, xi):
        ax = np.real(np.asarray(gx(x, xi)))
        ak = np.real(np.asarray(gxi(x, xi)))
        return np.sqrt(ax ** 2 + ak ** 2)

    return fn


def _shell_contour_integral(samples, sym, lam):
    """sum over contour segments of ds / |grad a0| at the segment midpoint."""
    gn = _grad_norm_fn(sym)
    contours = skmeasure.find_contours(samples.values, lam)
    total = 0.0
    for c in contours:
        xs = samples.x[0] + c[:, 0] * samples.dx
        ks = samples.xi[0] + c[:, 1] * samples.dxi
        mx = 0.5 * (xs[1:] + xs[:-1])
        mk = 0.5 * (ks[1:] + ks[:-1])
        ds = np.hypot(np.diff(xs), np.diff(ks))
        g = gn(mx[:, None], mk[:, None])
        total += float(np.sum(ds / g))
    return total


def liouville_measure(sym, lam, x_halfwidth, h=0.05, quad=None,
                      grad_floor=0.1):
    """Energy-shell measure by central volume difference and by shell
    quadrature with 1/|grad a0| weight; both values are reported.

    Refuses near-critical levels: the minimum gradient norm found on the
    numerically located shell must exceed `grad_floor`.
    """
    spec = dict(quad or {})
    nx = int(spec.get("x_cells", 2000))
    nxi = int(spec.get("xi_cells", 2000))
    samples = spec.get("_samples") or _GridSamples(sym, x_halfwidth, nx, nxi)
    band = np.abs(samples.values - lam) < max(h, 4.0 * samples.cell ** 0.5)
    if np.any(band):
        gn = _grad_norm_fn(sym)
        gx, gk = np.meshgrid(samples.x, samples.xi, indexing="ij")
        gmin = float(np.min(gn(gx[band][:, None], gk[band][:, None])))
    else:
        gmin = float("inf")
    if gmin < grad_floor:
        raise ValueError(f"level {lam} is near-critical (min |grad| = {gmin:.3f})")
    central = (samples.vol_below(lam + h) - samples.vol_below(lam - h)) / (2.0 * h)
    shell = _shell_contour_integral(samples, sym, lam)
    return {"central_diff": central, "shell_quad": shell, "min_grad": gmin}


def liouville_curve(sym, lams, x_halfwidth, quad=None):
    """Shell-quadrature Liouville values on a grid of levels."""
    spec = dict(quad or {})
    nx = int(spec.get("x_cells", 1500))
    nxi = int(spec.get("xi_cells", 1500))
    samples = _GridSamples(sym, x_halfwidth, nx, nxi)
    return np.array([_shell_contour_integral(samples, sym, l) for l in lams])


# ---------------------------------------------------------------------------
# The counting experiment
# ---------------------------------------------------------------------------

@dataclass
class WeylReport:
    symbol: str
    interval: Interval
    rows: list
    slope: float
    volume: VolumeResult
    sandwich_ok: bool
    certificate: object = None


def weyl_experiment(sym, iv, eps_list, config=None):
    """Scaled eigenvalue counts against the symplectic volume.

    Per eps the box is validated by doubling, the endpoints are jittered
    off near-ties, and the delta-shrunk/grown volume sandwich is checked
    alongside the sharp remainder fit.
    """
    from .hypotheses import certify
    cfg = dict(config or {})
    L = float(cfg.get("halfwidth", 3.0))
    m_nodes = int(cfg.get("torus_m", 64))
    delta_factor = float(cfg.get("sandwich_delta_factor", 3.0))
    validate_boxes = bool(cfg.get("validate_truncation", True))
    from .core import TorusGrid
    grid = TorusGrid(sym.dim, m_nodes)

    cert = certify(sym, iv, {"halfwidth": L}, cfg.get("certify", {}))
    if not cert.overall and not cfg.get("override_hypotheses", False):
        raise ValueError("hypothesis certificate failed: "
                         + ", ".join(k for k, v in cert.checks.items() if not v["pass"]))

    vol = phase_space_volume(sym, iv, L, cfg.get("volume_quad"))
    samples = _GridSamples(sym, L,
                           int(cfg.get("sandwich_cells", 2000)),
                           int(cfg.get("sandwich_cells", 2000)))

    rows = []
    sandwich_ok = True
    for eps in sorted(eps_list, reverse=True):
        if validate_boxes:
            tc = truncation_convergence(sym, iv, eps, [L, 2.0 * L], grid)
            if not tc["stable"]:
                raise ValueError(f"box halfwidth {L} not converged at eps={eps}")
        box = LatticeBox(sym.dim, eps, L)
        spec = eigendecompose(build_operator(sym, 0.5, box, eps, grid))
        lo, hi, jitter = iv.alpha, iv.beta, False
        cr = count_eigenvalues(spec, Interval(lo, hi))
        if cr.boundary_gap < 1e-9:
            lo, hi, jitter = iv.alpha - 1e-6, iv.beta + 1e-6, True
            cr = count_eigenvalues(spec, Interval(lo, hi))
        scaled = (2.0 * np.pi * eps) ** sym.dim * cr.count
        delta = delta_factor * eps
        v_lo = samples.vol_window(iv.alpha + delta, iv.beta - delta)
        v_hi = samples.vol_window(iv.alpha - delta, iv.beta + delta)
        ok = v_lo <= scaled <= v_hi
        sandwich_ok = sandwich_ok and ok
        rows.append({
            "eps": eps, "count": cr.count, "scaled_count": scaled,
            "volume": vol.value, "remainder": scaled - vol.value,
            "boundary_gap": cr.boundary_gap, "jittered": jitter,
            "sandwich_low": v_lo, "sandwich_high": v_hi, "sandwich_ok": ok,
        })
    slope = fit_loglog_slope([r["eps"] for r in rows],
                             [abs(r["remainder"]) for r in rows]) \
        if len(rows) >= 2 else float("nan")
    return WeylReport(symbol=sym.name, interval=iv, rows=rows, slope=slope,
                      volume=vol, sandwich_ok=sandwich_ok, certificate=cert)


# ---------------------------------------------------------------------------
# Smoothed density of states
# ---------------------------------------------------------------------------

def smoothed_dos(spec, f, psi, lambda_grid, eps):
    """Mollified spectral density from the eigenvalue sum.

    I1(lambda) = (eps sqrt(2 pi))^-1 sum_j f(lambda_j) F_eps psi(lambda -
    lambda_j), restricted to eigenvalues in the support of f.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    ev = spec.eigenvalues
    sup = getattr(f, "support", None)
    mask = (ev >= sup[0]) & (ev <= sup[1]) if sup else np.abs(f(ev)) > 0
    ev = ev[mask]
    if len(ev) == 0:
        return np.zeros_like(lam)
    weights = np.asarray(f(ev), dtype=float)
    vals = psi.fourier1((lam[:, None] - ev[None, :]) / eps)
    return (vals @ weights) / (eps * np.sqrt(2.0 * np.pi))


def dos_vs_liouville_sweep(sym, f, psi, lambda_grid, eps_list, config=None):
    """Max deviation of the scaled smoothed DOS from f times the Liouville
    curve, per eps, with the fitted decay slope."""
    cfg = dict(config or {})
    L = float(cfg.get("halfwidth", 3.0))
    m_nodes = int(cfg.get("torus_m", 64))
    from .core import TorusGrid
    grid = TorusGrid(sym.dim, m_nodes)
    lam = np.asarray(lambda_grid, dtype=float)
    curve = liouville_curve(sym, lam, L, cfg.get("liouville_quad"))
    target = np.asarray(f(lam), dtype=float) * curve

    floor = 1e-12 * max(1.0, float(np.max(np.abs(target))))
    rows = []
    for eps in eps_list:
        box = LatticeBox(sym.dim, eps, L)
        spec = eigendecompose(build_operator(sym, 0.5, box, eps, grid))
        i1 = smoothed_dos(spec, f, psi, lam, eps)
        scaled = (2.0 * np.pi * eps) ** sym.dim * i1
        rel = np.abs(scaled - target) / np.maximum(np.abs(target), floor)
        rows.append({"eps": eps, "max_deviation": float(np.max(rel)),
                     "i1_scaled": scaled})
    slope = fit_loglog_slope([r["eps"] for r in rows],
                             [r["max_deviation"] for r in rows]) \
        if len(rows) >= 2 else float("nan")
    return {"rows": rows, "slope": slope, "lambda_grid": lam,
            "liouville_curve": curve, "target": target}
