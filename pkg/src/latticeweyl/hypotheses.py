"""Single orchestration surface for the symbol/window/box preconditions.

Every check here is a sampled proxy of an analytic condition; thresholds
are configuration with documented defaults, and the certificate records
values so a run can be audited or reproduced.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import check_elliptic_shifted, check_ess_bound, check_periodicity

__all__ = ["HypothesisCertificate", "certify"]

DEFAULTS = {
    "seed": 1234,
    "periodicity_samples": 64,
    "periodicity_tol": 1e-9,
    "realness_samples": 128,
    "realness_tol": 1e-12,
    "ellipticity_threshold": 0.05,
    "eps_probe": (0.1, 0.05),
    "interval_margin": 0.25,
    "ess_inner_fraction": 0.7,
    "grad_floor": 0.1,
    "shell_band": 0.05,
    "truncation_margin": 0.5,
    "grid": {"x_samples": 81, "xi_samples": 61},
}


@dataclass
class HypothesisCertificate:
    symbol: str
    interval: tuple
    checks: dict
    overall: bool
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "symbol": self.symbol,
            "interval": list(self.interval),
            "checks": {k: dict(v) for k, v in self.checks.items()},
            "overall": self.overall,
            "config": self.config,
        }


def _grad_norm(sym, x, xi):
    out = np.zeros(x.shape[0])
    for axis in range(sym.dim):
        ex = tuple(1 if a == axis else 0 for a in range(sym.dim))
        zero = (0,) * sym.dim
        gx = np.real(np.asarray(sym.term_derivative(0, ex, zero)(x, xi)))
        gk = np.real(np.asarray(sym.term_derivative(0, zero, ex)(x, xi)))
        out = out + gx ** 2 + gk ** 2
    return np.sqrt(out)


def certify(sym, iv, box, config=None):
    """Run all hypothesis proxies for (symbol, window, box); never raises
    on a failing check, only records it."""
    cfg = dict(DEFAULTS)
    cfg.update(config or {})
    L = float(box["halfwidth"]) if isinstance(box, dict) else float(box.halfwidth)
    rng = np.random.default_rng(cfg["seed"])
    checks = {}

    rep = check_periodicity(sym, cfg["periodicity_samples"],
                            cfg["periodicity_tol"], rng=rng, box=L)
    checks["periodicity"] = {"value": rep["max_violation"],
                             "threshold": cfg["periodicity_tol"],
                             "pass": rep["pass"]}

    x = rng.uniform(-L, L, size=(cfg["realness_samples"], sym.dim))
    k = rng.uniform(-np.pi, np.pi, size=(cfg["realness_samples"], sym.dim))
    worst_im = 0.0
    for j in range(sym.num_terms):
        vals = np.asarray(sym.term_value(j, x, k))
        worst_im = max(worst_im, float(np.max(np.abs(np.imag(vals)))))
    checks["realness"] = {"value": worst_im, "threshold": cfg["realness_tol"],
                          "pass": bool(worst_im <= cfg["realness_tol"])}

    grid = dict(cfg["grid"])
    grid["x_box"] = L
    ell = check_elliptic_shifted(sym, grid, cfg["eps_probe"])
    checks["ellipticity_shifted"] = {
        "value": ell["inf_ratio"], "threshold": cfg["ellipticity_threshold"],
        "pass": bool(ell["inf_ratio"] >= cfg["ellipticity_threshold"])}

    margin = cfg["interval_margin"]
    from .core import Interval
    j_open = Interval(iv.alpha - margin, iv.beta + margin)
    radius = cfg["ess_inner_fraction"] * L
    ess = check_ess_bound(sym, j_open, radius,
                          {"x_outer": L, "x_samples": grid["x_samples"],
                           "xi_samples": grid["xi_samples"]})
    checks["ess_bound"] = {"value": ess["inf_outside"],
                           "threshold": j_open.beta, "pass": ess["pass"]}

    # endpoint non-criticality on the sampled shells
    nxs, nks = 201, 161
    ax = np.linspace(-L, L, nxs)
    ak = np.linspace(-np.pi, np.pi, nks, endpoint=False)
    X, K = np.meshgrid(ax, ak, indexing="ij")
    pts_x = np.stack([X.reshape(-1)] * sym.dim, axis=-1) if sym.dim > 1 \
        else X.reshape(-1, 1)
    pts_k = np.stack([K.reshape(-1)] * sym.dim, axis=-1) if sym.dim > 1 \
        else K.reshape(-1, 1)
    a0 = np.real(np.asarray(sym.term_value(0, pts_x, pts_k)))
    gmin = np.inf
    for lam in (iv.alpha, iv.beta):
        band = np.abs(a0 - lam) < cfg["shell_band"]
        if np.any(band):
            gmin = min(gmin, float(np.min(_grad_norm(sym, pts_x[band], pts_k[band]))))
    checks["noncritical_endpoints"] = {
        "value": gmin, "threshold": cfg["grad_floor"],
        "pass": bool(gmin >= cfg["grad_floor"])}

    tm = cfg["truncation_margin"]
    rim = np.abs(pts_x).max(axis=-1) >= L - tm
    rim_min = float(np.min(a0[rim])) if np.any(rim) else float("inf")
    checks["truncation_margin"] = {
        "value": rim_min, "threshold": iv.beta + tm,
        "pass": bool(rim_min > iv.beta + tm)}

    overall = all(c["pass"] for c in checks.values())
    return HypothesisCertificate(symbol=sym.name, interval=(iv.alpha, iv.beta),
                                 checks=checks, overall=overall, config=cfg)
