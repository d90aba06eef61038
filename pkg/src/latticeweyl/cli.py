"""Experiment front-end: config parsing, subcommands, CSV/JSON emission.

One YAML config file per run; unknown keys are rejected and every default
that influenced the run is echoed into the JSON sidecar, so outputs are
self-describing and byte-reproducible for a fixed config and seed.

Exit codes: 0 success, 2 config schema error, 3 hypothesis failure
without override, 4 numerical abort.
"""

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np
import yaml

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from . import __version__
from .core import Interval, LatticeBox, TorusGrid, builtin_symbol
from .dynamics import CausticError, FlowError, Hamiltonian, \
    check_phase_periodicity, parametrix_error_sweep, solve_hamilton_jacobi
from .hypotheses import certify
from .quantize import build_operator, change_quantization, verify_composition
from .semiclassics import BumpFunction, SmoothingKernel, build_aae, \
    bump_expr, hs_apply, poisson_compare, stationary_phase_check
from .spectral import cluster_count_sweep, count_eigenvalues, eigendecompose, \
    trace_f_comparison, trace_identity_check
from .util import fit_loglog_slope, spectral_norm
from .weyl import dos_vs_liouville_sweep, weyl_experiment

SCHEMA_VERSION = 1

SUBCOMMANDS = ("certify", "quantize-dump", "spectrum", "trace-check",
               "trace-f", "weyl", "dos", "hj", "parametrix", "poisson",
               "statphase", "hs-check", "calculus-check")

_PROPS = {
    "symbol": {
        "type": "object", "additionalProperties": False,
        "properties": {"name": {"type": "string"},
                       "params": {"type": "object"}},
        "required": ["name"],
    },
    "interval": {
        "type": "object", "additionalProperties": False,
        "properties": {"alpha": {"type": "number"}, "beta": {"type": "number"}},
        "required": ["alpha", "beta"],
    },
    "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1},
    "lattice": {
        "type": "object", "additionalProperties": False,
        "properties": {"halfwidth": {"type": "number", "exclusiveMinimum": 0}},
    },
    "torus_m": {"type": "integer", "minimum": 2},
    "t": {"type": "number", "minimum": 0, "maximum": 1},
    "seed": {"type": "integer"},
    "override_hypotheses": {"type": "boolean"},
    "output": {
        "type": "object", "additionalProperties": False,
        "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
    },
    "bump": {
        "type": "object", "additionalProperties": False,
        "properties": {"center": {"type": "number"},
                       "halfwidth": {"type": "number", "exclusiveMinimum": 0},
                       "plateau": {"type": "number", "minimum": 0,
                                   "exclusiveMaximum": 1}},
    },
    "kernel": {
        "type": "object", "additionalProperties": False,
        "properties": {"support_halfwidth": {"type": "number",
                                             "exclusiveMinimum": 0},
                       "plateau": {"type": "number", "minimum": 0,
                                   "exclusiveMaximum": 1}},
    },
    "lambda_grid": {
        "type": "object", "additionalProperties": False,
        "properties": {"lo": {"type": "number"}, "hi": {"type": "number"},
                       "n": {"type": "integer", "minimum": 2}},
        "required": ["lo", "hi"],
    },
    "quadrature": {
        "type": "object", "additionalProperties": False,
        "properties": {"x_cells": {"type": "integer", "minimum": 8},
                       "xi_cells": {"type": "integer", "minimum": 8},
                       "mc_samples": {"type": "integer", "minimum": 1000},
                       "seed": {"type": "integer"}},
    },
    "horizon": {"type": "number", "exclusiveMinimum": 0},
    "t_list": {"type": "array", "items": {"type": "number"}},
    "symbol_mode": {"enum": ["exact", "expansion"]},
    "poisson_k": {"type": "integer", "minimum": 1},
    "hs_dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    "aae_order": {"type": "integer", "minimum": 1},
    "calculus_order": {"type": "integer", "minimum": 1},
    "lambda0": {"type": "number"},
    "window_width_factor": {"type": "number", "exclusiveMinimum": 0},
}

_BASE_KEYS = ("symbol", "interval", "eps", "lattice", "torus_m", "seed",
              "override_hypotheses", "output")

_SUB_KEYS = {
    "certify": _BASE_KEYS,
    "quantize-dump": _BASE_KEYS + ("t",),
    "spectrum": _BASE_KEYS + ("t",),
    "trace-check": _BASE_KEYS + ("t",),
    "trace-f": _BASE_KEYS + ("bump",),
    "weyl": _BASE_KEYS + ("quadrature", "lambda0", "window_width_factor"),
    "dos": _BASE_KEYS + ("bump", "kernel", "lambda_grid"),
    "hj": _BASE_KEYS + ("horizon",),
    "parametrix": _BASE_KEYS + ("bump", "t_list", "symbol_mode"),
    "poisson": ("eps", "seed", "output", "poisson_k"),
    "statphase": ("eps", "seed", "output"),
    "hs-check": ("seed", "output", "hs_dims", "aae_order", "bump"),
    "calculus-check": _BASE_KEYS + ("calculus_order",),
}

DEFAULTS = {
    "symbol": {"name": "lattice_laplacian_plus_quadratic",
               "params": {"c": 1.0, "d": 1}},
    "interval": {"alpha": 0.5, "beta": 2.5},
    "eps": [0.1, 0.05, 0.025],
    "lattice": {"halfwidth": 3.0},
    "torus_m": 64,
    "t": 0.5,
    "seed": 1234,
    "override_hypotheses": False,
    "output": {"dir": ".", "prefix": "run"},
    "bump": {"center": 1.5, "halfwidth": 1.0, "plateau": 0.5},
    "kernel": {"support_halfwidth": 0.45, "plateau": 0.3},
    "lambda_grid": {"lo": 1.2, "hi": 1.8, "n": 41},
    "quadrature": {"x_cells": 2000, "xi_cells": 2000,
                   "mc_samples": 1_000_000, "seed": 20240801},
    "horizon": 0.1,
    "t_list": [0.0, 0.025, 0.05, -0.025, -0.05],
    "symbol_mode": "expansion",
    "poisson_k": 1,
    "hs_dims": [2, 10, 100],
    "aae_order": 5,
    "calculus_order": 2,
    "lambda0": 1.5,
    "window_width_factor": 1.0,
}


class ConfigError(ValueError):
    pass


_UNION_SCHEMA = {"type": "object", "additionalProperties": False,
                 "properties": _PROPS}


def load_config(sub, path):
    """Parse, validate, and default-fill the config for one subcommand.

    Validation runs against the union of known keys, so one config file can
    drive several subcommands; each subcommand consumes (and echoes) only
    the keys it uses. Unknown keys are rejected everywhere.
    """
    if path is None:
        raw = {}
    else:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    if jsonschema is not None:
        try:
            jsonschema.validate(raw, _UNION_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(str(exc.message)) from exc
    else:  # minimal fallback: reject unknown top-level keys
        unknown = set(raw) - set(_PROPS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = {k: copy.deepcopy(DEFAULTS[k]) for k in _SUB_KEYS[sub]}
    for k, v in raw.items():
        if k not in cfg:
            continue
        if isinstance(v, dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    return cfg


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, complex):
        return repr(v)
    return str(v)


def write_outputs(cfg, sub, rows, header, summary, certificate=None):
    out = cfg.get("output", DEFAULTS["output"])
    os.makedirs(out["dir"], exist_ok=True)
    base = os.path.join(out["dir"], f"{out['prefix']}_{sub.replace('-', '_')}")
    with open(base + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(k, "")) for k in header])
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "subcommand": sub,
        "config": cfg,
        "summary": summary,
    }
    if certificate is not None:
        sidecar["certificate"] = certificate.to_dict()
    with open(base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return base


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serialisable: {type(v)}")


def _build(cfg):
    sym = builtin_symbol(cfg["symbol"]["name"], cfg["symbol"].get("params"))
    iv = Interval(cfg["interval"]["alpha"], cfg["interval"]["beta"])
    grid = TorusGrid(sym.dim, cfg["torus_m"])
    return sym, iv, grid


def _certified(cfg, sym, iv):
    cert = certify(sym, iv, {"halfwidth": cfg["lattice"]["halfwidth"]},
                   {"seed": cfg["seed"]})
    if not cert.overall and not cfg["override_hypotheses"]:
        failing = [k for k, v in cert.checks.items() if not v["pass"]]
        raise HypothesisFailure(f"failed checks: {', '.join(failing)}", cert)
    return cert


class HypothesisFailure(RuntimeError):
    def __init__(self, msg, cert):
        super().__init__(msg)
        self.certificate = cert


def _bump(cfg):
    b = cfg["bump"]
    return BumpFunction(b["center"], b["halfwidth"], b["plateau"])


# ---------------------------------------------------------------------------
# Subcommand handlers: each returns (rows, header, summary, certificate)
# ---------------------------------------------------------------------------

def run_certify(cfg):
    sym, iv, _ = _build(cfg)
    cert = certify(sym, iv, {"halfwidth": cfg["lattice"]["halfwidth"]},
                   {"seed": cfg["seed"]})
    rows = [{"check": k, **v} for k, v in cert.checks.items()]
    if not cert.overall and not cfg["override_hypotheses"]:
        failing = [k for k, v in cert.checks.items() if not v["pass"]]
        raise HypothesisFailure(f"failed checks: {', '.join(failing)}", cert)
    return rows, ["check", "value", "threshold", "pass"], \
        {"overall": cert.overall}, cert


def run_quantize_dump(cfg):
    sym, iv, grid = _build(cfg)
    cert = _certified(cfg, sym, iv)
    eps = cfg["eps"][0]
    box = LatticeBox(sym.dim, eps, cfg["lattice"]["halfwidth"])
    op = build_operator(sym, cfg["t"], box, eps, grid)
    rows = []
    nz = np.argwhere(np.abs(op.entries) > 1e-15)
    for i, j in nz:
        rows.append({"i": int(i), "j": int(j),
                     "re": op.entries[i, j].real, "im": op.entries[i, j].imag})
    summary = {"eps": eps, "size": op.size, "hermitian_defect": op.hermitian_defect,
               "aliasing_count": op.aliasing_count, "nonzeros": len(rows)}
    return rows, ["i", "j", "re", "im"], summary, cert


def run_spectrum(cfg):
    sym, iv, grid = _build(cfg)
    cert = _certified(cfg, sym, iv)
    rows = []
    counts = {}
    for eps in cfg["eps"]:
        box = LatticeBox(sym.dim, eps, cfg["lattice"]["halfwidth"])
        spec = eigendecompose(build_operator(sym, cfg["t"], box, eps, grid))
        counts[str(eps)] = count_eigenvalues(spec, iv).count
        for j, lam in enumerate(spec.eigenvalues):
            rows.append({"eps": eps, "index": j, "eigenvalue": lam})
    return rows, ["eps", "index", "eigenvalue"], {"counts_in_interval": counts}, cert


def _trace_fixtures(dim):
    # band-limited in xi, rapidly decaying in x, nonzero traces
    names = [("gaussian_window_trig", {"trig": "one", "sigma": 0.8, "d": dim}),
             ("gaussian_window_trig", {"trig": "one", "sigma": 1.2, "d": dim}),
             ("gaussian_window_trig", {"trig": "two_plus_cos", "sigma": 0.9, "d": dim}),
             ("gaussian_window_trig", {"trig": "nn_laplacian", "sigma": 0.7, "d": dim}),
             ("gaussian_window_trig", {"trig": "nn_laplacian", "sigma": 1.0, "d": dim})]
    return [(f"{n}:{p['trig']}:{p['sigma']}", builtin_symbol(n, p))
            for n, p in names]


def run_trace_check(cfg):
    sym, iv, grid = _build(cfg)
    eps = cfg["eps"][0]
    box = LatticeBox(sym.dim, eps, cfg["lattice"]["halfwidth"])
    rows = []
    worst = 0.0
    for label, fix in _trace_fixtures(sym.dim):
        rep = trace_identity_check(fix, cfg["t"], box, eps, grid)
        rel = rep["abs_err"] / max(1e-300, abs(rep["lhs"]))
        worst = max(worst, rep["abs_err"])
        rows.append({"fixture": label, "lhs_re": rep["lhs"].real,
                     "rhs_re": rep["rhs"].real, "abs_err": rep["abs_err"],
                     "rel_err": rel})
    return rows, ["fixture", "lhs_re", "rhs_re", "abs_err", "rel_err"], \
        {"worst_abs_err": worst, "eps": eps}, None


def run_trace_f(cfg):
    sym, iv, grid = _build(cfg)
    cert = _certified(cfg, sym, iv)
    f = _bump(cfg)
    rep = trace_f_comparison(sym, f, cfg["eps"], cfg["lattice"]["halfwidth"], grid)
    rows = rep["rows"]
    summary = {"slope": rep["slope"], "leading_integral": rep["leading_integral"],
               "correction_integral": rep["correction_integral"]}
    return rows, ["eps", "trace", "leading", "correction", "remainder"], \
        summary, cert


def run_weyl(cfg):
    sym, iv, grid = _build(cfg)
    rep = weyl_experiment(sym, iv, cfg["eps"], {
        "halfwidth": cfg["lattice"]["halfwidth"], "torus_m": cfg["torus_m"],
        "volume_quad": cfg["quadrature"],
        "override_hypotheses": cfg["override_hypotheses"],
        "certify": {"seed": cfg["seed"]}})
    cluster = cluster_count_sweep(sym, cfg["lambda0"], cfg["eps"],
                                  cfg["window_width_factor"],
                                  cfg["lattice"]["halfwidth"], grid)
    header = ["eps", "count", "scaled_count", "volume", "remainder",
              "boundary_gap", "jittered", "sandwich_low", "sandwich_high",
              "sandwich_ok"]
    summary = {"slope": rep.slope, "volume": rep.volume.value,
               "volume_mc": rep.volume.mc_value, "volume_mc_sigma": rep.volume.mc_sigma,
               "sandwich_ok": rep.sandwich_ok,
               "cluster_counts": dict(zip(map(str, cluster["eps"]),
                                          cluster["counts"]))}
    return rep.rows, header, summary, rep.certificate


def run_dos(cfg):
    sym, iv, grid = _build(cfg)
    cert = _certified(cfg, sym, iv)
    f = _bump(cfg)
    k = cfg["kernel"]
    psi = SmoothingKernel(k["support_halfwidth"], k["plateau"])
    lg = cfg["lambda_grid"]
    lam = np.linspace(lg["lo"], lg["hi"], lg.get("n", 41))
    rep = dos_vs_liouville_sweep(sym, f, psi, lam, cfg["eps"], {
        "halfwidth": cfg["lattice"]["halfwidth"], "torus_m": cfg["torus_m"]})
    rows = []
    for r in rep["rows"]:
        for i, l in enumerate(lam):
            rows.append({"eps": r["eps"], "lambda": l,
                         "i1_scaled": r["i1_scaled"][i],
                         "target": rep["target"][i]})
    summary = {"slope": rep["slope"],
               "max_deviation": {str(r["eps"]): r["max_deviation"]
                                 for r in rep["rows"]}}
    return rows, ["eps", "lambda", "i1_scaled", "target"], summary, cert


def run_hj(cfg):
    sym, iv, grid = _build(cfg)
    cert = _certified(cfg, sym, iv)
    h = Hamiltonian.from_symbol(sym)
    L = cfg["lattice"]["halfwidth"]
    T = cfg["horizon"]
    probes = np.linspace(0.2 * T, 0.98 * T, 5)
    d = 2e-4
    tg = sorted({0.0} | {s * (p + o) for p in probes for o in (-d, 0.0, d)
                 for s in (1.0, -1.0)})
    ps = solve_hamilton_jacobi(h, T, np.linspace(-L, L, 41),
                               grid.axis_nodes, t_grid=tg, dt_int=1e-3)
    res = ps.residual_report(max_spacing=5e-4)
    per = check_phase_periodicity(ps)
    rows = [{"probe": p, "horizon": ps.horizon} for p in probes]
    summary = {"max_residual": res["max_residual"],
               "periodicity_violation": per["max_violation"],
               "initial_condition_error": ps.initial_condition_error(),
               "horizon": ps.horizon, "requested_horizon": ps.requested_horizon}
    return rows, ["probe", "horizon"], summary, cert


def run_parametrix(cfg):
    sym, iv, grid = _build(cfg)
    cert = _certified(cfg, sym, iv)
    f = _bump(cfg)
    rep = parametrix_error_sweep(sym, f, cfg["t_list"], cfg["eps"],
                                 cfg["lattice"]["halfwidth"],
                                 torus_base=cfg["torus_m"],
                                 symbol_mode=cfg["symbol_mode"])
    rows = []
    for r in rep["rows"]:
        for t, e in sorted(r["errors"].items()):
            rows.append({"eps": r["eps"], "t": t, "error": e,
                         "sup_error": r["sup_error"],
                         "consistency0": r["consistency0"]})
    summary = {"slope": rep["slope"],
               "consistency0": {str(r["eps"]): r["consistency0"]
                                for r in rep["rows"]}}
    return rows, ["eps", "t", "error", "sup_error", "consistency0"], summary, cert


def _poisson_fixtures():
    import sympy as sp
    x = sp.Symbol("x0", real=True)
    a = bump_expr(x, halfwidth=0.8)
    return x, [("zero_phase", sp.Integer(0) * x, a),
               ("linear_pi", sp.pi * x, a),
               ("sine", sp.Float(0.8) * sp.pi * sp.sin(x), a)]


def run_poisson(cfg):
    x, fixtures = _poisson_fixtures()
    rows = []
    all_pass = True
    slopes = {}
    for label, phi, a in fixtures:
        rems = []
        for eps in cfg["eps"]:
            r = poisson_compare(a, phi, eps, k=cfg["poisson_k"],
                                support=(-0.8, 0.8), var=x)
            rems.append(r["remainder"])
            all_pass = all_pass and r["pass"]
            rows.append({"fixture": label, "eps": eps,
                         "sum_re": r["sum"].real, "integral_re": r["integral"].real,
                         "remainder": r["remainder"], "bound": r["bound"],
                         "pass": r["pass"]})
        slopes[label] = fit_loglog_slope(cfg["eps"], rems)
    summary = {"all_within_bound": all_pass, "slopes": slopes}
    return rows, ["fixture", "eps", "sum_re", "integral_re", "remainder",
                  "bound", "pass"], summary, None


def run_statphase(cfg):
    import sympy as sp
    t, s = sp.symbols("t s", real=True)
    bt = BumpFunction(0.0, 2.0, plateau=0.4)

    def u_gauss(a, b):
        return np.exp(-(a ** 2 + b ** 2) / 0.5)

    rep = stationary_phase_check(lambda a, b: bt(a) * bt(b), t * s, cfg["eps"],
                                 ((-2, 2), (-2, 2)), vars_=(t, s))
    rep_g = stationary_phase_check(u_gauss, (t ** 2 + s ** 2) / 2, [0.01],
                                   ((-3, 3), (-3, 3)), vars_=(t, s),
                                   nodes_cap=9000)
    exact = 2 * np.pi * 0.25 * 0.01 / (0.01 - 0.25j)
    fres_err = abs(rep_g["rows"][0]["integral"] - exact) / abs(exact)
    rows = [{"fixture": "hyperbolic", "eps": r["eps"],
             "abs_integral": abs(r["integral"]), "abs_leading": abs(r["leading"]),
             "abs_err": r["abs_err"]} for r in rep["rows"]]
    summary = {"hyperbolic_slope": rep["remainder_slope"],
               "hyperbolic_amplitude": abs(rep["amplitude_constant"]),
               "gaussian_fresnel_rel_err": fres_err}
    return rows, ["fixture", "eps", "abs_integral", "abs_leading", "abs_err"], \
        summary, None


def _hs_fixture(dim, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim))
                        + 1j * rng.normal(size=(dim, dim)))
    lam = np.linspace(0.2, 3.2, dim) if dim > 2 else np.array([1.2, 1.7])
    return (q * lam) @ q.conj().T, q, lam


def run_hs_check(cfg):
    f = _bump(cfg)
    aae = build_aae(f, cfg["aae_order"])
    rows = []
    worst = 0.0
    for dim in cfg["hs_dims"]:
        a, q, lam = _hs_fixture(dim, cfg["seed"] + dim)
        got = hs_apply(a, aae)
        ref = (q * f(lam)) @ q.conj().T
        err = float(np.linalg.norm(got - ref))
        worst = max(worst, err)
        rows.append({"dim": dim, "frobenius_err": err})
    summary = {"worst_frobenius_err": worst, "c_n": aae.c_n,
               "cutoff_width": aae.cutoff_width}
    return rows, ["dim", "frobenius_err"], summary, None


def run_calculus_check(cfg):
    sym, iv, grid = _build(cfg)
    rows = []
    ga = builtin_symbol("gaussian_window_trig",
                        {"trig": "sin", "sigma": 0.8, "d": sym.dim})
    gb = builtin_symbol("gaussian_window_trig",
                        {"trig": "cos", "sigma": 1.0, "d": sym.dim})
    L = cfg["lattice"]["halfwidth"]
    summary = {}
    for order in range(1, cfg["calculus_order"] + 1):
        rep = verify_composition(ga, gb, 0.5, L, cfg["eps"], grid, order=order)
        summary[f"composition_slope_n{order}"] = rep["fitted_order"]
        for eps, err in zip(rep["eps"], rep["errors"]):
            rows.append({"check": f"composition_n{order}", "eps": eps, "value": err})
        at = change_quantization(ga, 1.0, 0.0, order)
        errs = []
        for eps in cfg["eps"]:
            box = LatticeBox(sym.dim, eps, L)
            e = spectral_norm(build_operator(ga, 1.0, box, eps, grid).entries
                              - build_operator(at, 0.0, box, eps, grid).entries)
            errs.append(e)
            rows.append({"check": f"requantize_n{order}", "eps": eps, "value": e})
        summary[f"requantize_slope_n{order}"] = fit_loglog_slope(cfg["eps"], errs)
    eps = min(cfg["eps"])
    box = LatticeBox(sym.dim, eps, L)
    op = build_operator(sym, 0.5, box, eps, grid)
    scale = float(np.max(np.abs(op.entries)))
    rows.append({"check": "hermitian_defect", "eps": eps,
                 "value": op.hermitian_defect / scale})
    summary["hermitian_defect_rel"] = op.hermitian_defect / scale
    xo = builtin_symbol("x_only", {"profile": "gaussian", "d": sym.dim})
    mats = [build_operator(xo, t, box, eps, grid).entries for t in (0.0, 0.3, 0.5, 1.0)]
    dev = max(float(np.max(np.abs(m - mats[0]))) for m in mats[1:])
    rows.append({"check": "x_only_t_independence", "eps": eps, "value": dev})
    summary["x_only_t_independence"] = dev
    return rows, ["check", "eps", "value"], summary, None


_HANDLERS = {
    "certify": run_certify,
    "quantize-dump": run_quantize_dump,
    "spectrum": run_spectrum,
    "trace-check": run_trace_check,
    "trace-f": run_trace_f,
    "weyl": run_weyl,
    "dos": run_dos,
    "hj": run_hj,
    "parametrix": run_parametrix,
    "poisson": run_poisson,
    "statphase": run_statphase,
    "hs-check": run_hs_check,
    "calculus-check": run_calculus_check,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="latticeweyl",
        description="Desk-scale experiments for lattice pseudodifferential "
                    "spectral asymptotics.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("-c", "--config", default=None,
                        help="YAML config file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the RNG seed from the config")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.subcommand, args.config)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None and "seed" in cfg:
        cfg["seed"] = args.seed

    try:
        rows, header, summary, cert = _HANDLERS[args.subcommand](cfg)
    except HypothesisFailure as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        write_outputs(cfg, args.subcommand, [], ["check"],
                      {"error": str(exc)}, exc.certificate)
        return 3
    except (CausticError, FlowError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 4

    base = write_outputs(cfg, args.subcommand, rows, header, summary, cert)
    print(f"wrote {base}.csv and {base}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
