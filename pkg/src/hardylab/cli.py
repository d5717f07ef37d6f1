"""Command-line front end: ``hardy-lab <command> --config <path> [--out <dir>] [--jobs N]``.

Each command reads one JSON document.  Every field has a default (listed in
``DEFAULTS``) and unknown fields are rejected.  Exit codes: 0 all checks
pass, 1 usage or configuration error (including violated hypotheses),
2 a verification failed.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import forms, perturbation as pert, scaling
from .kernels import (
    GaussianKernel,
    LevyKernel,
    LevySymbol,
    StableKernel,
    TabulatedKernel,
    ck_residual,
)
from .quadrature import QuadratureConfig
from .special import DomainError
from .supermedian import (
    AtomicMeasure,
    SupermedianPair,
    TimeWeight,
    power_bound_admissible,
    power_supermedian_check,
    supermedian_residual,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2


class ConfigError(ValueError):
    pass


KERNEL_DEFAULTS = {"kind": "gaussian", "d": 3, "alpha": 1.0, "killing_rate": 0.0, "method": "auto",
                   "symbol": "power", "symbol_alpha": 1.0, "csv": None}

DEFAULTS = {
    "verify-kernel": {
        "kernel": KERNEL_DEFAULTS,
        "times": [0.5, 1.0],
        "radii": [0.0, 0.7, 2.0],
        "tolerances": {"symmetry": 1e-12, "ck": 1e-6, "mass": 1e-6},
    },
    "verify-supermedian": {
        "kernel": KERNEL_DEFAULTS,
        "mode": "power",
        "r": 0.5,
        "beta": 0.5,
        "times": [0.1, 1.0],
        "x_norms": [0.5, 2.0],
        "tolerances": {"margin_abs": 0.0},
    },
    "verify-hardy": {
        "kernel": {**KERNEL_DEFAULTS, "kind": "stable"},
        "beta": 1.0,
        "gamma": 0.5,
        "battery": "standard",
        "mode": "equality",
        "lhs_route": "auto",
        "weight_grid": {"r_min": 0.05, "r_max": 20.0, "n": 13},
        "tolerances": {"equality_rel": 0.02, "inequality_rel": 0.02},
    },
    "perturbation": {
        "setup": "constant_potential",
        "c": 0.25,
        "kappa": 1.0,
        "alpha": 1.0,
        "beta": 1.0,
        "q_scale": 1.0,
        "n_max": 8,
        "t_index": -1,
        "grid": {"half_width": 10.0, "n_cells": 160, "r_min": 0.01, "r_max": 100.0, "t_max": 1.0, "n_times": 20},
        "tolerances": {"grid_factor": 5.0, "truncation": 1e-8},
        "dump_csv": False,
    },
    "scaling-report": {
        "profile": {"kind": "power", "alpha": 1.5, "d": 3, "symbol": "log_perturbed"},
        "declared": {"phi_wusc": None, "phi_wlsc": None, "volume_wlsc": None},
        "search_wusc_exponent": None,
        "sample": {"lambdas": list(scaling.DEFAULT_LAMBDAS), "theta_min": 1e-3, "theta_max": 1e3, "n_theta": 61},
        "biconditional_samples": 10000,
        "seed": 0,
        "beta": None,
        "kernel_estimate_consts": [1.0, 1.0],
    },
}

BATTERIES = {
    "standard": "gaussian_bump(0.5, 1, 2), smoothed_power x2 (exponent (d-alpha)/2 on [0.1, 10]), hat(1)",
    "annular": "annular_bump on (0.5, 2), (0.2, 1), (1, 3)",
    "gaussian_bump": "exp(-|x|^2 / 2 sigma^2)",
    "smoothed_power": "|x|^-p smoothly cut off outside [eps, R]",
    "hat": "max(0, 1 - |x|/radius)",
    "annular_bump": "smooth bump supported on a < |x| < b",
}


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(defaults[key], dict) and defaults[key] and not isinstance(val, dict):
            raise ConfigError(f"config field {where!r} must be an object")
        if isinstance(defaults[key], dict) and defaults[key]:
            out[key] = _merge(defaults[key], val, where + ".")
        else:
            out[key] = val
    return out


def load_config(command: str, path: str | None) -> dict:
    given = {}
    if path is not None:
        try:
            given = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(given, dict):
            raise ConfigError("config must be a JSON object")
    return _merge(DEFAULTS[command], given)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


def _fmt(x):
    """Fixed float formatting: 12 significant digits."""
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: _fmt(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_fmt(v) for v in x]
    return x


def render_report(command: str, cfg: dict, body: dict, passed: bool) -> str:
    doc = {"command": command, "version": __version__, "config_hash": config_hash(cfg), "config": cfg,
           "pass": bool(passed), **body}
    return json.dumps(_fmt(_num(doc)), sort_keys=True, indent=2) + "\n"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def build_kernel(spec: dict):
    kind, d = spec["kind"], spec["d"]
    _require(isinstance(d, int) and d >= 1, "kernel.d must be a positive integer")
    try:
        if kind == "gaussian":
            return GaussianKernel(d, killing_rate=float(spec["killing_rate"]))
        if kind == "stable":
            return StableKernel(float(spec["alpha"]), d, method=spec["method"])
        if kind == "levy":
            if spec["symbol"] == "power":
                sym = LevySymbol.power(float(spec["symbol_alpha"]))
            elif spec["symbol"] == "log_perturbed":
                sym = LevySymbol.log_perturbed()
            else:
                raise ConfigError(f"unknown symbol {spec['symbol']!r}")
            return LevyKernel(sym, d)
        if kind == "tabulated":
            _require(spec["csv"] is not None, "tabulated kernels need kernel.csv")
            return TabulatedKernel.from_csv(spec["csv"], d)
    except (ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid kernel: {exc}") from exc
    raise ConfigError(f"unknown kernel kind {kind!r}")


def _write(out_dir: str | None, name: str, text: str) -> None:
    if out_dir is None:
        return
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    (p / name).write_text(text)


def _table(rows: list[list], header: list[str]) -> str:
    cells = [header] + [[f"{c:.6g}" if isinstance(c, float) else str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _point(r: float, d: int) -> np.ndarray:
    x = np.zeros(d)
    x[0] = r
    return x


def cmd_verify_kernel(cfg: dict, out: str | None, jobs: int) -> tuple[dict, bool, str]:
    k = build_kernel(cfg["kernel"])
    tol = cfg["tolerances"]
    rows, checks = [], []
    if isinstance(k, TabulatedKernel):
        times = [float(t) for t in k.t_grid]
        pairs = [(s, t) for s in times for t in times if s <= t and any(math.isclose(s + t, u, rel_tol=1e-9) for u in times)]
    else:
        times = [float(t) for t in cfg["times"]]
        _require(all(t > 0 for t in times), "times must be positive")
        pairs = [(s, t) for s in times for t in times if s <= t]
    radii = [float(r) for r in cfg["radii"]]
    rng = np.random.default_rng(12345)
    for t in times:
        x, y = rng.normal(size=k.d), rng.normal(size=k.d)
        a, b = float(k.eval(t, x, y)), float(k.eval(t, y, x))
        err = abs(a - b) / max(abs(a), 1e-300)
        checks.append({"check": "symmetry", "t": t, "value": err, "pass": err <= tol["symmetry"]})
        m = k.mass(t)
        if isinstance(k, GaussianKernel):
            target = math.exp(-k.kappa * t)
            ok = abs(m - target) <= tol["mass"]
        elif isinstance(k, TabulatedKernel):
            ok = m <= 1 + tol["mass"] and m >= 1 - tol["mass"]
        else:
            ok = abs(m - 1.0) <= tol["mass"]
        checks.append({"check": "mass", "t": t, "value": m, "pass": bool(ok)})
    for s, t in pairs:
        for r in radii:
            qcfg = None
            if isinstance(k, TabulatedKernel):
                # the interpolant has a kink at every grid radius
                rg = k.r_grid[::4]
                pts = np.concatenate([-rg, rg, r - rg, r + rg]) if k.d == 1 else rg
                qcfg = QuadratureConfig(rel_tol=1e-7, abs_tol=1e-10, max_subdivisions=20000).with_splits(pts)
            res = ck_residual(k, s, t, np.zeros(k.d), _point(r, k.d), qcfg)
            ref = float(k.radial(s + t, r))
            rel = res / ref if ref > 0 else res
            checks.append({"check": "chapman_kolmogorov", "s": s, "t": t, "r": r, "value": rel,
                           "pass": rel <= tol["ck"]})
    for c in checks:
        rows.append([c["check"], c.get("t", ""), c.get("s", ""), c.get("r", ""), c["value"], "ok" if c["pass"] else "FAIL"])
    passed = all(c["pass"] for c in checks)
    return {"kernel": k.kernel_id, "checks": checks}, passed, _table(rows, ["check", "t", "s", "r", "value", "status"])


def _pair_for(k, beta: float, gamma: float | None = None) -> SupermedianPair:
    if isinstance(k, StableKernel):
        return SupermedianPair.closed_form_stable(k.d, k.alpha, beta)
    if isinstance(k, GaussianKernel) and k.kappa == 0 and gamma is not None:
        return SupermedianPair.closed_form_gaussian(k.d, gamma)
    if isinstance(k, GaussianKernel) and k.kappa > 0 and k.d == 1 and beta == 1.0:
        return SupermedianPair.closed_form_killed_gaussian(k.kappa)
    return SupermedianPair.numeric(k, TimeWeight(beta), AtomicMeasure.dirac(k.d))


def cmd_verify_supermedian(cfg: dict, out: str | None, jobs: int) -> tuple[dict, bool, str]:
    k = build_kernel(cfg["kernel"])
    mode = cfg["mode"]
    _require(mode in ("power", "pair"), "mode must be 'power' or 'pair'")
    checks, rows = [], []
    if mode == "power":
        r = float(cfg["r"])
        if not power_bound_admissible(k, r):
            raise ConfigError(f"hypothesis violation: r = {r} is outside the admissible range for {k.kernel_id}")
    else:
        pair = _pair_for(k, float(cfg["beta"]))
    for t in cfg["times"]:
        for xn in cfg["x_norms"]:
            if mode == "power":
                res = power_supermedian_check(k, r, float(t), float(xn))
            else:
                res = supermedian_residual(k, pair, float(t), _point(float(xn), k.d))
            ok = res.margin >= -(res.error_estimate + cfg["tolerances"]["margin_abs"])
            checks.append({"t": float(t), "x_norm": float(xn), "h": res.h, "pth": res.pth, "margin": res.margin,
                           "error_estimate": res.error_estimate, "pass": bool(ok)})
            rows.append([float(t), float(xn), res.h, res.pth, res.margin, "ok" if ok else "FAIL"])
    passed = all(c["pass"] for c in checks)
    return ({"kernel": k.kernel_id, "mode": mode, "checks": checks}, passed,
            _table(rows, ["t", "|x|", "h(x)", "p_t h(x)", "margin", "status"]))


def _battery(name, d: int, alpha: float) -> list:
    if name == "standard":
        return forms.standard_battery(d, alpha)
    if name == "annular":
        return [forms.annular_bump(d, 0.5, 2.0), forms.annular_bump(d, 0.2, 1.0), forms.annular_bump(d, 1.0, 3.0)]
    raise ConfigError(f"unknown battery {name!r}; see --list-batteries")


def cmd_verify_hardy(cfg: dict, out: str | None, jobs: int) -> tuple[dict, bool, str]:
    k = build_kernel(cfg["kernel"])
    mode = cfg["mode"]
    _require(mode in ("equality", "inequality"), "mode must be 'equality' or 'inequality'")
    _require(k.d in (1, 3), "verify-hardy supports d = 1 and d = 3")
    if isinstance(k, GaussianKernel):
        _require(k.kappa == 0, "verify-hardy uses the unkilled Gaussian kernel")
        pair = SupermedianPair.closed_form_gaussian(k.d, float(cfg["gamma"]))
        alpha = 2.0
    elif isinstance(k, StableKernel):
        pair = SupermedianPair.closed_form_stable(k.d, k.alpha, float(cfg["beta"]))
        alpha = k.alpha
    else:
        num = SupermedianPair.numeric(k, TimeWeight(float(cfg["beta"])), AtomicMeasure.dirac(k.d))
        g = cfg["weight_grid"]
        grid = np.geomspace(float(g["r_min"]), float(g["r_max"]), int(g["n"]))
        # h and q are smooth in log r; tabulating them keeps the battery loop cheap
        ht = forms.tabulated_weight(num.h_radial, grid)
        qt = forms.tabulated_weight(num.q_radial, grid)
        pair = SupermedianPair(h=num.h, q=num.q, mode="tabulated", kernel_id=num.kernel_id, beta=num.beta,
                               measure=num.measure, h_radial=ht, q_radial=qt, kernel=k, mu=num.mu)
        alpha = getattr(k.symbol_obj, "lower_index", 1.0) or 1.0
    battery = _battery(cfg["battery"], k.d, alpha)
    tol = cfg["tolerances"]

    def run(u):
        rep = forms.hardy_verify(k, pair, u, mode=mode, lhs_route=cfg["lhs_route"])
        return replace(rep, tolerances={"equality_rel": float(tol["equality_rel"]),
                                              "inequality_rel": float(tol["inequality_rel"])})

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(run, battery))
    else:
        reports = [run(u) for u in battery]
    rows = [[r.u_tag, r.lhs, r.weighted, r.remainder, r.relative_residual, "ok" if r.passed else "FAIL"] for r in reports]
    passed = all(r.passed for r in reports)
    return ({"kernel": k.kernel_id, "battery": cfg["battery"], "battery_version": forms.BATTERY_VERSION,
             "reports": [r.to_dict() for r in reports]}, passed,
            _table(rows, ["u", "E(u,u)", "int u^2 q", "remainder", "rel. residual", "status"]))


def cmd_perturbation(cfg: dict, out: str | None, jobs: int) -> tuple[dict, bool, str]:
    setup = cfg["setup"]
    g = cfg["grid"]
    n_max = int(cfg["n_max"])
    _require(1 <= n_max <= 8, "n_max must lie in [1, 8]")
    body: dict = {"setup": setup}
    if setup in ("constant_potential", "zero_potential", "killed_gaussian"):
        grid = pert.SpaceTimeGrid.line(float(g["half_width"]), int(g["n_cells"]), float(g["t_max"]), int(g["n_times"]))
    elif setup in ("stable_radial", "gaussian_radial"):
        grid = pert.SpaceTimeGrid.radial(float(g["r_min"]), float(g["r_max"]), int(g["n_cells"]),
                                         float(g["t_max"]), int(g["n_times"]))
    else:
        raise ConfigError(f"unknown setup {setup!r}")
    ti = int(cfg["t_index"]) % len(grid.times)
    _require(ti > 0, "t_index must point to a positive time")
    t = float(grid.times[ti])
    if setup in ("constant_potential", "zero_potential"):
        c = float(cfg["c"]) if setup == "constant_potential" else 0.0
        k = GaussianKernel(1)
        s = pert.discretize(k, lambda x: np.full_like(np.asarray(x, dtype=float), c), grid)
        pert.extend(s, 3)
        S = s.partial_sum(3)[ti]
        target = math.exp(c * t) * s.kernel_matrices[ti]
        central = np.abs(grid.nodes) <= 0.5 * float(g["half_width"])
        err = float(np.max(np.abs(S - target)[np.ix_(central, central)]) / np.max(target))
        half = s.kernel_matrices[ti // 2] if ti % 2 == 0 else None
        ck = 0.0
        if half is not None:
            ck = float(np.max(np.abs(half @ half - s.kernel_matrices[ti])[np.ix_(central, central)]) / np.max(target))
        tail = math.exp(c * t) - sum((c * t) ** n / math.factorial(n) for n in range(4))
        grid_tol = max(ck, 1e-12) + tail
        ok = err <= grid_tol if setup == "constant_potential" else all(np.max(T) == 0 for T in s.terms[1:])
        body.update({"t": t, "ct": c * t, "max_rel_error": err, "grid_tol": grid_tol, "ck_defect": ck,
                     "series_tail_bound": tail})
        text = _table([[setup, t, err, grid_tol, "ok" if ok else "FAIL"]], ["setup", "t", "error", "grid_tol", "status"])
    else:
        if setup == "killed_gaussian":
            pair = SupermedianPair.closed_form_killed_gaussian(float(cfg["kappa"]))
            qf = lambda x: float(cfg["q_scale"]) * pair.q_radial(np.abs(x))
            hf = lambda x: pair.h_radial(np.abs(x))
        else:
            if setup == "stable_radial":
                pair = SupermedianPair.closed_form_stable(3, float(cfg["alpha"]), float(cfg["beta"]))
            else:
                pair = SupermedianPair.closed_form_gaussian(3, 2 * float(cfg["beta"]))
            r_min = float(g["r_min"])
            # q is switched off on the innermost ball; a smaller potential only lowers the series
            qf = lambda r: float(cfg["q_scale"]) * np.where(r > r_min, pair.q_radial(np.maximum(r, r_min)), 0.0)
            hf = pair.h_radial
        k = pair.kernel
        s = pert.discretize(k, qf, grid)
        pert.run_series(s, float(cfg["tolerances"]["truncation"]), n_max)
        grid_tol = pert.grid_tolerance(s, k, hf, ti)
        rep = pert.nonexplosion_check(s, hf(grid.nodes), ti)
        factor = float(cfg["tolerances"]["grid_factor"])
        ok = rep.holds(grid_tol, factor)
        if float(cfg["q_scale"]) > 1.0:
            ok = ok and not rep.growth_flag
        body.update({"t": t, "kernel": s.kernel_id, "truncation_index": s.truncation_index, "grid_tol": grid_tol,
                     "report": rep.to_dict()})
        text = _table([[setup, t, s.truncation_index, rep.min_relative_margin, grid_tol, rep.growth_flag,
                        "ok" if ok else "FAIL"]],
                      ["setup", "t", "n", "min rel. margin", "grid_tol", "growth", "status"])
    if cfg["dump_csv"] and out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        s.to_csv(Path(out) / "series.csv")
    return body, bool(ok), text


def _profile(cfg: dict) -> scaling.ScalingProfile:
    p, dec = cfg["profile"], cfg["declared"]
    smp = cfg["sample"]
    sample = scaling.ScalingSample(tuple(float(v) for v in smp["lambdas"]), float(smp["theta_min"]),
                                   float(smp["theta_max"]), int(smp["n_theta"]))
    d = int(p["d"])
    if p["kind"] == "power":
        a = float(p["alpha"])
        wusc = tuple(dec["phi_wusc"] or (a, 1.0))
        wlsc = tuple(dec["phi_wlsc"] or (a, 1.0))
        vol = tuple(dec["volume_wlsc"] or (float(d), 1.0))
        return scaling.ScalingProfile(lambda r: np.asarray(r, dtype=float) ** a,
                                      lambda r: np.asarray(r, dtype=float) ** d,
                                      f"power(alpha={a:g},d={d})", wusc, vol, wlsc, sample)
    if p["kind"] == "symbol":
        if p["symbol"] != "log_perturbed":
            raise ConfigError(f"unknown symbol {p['symbol']!r}")
        psi = LevySymbol.log_perturbed()
        wusc = tuple(dec["phi_wusc"] or (1.5, 1.0))
        wlsc = tuple(dec["phi_wlsc"] or (1.0, 1.0))
        prof = scaling.ScalingProfile.from_symbol(psi, d, wusc, wlsc, tag="1/psi(1/r),psi=r*sqrt(log(1+r))",
                                                  sample=sample)
        if dec["volume_wlsc"] is not None:
            prof = scaling.ScalingProfile(prof.phi, prof.V, prof.tag, wusc, tuple(dec["volume_wlsc"]), wlsc, sample)
        return prof
    raise ConfigError(f"unknown profile kind {p['kind']!r}")


def cmd_scaling_report(cfg: dict, out: str | None, jobs: int) -> tuple[dict, bool, str]:
    try:
        prof = _profile(cfg)
    except scaling.ProfileError as exc:
        body = {"error": str(exc)}
        return body, False, f"profile rejected: {exc}"
    reports = prof.reports() + [prof.inverse_wlsc()]
    rng = np.random.default_rng(int(cfg["seed"]))
    n = int(cfg["biconditional_samples"])
    t = 10 ** rng.uniform(-4, 4, n)
    r = 10 ** rng.uniform(-4, 4, n)
    counter = scaling.biconditional_counterexamples(prof.phi, t, r)
    body = {"profile": prof.tag, "reports": [rp.to_dict() for rp in reports], "biconditional_counterexamples": counter,
            "biconditional_samples": n}
    found = None
    if cfg["search_wusc_exponent"] is not None:
        a = float(cfg["search_wusc_exponent"])
        found = (a, scaling.minimal_wusc_constant(prof.phi, a, prof.sample))
        body["found_phi_wusc"] = list(found)
    if cfg["beta"] is not None:
        consts = tuple(float(c) for c in cfg["kernel_estimate_consts"])
        try:
            env = scaling.envelope_h(prof, float(cfg["beta"]), kernel_estimate_consts=consts)
            w = scaling.hardy_weight_metric(prof, float(cfg["beta"]), np.zeros(1), np.ones(1), consts)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        body["envelope_h"] = {"lower_const": env.lower_const, "upper_const": env.upper_const}
        body["weight_at_r1"] = {"lower": w.lower, "upper": w.upper}
    radii = np.array([0.01, 0.1, 1.0, 10.0, 100.0])
    body["local_scaling_weight"] = {f"{r:g}": float(v) for r, v in zip(radii, scaling.local_scaling_weight(prof.phi, radii))}
    passed = all(rp.passed for rp in reports) and counter == 0
    rows = [[rp.function_tag, rp.condition, str(rp.claimed_indices), rp.worst_ratio, "ok" if rp.passed else "FAIL"]
            for rp in reports]
    rows.append(["phi", "inverse biconditional", f"{n} samples", float(counter), "ok" if counter == 0 else "FAIL"])
    if found is not None:
        rows.append(["phi", "found WUSC", f"({found[0]:g}, {found[1]:.6g})", 1.0, "info"])
    return body, passed, _table(rows, ["function", "condition", "indices", "worst ratio", "status"])


COMMANDS = {
    "verify-kernel": cmd_verify_kernel,
    "verify-supermedian": cmd_verify_supermedian,
    "verify-hardy": cmd_verify_hardy,
    "perturbation": cmd_perturbation,
    "scaling-report": cmd_scaling_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hardy-lab", description="Numerical checks of Hardy inequalities and Schrodinger perturbations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--list-batteries", action="store_true", help="print the test-function families and exit")
    p.add_argument("command", nargs="?", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config (fields default as documented)")
    p.add_argument("--out", help="directory for report.json and CSV dumps")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for independent battery items")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.list_batteries:
        print(f"{forms.BATTERY_VERSION}")
        for name, desc in BATTERIES.items():
            print(f"  {name:15s} {desc}")
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("hardy-lab: error: a command is required", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("hardy-lab: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.command, args.config)
        body, passed, text = COMMANDS[args.command](cfg, args.out, args.jobs)
    except (ConfigError, DomainError) as exc:
        print(f"hardy-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = render_report(args.command, cfg, body, passed)
    _write(args.out, "report.json", report)
    print(text)
    print(f"{args.command}: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
