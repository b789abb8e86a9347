"""Command-line scenario runner.

Each scenario reads a JSON config, writes CSV tables (and optional
wave-function dumps) to the output directory and a ``summary.json`` with one
pass/fail entry per check.  Exit codes: 0 all checks pass, 1 a check fails,
2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema

log = logging.getLogger("germcanop")

SCENARIOS = ("quantize", "gaussian-packet", "transition-check", "residual-scan", "transform-check")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "germcanop scenario config",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "germ": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["circle", "point", "polynomial"]},
                "energy": _pos,
                "modulation": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
                "coefficients": {"type": "array", "items": {"type": "array", "items": _num,
                                                            "minItems": 2, "maxItems": 2}},
                "half_width": _pos,
            },
        },
        "h": _pos,
        "h_list": {"type": "array", "items": _pos, "minItems": 2},
        "energy_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lo", "hi", "num"],
            "properties": {"lo": _num, "hi": _num, "num": {"type": "integer", "minimum": 8, "maximum": 65536}},
        },
        "transport": {"type": "boolean"},
        "transform": {"enum": ["identity", "quarter_turn"]},
        "fd_check": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"half_width": _pos, "n_points": {"type": "integer", "minimum": 16}},
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"quantization": _pos, "energy": _pos, "fd": _pos, "phase": _pos,
                           "profile": _pos, "min_slope": _num, "residual": _pos},
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"table": {"type": "string"}, "summary": {"type": "string"},
                           "wavefunction": {"type": "string"}, "wavefunction_csv": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "quantize": {"germ": {"name": "circle"}, "h": 0.01, "energy_range": [0.0, 0.1],
                 "fd_check": {"half_width": 1.2, "n_points": 4000},
                 "tolerances": {"quantization": 1e-8, "energy": 1e-8, "fd": 5e-4}},
    "gaussian-packet": {"germ": {"name": "point"}, "h": 0.01,
                        "grid": {"lo": -1.0, "hi": 1.0, "num": 1025},
                        "tolerances": {"profile": 1e-8}},
    "transition-check": {"germ": {"name": "point"}, "grid": {"lo": -1.0, "hi": 1.0, "num": 41},
                         "tolerances": {"phase": 1e-10}},
    "residual-scan": {"germ": {"name": "circle", "modulation": 0.3},
                      "h_list": [0.0625, 0.03125, 0.015625, 0.0078125],
                      "grid": {"lo": -5.0, "hi": 5.0, "num": 4096}, "transport": True,
                      "tolerances": {"min_slope": 1.4}},
    "transform-check": {"germ": {"name": "circle", "energy": 0.5}, "h": 1.0 / 31,
                        "transform": "quarter_turn", "tolerances": {"residual": 1e-6}},
}

TRACE = {
    "quantize": ["quantization condition: Var(Phi/h + (i/2) ln a) in 2 pi Z",
                 "variation of the z-action equals the closed action integral"],
    "gaussian-packet": ["canonical operator on a nonsingular chart", "chart density and its logarithm"],
    "transition-check": ["complex stationary-phase reduction of chart phases",
                         "Gaussian transition between q- and p-charts"],
    "residual-scan": ["commutation of the Hamiltonian with the canonical operator",
                      "transport operator V(H) - tr H_pq/2 + L_V mu/(2 mu)"],
    "transform-check": ["positive canonical transformation of a germ",
                        "quantization preserved by canonical transformations"],
}


class ConfigError(Exception):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_config(doc: dict) -> dict:
    """Validate a config document and fill scenario defaults.

    Raises
    ------
    ConfigError
        On schema violations (unknown keys included).
    """
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {exc.message}") from None
    cfg = _merge(DEFAULTS[doc["scenario"]], doc)
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(doc)


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])


def _check(name, passed, value, limit):
    return {"name": name, "passed": bool(passed), "value": value, "limit": limit}


# ---------------------------------------------------------------- scenarios

def _circle_family(cfg, modulation=0.0):
    from .families import circle_germ, circle_volume_form

    def fam(E, h):
        g = circle_germ(E)
        return g, circle_volume_form(g, modulation), h

    return fam


def run_quantize(cfg, out: Path):
    import numpy as np

    from .pdo import fd_spectrum
    from .quantization import admissible_parameters

    if cfg["germ"]["name"] != "circle":
        raise ConfigError("the quantize scenario scans circle energies")
    h = cfg["h"]
    lo, hi = cfg["energy_range"]
    tol = cfg["tolerances"]
    fam = _circle_family(cfg)
    Es = admissible_parameters(lambda E: fam(E, h), max(lo, 1e-12), hi, "E", tol=tol["quantization"])
    fd = cfg["fd_check"]
    ev = fd_spectrum(lambda q: 0.5 * q ** 2, h, fd["half_width"], fd["n_points"], max(len(Es), 1))
    rows, worst, worst_fd = [], 0.0, 0.0
    for k, E in enumerate(Es):
        exact = h * (k + 0.5)
        worst = max(worst, abs(E - exact))
        worst_fd = max(worst_fd, abs(E - ev[k]))
        rows.append([k, E, exact, abs(E - exact), float(ev[k]), abs(E - float(ev[k]))])
    _write_csv(out / cfg.get("outputs", {}).get("table", "admissible_energies.csv"),
               ["n", "E", "h_n_half", "error", "E_fd", "error_fd"], rows)
    expected = int(np.floor(hi / h - 0.5)) + 1 - int(np.ceil(max(lo, 0) / h - 0.5))
    return [_check("count matches h(n+1/2) in range", len(Es) == expected, len(Es), expected),
            _check("admissible energies equal h(n+1/2)", worst <= tol["energy"], worst, tol["energy"]),
            _check("agreement with finite-difference spectrum", worst_fd <= tol["fd"], worst_fd, tol["fd"])]


def run_gaussian_packet(cfg, out: Path):
    import numpy as np

    from .canop import Grid, VolumeForm, global_canop
    from .families import point_germ
    from .fields import constant_field
    from .io import save_wavefunction, wavefunction_to_csv

    h = cfg["h"]
    g = point_germ(1, cfg["germ"].get("half_width", 3.0))
    form = VolumeForm(constant_field(2, 1.0), log_a=constant_field(2, 0.0))
    gr = cfg["grid"]
    grid = Grid.uniform([gr["lo"]], [gr["hi"]], [gr["num"]])
    psi = global_canop(g, form, h, grid, lambda m: np.ones(len(np.atleast_2d(m))))
    q = grid.axes[0]
    ref = np.exp(-q ** 2 / (2 * h))
    keep = ref > 1e-100
    ratio = psi.values[keep] / ref[keep]
    spread = float(np.abs(ratio - ratio[np.argmax(ref[keep])]).max() / abs(ratio[np.argmax(ref[keep])]))
    _write_csv(out / cfg.get("outputs", {}).get("table", "gaussian_packet.csv"),
               ["q", "re", "im", "reference"], [[float(a), float(v.real), float(v.imag), float(r)]
                                                for a, v, r in zip(q, psi.values, ref)])
    outs = cfg.get("outputs", {})
    if "wavefunction" in outs:
        save_wavefunction(psi, out / outs["wavefunction"])
    if "wavefunction_csv" in outs:
        wavefunction_to_csv(psi, out / outs["wavefunction_csv"])
    tol = cfg["tolerances"]["profile"]
    return [_check("profile proportional to exp(-q^2/2h)", spread <= tol, spread, tol)]


def run_transition_check(cfg, out: Path):
    import numpy as np

    from .families import polynomial_phase
    from .germ import IndexSet, transition_phase

    S = polynomial_phase([0, 0, 0.5j])
    SI = transition_phase(S, IndexSet.empty(1), [0.0])
    gr = cfg["grid"]
    ps = np.linspace(gr["lo"], gr["hi"], gr["num"])
    rows, worst = [], 0.0
    for p in ps:
        v = complex(SI.value(np.array([p])))
        ex = 0.5j * p * p
        worst = max(worst, abs(v - ex))
        rows.append([float(p), v.real, v.imag, ex.real, ex.imag, abs(v - ex)])
    _write_csv(out / cfg.get("outputs", {}).get("table", "transition.csv"),
               ["p", "re_S", "im_S", "re_exact", "im_exact", "error"], rows)
    tol = cfg["tolerances"]["phase"]
    return [_check("S = (i/2)q^2 maps to (i/2)p^2", worst <= tol, worst, tol)]


def quantized_circle_energy(h: float, radius2: float = 1.0) -> float:
    """Energy of the quantized circle with ``R^2 = h(2k - 1)`` closest to ``radius2``."""
    k = max(1, int(round((radius2 / h + 1) / 2)))
    return 0.5 * h * (2 * k - 1)


def residual_scan(h_list, modulation=0.3, transport=True, grid=(-5.0, 5.0, 4096)):
    """``||H K phi|| / ||K phi||`` on quantized circles; returns rows ``(h, E, num, ratio)``.

    With ``transport`` the amplitude solves ``P phi = 0``; otherwise ``phi = 1``.
    """
    import numpy as np

    from .canop import Grid, chart_tables, global_canop, hh_norm
    from .families import circle_germ, circle_volume_form
    from .pdo import HamiltonianSymbol, apply_hamiltonian, solve_transport, transport_operator

    rows = []
    gr = Grid.uniform([grid[0]], [grid[1]], [grid[2]])
    for h in h_list:
        E = quantized_circle_energy(h)
        g = circle_germ(E)
        form = circle_volume_form(g, modulation)
        H = HamiltonianSymbol.harmonic(E)
        tables = chart_tables(g, form)
        if transport:
            tc = transport_operator(H, g, form)
            phi = solve_transport(tc, np.array([0.0, np.sqrt(2 * E)]), 1.0, period=2 * np.pi, n_steps=128)
        else:
            phi = lambda m: np.ones(len(np.atleast_2d(m)))
        psi = global_canop(g, form, h, gr, phi, tables=tables)
        num = hh_norm(apply_hamiltonian(H, psi), 0, check_decay=False)
        rows.append((h, E, num, num / hh_norm(psi, 0, check_decay=False)))
    return rows


def fitted_slope(hs, vals) -> float:
    import numpy as np

    return float(np.polyfit(np.log2(hs), np.log2(vals), 1)[0])


def run_residual_scan(cfg, out: Path):
    import numpy as np

    if cfg["germ"]["name"] != "circle":
        raise ConfigError("the residual scan runs on the circle germ")
    gr = cfg["grid"]
    rows = residual_scan(cfg["h_list"], cfg["germ"].get("modulation", 0.3), cfg["transport"],
                         (gr["lo"], gr["hi"], gr["num"]))
    table = []
    for i, (h, E, num, ratio) in enumerate(rows):
        local = None if i == 0 else float(np.log2(ratio / rows[i - 1][3]) / np.log2(h / rows[i - 1][0]))
        table.append([h, E, num, ratio, local])
    _write_csv(out / cfg.get("outputs", {}).get("table", "residual_scan.csv"),
               ["h", "E", "residual_norm", "relative_residual", "slope"], table)
    slope = fitted_slope([r[0] for r in rows], [r[3] for r in rows])
    lim = cfg["tolerances"]["min_slope"]
    return [_check("log2-slope of relative residual", slope >= lim, slope, lim)]


def run_transform_check(cfg, out: Path):
    from .families import circle_germ, circle_volume_form
    from .quantization import check_quantization
    from .transform import CanonicalTransform, apply_canonical_transform, push_volume_form

    if cfg["germ"]["name"] != "circle":
        raise ConfigError("the transform check runs on the circle germ")
    h = cfg["h"]
    g = circle_germ(cfg["germ"].get("energy", 0.5))
    form = circle_volume_form(g, cfg["germ"].get("modulation", 0.0))
    T = getattr(CanonicalTransform, cfg["transform"])(1)
    before = check_quantization(g, form, h)
    g2 = apply_canonical_transform(T, g)
    after = check_quantization(g2, push_volume_form(T, form), h)
    rows = [[r.cycle_id, "before", r.residual, r.var_phi.real, r.var_ln_a.imag] for r in before.rows]
    rows += [[r.cycle_id, "after", r.residual, r.var_phi.real, r.var_ln_a.imag] for r in after.rows]
    _write_csv(out / cfg.get("outputs", {}).get("table", "transform_check.csv"),
               ["cycle", "stage", "residual", "var_phi", "im_var_ln_a"], rows)
    tol = cfg["tolerances"]["residual"]
    return [_check("cycle residuals after the transform", after.max_residual <= tol, after.max_residual, tol)]


RUNNERS = {"quantize": run_quantize, "gaussian-packet": run_gaussian_packet,
           "transition-check": run_transition_check, "residual-scan": run_residual_scan,
           "transform-check": run_transform_check}


def run_scenario(cfg: dict, out: Path, seed: int = 0, threads: int = 1) -> int:
    """Run one validated scenario; returns the exit code."""
    from .errors import GermcanopError

    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary = {"scenario": cfg["scenario"], "config": cfg, "seed": seed, "threads": threads,
               "exercises": TRACE[cfg["scenario"]]}
    try:
        checks = RUNNERS[cfg["scenario"]](cfg, out)
        code = 0 if all(c["passed"] for c in checks) else 1
        summary.update(checks=checks, status="pass" if code == 0 else "fail")
    except ConfigError:
        raise
    except GermcanopError as exc:
        summary.update(checks=[], status="error", error=f"{type(exc).__name__}: {exc}")
        code = 3
    summary["runtime_s"] = round(time.perf_counter() - t0, 3)
    name = cfg.get("outputs", {}).get("summary", "summary.json")
    (out / name).write_text(json.dumps(summary, indent=2, sort_keys=True, default=str))
    for c in summary.get("checks", []):
        log.info("%s %s: %s (limit %s)", "PASS" if c["passed"] else "FAIL", c["name"], c["value"], c["limit"])
    if code == 3:
        log.error(summary["error"])
    return code


def _set_threads(n: int):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="germcanop", description="Run a germcanop scenario from a JSON config.")
    ap.add_argument("--config", required=True, help="scenario config (JSON)")
    ap.add_argument("--out", default="germcanop_out", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None,
                    help="BLAS threads (default: $GERMCANOP_THREADS or 1)")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    threads = args.threads
    if threads is None:
        try:
            threads = int(os.environ.get("GERMCANOP_THREADS", "1"))
        except ValueError:
            print("config error: GERMCANOP_THREADS must be an integer", file=sys.stderr)
            return 2
    if threads < 1:
        print("config error: thread count must be positive", file=sys.stderr)
        return 2
    _set_threads(threads)
    try:
        cfg = load_config(args.config)
        return run_scenario(cfg, Path(args.out), seed=args.seed, threads=threads)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
