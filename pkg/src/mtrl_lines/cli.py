"""Command-line front end.

    mtrl-lines <command> --config job.json [--out DIR] [--seed N] [--threads N]

Commands: analyze, design-optimize, design-ruler, linecount, trl-band, mc-sens.
Every run writes ``summary.json`` (tool version, fully resolved config,
results, elapsed time) plus command-specific CSV/JSON files into ``--out``.

Exit codes: 0 ok, 2 config error, 3 infeasible, 4 numerical degeneracy.

The Monte Carlo command perturbs the effective permittivity directly
(``mc.eps_sigma``); there is no cross-section model behind it.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, line_count, mc_sensitivity, optimizer, rulers, trl_classic
from .eigenmetrics import effective_phase
from .errors import (ConfigError, DegenerateError, FrequencyRangeError, InfeasibleError,
                     UnsupportedIndexError, UnsupportedOrderError)
from .medium import RectangularWaveguide, TabulatedMedium, constant, frequency_grid

COMMANDS = ("analyze", "design-optimize", "design-ruler", "linecount", "trl-band", "mc-sens")
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_DEGENERATE = 0, 2, 3, 4

UNIT = {"m": 1.0, "mm": 1e-3, "cm": 1e-2, "um": 1e-6, "µm": 1e-6}


def load_schema():
    text = resources.files("mtrl_lines").joinpath("schemas/config.schema.json").read_text("utf-8")
    return json.loads(text)


def validate(command, cfg):
    schema = load_schema()
    root = {"$ref": f"#/$defs/{command}", "$defs": schema["$defs"]}
    v = jsonschema.Draft202012Validator(root)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {e.message}")


# --- config helpers -------------------------------------------------------------------

def meters(spec):
    return None if spec is None else float(spec["value"])*UNIT[spec["unit"]]


def meters_list(spec):
    return np.asarray(spec["values"], dtype=float)*UNIT[spec["unit"]]


def as_length(x_m):
    return {"value": float(x_m), "unit": "m"}


def build_medium(spec):
    kind = spec["type"]
    if kind == "constant":
        return constant(spec["eps_real"], spec.get("eps_imag", 0.0))
    if kind == "tabulated":
        pts = [(p["frequency_hz"], (p["eps_real"], p.get("eps_imag", 0.0))) for p in spec["points"]]
        return TabulatedMedium.from_points(pts)
    return RectangularWaveguide(meters(spec["width"]), spec.get("eps_r", 1.0))


def resolve_medium(spec):
    spec = dict(spec)
    if spec["type"] == "constant":
        spec.setdefault("eps_imag", 0.0)
    elif spec["type"] == "tabulated":
        spec["points"] = [dict(p, eps_imag=p.get("eps_imag", 0.0)) for p in spec["points"]]
    else:
        spec.setdefault("eps_r", 1.0)
    return spec


def _freq(cfg, points_default):
    fr = dict(cfg["frequency"])
    fr.setdefault("points", points_default)
    if not fr["f_min_hz"] < fr["f_max_hz"]:
        raise ConfigError("config error at frequency: f_min_hz must be below f_max_hz")
    return fr


# --- output helpers -----------------------------------------------------------------------

def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(out: Path, name, text):
    (out/name).write_text(text, encoding="utf-8")


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(x):
    return repr(float(x))


def _bands(curve, margin):
    return [{"f_start_hz": a, "f_stop_hz": b} for a, b in curve.bands_above(margin)]


# --- commands ----------------------------------------------------------------------------
# each returns (resolved config, results dict, {filename: text})

def cmd_analyze(cfg, args):
    cfg = copy.deepcopy(cfg)
    cfg["medium"] = resolve_medium(cfg["medium"])
    cfg["frequency"] = _freq(cfg, 501)
    cfg.setdefault("margin_deg", 30.0)
    cfg.setdefault("scaling", "none")
    cfg.setdefault("norm_order", 1)
    model = build_medium(cfg["medium"])
    lengths = meters_list(cfg["lengths"])
    fr = cfg["frequency"]
    grid = frequency_grid(fr["f_min_hz"], fr["f_max_hz"], fr["points"])
    scaling = None if cfg["scaling"] == "none" else cfg["scaling"]
    curve = effective_phase(lengths, model, grid, scaling=scaling, order=cfg["norm_order"])
    valid = ~curve.degenerate
    results = {
        "lengths_m": [float(x) for x in lengths],
        "min_phase_deg": float(np.min(curve.phi_deg)),
        "mean_phase_deg": float(np.mean(curve.phi_deg)),
        "max_lambda": float(np.max(curve.lam)),
        "degenerate_points": int(np.count_nonzero(~valid)),
        "bands_above_margin": _bands(curve, cfg["margin_deg"]),
    }
    return cfg, results, {"phase_curve.csv": curve.to_csv()}


def cmd_design_optimize(cfg, args):
    cfg = copy.deepcopy(cfg)
    cfg["medium"] = resolve_medium(cfg["medium"])
    fr = dict(cfg["frequency"])
    cfg.setdefault("margin_deg", 30.0)
    loss = dict(kind="regularized", equality_penalty_weight=1e8)
    loss.update(cfg.get("loss", {}))
    loss.setdefault("length_sigma", as_length(0.0))
    cfg["loss"] = loss
    defaults = optimizer.OptimizerConfig()
    oc = {k: getattr(defaults, k) for k in ("population_factor", "max_generations", "mutation",
                                             "crossover", "convergence_tol")}
    oc["grid_points"] = None
    oc.update(cfg.get("optimizer", {}))
    cfg["optimizer"] = oc
    cfg.setdefault("l_min_gap", as_length(0.0))
    cfg.setdefault("equalities", [])
    cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", 0)
    if fr.get("f_min_hz", 0) <= 0:
        raise ConfigError("config error at frequency/f_min_hz: must be > 0 for design")
    cfg["frequency"] = fr

    model = build_medium(cfg["medium"])
    l_max = meters(cfg.get("l_max"))
    if l_max is None:
        l_max = optimizer.longest_line_for(model, fr["f_min_hz"], cfg["margin_deg"])
        cfg["l_max"] = as_length(l_max)
    lspec = optimizer.LossSpec(kind=loss["kind"], length_sigma=meters(loss["length_sigma"]),
                               equality_penalty_weight=loss["equality_penalty_weight"])
    ocfg = optimizer.OptimizerConfig(seed=cfg["seed"], threads=args.threads, **oc)
    eqs = [(e["coefficients"], meters(e["rhs"])) for e in cfg["equalities"]]
    step = meters(cfg.get("quantization_step"))
    cfg.setdefault("quantization_step", None)
    cfg.setdefault("n_lines", None)

    def progress(gen, best):
        if gen % 50 == 0:
            print(f"generation {gen} best_loss {best:.6g}", file=sys.stderr)

    res = optimizer.design_lines(fr["f_min_hz"], fr["f_max_hz"], model, cfg["margin_deg"],
                                 l_max=l_max, n_lines=cfg["n_lines"],
                                 l_min_gap=meters(cfg["l_min_gap"]), loss=lspec, cfg=ocfg,
                                 quantization_step=step, extra_equalities=eqs, progress=progress)
    lc = line_count.recommend_for_model(l_max, fr["f_min_hz"], fr["f_max_hz"], model,
                                        cfg["margin_deg"])
    design = {
        "lengths_m": [float(x) for x in res.lengths],
        "n_lines": int(res.lengths.size),
        "n_lines_tried": [int(n) for n in res.n_lines_tried],
        "closed_form_line_count": _linecount_json(lc),
        "loss": float(res.loss),
        "anchors_hz": list(res.anchors_used),
        "feasible": bool(res.feasible),
        "converged": bool(res.converged),
        "generations_run": int(res.generations_run),
        "min_phase_deg": float(res.min_phase_deg),
        "min_phase_in_span_deg": float(res.min_phase_in_span_deg),
        "margin_met": bool(res.margin_met),
        "bands_above_margin": _bands(res.phase_curve, cfg["margin_deg"]),
    }
    hist = _csv(("generation", "best_loss"), [(i, _f(v)) for i, v in enumerate(res.history)])
    files = {"design.json": _dump_json(design), "phase_curve.csv": res.phase_curve.to_csv(),
             "history.csv": hist}
    return cfg, design, files


def cmd_design_ruler(cfg, args):
    cfg = copy.deepcopy(cfg)
    cfg["medium"] = resolve_medium(cfg["medium"])
    cfg["frequency"] = _freq(cfg, 501)
    cfg.setdefault("margin_deg", 30.0)
    cfg.setdefault("band_n", 0)
    cfg.setdefault("family", "golomb")
    cfg.setdefault("n_lines", None)
    fr = cfg["frequency"]
    model = build_medium(cfg["medium"])
    d = rulers.design_by_ruler(fr["f_min_hz"], fr["f_max_hz"], cfg["margin_deg"], model,
                               band_n=cfg["band_n"], n_lines=cfg["n_lines"],
                               family=cfg["family"], points=fr["points"])
    grid = frequency_grid(fr["f_min_hz"], fr["f_max_hz"], fr["points"])
    curve = effective_phase(d.lengths, model, grid)
    design = {
        "family": d.ruler.family,
        "marks": list(d.ruler.marks),
        "l0_m": float(d.l0),
        "lengths_m": [float(x) for x in d.lengths],
        "eps_real_used": float(d.eps_real),
        "covered_bands": [{"band_index": b.band_index, "f_min_hz": b.f_min, "f_max_hz": b.f_max}
                          for b in d.covered_bands],
        "min_phase_deg": float(d.min_phase_deg),
        "margin_met": bool(d.margin_met),
    }
    return cfg, design, {"design.json": _dump_json(design), "phase_curve.csv": curve.to_csv()}


def _linecount_json(r):
    return {"m_max": r.m_max, "m_min": r.m_min, "m": r.m, "n_lines": r.n_lines,
            "recommendation_band": list(r.recommendation_band),
            "harmonic_fallback": bool(r.harmonic_fallback)}


def cmd_linecount(cfg, args):
    cfg = copy.deepcopy(cfg)
    cfg["medium"] = resolve_medium(cfg["medium"])
    fr = dict(cfg["frequency"])
    cfg["frequency"] = fr
    cfg.setdefault("margin_deg", 30.0)
    model = build_medium(cfg["medium"])
    l_max = meters(cfg.get("l_max"))
    if l_max is None:
        if fr["f_min_hz"] <= 0:
            raise ConfigError("config error at l_max: required when f_min_hz is 0")
        l_max = optimizer.longest_line_for(model, fr["f_min_hz"], cfg["margin_deg"])
        cfg["l_max"] = as_length(l_max)
    r = line_count.recommend_for_model(l_max, fr["f_min_hz"], fr["f_max_hz"], model,
                                       cfg["margin_deg"])
    out = _linecount_json(r)
    out["lossless_closed_form"] = bool(getattr(model, "lossless", False)
                                       and not getattr(model, "dispersive", True))
    return cfg, out, {"linecount.json": _dump_json(out)}


def cmd_trl_band(cfg, args):
    cfg = copy.deepcopy(cfg)
    fr = dict(cfg["frequency"])
    cfg["frequency"] = fr
    cfg.setdefault("margin_deg", 30.0)
    n = cfg.get("band_n")
    if n is None:
        n = trl_classic.band_index(fr["f_min_hz"], fr["f_max_hz"], cfg["margin_deg"])
        cfg["band_n"] = n
    phi = trl_classic.achieved_margin(fr["f_min_hz"], fr["f_max_hz"], n)
    l = trl_classic.length_for_band(fr["f_min_hz"], cfg["eps_real"], phi, n, "low")
    lo, hi = trl_classic.band_edges(l, cfg["eps_real"], phi, n)
    out = {"length_diff_m": l, "achieved_margin_deg": phi, "band_index": n,
           "band_f_min_hz": lo, "band_f_max_hz": hi,
           "margin_shortfall_deg": max(0.0, cfg["margin_deg"] - phi)}
    return cfg, out, {"trl_design.json": _dump_json(out)}


def cmd_mc_sens(cfg, args):
    cfg = copy.deepcopy(cfg)
    cfg["medium"] = resolve_medium(cfg["medium"])
    cfg["frequency"] = _freq(cfg, 110)
    mc = dict(trials=500, noise_sigma=0.1, length_sigma=as_length(0.0), eps_sigma=[0.0, 0.0])
    mc.update(cfg.get("mc", {}))
    cfg["mc"] = mc
    cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", 0)
    fr = cfg["frequency"]
    if fr["f_min_hz"] <= 0:
        raise ConfigError("config error at frequency/f_min_hz: must be > 0 for mc-sens")
    model = build_medium(cfg["medium"])
    lengths = meters_list(cfg["lengths"])
    grid = frequency_grid(fr["f_min_hz"], fr["f_max_hz"], fr["points"])
    mcc = mc_sensitivity.McConfig(trials=mc["trials"], noise_sigma=mc["noise_sigma"],
                                  length_sigma=meters(mc["length_sigma"]),
                                  eps_sigma=tuple(mc["eps_sigma"]), seed=cfg["seed"])
    res = mc_sensitivity.run_mc(lengths, model, grid, mcc, threads=args.threads)
    dead = res.excluded >= res.trials
    if dead.any():
        raise DegenerateError(f"every trial is degenerate at {int(dead.sum())} frequencies, "
                              f"first at {res.frequency[dead][0]:g} Hz")
    rows = []
    for i, f in enumerate(res.frequency):
        for j, name in enumerate(mc_sensitivity.TERM_NAMES):
            rows.append((_f(f), name, _f(res.mae[i, j]), int(res.excluded[i])))
    mae_csv = _csv(("frequency_hz", "term_name", "mae", "excluded_trials"), rows)
    with np.errstate(divide="ignore"):
        inv = 1/res.lambda_nominal
    inv_csv = _csv(("frequency_hz", "lambda", "inverse_lambda"),
                   [(_f(f), _f(l), _f(v)) for f, l, v in zip(res.frequency, res.lambda_nominal, inv)])
    out = {"trials": res.trials, "excluded_total": int(res.excluded.sum()),
           "mean_mae": float(np.nanmean(res.mae)),
           "max_mae_frequency_hz": float(res.frequency[int(np.nanargmax(res.mae_mean))])}
    return cfg, out, {"mae.csv": mae_csv, "inverse_lambda.csv": inv_csv}


HANDLERS = {
    "analyze": cmd_analyze,
    "design-optimize": cmd_design_optimize,
    "design-ruler": cmd_design_ruler,
    "linecount": cmd_linecount,
    "trl-band": cmd_trl_band,
    "mc-sens": cmd_mc_sens,
}


HELP = {
    "analyze": "effective phase of a given line set",
    "design-optimize": "optimized line lengths by differential evolution",
    "design-ruler": "line lengths from a sparse ruler",
    "linecount": "recommended number of lines",
    "trl-band": "two-line TRL band design",
    "mc-sens": "Monte Carlo error-term sensitivity of a line set",
}


def build_parser():
    p = argparse.ArgumentParser(prog="mtrl-lines",
                                description="Multiline TRL line-length design and analysis")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", required=True, help="JSON job configuration")
        s.add_argument("--out", default=".", help="output directory (created if missing)")
        s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        s.add_argument("--threads", type=int, default=1, help="worker threads")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        validate(args.command, cfg)
        resolved, results, files = HANDLERS[args.command](cfg, args)
    except (ConfigError, FrequencyRangeError, UnsupportedOrderError, UnsupportedIndexError) as exc:
        print(f"mtrl-lines: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"mtrl-lines: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DegenerateError as exc:
        print(f"mtrl-lines: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        _write(out, name, text)
    summary = {"tool": "mtrl-lines", "version": __version__, "command": args.command,
               "config": resolved, "results": results,
               "outputs": sorted(files), "elapsed_s": time.perf_counter() - t0}
    _write(out, "summary.json", _dump_json(summary))
    print(_dump_json(results), end="")
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
