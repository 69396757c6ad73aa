"""Command-line front end.

Exit codes:
    0  success (for `verify`: every check passed)
    1  verification failure (checks ran, at least one failed)
    2  usage or configuration error
    3  numeric failure (guarded degeneracy: resonance, poles, overflow, ...)

Run configuration is a JSON object:

    {
      "preset": "SL",                      // or "params": {"sigma1": ..., ...}
      "realization": {                     // exactly one source
        "random": {"n": 2, "seed": 7},
        "soliton": {"n": 3, "seed": 7},
        "discrete_spectrum": {"k": [[0.0, 1.0]], "rows": [[[1,0],[0,1]]]},
        "file": "realization.json"
      },
      "grid": {"x": [-8.0, 8.0, 257], "t": [-1.0, 1.0, 65]},
      "flow_order": 1,
      "verify": {"seed": 0}
    }

Complex scalars are written as [re, im] pairs throughout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .core import (
    Realization,
    VesselParams,
    load_json,
    params_from_dict,
    preset_params,
    random_realization,
    random_soliton_realization,
    realization_from_dict,
    realization_from_discrete_spectrum,
    realization_to_dict,
    save_json,
    validate_params,
    _jsonable,
    _PRESETS,
)
from .evolution import build_generators, sample_frame, _detect_preset
from .exceptions import VesselError
from .verify import run_suite

__all__ = ["main", "cmd_presets", "cmd_synthesize", "cmd_verify", "cmd_hierarchy"]

_PRESET_LABELS = {"SL": "SL", "NLS": "NLS", "CanSys": "Can. Sys."}
_MAX_HIERARCHY_N = 8


class ConfigError(Exception):
    """Bad or contradictory run configuration (exit code 2)."""


def _use_color() -> bool:
    return "NO_COLOR" not in os.environ and sys.stdout.isatty()


def _verdict(ok: bool) -> str:
    word = "PASS" if ok else "FAIL"
    if _use_color():
        return f"\x1b[32m{word}\x1b[0m" if ok else f"\x1b[31m{word}\x1b[0m"
    return word


def _complex_of(v, what="value") -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
        isinstance(u, (int, float)) for u in v
    ):
        return complex(v[0], v[1])
    raise ConfigError(f"{what} must be a number or an [re, im] pair, got {v!r}")


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _params_of(cfg: dict) -> tuple[VesselParams, str | None]:
    has_preset = "preset" in cfg
    has_params = "params" in cfg
    if has_preset == has_params:
        raise ConfigError("config needs exactly one of 'preset' or 'params'")
    if has_preset:
        kind = cfg["preset"]
        if kind not in _PRESETS:
            raise ConfigError(f"unknown preset {kind!r}; choose from {', '.join(_PRESETS)}")
        return preset_params(kind), kind
    try:
        P = params_from_dict(cfg["params"])
    except (KeyError, ValueError, TypeError, VesselError) as exc:
        raise ConfigError(f"bad inline params: {exc}")
    rep = validate_params(P)
    if not rep.ok:
        raise ConfigError(f"inline params fail validation: {', '.join(rep.failing)}")
    return P, _detect_preset(P)


def _realization_of(cfg: dict, P: VesselParams) -> Realization:
    spec = cfg.get("realization")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'realization' object")
    sources = [k for k in ("random", "soliton", "discrete_spectrum", "file") if k in spec]
    if len(sources) != 1:
        raise ConfigError(
            "realization needs exactly one of 'random', 'soliton', 'discrete_spectrum', 'file'"
        )
    src = sources[0]
    if src == "file":
        try:
            return realization_from_dict(load_json(spec["file"]))
        except FileNotFoundError:
            raise ConfigError(f"realization file not found: {spec['file']}")
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad realization file: {exc}")
    if src == "random":
        opts = spec["random"]
        try:
            n = int(opts["n"])
            seed = int(opts.get("seed", 0))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("random realization needs integer 'n' (and optional 'seed')")
        return random_realization(n, P.p, P, seed)
    if src == "soliton":
        opts = spec["soliton"]
        try:
            n = int(opts.get("n", 3))
            seed = int(opts.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError("soliton realization takes integer 'n' and 'seed'")
        return random_soliton_realization(P, n=n, seed=seed)
    opts = spec["discrete_spectrum"]
    if "k" not in opts or "rows" not in opts:
        raise ConfigError("discrete_spectrum needs 'k' and 'rows'")
    k = [_complex_of(v, "spectrum entry") for v in opts["k"]]
    rows = [[_complex_of(v, "row entry") for v in row] for row in opts["rows"]]
    diag = opts.get("diag")
    if diag is not None:
        diag = [_complex_of(v, "diagonal entry") for v in diag]
    return realization_from_discrete_spectrum(P, k, rows, diag)


def _grid_of(cfg: dict) -> tuple[np.ndarray, np.ndarray]:
    grid = cfg.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("'grid' must be an object with 'x' and 't' triples")

    def axis(name, default):
        spec = grid.get(name, default)
        if (not isinstance(spec, (list, tuple)) or len(spec) != 3
                or not all(isinstance(v, (int, float)) for v in spec)):
            raise ConfigError(f"grid.{name} must be [lo, hi, count]")
        lo, hi, count = float(spec[0]), float(spec[1]), int(spec[2])
        if count < 2 or hi <= lo:
            raise ConfigError(f"grid.{name} needs hi > lo and count >= 2")
        return np.linspace(lo, hi, count)

    return axis("x", (-8.0, 8.0, 257)), axis("t", (-1.0, 1.0, 65))


def _flow_order_of(cfg: dict) -> int:
    order = cfg.get("flow_order", 1)
    if not isinstance(order, int) or order < 1:
        raise ConfigError("flow_order must be an integer >= 1")
    return order


# ---------------------------------------------------------------------------
# commands


def cmd_presets(args) -> int:
    for kind in _PRESETS:
        P = preset_params(kind)
        print(f"{_PRESET_LABELS[kind]}  (key: {kind}, p = {P.p})")
        for label, M in (("sigma1", P.sigma1), ("sigma2", P.sigma2), ("gamma", P.gamma)):
            rows = "; ".join(
                "[" + ", ".join(f"{v.real:g}{v.imag:+g}i" if v.imag else f"{v.real:g}"
                                for v in row) + "]"
                for row in M
            )
            print(f"    {label} = {rows}")
    return 0


def cmd_synthesize(args) -> int:
    cfg = _load_config(args.config)
    P, preset = _params_of(cfg)
    R = _realization_of(cfg, P)
    xs, ts = _grid_of(cfg)
    G = build_generators(P, R.A, order=_flow_order_of(cfg))
    frame = sample_frame(P, R, G, xs, ts, preset=preset)

    out = args.out or "frame.csv"
    frame.to_csv(out)
    print(f"wrote {out}  ({len(ts)} x {len(xs)} nodes, "
          f"{frame.masked_count()} masked, fields: {', '.join(frame.field_order)})")

    from .plotting import render_frame_figures

    base = out[:-4] if out.endswith(".csv") else out
    for p in render_frame_figures(frame, base):
        print(f"wrote {p}")

    report = {
        "realization": realization_to_dict(R),
        "preset": preset,
        "flow_order": G.order,
        "grid": {"x": [float(xs[0]), float(xs[-1]), len(xs)],
                 "t": [float(ts[0]), float(ts[-1]), len(ts)]},
        "frame": frame.report(),
    }
    if args.report:
        save_json(args.report, report)
        print(f"wrote {args.report}")
    return 0


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    P, preset = _params_of(cfg)
    R = _realization_of(cfg, P)
    overrides = cfg.get("verify", {})
    if not isinstance(overrides, dict):
        raise ConfigError("'verify' must be an object")
    seed = args.seed if args.seed is not None else int(overrides.pop("seed", 0))
    report = run_suite(P, R, preset=preset, seed=seed, config=overrides or None)

    for chk in report["checks"]:
        if "skipped" in chk:
            print(f"SKIP {chk['name']}: {chk['skipped']}")
            continue
        if "error" in chk:
            print(f"{_verdict(False)} {chk['name']}: {chk['error']}")
            continue
        # show the residual nearest to (or furthest past) its own tolerance
        res, tols = chk["residuals"], chk.get("tolerances", {})
        if res:
            key = max(res, key=lambda k: res[k] / (tols.get(k) or 1.0))
            detail = f"worst residual {res[key]:.3e}"
            if key in tols:
                detail += f" (tol {tols[key]:.0e})"
        else:
            detail = "no residuals"
        print(f"{_verdict(chk['ok'])} {chk['name']}  [{detail}]")
    for study in report["convergence"]:
        if "error" in study:
            print(f"{_verdict(False)} {study['name']}: {study['error']}")
            continue
        tag = ("converged to floor" if study["at_floor"]
               else f"observed order {study['observed_order']:.2f}")
        print(f"{_verdict(study['pass'])} {study['name']}  ({tag})")

    if args.report:
        save_json(args.report, _jsonable(report))
        print(f"wrote {args.report}")
    print(f"overall: {_verdict(report['ok'])}")
    return 0 if report["ok"] else 1


def cmd_hierarchy(args) -> int:
    from .hierarchy import bn, flow_polynomial, render

    if args.n < 0:
        raise ConfigError("--n must be >= 0")
    if args.n > _MAX_HIERARCHY_N:
        raise ConfigError(
            f"--n is capped at {_MAX_HIERARCHY_N}; the expressions grow "
            f"combinatorially beyond that"
        )
    for k in range(args.n + 1):
        print(render(bn(k), name=f"b{k}"))
    if args.flow:
        for k in range(args.n + 1):
            print(render(flow_polynomial(k), name=f"r{k}"))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vesselpde",
        description="Exact integrable-PDE solutions from finite-dimensional "
                    "realizations, with identity verification.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("presets", help="list the built-in parameter families")
    sp.set_defaults(fn=cmd_presets)

    sp = sub.add_parser("synthesize", help="sample a solution frame to CSV + figures")
    sp.add_argument("--config", required=True, help="run-configuration JSON file")
    sp.add_argument("--out", default=None, help="output CSV path (default frame.csv)")
    sp.add_argument("--report", default=None, help="optional JSON report path")
    sp.set_defaults(fn=cmd_synthesize)

    sp = sub.add_parser("verify", help="run the verification suite")
    sp.add_argument("--config", required=True, help="run-configuration JSON file")
    sp.add_argument("--seed", type=int, default=None, help="suite RNG seed")
    sp.add_argument("--report", default=None, help="optional JSON report path")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("hierarchy", help="print hierarchy polynomials")
    sp.add_argument("--n", type=int, required=True, help="highest index to print (<= 8)")
    sp.add_argument("--flow", action="store_true",
                    help="also print the flow right-hand-side polynomials")
    sp.set_defaults(fn=cmd_hierarchy)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VesselError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
