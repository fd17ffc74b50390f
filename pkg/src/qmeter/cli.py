"""Command-line front end: ``qmeter analyze|sweep|verify|dilate``.

Exit codes: 0 success, 1 verification failure or a violated theorem,
2 unreadable or malformed input, 3 input that fails validation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from qmeter import config as cfg
from qmeter.exceptions import ConfigError, QmeterError
from qmeter.instrument import channel_residual, instrument_residual, repetition_error
from qmeter.model import (
    IndirectModel,
    derive_channel,
    derive_instrument,
    derive_povm,
    dilate_channel,
    dilate_povm,
    realize_instrument,
)
from qmeter.povm import povm_distance
from qmeter.sampling import random_channel, random_instrument, random_povm
from qmeter.uncertainty import UncertaintyReport, evaluate
from qmeter.verify import run_suites, suite_names

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3
DILATION_TOL = 1e-9

SWEEP_COLUMNS = (
    "param", "epsilon", "eta", "sigma_a", "sigma_b", "sigma_x", "sigma_b_post",
    "rhs", "heis_lhs", "uvur_lhs", "gur_lhs", "repetition_error",
)


def canonical_json(data) -> str:
    """Sorted keys, shortest round-trip floats, LF-terminated."""
    return json.dumps(_plain(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def fmt(x) -> str:
    """Fixed 12-significant-digit rendering used in tables."""
    if isinstance(x, (bool, np.bool_)):
        return "yes" if x else "no"
    if x is None:
        return "-"
    return f"{float(x):.12g}"


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in rows)


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _document(args) -> dict:
    doc = cfg.load_document(args.config) if args.config else {}
    doc = cfg.with_defaults(doc)
    if args.grid_size is not None:
        doc["grid"]["n_points"] = args.grid_size
    if args.hbar is not None:
        doc["grid"]["hbar"] = args.hbar
    if args.probe_width is not None:
        doc["model"].setdefault("probe", {"kind": "gaussian"})["width"] = args.probe_width
    return doc


# -- analyze ------------------------------------------------------------------

def report_table(rep: UncertaintyReport) -> str:
    out = ["quantities\n"]
    out.append(_table([["name", "value"]] + [
        [name, fmt(getattr(rep, name))]
        for name in ("epsilon", "eta", "sigma_a", "sigma_b", "sigma_x", "sigma_b_post",
                     "cross_term_uvur", "cross_term_uvur_model", "cross_term_sigma_x", "cross_term_post", "rhs")
    ]))
    out.append("\nrelations (satisfied means lhs >= rhs - 1e-9)\n")
    out.append(_table([["relation", "lhs", "rhs", "margin", "satisfied"]] + [
        [name, fmt(r.lhs), fmt(r.rhs), fmt(r.margin), fmt(r.satisfied)] for name, r in rep.relations.items()
    ]))
    c = rep.conditions
    out.append(f"\nconditions (operator-norm threshold {c.tol:g})\n")
    flags = {
        "unbiased_noise": c.unbiased_noise,
        "unbiased_disturbance": c.unbiased_disturbance,
        "independent_noise": c.independent_noise,
        "independent_disturbance": c.independent_disturbance,
        "n_commutes_b": c.n_commutes_b,
        "d_commutes_a": c.d_commutes_a,
        "noise_commutes_b_in": c.noise_commutes_b_in,
        "disturbance_commutes_a_in": c.disturbance_commutes_a_in,
        "noise_in_probe": c.noise_in_probe,
        "disturbance_in_probe": c.disturbance_in_probe,
        "nondisturbing": rep.nondisturbing,
        "precise": rep.precise,
    }
    out.append(_table([["flag", "value"]] + [[k, fmt(v)] for k, v in flags.items()]))
    bad = rep.violations()
    out.append("\nviolated theorems: " + (", ".join(bad) if bad else "none") + "\n")
    return "".join(out)


def _row(param, rep: UncertaintyReport, rep_err: float) -> list:
    r = rep.relations
    return [
        param, rep.epsilon, rep.eta, rep.sigma_a, rep.sigma_b, rep.sigma_x, rep.sigma_b_post,
        rep.rhs, r["heisenberg"].lhs, r["uvur"].lhs, r["gur"].lhs, rep_err,
    ]


def cmd_analyze(args) -> int:
    an = cfg.resolve(_document(args))
    rep = evaluate(an.model, an.a, an.b, an.rho)
    if args.format == "json":
        text = canonical_json(rep.to_dict() | {"violations": rep.violations()})
    elif args.format == "csv":
        text = _csv([[repr(v) if isinstance(v, float) else v
                      for v in _row("", rep, repetition_error(derive_instrument(an.model), an.rho))]])
    else:
        text = report_table(rep)
    _emit(text, args.out)
    return EXIT_FAIL if rep.violations() else EXIT_OK


# -- sweep --------------------------------------------------------------------

def cmd_sweep(args) -> int:
    base = _document(args)
    if cfg.SWEEP_PARAMETERS[args.param][0] != "state" and base["model"].get("kind", "von_neumann") not in cfg.GRID_KINDS:
        raise ConfigError(f"parameter '{args.param}' only applies to grid models")
    rows, failed = [], False
    for value in args.values:
        an = cfg.resolve(cfg.set_parameter(base, args.param, value))
        rep = evaluate(an.model, an.a, an.b, an.rho)
        failed |= bool(rep.violations())
        rows.append(_row(value, rep, repetition_error(derive_instrument(an.model), an.rho)))
    if args.format == "json":
        text = canonical_json([dict(zip(SWEEP_COLUMNS, r)) for r in rows])
    elif args.format == "table":
        text = _table([list(SWEEP_COLUMNS)] + [[fmt(v) for v in r] for r in rows])
    else:
        text = _csv([[repr(float(v)) for v in r] for r in rows])
    _emit(text, args.out)
    return EXIT_FAIL if failed else EXIT_OK


# -- verify -------------------------------------------------------------------

def cmd_verify(args) -> int:
    results = run_suites(args.seed, args.count, args.tolerance, args.suite or None)
    if args.format == "json":
        text = canonical_json([
            {"suite": r.name, "cases": r.cases, "worst": r.worst, "tol": r.tol, "passed": r.passed} for r in results
        ])
    else:
        rows = [["suite", "cases", "worst", "tol", "result"]]
        rows += [[r.name, str(r.cases), fmt(r.worst), fmt(r.tol), "PASS" if r.passed else "FAIL"] for r in results]
        passed = sum(r.passed for r in results)
        text = _table(rows) + f"\n{passed}/{len(results)} suites passed (seed {args.seed})\n"
    _emit(text, args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# -- dilate -------------------------------------------------------------------

def _dilation_target(doc: dict, rng: np.random.Generator):
    kind = doc.get("kind")
    if "random" in doc:
        r = doc["random"]
        dim = int(r.get("dim", 2))
        makers = {"instrument": random_instrument, "povm": random_povm, "channel": random_channel}
        if kind not in makers:
            raise ConfigError(f"cannot draw a random '{kind}'")
        return kind, makers[kind](rng, dim)
    if kind in ("instrument", "luders"):
        return "instrument", cfg.resolve_instrument(doc)
    if kind == "povm":
        return "povm", cfg.resolve_povm(doc)
    if kind == "channel":
        return "channel", cfg.resolve_channel(doc)
    raise ConfigError(f"dilate needs kind instrument, luders, povm or channel, got {kind!r}")


def dilate_document(doc: dict, seed: int = 0) -> dict:
    """Realize an instrument, POVM or channel as an indirect model and
    report how well the model reproduces it."""
    kind, target = _dilation_target(doc, np.random.default_rng(seed))
    if kind == "instrument":
        model = realize_instrument(target)
        residual = instrument_residual(derive_instrument(model), target)
    elif kind == "povm":
        model = dilate_povm(target)
        residual = povm_distance(derive_povm(model), target)
    else:
        model = dilate_channel(target)
        residual = channel_residual(derive_channel(model), target)
    u = model.dense_unitary()
    return {
        "kind": kind,
        "dim_object": model.dim_object,
        "dim_probe": model.dim_probe,
        "residual": residual,
        "unitarity_residual": float(np.max(np.abs(u.conj().T @ u - np.eye(model.joint_dim)))),
        "model": serialize_model(model),
    }


def serialize_model(m: IndirectModel) -> dict:
    return {
        "kind": "custom",
        "unitary": cfg.encode_matrix(m.dense_unitary()),
        "probe_state": {"kind": "matrix", "matrix": cfg.encode_matrix(m.probe_state)},
        "meter": cfg.encode_matrix(m.probe_observable),
        "hbar": m.hbar,
    }


def cmd_dilate(args) -> int:
    if not args.config:
        raise ConfigError("dilate needs --config")
    result = dilate_document(cfg.load_document(args.config), args.seed)
    ok = result["residual"] <= DILATION_TOL and result["unitarity_residual"] <= DILATION_TOL
    if args.format == "json":
        text = canonical_json(result)
    else:
        rows = [["field", "value"]] + [[k, fmt(result[k]) if k.endswith("residual") else str(result[k])]
                                       for k in ("kind", "dim_object", "dim_probe", "residual", "unitarity_residual")]
        text = _table(rows)
    _emit(text, args.out)
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--grid-size", type=int, help="number of grid points N")
    common.add_argument("--probe-width", type=float, help="width of the Gaussian probe")
    common.add_argument("--hbar", type=float, help="value of hbar")
    common.add_argument("--seed", type=int, default=0, help="seed for random draws")
    common.add_argument("--out", help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="qmeter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="evaluate every uncertainty relation for one configuration")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", parents=[common], help="evaluate a configuration over a parameter range")
    p.add_argument("--param", required=True, choices=sorted(cfg.SWEEP_PARAMETERS))
    p.add_argument("--values", required=True, nargs="+", type=float)
    p.add_argument("--format", choices=("table", "json", "csv"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="run the seeded invariant suites")
    p.add_argument("--count", type=int, help="cases per suite (default: each suite's own count)")
    p.add_argument("--suite", action="append", choices=suite_names(), help="run only this suite (repeatable)")
    p.add_argument("--tolerance", type=float, help="override every suite tolerance (for exercising the harness)")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dilate", parents=[common], help="realize an instrument, POVM or channel as a model")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_dilate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except QmeterError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
