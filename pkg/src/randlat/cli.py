"""Command line front end with reproducible result emission.

Every run writes four artifacts into the output directory: report.txt
(the human text, also printed to stdout), results.json and results.csv
(machine outputs, byte-stable for a fixed config and seed), and
manifest.json (config echo, versions, seed provenance, runtime).  The
manifest doubles as a config file: --config manifest.json re-runs the
same computation and reproduces the primary outputs byte for byte.

Exit codes: 0 success (and verdict pass), 2 verdict failure, 1 runtime
error (structured JSON on stderr), 64 usage error.
"""

import argparse
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy

from . import __version__
from .admissible import FILTERS, enumerate_admissible, rogers_weight
from .errors import BudgetError
from .experiments import (
    ExperimentConfig,
    StatReport,
    run_brownian,
    run_clt,
    run_growth_scan,
    run_poisson,
    verify_rogers_k2,
)
from .geometry import VsupConvergenceError, log_v_tilde, v_sup
from .jintegral import j_integral
from .lattices import CountCurve, count_curve, lll_reduce, sample_lattice
from .partitions import (
    exact_main_term,
    limit_moment,
    normalized_main_term,
    partitions_no_singletons,
    threshold_c,
)

RESULT_SCHEMA = "randlat.result/1"
MANIFEST_SCHEMA = "randlat.manifest/1"
ERROR_SCHEMA = "randlat.error/1"
SEED_ENV = "RANDLAT_SEED"
RECORD_CSV_HEADER = "name,estimate,se,oracle,allowance,verdict"
SHAPE_CSV_HEADER = "method,a,n,c,log_value,rel_se,samples,seed"


class UsageError(Exception):
    """Bad flags, config, or parameter values; maps to exit 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# coercions (flags arrive as strings; config values as JSON scalars/lists)


def _int(v):
    if isinstance(v, bool):
        raise UsageError(f"expected an integer, got {v!r}")
    if isinstance(v, int):
        return v
    try:
        return int(str(v), 10)
    except ValueError:
        raise UsageError(f"expected an integer, got {v!r}")


def _float(v):
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise UsageError(f"expected a number, got {v!r}")
    if not math.isfinite(out):
        raise UsageError(f"expected a finite number, got {v!r}")
    return out


def _floats(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)) or not v:
        raise UsageError(f"expected a comma-separated list of numbers, got {v!r}")
    return tuple(_float(x) for x in v)


def _ints(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)) or not v:
        raise UsageError(f"expected a comma-separated list of integers, got {v!r}")
    return tuple(_int(x) for x in v)


def _str(v):
    return str(v)


def _flag(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("true", "1", "yes"):
        return True
    if str(v).lower() in ("false", "0", "no"):
        return False
    raise UsageError(f"expected a boolean, got {v!r}")


# ---------------------------------------------------------------------------
# subcommand table


@dataclass(frozen=True)
class Param:
    flag: str
    coerce: Callable
    default: object = None
    required: bool = False
    help: str = ""
    switch: bool = False  # bare --flag without a value

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


@dataclass(frozen=True)
class Subcommand:
    name: str
    params: Tuple[Param, ...]
    seeded: bool
    runner: Callable
    help: str


def _require(cond, message):
    if not cond:
        raise UsageError(message)


# ---- plain computations ---------------------------------------------------


def _run_moments(p):
    k, f = p["k"], p["f"]
    _require(2 <= k <= 12, "need a moment order k in 2..12")
    _require(f > 0, "need f > 0")
    count = len(partitions_no_singletons(k))
    exact = exact_main_term(k, f)
    norm = normalized_main_term(k, f)
    lim = limit_moment(k)
    payload = {
        "k": k,
        "f": f,
        "partition_count": count,
        "exact_main_term": exact,
        "normalized_main_term": norm,
        "limit_moment": lim,
    }
    csv = [
        "k,f,partition_count,exact_main_term,normalized_main_term,limit_moment",
        "%d,%s,%d,%s,%s,%s" % (k, repr(f), count, repr(exact), repr(norm), repr(lim)),
    ]
    text = "\n".join(
        [
            "k: %d" % k,
            "f: %.12g" % f,
            "partition_count: %d" % count,
            "exact_main_term: %.12g" % exact,
            "normalized_main_term: %.12g" % norm,
            "limit_moment: %.12g" % lim,
        ]
    )
    return payload, csv, text, 0


def _run_thresholds(p):
    _require(3 <= p["k_max"] <= 64, "need k-max in 3..64")
    rows = []
    for k in range(3, p["k_max"] + 1):
        rows.append({"k": k, "c_k": threshold_c(k), "log_v_tilde": log_v_tilde(k - 1)})
    csv = ["k,c_k,log_v_tilde"] + [
        "%d,%s,%s" % (r["k"], repr(r["c_k"]), repr(r["log_v_tilde"])) for r in rows
    ]
    lines = ["%-4s %-12s %s" % ("k", "c_k", "log_v_tilde_km1")]
    for r in rows:
        lines.append("%-4d %-12.6f %.6f" % (r["k"], r["c_k"], r["log_v_tilde"]))
    return {"thresholds": rows}, csv, "\n".join(lines), 0


def _run_admissible(p):
    _require(p["k"] >= 1, "need k >= 1")
    _require(p["q"] >= 1, "need q >= 1")
    _require(p["max_entry"] >= 0, "need max-entry >= 0")
    _require(p["filter"] in FILTERS, "filter must be one of %s" % (FILTERS,))
    _require(p["budget"] >= 1, "need a positive budget")
    _require(p["n"] is None or p["n"] >= 3, "Rogers weights need n >= 3")
    mats = enumerate_admissible(
        p["k"], p["q"], p["max_entry"], filter=p["filter"], budget=p["budget"]
    )
    n = p["n"]
    weight_sum = (
        None if n is None else sum(math.exp(rogers_weight(d, n)) for d in mats)
    )
    csv = ["k,q,m,rows,e,log_weight"]
    for d in mats:
        rows_txt = "|".join(" ".join(str(v) for v in row) for row in d.rows)
        e_txt = " ".join(str(v) for v in d.e)
        w = "" if n is None else repr(rogers_weight(d, n))
        csv.append("%d,%d,%d,%s,%s,%s" % (d.k, d.q, d.m, rows_txt, e_txt, w))
    payload = {
        "k": p["k"],
        "q": p["q"],
        "max_entry": p["max_entry"],
        "filter": p["filter"],
        "count": len(mats),
        "matrices": [json.loads(d.to_json()) for d in mats],
    }
    lines = ["count: %d" % len(mats)]
    if weight_sum is not None:
        payload["n"] = n
        payload["weight_sum"] = weight_sum
        lines.append("weight_sum: %.12g" % weight_sum)
    return payload, csv, "\n".join(lines), 0


def _run_vsup(p):
    _require(
        p["mode"] in ("auto", "closed_form_only", "optimizer_only"),
        "mode must be auto, closed_form_only, or optimizer_only",
    )
    _require(all(w > 0 for w in p["weights"]), "weights must be positive")
    _require(p["starts"] >= 1, "need at least one optimizer start")
    res = v_sup(p["weights"], mode=p["mode"], starts=p["starts"], seed=p["seed"])
    payload = {
        "weights": list(p["weights"]),
        "value": res.value,
        "log_value": math.log(res.value),
        "method": res.method,
        "rule": res.rule,
        "converged": res.converged,
        "iterations": res.iterations,
        "seed": p["seed"],
    }
    csv = [SHAPE_CSV_HEADER, res.csv_row(seed=p["seed"])]
    text = "\n".join(
        [
            "value: %.12g" % res.value,
            "log_value: %.12g" % math.log(res.value),
            "method: %s" % res.method,
            "rule: %s" % (res.rule or ""),
            "converged: %s" % res.converged,
            "iterations: %d" % res.iterations,
        ]
    )
    return payload, csv, text, 0


def _run_jint(p):
    _require(p["n"] >= 3, "need n >= 3")
    _require(p["method"] in ("direct", "reduced"), "method must be direct or reduced")
    _require(p["samples"] >= 1000, "need at least 10^3 samples")
    _require(all(w > 0 for w in p["weights"]), "weights must be positive")
    est = j_integral(
        p["n"], p["weights"], method=p["method"], samples=p["samples"], seed=p["seed"]
    )
    payload = {
        "n": est.n,
        "a": est.a,
        "weights": [float(x) for x in est.c],
        "method": est.method,
        "log_mean": est.log_mean,
        "rel_se": est.rel_se,
        "samples": est.samples,
        "degenerate": est.degenerate,
        "seed": p["seed"],
    }
    csv = [SHAPE_CSV_HEADER, est.csv_row(seed=p["seed"])]
    text = "\n".join(
        [
            "log_mean: %.12g" % est.log_mean,
            "rel_se: %.6g" % est.rel_se,
            "samples: %d" % est.samples,
            "method: %s" % est.method,
            "degenerate: %s" % est.degenerate,
        ]
    )
    return payload, csv, text, 0


def _run_sample(p):
    _require(p["n"] >= 2, "need n >= 2")
    _require(p["p"] is None or p["p"] >= 1000, "sampling needs p >= 1000")
    lat = sample_lattice(p["n"], p["p"], seed=p["seed"])
    if p["reduce"]:
        lat = lll_reduce(lat)
    payload = {
        "n": lat.n,
        "p": lat.p,
        "seed": p["seed"],
        "provenance": lat.provenance,
        "scale": lat.scale,
        "int_basis": [[int(v) for v in row] for row in lat.int_basis],
    }
    csv = ["row,col,value"]
    basis = lat.basis
    for i in range(lat.n):
        for j in range(lat.n):
            csv.append("%d,%d,%s" % (i, j, repr(float(basis[i, j]))))
    text = "n: %d\np: %d\nseed: %d\nbasis:\n%s" % (
        lat.n,
        lat.p,
        p["seed"],
        lat.basis_text(),
    )
    return payload, csv, text, 0


def _run_count(p):
    _require(p["n"] >= 2, "need n >= 2")
    _require(p["p"] is None or p["p"] >= 1000, "sampling needs p >= 1000")
    grid = p["grid"]
    _require(
        all(x >= 0 for x in grid) and all(b > a for a, b in zip(grid, grid[1:])),
        "grid must be non-negative and strictly increasing",
    )
    _require(p["max_nodes"] >= 1, "need a positive node budget")
    lat = sample_lattice(p["n"], p["p"], seed=p["seed"])
    curve = count_curve(lat, grid, p["max_nodes"])
    payload = {
        "n": lat.n,
        "p": lat.p,
        "seed": p["seed"],
        "grid": list(curve.grid),
        "counts": [int(c) for c in curve.counts],
        "residuals": [float(r) for r in curve.residuals],
        "z_values": [float(z) for z in curve.z_values],
    }
    csv = [CountCurve.CSV_HEADER] + list(curve.csv_rows())
    lines = ["%-12s %-10s %-14s %s" % ("x", "N", "N_minus_x", "Z")]
    for x, c, r, z in zip(curve.grid, curve.counts, curve.residuals, curve.z_values):
        lines.append("%-12.6g %-10d %-14.6g %.6g" % (x, c, r, z))
    return payload, csv, "\n".join(lines), 0


# ---- experiment reports ---------------------------------------------------


def _report_outputs(report: StatReport):
    payload = json.loads(report.to_json())
    csv = [RECORD_CSV_HEADER]
    for r in report.records:
        csv.append(
            "%s,%s,%s,%s,%s,%s"
            % (r.name, repr(r.estimate), repr(r.se), repr(r.oracle),
               repr(r.allowance), r.verdict)
        )
    return payload, csv, report.to_text().rstrip("\n"), 0 if report.passed else 2


def _experiment_config(p, **overrides) -> ExperimentConfig:
    fields = {
        "n": p["n"],
        "replicates": p["replicates"],
        "seed": p["seed"],
        "p": p["p"],
        "cutoff": p["cutoff"],
        "workers": p["workers"],
        "max_nodes": p["max_nodes"],
        "raw_csv": p.get("raw_csv"),
    }
    fields.update(overrides)
    try:
        return ExperimentConfig(**fields)
    except ValueError as exc:
        raise UsageError(str(exc))


def _run_clt_cmd(p):
    cfg = _experiment_config(p, x=p["x"], moment_orders=p["moment_orders"])
    _require(cfg.x > 0, "clt needs a volume x > 0")
    return _report_outputs(run_clt(cfg))


def _run_poisson_cmd(p):
    cfg = _experiment_config(p, x=p["x"])
    _require(cfg.x <= 50, "the fixed-x regime expects x <= 50")
    return _report_outputs(run_poisson(cfg))


def _run_brownian_cmd(p):
    cfg = _experiment_config(p, x=p["f"], t_grid=p["t_grid"])
    _require(cfg.x > 0, "brownian needs a top volume f > 0")
    _require(3 <= len(cfg.t_grid) <= 10, "need a t-grid of 3..10 points")
    return _report_outputs(run_brownian(cfg))


def _run_growth_cmd(p):
    ns = p["n_list"]
    _require(p["k"] >= 3, "need k >= 3")
    _require(
        len(ns) >= 2 and all(b > a for a, b in zip(ns, ns[1:])) and ns[-1] <= 200,
        "n-list must be increasing with at least two entries, all <= 200",
    )
    _require(p["samples"] >= 1000, "need at least 10^3 samples")
    report = run_growth_scan(p["k"], p["c"], ns, samples=p["samples"], seed=p["seed"])
    return _report_outputs(report)


def _run_verify_cmd(p):
    _require(p["n"] >= 5, "exact-counting verification needs n >= 5")
    _require(0 < p["x"] <= 100, "need a volume in (0, 100]")
    _require(p["replicates"] >= 100, "need at least 100 replicates")
    _require(p["cutoff"] >= 10, "need cutoff >= 10")
    report = verify_rogers_k2(
        p["n"],
        p["x"],
        p["replicates"],
        cutoff=p["cutoff"],
        p=p["p"],
        seed=p["seed"],
        workers=p["workers"],
    )
    return _report_outputs(report)


_EXPERIMENT_COMMON = (
    Param("--replicates", _int, default=1000, help="number of sampled lattices"),
    Param("--p", _int, help="Hecke prime (default: next prime >= 1e4 n^2)"),
    Param("--cutoff", _int, default=10 ** 4, help="variance series cutoff"),
    Param("--workers", _int, default=0, help="parallel worker processes"),
    Param("--max-nodes", _int, default=10 ** 8, help="enumeration node budget"),
    Param("--raw-csv", _str, help="also stream per-replicate rows to this file"),
)

SUBCOMMANDS: Dict[str, Subcommand] = {}


def _register(name, params, seeded, runner, help):
    SUBCOMMANDS[name] = Subcommand(name, tuple(params), seeded, runner, help)


_register(
    "moments",
    [
        Param("--k", _int, required=True, help="moment order"),
        Param("--f", _float, required=True, help="volume value f"),
    ],
    False,
    _run_moments,
    "exact moment main term, its normalization, and the f->infinity limit",
)
_register(
    "thresholds",
    [Param("--k-max", _int, default=8, help="largest moment order to tabulate")],
    False,
    _run_thresholds,
    "critical growth thresholds c_k",
)
_register(
    "admissible",
    [
        Param("--k", _int, required=True, help="number of columns"),
        Param("--q", _int, required=True, help="pivot value q"),
        Param("--max-entry", _int, required=True, help="entry bound"),
        Param("--filter", _str, default="all", help="one of %s" % (FILTERS,)),
        Param("--n", _int, help="ambient dimension for Rogers weights"),
        Param("--budget", _int, default=10 ** 7, help="search node budget"),
    ],
    False,
    _run_admissible,
    "enumerate admissible integer matrices",
)
_register(
    "vsup",
    [
        Param("--weights", _floats, required=True, help="comma-separated weights"),
        Param("--mode", _str, default="auto", help="auto, closed_form_only, optimizer_only"),
        Param("--starts", _int, default=32, help="optimizer restarts"),
    ],
    True,
    _run_vsup,
    "supremum parallelotope volume V_a[c]",
)
_register(
    "jint",
    [
        Param("--n", _int, required=True, help="ambient dimension"),
        Param("--weights", _floats, required=True, help="comma-separated weights"),
        Param("--method", _str, default="reduced", help="direct or reduced"),
        Param("--samples", _int, default=10 ** 5, help="Monte Carlo samples"),
    ],
    True,
    _run_jint,
    "Monte Carlo J-integral estimate",
)
_register(
    "sample",
    [
        Param("--n", _int, required=True, help="ambient dimension"),
        Param("--p", _int, help="Hecke prime (default: next prime >= 1e4 n^2)"),
        Param("--reduce", _flag, default=False, switch=True, help="LLL-reduce the basis"),
    ],
    True,
    _run_sample,
    "sample one random lattice and print its basis",
)
_register(
    "count",
    [
        Param("--n", _int, required=True, help="ambient dimension"),
        Param("--p", _int, help="Hecke prime (default: next prime >= 1e4 n^2)"),
        Param("--grid", _floats, required=True, help="increasing volume grid"),
        Param("--max-nodes", _int, default=10 ** 8, help="enumeration node budget"),
    ],
    True,
    _run_count,
    "ball counts of one sampled lattice on a volume grid",
)
_register(
    "clt",
    [
        Param("--n", _int, required=True, help="ambient dimension"),
        Param("--x", _float, required=True, help="ball volume"),
        Param("--moment-orders", _int, default=4, help="highest moment order"),
        *_EXPERIMENT_COMMON,
    ],
    True,
    _run_clt_cmd,
    "normalized count moments and KS distance at fixed volume",
)
_register(
    "poisson",
    [
        Param("--n", _int, required=True, help="ambient dimension"),
        Param("--x", _float, required=True, help="ball volume (<= 50)"),
        *_EXPERIMENT_COMMON,
    ],
    True,
    _run_poisson_cmd,
    "small-volume count law against the Poisson limit",
)
_register(
    "brownian",
    [
        Param("--n", _int, required=True, help="ambient dimension"),
        Param("--f", _float, required=True, help="top volume of the path"),
        Param("--t-grid", _floats, default=(0.25, 0.5, 0.75, 1.0),
              help="increasing grid within (0, 1]"),
        *_EXPERIMENT_COMMON,
    ],
    True,
    _run_brownian_cmd,
    "count-path statistics against the Brownian limit",
)
_register(
    "growth",
    [
        Param("--k", _int, required=True, help="moment order"),
        Param("--c", _float, required=True, help="exponential rate in f = e^{cn}"),
        Param("--n-list", _ints, required=True, help="increasing dimensions"),
        Param("--samples", _int, default=2 * 10 ** 5, help="Monte Carlo samples per n"),
    ],
    True,
    _run_growth_cmd,
    "remainder growth slope across the threshold c_k",
)
_register(
    "verify-rogers",
    [
        Param("--n", _int, required=True, help="ambient dimension (>= 5)"),
        Param("--x", _float, required=True, help="ball volume in (0, 100]"),
        *_EXPERIMENT_COMMON,
    ],
    True,
    _run_verify_cmd,
    "second count moment against the k=2 series",
)


# ---------------------------------------------------------------------------
# parsing, merging, dispatch


def build_parser() -> _Parser:
    parser = _Parser(prog="randlat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="randlat " + __version__)
    subs = parser.add_subparsers(dest="command")
    for sub in SUBCOMMANDS.values():
        sp = subs.add_parser(sub.name, help=sub.help, prog="randlat " + sub.name)
        for param in sub.params:
            if param.switch:
                sp.add_argument(param.flag, action="store_const", const=True,
                                default=None, help=param.help)
            else:
                sp.add_argument(param.flag, default=None, help=param.help)
        if sub.seeded:
            sp.add_argument("--seed", default=None, help="master seed")
        sp.add_argument("--config", default=None,
                        help="JSON parameter file (flags win); accepts a manifest")
        sp.add_argument("--out-dir", default=None, help="output directory (default .)")
        sp.add_argument("--format", default=None,
                        help="machine outputs to write: csv, json, or csv,json")
    return parser


def _load_config(path: str, subcommand: str) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    if doc.get("schema") == MANIFEST_SCHEMA or "params" in doc:
        if doc.get("subcommand") not in (None, subcommand):
            raise UsageError(
                "config %s was written by %r, not %r"
                % (path, doc.get("subcommand"), subcommand)
            )
        doc = doc.get("params", {})
    return doc


def _resolve_params(sub: Subcommand, args) -> Tuple[Dict, Optional[str]]:
    config = {}
    if args.config is not None:
        config = _load_config(args.config, sub.name)
        allowed = {p.dest for p in sub.params} | {"seed", "out_dir"}
        unknown = sorted(set(config) - allowed)
        if unknown:
            raise UsageError(
                "unknown config keys for %s: %s" % (sub.name, ", ".join(unknown))
            )
    params = {}
    for param in sub.params:
        value = getattr(args, param.dest)
        if value is None and param.dest in config:
            value = config[param.dest]
        if value is None:
            if param.required:
                raise UsageError(f"missing required flag {param.flag}")
            params[param.dest] = param.default
        else:
            params[param.dest] = param.coerce(value)
    seed_source = None
    if sub.seeded:
        if args.seed is not None:
            params["seed"], seed_source = _int(args.seed), "flag"
        elif "seed" in config:
            params["seed"], seed_source = _int(config["seed"]), "config"
        elif os.environ.get(SEED_ENV):
            params["seed"], seed_source = _int(os.environ[SEED_ENV]), "env"
        else:
            params["seed"] = int(np.random.SeedSequence().entropy % (2 ** 63))
            seed_source = "entropy"
    return params, seed_source


def _json_safe(value):
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        sub = SUBCOMMANDS[args.command]
        params, seed_source = _resolve_params(sub, args)
        out_dir = args.out_dir
        if out_dir is None:
            out_dir = _load_config_out_dir(args) or "."
        formats = _parse_formats(args)
        try:
            os.makedirs(out_dir, exist_ok=True)
            probe = os.path.join(out_dir, ".write_probe")
            _write(probe, "")
            os.remove(probe)
        except OSError as exc:
            raise UsageError(f"output directory {out_dir} is not writable: {exc}")
        if params.get("raw_csv"):
            params["raw_csv"] = os.path.join(out_dir, params["raw_csv"])
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 64

    started = time.time()
    try:
        payload, csv_lines, text, code = sub.runner(params)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 64
    except (RuntimeError, ArithmeticError, ValueError, OSError) as exc:
        err = {
            "schema": ERROR_SCHEMA,
            "subcommand": sub.name,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        blob = json.dumps(err, sort_keys=True, indent=2) + "\n"
        print(blob, file=sys.stderr, end="")
        try:
            _write(os.path.join(out_dir, "error.json"), blob)
        except OSError:
            pass
        return 1
    runtime = time.time() - started

    doc = payload
    if "schema" not in doc:
        doc = {"schema": RESULT_SCHEMA, "subcommand": sub.name, **payload}
    _write(os.path.join(out_dir, "report.txt"), text + "\n")
    if "json" in formats:
        _write(
            os.path.join(out_dir, "results.json"),
            json.dumps(doc, sort_keys=True, indent=2) + "\n",
        )
    if "csv" in formats:
        _write(os.path.join(out_dir, "results.csv"), "\n".join(csv_lines) + "\n")
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "subcommand": sub.name,
        "params": {k: _json_safe(v) for k, v in params.items()},
        "out_dir": out_dir,
        "formats": sorted(formats),
        "seed_source": seed_source,
        "versions": {
            "randlat": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "runtime_seconds": runtime,
    }
    _write(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
    )
    print(text)
    return code


def _parse_formats(args):
    raw = args.format if args.format is not None else "csv,json"
    formats = {s.strip() for s in str(raw).split(",") if s.strip()}
    if not formats or not formats <= {"csv", "json"}:
        raise UsageError("format must be csv, json, or csv,json")
    return formats


def _load_config_out_dir(args) -> Optional[str]:
    # an explicit out-dir inside a config file is honored when no flag given
    if args.config is None:
        return None
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    if isinstance(doc, dict) and isinstance(doc.get("out_dir"), str):
        return doc["out_dir"]
    return None


if __name__ == "__main__":
    sys.exit(main())
