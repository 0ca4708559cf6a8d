"""Command-line front end.

Subcommands
-----------
theta     exact crossing probability of one (model, p, W, L) point
sweep     exact values plus closed-form envelopes over a parameter grid
mc        Monte Carlo estimate of a crossing probability
train     masked-SGD runs with displacement measurements per trial
budget    safe training horizon (as ln T) for a step-size schedule
classify  limiting regime of a width-scaling law
check     validate a CSV produced by any of the above against its schema

Conventions shared by all subcommands: output is CSV with a header row,
written to ``--out`` (default stdout); every numeric cell is printed with 17
significant digits; rows are emitted in sorted grid order, so a rerun with
the same arguments is byte-identical.  Any flag may instead be given in a
config file (``--config FILE``) holding one ``[subcommand]`` section of
``key = value`` lines; explicit command-line flags win over file values, and
unknown keys are rejected.

Randomised subcommands take one 64-bit ``--seed``.  Internal task seeds are
derived as ``seed XOR blake2b-64("droperc:" + task-label)``, and per-trial
streams inside a task come from counter-based generators keyed by trial
index, so results do not depend on scheduling.

``PERC_THREADS`` caps the worker threads used for sweep grids.

Exit codes: 0 success, 2 malformed arguments or config file, 3 parameter
outside its domain, 4 file I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from .exact import bond_bounds, theta_bond_dp, theta_site
from .montecarlo import estimate_theta
from .nn import ACTIVATIONS, FilterKind
from .scaling import LrSchedule, ScalingSpec, classify_bond, classify_site, training_budget
from .topology import Topology
from .trainer import TrainConfig, run_dropout_sgd

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

_MASK64 = (1 << 64) - 1


class CliParseError(Exception):
    """Malformed flag value, config file, or flag combination (exit 2)."""


def derive_seed(master: int, label: str) -> int:
    """Documented task-seed rule: master XOR 64-bit blake2b of the task label."""
    digest = hashlib.blake2b(f"droperc:{label}".encode(), digest_size=8).digest()
    return (master ^ int.from_bytes(digest, "big")) & _MASK64


def _fmt(cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, str):
        return cell
    if isinstance(cell, (int,)) and not isinstance(cell, bool):
        return str(cell)
    return f"{float(cell):.17g}"


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise CliParseError(f"expected an integer, got {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CliParseError(f"expected a number, got {text!r}") from None


def _parse_model(text: str) -> str:
    if text not in ("bond", "site"):
        raise CliParseError(f"model must be 'bond' or 'site', got {text!r}")
    return text


_FILTER_NAMES = {
    "dropconnect": ("dropconnect", False),
    "original": ("original", False),
    "modified-dropconnect": ("dropconnect", True),
    "modified-original": ("original", True),
}


def _parse_filter(text: str) -> str:
    if text not in _FILTER_NAMES:
        raise CliParseError(
            f"filter must be one of {sorted(_FILTER_NAMES)}, got {text!r}"
        )
    return text


def _parse_activation(text: str) -> str:
    if text not in ACTIVATIONS:
        raise CliParseError(f"activation must be one of {ACTIVATIONS}, got {text!r}")
    return text


def _parse_str(text: str) -> str:
    return text


def _parse_float_grid(text: str) -> list[float]:
    """A 'start:stop:step' range, endpoints included (up to float dust)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise CliParseError(f"grid must look like start:stop:step, got {text!r}")
    start, stop, step = (_parse_float(s) for s in parts)
    if step <= 0.0:
        raise CliParseError(f"grid step must be > 0, got {step}")
    if stop < start:
        raise CliParseError(f"grid stop {stop} is below start {start}")
    count = int(round((stop - start) / step)) + 1
    values = [start + i * step for i in range(count)]
    return [v for v in values if v <= stop + step * 1e-9]


def _parse_int_grid(text: str) -> list[int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise CliParseError(f"grid must look like start:stop:step, got {text!r}")
    start, stop, step = (_parse_int(s) for s in parts)
    if step <= 0:
        raise CliParseError(f"grid step must be > 0, got {step}")
    if stop < start:
        raise CliParseError(f"grid stop {stop} is below start {start}")
    return list(range(start, stop + 1, step))


@dataclass(frozen=True)
class Param:
    name: str  # long flag name, hyphenated
    parse: Callable[[str], object]
    help: str
    default: object = None
    required: bool = False


_OUT = Param("out", _parse_str, "output CSV path (default: stdout)")
_SEED = Param("seed", _parse_int, "64-bit master seed", default=0)

_COMMAND_PARAMS: dict[str, tuple[Param, ...]] = {
    "theta": (
        Param("model", _parse_model, "removal model: bond or site", required=True),
        Param("p", _parse_float, "removal probability", required=True),
        Param("width", _parse_int, "vertices per layer", required=True),
        Param("depth", _parse_int, "hidden layers", required=True),
        _OUT,
    ),
    "sweep": (
        Param("model", _parse_model, "removal model: bond or site", required=True),
        Param("p", _parse_float, "single removal probability"),
        Param("p-grid", _parse_float_grid, "removal probabilities start:stop:step"),
        Param("width", _parse_int, "single width"),
        Param("width-grid", _parse_int_grid, "widths start:stop:step"),
        Param("depth", _parse_int, "single depth"),
        Param("depth-grid", _parse_int_grid, "depths start:stop:step"),
        _OUT,
    ),
    "mc": (
        Param("model", _parse_model, "removal model: bond or site", required=True),
        Param("p", _parse_float, "removal probability", required=True),
        Param("width", _parse_int, "vertices per layer", required=True),
        Param("depth", _parse_int, "hidden layers", required=True),
        Param("trials", _parse_int, "number of sampled configurations", default=10000),
        _SEED,
        _OUT,
    ),
    "train": (
        Param("filter", _parse_filter, "mask law: dropconnect, original, or modified-*",
              default="dropconnect"),
        Param("p", _parse_float, "mask removal probability", required=True),
        Param("width", _parse_int, "vertices per layer", required=True),
        Param("depth", _parse_int, "hidden layers", required=True),
        Param("steps", _parse_int, "SGD steps per trial", required=True),
        Param("rho", _parse_float, "step-size decay exponent", default=1.0),
        Param("alpha", _parse_float, "step-size scale", default=1.0),
        Param("trials", _parse_int, "independent training runs", default=1),
        Param("batch", _parse_int, "examples per step", default=8),
        Param("activation", _parse_activation, "identity, relu, or tanh", default="tanh"),
        Param("noise", _parse_float, "target noise standard deviation", default=0.0),
        _SEED,
        _OUT,
    ),
    "budget": (
        Param("rho", _parse_float, "step-size decay exponent", required=True),
        Param("alpha", _parse_float, "step-size scale", default=1.0),
        Param("c", _parse_float, "horizon constant", required=True),
        Param("n", _parse_int, "network size", required=True),
        Param("width", _parse_int, "vertices per layer", required=True),
        Param("p", _parse_float, "removal probability", required=True),
        _OUT,
    ),
    "classify": (
        Param("model", _parse_model, "removal model: bond or site", required=True),
        Param("tau", _parse_float, "width-growth exponent", required=True),
        Param("c1", _parse_float, "width-growth scale", required=True),
        Param("c2", _parse_int, "width offset", default=0),
        Param("p", _parse_float, "removal probability", required=True),
        _OUT,
    ),
}

SCHEMAS: dict[str, tuple[str, ...]] = {
    "theta": ("model", "p", "W", "L", "theta"),
    "sweep": ("model", "p", "W", "L", "theta", "lower_bound", "upper_bound"),
    "mc": ("model", "p", "W", "L", "trials", "seed", "mean", "stderr"),
    "train": ("trial", "L", "W", "p", "T", "displacement", "nopath_fraction", "bound"),
    "budget": ("rho", "alpha", "c", "n", "W", "p", "ln_T", "ln_ln_T"),
    "classify": ("tau", "C1", "C2", "p", "regime", "p_c", "a", "b"),
}


def _workers() -> int:
    env = os.environ.get("PERC_THREADS")
    if env is None:
        return min(8, os.cpu_count() or 1)
    try:
        cap = int(env)
    except ValueError:
        raise CliParseError(f"PERC_THREADS must be an integer, got {env!r}") from None
    if cap < 1:
        raise CliParseError(f"PERC_THREADS must be >= 1, got {cap}")
    return cap


def _cmd_theta(v: dict) -> tuple[tuple[str, ...], list[tuple]]:
    topo = Topology(v["width"], v["depth"])
    fn = theta_bond_dp if v["model"] == "bond" else theta_site
    th = fn(v["p"], topo)
    return SCHEMAS["theta"], [(v["model"], v["p"], v["width"], v["depth"], th.value)]


def _sweep_point(model: str, p: float, width: int, depth: int) -> tuple:
    topo = Topology(width, depth)
    if model == "bond":
        th = theta_bond_dp(p, topo)
        lo, hi = bond_bounds(p, topo)
        return (model, p, width, depth, th.value, lo.value, hi.value)
    th = theta_site(p, topo)  # exact closed form: envelope collapses onto it
    return (model, p, width, depth, th.value, th.value, th.value)


def _axis(v: dict, single: str, grid: str, flag: str) -> list:
    s, g = v.get(single), v.get(grid)
    if s is not None and g is not None:
        raise CliParseError(f"give --{flag} or --{flag}-grid, not both")
    if s is not None:
        return [s]
    if g is not None:
        return list(g)
    raise CliParseError(f"sweep needs --{flag} or --{flag}-grid")


def _cmd_sweep(v: dict) -> tuple[tuple[str, ...], list[tuple]]:
    model = v["model"]
    ps = _axis(v, "p", "p-grid", "p")
    widths = _axis(v, "width", "width-grid", "width")
    depths = _axis(v, "depth", "depth-grid", "depth")
    points = [(p, w, l) for p in ps for w in widths for l in depths]
    workers = _workers()
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda q: _sweep_point(model, *q), points))
    else:
        rows = [_sweep_point(model, *q) for q in points]
    rows.sort(key=lambda r: (r[1], r[2], r[3]))
    return SCHEMAS["sweep"], rows


def _cmd_mc(v: dict) -> tuple[tuple[str, ...], list[tuple]]:
    topo = Topology(v["width"], v["depth"])
    est = estimate_theta(v["model"], v["p"], topo, v["trials"], v["seed"])
    return SCHEMAS["mc"], [
        (v["model"], v["p"], v["width"], v["depth"], est.trials, est.seed, est.mean, est.stderr)
    ]


def _cmd_train(v: dict) -> tuple[tuple[str, ...], list[tuple]]:
    name, is_modified = _FILTER_NAMES[v["filter"]]
    cfg = TrainConfig(
        topology=Topology(v["width"], v["depth"]),
        kind=FilterKind(name=name, p=v["p"], modified=is_modified),
        schedule=LrSchedule(rho=v["rho"], alpha=v["alpha"]),
        steps=v["steps"],
        batch_size=v["batch"],
        trials=v["trials"],
        activation=v["activation"],
        noise_std=v["noise"],
        init_seed=derive_seed(v["seed"], "init"),
        filter_seed=derive_seed(v["seed"], "filter"),
        data_seed=derive_seed(v["seed"], "data"),
    )
    report = run_dropout_sgd(cfg)
    rows = [
        (r, v["depth"], v["width"], v["p"], v["steps"],
         report.displacements[r], report.nopath_fractions[r], report.bound)
        for r in range(cfg.trials)
    ]
    return SCHEMAS["train"], rows


def _cmd_budget(v: dict) -> tuple[tuple[str, ...], list[tuple]]:
    sched = LrSchedule(rho=v["rho"], alpha=v["alpha"])
    ln_t = training_budget(v["n"], v["width"], v["p"], sched, v["c"])
    if sched.rho == 1.0:
        ln_ln_t = v["c"] * v["n"] * math.exp(v["width"] ** 2 * math.log(v["p"]))
    else:
        ln_ln_t = None  # the two-level log form only arises for rho = 1
    return SCHEMAS["budget"], [
        (v["rho"], v["alpha"], v["c"], v["n"], v["width"], v["p"], ln_t, ln_ln_t)
    ]


def _cmd_classify(v: dict) -> tuple[tuple[str, ...], list[tuple]]:
    spec = ScalingSpec(model=v["model"], tau=v["tau"], c1=v["c1"], c2=v["c2"], p=v["p"])
    report = classify_bond(spec) if v["model"] == "bond" else classify_site(spec)
    a, b = report.interval if report.interval is not None else (None, None)
    return SCHEMAS["classify"], [
        (v["tau"], v["c1"], v["c2"], v["p"], report.regime.value, report.p_critical, a, b)
    ]


_HANDLERS = {
    "theta": _cmd_theta,
    "sweep": _cmd_sweep,
    "mc": _cmd_mc,
    "train": _cmd_train,
    "budget": _cmd_budget,
    "classify": _cmd_classify,
}

_INT_COLUMNS = {"W", "L", "trial", "T", "trials", "seed", "n", "C2"}
_ENUM_COLUMNS = {
    "model": {"bond", "site"},
    "regime": {"LimitOne", "LimitZero", "CriticalInterval", "Unknown"},
}
_OPTIONAL_COLUMNS = {"ln_ln_T", "p_c", "a", "b"}


def check_csv(path: str, schema: str | None = None) -> tuple[str, int]:
    """Validate a CSV emitted by this tool; returns (schema name, row count).

    Raises ValueError on any schema violation and OSError if unreadable.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty file, no header") from None
        if schema is None:
            matches = [name for name, cols in SCHEMAS.items() if cols == header]
            if not matches:
                raise ValueError(f"{path}: header {header} matches no known schema")
            schema = matches[0]
        else:
            if schema not in SCHEMAS:
                raise ValueError(f"unknown schema {schema!r}")
            if SCHEMAS[schema] != header:
                raise ValueError(
                    f"{path}: header {header} does not match schema "
                    f"{schema} {SCHEMAS[schema]}"
                )
        count = 0
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            for col, cell in zip(header, row):
                if col in _ENUM_COLUMNS:
                    if cell not in _ENUM_COLUMNS[col]:
                        raise ValueError(f"{path}:{lineno}: bad {col} value {cell!r}")
                    continue
                if cell == "":
                    if col in _OPTIONAL_COLUMNS:
                        continue
                    raise ValueError(f"{path}:{lineno}: empty {col} cell")
                try:
                    int(cell) if col in _INT_COLUMNS else float(cell)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad {col} value {cell!r}") from None
            count += 1
    return schema, count


def _load_config(path: str, command: str, params: tuple[Param, ...]) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise CliParseError(f"config file {path}: {exc}") from None
    if not parser.has_section(command):
        raise CliParseError(f"config file {path} has no [{command}] section")
    known = {p.name: p for p in params}
    values: dict = {}
    for key, raw in parser.items(command):
        if key not in known:
            raise CliParseError(f"config file {path}: unknown key {key!r} in [{command}]")
        values[key] = known[key].parse(raw)
    return values


def _merge_values(args: argparse.Namespace, command: str) -> dict:
    params = _COMMAND_PARAMS[command]
    merged = {p.name: p.default for p in params}
    if args.config is not None:
        merged.update(_load_config(args.config, command, params))
    for p in params:
        cli_value = getattr(args, p.name.replace("-", "_"))
        if cli_value is not None:
            merged[p.name] = p.parse(cli_value)
    for p in params:
        if p.required and merged[p.name] is None:
            raise CliParseError(f"{command} needs --{p.name}")
    return merged


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droperc",
        description="Crossing probabilities of random layered networks and what "
        "they imply for dropout-style training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    briefs = {
        "theta": "exact crossing probability at one parameter point",
        "sweep": "exact values and envelopes over a parameter grid",
        "mc": "Monte Carlo estimate of a crossing probability",
        "train": "masked-SGD trials with displacement measurements",
        "budget": "safe training horizon as ln T",
        "classify": "limiting regime of a width-scaling law",
    }
    for command, params in _COMMAND_PARAMS.items():
        cp = sub.add_parser(command, help=briefs[command])
        cp.add_argument("--config", help="config file with a [%s] section" % command)
        for p in params:
            cp.add_argument(f"--{p.name}", dest=p.name.replace("-", "_"),
                            help=p.help, default=None)
    chk = sub.add_parser("check", help="validate an emitted CSV against its schema")
    chk.add_argument("file", help="CSV file to validate")
    chk.add_argument("--schema", help="expected schema name (default: infer from header)",
                     default=None)
    return parser


def _write_csv(out: str | None, header: tuple[str, ...], rows: list[tuple]) -> None:
    def dump(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])

    if out is None or out == "-":
        dump(sys.stdout)
    else:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            dump(fh)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    try:
        if args.command == "check":
            schema, count = check_csv(args.file, args.schema)
            print(f"ok: {args.file} matches schema '{schema}' ({count} rows)")
            return EXIT_OK
        values = _merge_values(args, args.command)
        header, rows = _HANDLERS[args.command](values)
        _write_csv(values.get("out"), header, rows)
        return EXIT_OK
    except CliParseError as exc:
        print(f"droperc: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"droperc: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"droperc: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
