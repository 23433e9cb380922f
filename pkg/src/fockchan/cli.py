"""``fockchan`` command line: Choi matrices, gain sweeps, tomography, attenuation choice.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure
(non-convergence, zero success probability).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import jsonschema
import numpy as np

from .channels import ChannelParams, suppressed_channel_direct
from .choi import (
    BASIS_LABELS,
    channel_fidelity,
    choi_of_channel,
    effective_transmittance,
    with_real_coherence,
)
from .fock import DomainError, FockState
from .protocol import (
    BALANCED_PROBE,
    ProtocolFailure,
    SweepPlan,
    SweepRecord,
    classify,
    gain_grid,
    optimize_nu,
    run_protocol,
    run_sweep,
)
from .tomography import (
    MIN_TOTAL_COUNTS,
    ConvergenceError,
    ReconstructionError,
    ideal_records,
    maximum_likelihood,
    records_from_dict,
    records_to_dict,
    simulate_counts,
    state_fidelity,
    trace_distance,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
SIG_DIGITS = 12

_probe_schema = {
    "type": "object",
    "properties": {"c0": {"type": "number"}, "c1": {"type": "number"}},
    "required": ["c0", "c1"],
    "additionalProperties": False,
}

SCHEMAS = {
    "choi": {
        "type": "object",
        "properties": {
            "tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "nu": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "gain": {"type": "number", "minimum": 1},
            "format": {"enum": ["json", "csv"]},
        },
        "additionalProperties": False,
    },
    "sweep": {
        "type": "object",
        "properties": {
            "taus": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "minItems": 1},
            "gain-min": {"type": "number", "minimum": 1},
            "gain-max": {"type": "number", "minimum": 1},
            "gain-points": {"type": ["integer", "null"], "minimum": 1},
            "policy": {"enum": ["fig4", "fixed", "naive"]},
            "nu": {"type": ["number", "null"], "exclusiveMinimum": 0, "maximum": 1},
            "probe": _probe_schema,
            "truncation": {"type": "integer", "minimum": 1, "maximum": 16},
        },
        "additionalProperties": False,
    },
    "tomo": {
        "type": "object",
        "properties": {
            "tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "nu": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "gain": {"type": "number", "minimum": 1},
            "counts": {"type": "integer"},
            "seed": {"type": "integer"},
            "ideal": {"type": "boolean"},
        },
        "additionalProperties": False,
    },
    "optimize": {
        "type": "object",
        "properties": {
            "tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "target-fidelity": {"type": "number"},
            "probe": _probe_schema,
        },
        "additionalProperties": False,
    },
}

DEFAULTS = {
    "choi": {"tau": 1.0, "nu": 1.0, "gain": 1.0, "format": "json"},
    "sweep": {
        "taus": [math.sqrt(0.75), math.sqrt(0.5), math.sqrt(0.25)],
        "gain-min": 1.0,
        "gain-max": 10.0,
        "gain-points": None,
        "policy": "fig4",
        "nu": None,
        "probe": {"c0": BALANCED_PROBE[0], "c1": BALANCED_PROBE[1]},
        "truncation": 1,
    },
    "tomo": {"tau": 1.0, "nu": 1.0, "gain": 1.0, "counts": 100000, "seed": 0, "ideal": False},
    "optimize": {"probe": {"c0": BALANCED_PROBE[0], "c1": BALANCED_PROBE[1]}},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    s = f"{x:.{SIG_DIGITS}g}"
    return "0" if s == "-0" else s


def num(x: float) -> float:
    return float(fmt(x))


def _matrix_json(chi) -> dict:
    e = chi.entries
    return {
        "basis": list(BASIS_LABELS),
        "real": [[num(v) for v in row] for row in e.real],
        "imag": [[num(v) for v in row] for row in e.imag],
    }


def _parse_probe(text: str) -> dict:
    try:
        c0, c1 = (complex(part.strip()) for part in text.split(","))
    except ValueError as exc:
        raise UsageError(f"probe must be 'c0,c1', got {text!r}") from exc
    if c0.imag or c1.imag:
        raise UsageError("probe amplitudes must be real; global phases do not affect the results")
    return {"c0": c0.real, "c1": c1.real}


def _load_config(command: str, path: str | None) -> dict:
    cfg = dict(DEFAULTS[command])
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        try:
            jsonschema.validate(data, SCHEMAS[command])
        except jsonschema.ValidationError as exc:
            raise UsageError(f"invalid config: {exc.message}") from exc
        cfg.update(data)
    return cfg


def _merge(cfg: dict, args: argparse.Namespace, keys: dict) -> dict:
    """Explicit flags override config values."""
    for key, attr in keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def choi_report(tau: float, nu: float, g: float) -> dict:
    p = ChannelParams(tau=tau, nu=nu, g=g, n_max=1)
    ch = suppressed_channel_direct(p)
    raw = choi_of_channel(ch)
    chi = with_real_coherence(raw.normalize())
    return {
        "command": "choi",
        "params": {"tau": num(tau), "nu": num(nu), "gain": num(g), "strategy": classify(tau, nu, g)},
        **_matrix_json(chi),
        "p_succ": num(raw.trace),
        "fidelity": num(channel_fidelity(chi)),
        "t_eff": num(effective_transmittance(ch)),
    }


def cmd_choi(args) -> int:
    cfg = _merge(_load_config("choi", args.config), args,
                 {"tau": "tau", "nu": "nu", "gain": "gain", "format": "format"})
    report = choi_report(cfg["tau"], cfg["nu"], cfg["gain"])
    if cfg["format"] == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "re", "im"])
        for i, r in enumerate(BASIS_LABELS):
            for j, c in enumerate(BASIS_LABELS):
                w.writerow([r, c, fmt(report["real"][i][j]), fmt(report["imag"][i][j])])
        text = buf.getvalue()
    else:
        text = _dumps(report)
    _write(text, args.out)
    return EXIT_OK


def sweep_plan(cfg: dict) -> SweepPlan:
    if cfg["gain-max"] < cfg["gain-min"]:
        raise UsageError("gain-max must not be below gain-min")
    probe = cfg["probe"]
    return SweepPlan(
        taus=tuple(cfg["taus"]),
        gains=tuple(gain_grid(cfg["gain-min"], cfg["gain-max"], cfg["gain-points"])),
        nu_policy=cfg["policy"],
        fixed_nu=cfg["nu"],
        probe=(probe["c0"], probe["c1"]),
        truncation=cfg["truncation"],
    )


def sweep_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SweepRecord.FIELDS)
    for r in records:
        w.writerow([r.strategy] + [fmt(getattr(r, k)) for k in SweepRecord.FIELDS[1:]])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[SweepRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        SweepRecord(strategy=row["strategy"], **{k: float(row[k]) for k in SweepRecord.FIELDS[1:]})
        for row in rows
    ]


def cmd_sweep(args) -> int:
    cfg = _merge(_load_config("sweep", args.config), args, {
        "policy": "policy", "gain-min": "gain_min", "gain-max": "gain_max",
        "gain-points": "gain_points", "nu": "nu", "truncation": "truncation",
    })
    if args.taus is not None:
        cfg["taus"] = args.taus
    if args.probe is not None:
        cfg["probe"] = _parse_probe(args.probe)
    records = run_sweep(sweep_plan(cfg), workers=args.workers)
    _write(sweep_csv(records), args.out)
    return EXIT_OK


def tomo_report(tau: float, nu: float, g: float, counts: int, seed: int, ideal: bool,
                dataset: dict | None = None) -> tuple[dict, bool]:
    if counts < MIN_TOTAL_COUNTS:
        raise UsageError(f"counts must be at least {MIN_TOTAL_COUNTS}, got {counts}")
    p = ChannelParams(tau=tau, nu=nu, g=g, n_max=1)
    truth = choi_of_channel(suppressed_channel_direct(p)).normalize()
    if dataset is not None:
        records = records_from_dict(dataset)
    elif ideal:
        records = ideal_records(truth, total_counts=counts)
    else:
        records = simulate_counts(truth, total_counts=counts, seed=seed)
    result = maximum_likelihood(records)
    report = {
        "command": "tomo",
        "params": {"tau": num(tau), "nu": num(nu), "gain": num(g), "counts": counts, "seed": seed, "ideal": ideal},
        "true_chi": _matrix_json(with_real_coherence(truth)),
        "dataset": records_to_dict(records, seed=None if ideal else seed),
        "reconstructed_chi": _matrix_json(with_real_coherence(result.chi)),
        "fidelity": num(state_fidelity(truth, result.chi)),
        "trace_distance": num(trace_distance(truth, result.chi)),
        "iterations": result.iterations,
        "converged": result.converged,
    }
    for rec in report["dataset"]["records"]:
        rec["counts"] = num(rec["counts"]) if ideal else rec["counts"]
    return report, result.converged


def cmd_tomo(args) -> int:
    cfg = _merge(_load_config("tomo", args.config), args, {
        "tau": "tau", "nu": "nu", "gain": "gain", "counts": "counts", "seed": "seed",
    })
    if args.ideal:
        cfg["ideal"] = True
    dataset = None
    if args.dataset:
        try:
            with open(args.dataset, encoding="utf-8") as fh:
                dataset = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read dataset {args.dataset}: {exc}") from exc
    report, converged = tomo_report(cfg["tau"], cfg["nu"], cfg["gain"], cfg["counts"], cfg["seed"],
                                    cfg["ideal"], dataset)
    _write(_dumps(report), args.out)
    if not converged:
        print(f"fockchan: reconstruction did not converge after {report['iterations']} iterations",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _merge(_load_config("optimize", args.config), args,
                 {"tau": "tau", "target-fidelity": "target_fidelity"})
    if args.probe is not None:
        cfg["probe"] = _parse_probe(args.probe)
    for key in ("tau", "target-fidelity"):
        if key not in cfg:
            raise UsageError(f"--{key} is required")
    c0, c1 = cfg["probe"]["c0"], cfg["probe"]["c1"]
    choice = optimize_nu(cfg["tau"], cfg["target-fidelity"], (c0, c1))
    p = ChannelParams(tau=cfg["tau"], nu=choice.nu, g=choice.g)
    chi = choi_of_channel(suppressed_channel_direct(p)).normalize()
    _, p_succ = run_protocol(FockState.qubit(c0, c1).density_matrix(), p)
    report = {
        "command": "optimize",
        "tau": num(cfg["tau"]),
        "target_fidelity": num(cfg["target-fidelity"]),
        "nu": num(choice.nu),
        "gain": num(choice.g),
        "fidelity": num(channel_fidelity(chi)),
        "p_succ": num(p_succ),
    }
    _write(_dumps(report), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fockchan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; explicit flags take precedence")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")

    sp = sub.add_parser("choi", help="Choi matrix, fidelity and transmittance of one configuration")
    sp.add_argument("--tau", type=float, help="channel amplitude transmittance")
    sp.add_argument("--nu", type=float, help="noiseless attenuation")
    sp.add_argument("--gain", type=float, help="noiseless amplification gain")
    sp.add_argument("--format", choices=["json", "csv"])
    common(sp)
    sp.set_defaults(func=cmd_choi)

    sp = sub.add_parser("sweep", help="gain sweep written as CSV")
    sp.add_argument("--taus", type=float, nargs="+")
    sp.add_argument("--gain-min", type=float)
    sp.add_argument("--gain-max", type=float)
    sp.add_argument("--gain-points", type=int)
    sp.add_argument("--policy", choices=["fig4", "fixed", "naive"])
    sp.add_argument("--nu", type=float, help="attenuation for the fixed policy")
    sp.add_argument("--probe", help="probe amplitudes 'c0,c1'")
    sp.add_argument("--truncation", type=int)
    sp.add_argument("--workers", type=int, default=None, help="evaluate grid points in parallel")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("tomo", help="simulate tomography and reconstruct the Choi matrix")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--gain", type=float)
    sp.add_argument("--counts", type=int, help="total counts scale")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--ideal", action="store_true", help="use expected counts instead of Poisson samples")
    sp.add_argument("--dataset", help="reconstruct from a saved count dataset instead of simulating")
    common(sp)
    sp.set_defaults(func=cmd_tomo)

    sp = sub.add_parser("optimize", help="weakest attenuation reaching a target fidelity")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--target-fidelity", type=float)
    sp.add_argument("--probe", help="probe amplitudes 'c0,c1'")
    common(sp)
    sp.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_schema:
        sys.stdout.write(_dumps(SCHEMAS[args.command]))
        return EXIT_OK
    try:
        return args.func(args)
    except (UsageError, DomainError, ValueError, ReconstructionError, OSError) as exc:
        print(f"fockchan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ProtocolFailure, ZeroDivisionError, FloatingPointError) as exc:
        print(f"fockchan: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
