"""Command-line front end: ``qpferqkd {rates,schedule,threshold,simulate,optics-check}``.

Settings come from built-in defaults, then the ``--config`` TOML file (top
level keys plus one table per subcommand), then command-line flags.  Every
output embeds the tool version, a hash of the resolved settings and the seed.

Exit codes: 0 success, 1 failed optics check, 2 protocol abort,
3 infeasible schedule or threshold, 4 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .montecarlo import AttackModel, ProtocolConfig, empirical_decoded, run
from .optics import equivalence_report
from .pauli import ErrorDistribution, InvalidDistribution, RngStream
from .postprocess import Schedule, schedule_search
from .qpfer import Protocol, decoded_distribution
from .threshold import ChannelFamily, SearchBounds, baseline_threshold, find_threshold, working_distribution

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ABORT, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2, 3, 4

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "out": None,
    "rates": {"dist": None, "mc_samples": 0},
    "schedule": {"dist": None, "from_channel": False, "protocol": "four-state", "max_b": 12,
                 "max_p": 6, "r_max": 10**7, "target": 0.05},
    "threshold": {"family": "symmetric", "direction": None, "protocol": "four-state", "precision": 1e-3,
                  "baseline": True, "max_b": 12, "max_p": 6, "r_max": 10**7, "target": 0.05},
    "simulate": {"protocol": "four-state", "n_codes": 100_000, "channel": "1,0,0,0", "attack": "none",
                 "attack_dist": None, "loss": 0.0, "basis_mix": None, "z_check_fraction": None,
                 "abort_tolerance": 0.0, "confidence": 0.99, "schedule": "search", "max_b": 12,
                 "max_p": 6, "r_max": 10**7, "target": 0.05, "block_size": 1 << 16,
                 "records_csv": None},
    "optics-check": {"protocol": "six-state"},
}


class UsageError(ValueError):
    pass


def parse_dist(text) -> ErrorDistribution:
    """``"p_I,p_x,p_y,p_z"`` (or a 4-element list) to a distribution."""
    vals = text if isinstance(text, (list, tuple)) else str(text).replace(" ", "").split(",")
    try:
        vals = [float(v) for v in vals]
    except ValueError as exc:
        raise UsageError(f"malformed distribution {text!r}") from exc
    if len(vals) != 4:
        raise UsageError(f"a distribution needs 4 components p_I,p_x,p_y,p_z; got {len(vals)}")
    try:
        return ErrorDistribution(*vals)
    except InvalidDistribution as exc:
        raise UsageError(f"invalid distribution {text!r}: {exc}") from exc


def _floats(text, n=None):
    vals = text if isinstance(text, (list, tuple)) else str(text).split(",")
    vals = [float(v) for v in vals]
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma separated numbers, got {text!r}")
    return vals


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags for the chosen subcommand."""
    cfg = {k: v for k, v in DEFAULTS.items() if not isinstance(v, dict)}
    cfg.update(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - {"seed", "workers", "out"} - set(COMMANDS)
        if unknown:
            raise UsageError(f"unknown top-level config keys: {sorted(unknown)}")
        for key in ("seed", "workers", "out"):
            if key in data:
                cfg[key] = data[key]
        section = data.get(args.command, {})
        unknown = set(section) - set(DEFAULTS[args.command])
        if unknown:
            raise UsageError(f"unknown keys in [{args.command}]: {sorted(unknown)}")
        cfg.update(section)
    for key, value in vars(args).items():
        if key in ("command", "config", "func") or value is None:
            continue
        cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    # the worker count and output path do not change results, so they stay out of the hash
    content = {k: v for k, v in cfg.items() if k not in ("workers", "out", "records_csv")}
    blob = json.dumps(content, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header(command: str, cfg: dict) -> dict:
    content = {k: v for k, v in cfg.items() if k not in ("workers", "out", "records_csv")}
    return {"tool": "qpferqkd", "version": __version__, "command": command,
            "config_hash": config_hash(cfg), "seed": cfg["seed"], "config": content}


def emit_json(doc: dict, out) -> None:
    text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def csv_preamble(command: str, cfg: dict) -> str:
    return f"# tool=qpferqkd version={__version__} command={command} config_hash={config_hash(cfg)} seed={cfg['seed']}\n"


def _bounds(cfg) -> SearchBounds:
    return SearchBounds(int(cfg["max_b"]), int(cfg["max_p"]), int(cfg["r_max"]), float(cfg["target"]))


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------


def cmd_rates(cfg: dict) -> int:
    if cfg["dist"] is None:
        raise UsageError("rates needs --dist p_I,p_x,p_y,p_z")
    d0 = parse_dist(cfg["dist"])
    d, survival = decoded_distribution(d0)
    doc = header("rates", cfg)
    doc.update({
        "channel": d0.as_dict(),
        "channel_flip_rates": {"bit": d0.bit_rate, "phase": d0.phase_rate},
        "decoded": d.as_dict(),
        "survival": survival,
        "decoded_flip_rates": {"bit": d.bit_rate, "phase": d.phase_rate},
    })
    n = int(cfg["mc_samples"])
    if n > 0:
        freq, surv, n_ok = empirical_decoded(d0, n, RngStream(int(cfg["seed"]), 0))
        doc["monte_carlo"] = {"samples": n, "survived": n_ok, "survival": surv, "decoded": freq.as_dict()}
    emit_json(doc, cfg["out"])
    _info(f"decoded p_I={d.p_I:.4f} p_x={d.p_x:.4f} p_y={d.p_y:.4f} p_z={d.p_z:.4f} survival={survival:.4f}")
    return EXIT_OK


def cmd_schedule(cfg: dict) -> int:
    if cfg["dist"] is None:
        raise UsageError("schedule needs --dist p_I,p_x,p_y,p_z")
    d = parse_dist(cfg["dist"])
    if cfg["from_channel"]:
        try:
            d = working_distribution(d, Protocol.parse(cfg["protocol"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    found = schedule_search(d, **_bounds(cfg).kwargs())
    doc = header("schedule", cfg)
    doc.update({"working": d.as_dict(), "feasible": found is not None,
                "result": found.as_dict() if found else None})
    emit_json(doc, cfg["out"])
    if found is None:
        _info("no feasible schedule within the search bounds")
        return EXIT_INFEASIBLE
    _info(f"schedule {found.schedule}  key_rate={found.key_rate:.4f}")
    return EXIT_OK


def _family(cfg) -> ChannelFamily:
    kind = cfg["family"]
    if kind == "custom":
        if cfg["direction"] is None:
            raise UsageError("a custom family needs --direction w_x,w_y,w_z")
        return ChannelFamily.custom(*_floats(cfg["direction"], 3))
    try:
        return ChannelFamily(kind)
    except ValueError as exc:
        raise UsageError(f"unknown family {kind!r}") from exc


def cmd_threshold(cfg: dict) -> int:
    family = _family(cfg)
    protocol = Protocol.parse(cfg["protocol"])
    precision = float(cfg["precision"])
    if precision <= 0:
        raise UsageError("precision must be positive")
    workers = int(cfg["workers"])
    t0 = time.perf_counter()
    res = find_threshold(family, protocol, precision, _bounds(cfg), workers=workers)
    doc = header("threshold", cfg)
    doc["certified"] = res.as_dict()
    if cfg["baseline"]:
        base = baseline_threshold(family, protocol, precision, _bounds(cfg), workers=workers)
        doc["baseline"] = base.as_dict()
        doc["decode_gain"] = res.threshold - base.threshold
    emit_json(doc, cfg["out"])
    _info(f"{family.kind.value}/{protocol.value}: certified threshold {res.threshold:.4f}"
          f" (witness: {res.witness.schedule if res.witness else 'none'})")
    _info(res.agreement()["statement"])
    if cfg["baseline"]:
        _info(f"baseline without decoding: {doc['baseline']['threshold']:.4f}")
    _info(f"elapsed {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if res.witness is not None else EXIT_INFEASIBLE


def build_protocol_config(cfg: dict) -> ProtocolConfig:
    try:
        attack_kind = cfg["attack"]
        attack = AttackModel(attack_kind, parse_dist(cfg["attack_dist"]) if cfg["attack_dist"] else None)
        mix = cfg["basis_mix"]
        if isinstance(mix, str):
            mix = dict(item.split("=") for item in mix.split(","))
        schedule = cfg["schedule"]
        return ProtocolConfig(
            protocol=Protocol.parse(cfg["protocol"]),
            n_codes=int(cfg["n_codes"]),
            basis_mix=mix,
            channel=parse_dist(cfg["channel"]),
            attack=attack,
            loss=float(cfg["loss"]),
            z_check_fraction=None if cfg["z_check_fraction"] is None else float(cfg["z_check_fraction"]),
            abort_tolerance=float(cfg["abort_tolerance"]),
            confidence=float(cfg["confidence"]),
            schedule=schedule if schedule == "search" else Schedule.parse(schedule),
            bounds=_bounds(cfg),
            seed=int(cfg["seed"]),
            block_size=int(cfg["block_size"]),
        )
    except UsageError:
        raise
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid simulate configuration: {exc}") from exc


def cmd_simulate(cfg: dict) -> int:
    config = build_protocol_config(cfg)
    report = run(config, workers=int(cfg["workers"]), keep_records=bool(cfg["records_csv"]))
    doc = header("simulate", cfg)
    doc["report"] = report.as_dict()
    emit_json(doc, cfg["out"])
    if cfg["records_csv"]:
        with open(cfg["records_csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_preamble("simulate", cfg))
            fh.write(report.records.to_csv())
    _info(f"status={report.status} key_rate={report.key_rate:.4f} key_length={report.key_length}")
    return {"ok": EXIT_OK, "abort": EXIT_ABORT, "infeasible": EXIT_INFEASIBLE}[report.status]


def cmd_optics_check(cfg: dict) -> int:
    rep = equivalence_report(Protocol.parse(cfg["protocol"]))
    buf = io.StringIO()
    buf.write(csv_preamble("optics-check", cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["code_state", "e1", "e2", "outcome", "p_optics", "p_abstract", "deviation"])
    for row in rep.rows:
        w.writerow([row.code_state, row.e1, row.e2, row.outcome,
                    repr(float(row.p_optics)), repr(float(row.p_abstract)), repr(float(row.deviation))])
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    _info(rep.summary())
    return EXIT_OK if rep.max_deviation <= 1e-12 else EXIT_CHECK_FAILED


COMMANDS = {"rates": cmd_rates, "schedule": cmd_schedule, "threshold": cmd_threshold,
            "simulate": cmd_simulate, "optics-check": cmd_optics_check}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--config", help="TOML settings file")

    def search_flags(p):
        p.add_argument("--max-b", dest="max_b", type=int)
        p.add_argument("--max-p", dest="max_p", type=int)
        p.add_argument("--r-max", dest="r_max", type=int)
        p.add_argument("--target", type=float)

    parser = _Parser(prog="qpferqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rates", parents=[common], help="decoded error distribution of a channel")
    p.add_argument("--dist", help="channel p_I,p_x,p_y,p_z")
    p.add_argument("--mc-samples", dest="mc_samples", type=int, help="Monte Carlo cross-check sample count")

    p = sub.add_parser("schedule", parents=[common], help="search a post-processing schedule")
    p.add_argument("--dist", help="working distribution p_I,p_x,p_y,p_z")
    p.add_argument("--from-channel", dest="from_channel", action="store_true", default=None,
                   help="treat --dist as the channel and apply decoding plus the protocol's rate policy")
    p.add_argument("--protocol")
    search_flags(p)

    p = sub.add_parser("threshold", parents=[common], help="certified tolerable error rate")
    p.add_argument("--family", choices=["symmetric", "xz_only", "custom"])
    p.add_argument("--direction", help="custom family weights w_x,w_y,w_z")
    p.add_argument("--protocol")
    p.add_argument("--precision", type=float)
    p.add_argument("--no-baseline", dest="baseline", action="store_false", default=None)
    search_flags(p)

    p = sub.add_parser("simulate", parents=[common], help="full protocol Monte Carlo")
    p.add_argument("--protocol")
    p.add_argument("--n-codes", dest="n_codes", type=int)
    p.add_argument("--channel", help="per-photon channel p_I,p_x,p_y,p_z")
    p.add_argument("--attack", choices=["none", "intercept-resend-z", "intercept-resend-bb84", "custom-pauli"])
    p.add_argument("--attack-dist", dest="attack_dist", help="per-photon Pauli attack p_I,p_x,p_y,p_z")
    p.add_argument("--loss", type=float)
    p.add_argument("--basis-mix", dest="basis_mix", help="e.g. Z=0.75,X=0.25")
    p.add_argument("--z-check-fraction", dest="z_check_fraction", type=float)
    p.add_argument("--abort-tolerance", dest="abort_tolerance", type=float)
    p.add_argument("--confidence", type=float)
    p.add_argument("--schedule", help='"search" or e.g. "B B P3 final_r=40"')
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--records-csv", dest="records_csv", help="write per-code records here")
    search_flags(p)

    p = sub.add_parser("optics-check", parents=[common], help="optics vs abstract decode sweep (CSV)")
    p.add_argument("--protocol")
    return parser


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which here means "protocol aborted"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
