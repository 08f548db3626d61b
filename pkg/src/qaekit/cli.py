"""Command-line entry point: ``qaekit <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .errors import ConfigError, ProtocolError

EXIT_USAGE = 2
EXIT_PROTOCOL = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--repeat", type=int, help="number of seed replicas")
    p.add_argument("--out", metavar="PATH", help="output file (a directory for sweep)")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--paper-scale", dest="full_scale", action="store_true", help="use the full-size setting (fidelity: N=8, K=1..7)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                   help="override a params field, e.g. --set beta=1.5 or --set qae.iterations=50")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaekit", description="QAE-based spectral estimation experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ex.PROTOCOLS:
        _common(sub.add_parser(name, help=f"run the {name} protocol"))
    sw = sub.add_parser("sweep", help="run one protocol over a list of values for a config field")
    _common(sw)
    sw.add_argument("--protocol", choices=ex.PROTOCOLS, help="protocol when the config file does not name one")
    sw.add_argument("--axis", required=True, help="field to vary (dotted path, alias like K, or unique name)")
    sw.add_argument("--values", required=True, help="comma-separated JSON values, e.g. 1,2,3 or 1.2,1.5,4")
    return parser


def _load(args, protocol: str | None) -> dict:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", "--config") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", "--config")
    if protocol is not None:
        if data.get("protocol", protocol) != protocol:
            raise ConfigError(f"config is for {data['protocol']!r}, not {protocol!r}", "protocol")
        data["protocol"] = protocol
    for key in ("seed", "repeat", "workers"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    params = data.setdefault("params", {})
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "--set")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = params
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return data


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(json.loads(tok))
        except json.JSONDecodeError:
            out.append(tok)
    return out


def _fail(kind: str, message: str, path: str | None, out: str | None, code: int) -> int:
    err = {"schema_version": ex.SCHEMA_VERSION, "status": "failed", "error": kind, "message": message}
    if path is not None:
        err["field"] = path
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            data = _load(args, None)
            if args.protocol:
                data.setdefault("protocol", args.protocol)
            cfg = ex.parse_config(data, full_scale=args.full_scale)
            values = _parse_values(args.values)
            paths = ex.sweep(cfg, args.axis, values, args.out or f"sweep-{cfg.protocol}")
            print(json.dumps({"status": "ok", "records": paths}))
            return 0
        data = _load(args, args.command)
        cfg = ex.parse_config(data, full_scale=args.full_scale)
        rec = ex.run(cfg, args.out)
        print(json.dumps({"status": rec.status, "out": args.out or cfg.output_path, "summary": rec.summary}))
        return 0 if rec.status == "ok" else EXIT_PROTOCOL
    except ConfigError as exc:
        return _fail("usage", exc.message, exc.path, args.out, EXIT_USAGE)
    except ProtocolError as exc:
        return _fail("protocol", str(exc), None, args.out, EXIT_PROTOCOL)


if __name__ == "__main__":
    sys.exit(main())
