"""Thin command-line client for the pipeline service.

Subcommands mirror the service endpoints.  By default the request is served
in-process; with --server URL it is posted to a running service instead, so
the CLI stays a pure client either way.

Exit codes: 0 success, 1 usage error, 2 no usable input, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import MissingFile, OrometError, ParseError, UnknownScenario
from .pipeline import RunConfig, cmd_analyze, cmd_extract, cmd_synth, cmd_validate_manifest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_INPUT = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with RunConfig fields")
    p.add_argument("--f-min", type=float, dest="f_min")
    p.add_argument("--f-max", type=float, dest="f_max")
    p.add_argument("--voicing-threshold", type=float, dest="voicing_threshold")
    p.add_argument("--vad-margin-db", type=float, dest="vad_margin_db")
    p.add_argument("--min-pause", type=float, dest="min_pause")
    p.add_argument("--min-speech", type=float, dest="min_speech")
    p.add_argument("--ear-threshold", type=float, dest="ear_threshold")
    p.add_argument("--blink-debounce", type=int, dest="blink_debounce")
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--bootstrap-ci", action="store_const", const=True,
                   dest="bootstrap_ci")
    p.add_argument("--impute", action="store_const", const=True)


_CONFIG_KEYS = ("f_min", "f_max", "voicing_threshold", "vad_margin_db",
                "min_pause", "min_speech", "ear_threshold", "blink_debounce",
                "alpha", "seed", "bootstrap_ci", "impute")


def _build_config(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if getattr(args, "config", None):
        return RunConfig.from_file(args.config, **overrides)
    return RunConfig(**overrides)


def _config_payload(args) -> dict:
    cfg = _build_config(args)
    return cfg.to_dict()


def _post(server: str, endpoint: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(f"{server.rstrip('/')}/{endpoint}", json=payload,
                      timeout=600.0)
    if resp.status_code != 200:
        raise OrometError(f"server returned {resp.status_code}: {resp.text}")
    return resp.json()


def _emit(result: dict) -> None:
    print(json.dumps(result, indent=2, sort_keys=True))


def build_parser() -> _Parser:
    parser = _Parser(prog="oromet",
                     description="Speech and facial metric extraction and analysis")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--server",
                        help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract metrics from session manifests")
    p.add_argument("manifests", nargs="+", help="manifest JSON paths")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)

    p = sub.add_parser("analyze", help="run statistics and models over metrics.csv")
    p.add_argument("--metrics", required=True, help="metrics.csv from extract")
    p.add_argument("--subjects", required=True, help="subjects.csv from extract")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)

    p = sub.add_parser("synth", help="generate synthetic fixture sessions")
    p.add_argument("scenario", help="vowel-jitter | ddk-train | landmark-motion"
                                    " | cohort-separation")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", default=[],
                   metavar="KEY=VALUE", help="scenario parameter override")

    p = sub.add_parser("validate-manifest", help="check a manifest file")
    p.add_argument("path")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise ParseError(f"--param expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            if args.server:
                result = _post(args.server, "extract", {
                    "manifests": args.manifests, "out_dir": args.out,
                    "config": _config_payload(args)})
            else:
                result = cmd_extract(args.manifests, args.out, _build_config(args))
            _emit(result)
        elif args.command == "analyze":
            if args.server:
                result = _post(args.server, "analyze", {
                    "metrics_csv": args.metrics, "subjects_csv": args.subjects,
                    "out_dir": args.out, "config": _config_payload(args)})
            else:
                result = cmd_analyze(args.metrics, args.subjects, args.out,
                                     _build_config(args))
            _emit(result)
        elif args.command == "synth":
            params = _parse_params(args.param)
            if args.server:
                result = _post(args.server, "synth", {
                    "scenario": args.scenario, "out_dir": args.out,
                    "seed": args.seed, "params": params})
            else:
                result = cmd_synth(args.scenario, args.out, seed=args.seed,
                                   params=params)
            _emit(result)
        elif args.command == "validate-manifest":
            if args.server:
                result = _post(args.server, "validate-manifest",
                               {"path": args.path})
            else:
                result = cmd_validate_manifest(args.path)
            _emit(result)
            if not result["valid"]:
                return EXIT_NO_INPUT
        elif args.command == "serve":
            import uvicorn

            from .service import create_app

            uvicorn.run(create_app(), host=args.host, port=args.port)
    except UnknownScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingFile, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except OrometError as exc:
        message = str(exc)
        print(f"error: {message}", file=sys.stderr)
        if "no manifests" in message or "no utterance produced" in message:
            return EXIT_NO_INPUT
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
