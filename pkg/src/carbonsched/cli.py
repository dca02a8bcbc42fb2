"""Command-line entry point.

Subcommands: ``simulate`` (trace-driven policy comparison), ``serve`` (live
selection service), ``cee`` (efficiency quotient from explicit numbers),
``validate`` (input file checks).

Exit codes: 0 success, 1 data error, 2 configuration error. Stdout
summaries round to 4 significant digits and say so; report files carry the
exact values. Settings resolve as: flags > environment (CARBONSCHED_FEED_URL,
CARBONSCHED_POOL, CARBONSCHED_MAPPING) > config file > defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from .emissions import efficiency_comparison
from .errors import CarbonSchedError, ConfigError, DataError
from .live import DecisionLog, LiveServer, LiveService
from .registry import builtin_pool, load_pool_file, resolve_pool
from .selector import MAPPING_DIRECTIONS, BoundsWindow
from .simulator import SimulationConfig, run
from .traces import (
    iso_utc,
    load_carbon_trace_file,
    load_request_trace_file,
)

SAMPLE_CARBON = "sample_carbon.csv"
SAMPLE_REQUESTS = "sample_requests.csv"


def _sample_path(name: str) -> Path:
    return Path(str(resources.files("carbonsched").joinpath("data", name)))


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config file {config_path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {config_path} must hold a JSON object")
    return doc


def _setting(flag_value, env_name: str | None, config: dict, key: str, default):
    if flag_value is not None:
        return flag_value
    if env_name:
        env_value = os.environ.get(env_name)
        if env_value is not None:
            return env_value
    if key in config:
        return config[key]
    return default


def _window_from(config: dict, flag_value: str | None, default: BoundsWindow) -> BoundsWindow:
    if flag_value is not None:
        return BoundsWindow.parse(flag_value)
    bounds = config.get("bounds")
    if bounds is not None:
        if not isinstance(bounds, dict) or "mode" not in bounds:
            raise ConfigError("config key 'bounds' must be {mode, [hours]}")
        if bounds["mode"] == "whole_trace":
            return BoundsWindow.whole_trace()
        if bounds["mode"] == "trailing":
            return BoundsWindow.trailing(float(bounds.get("hours", 0)))
        raise ConfigError(f"unknown bounds.mode {bounds['mode']!r}")
    return default


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carbonsched",
        description="Carbon-intensity-aware model selection: simulate, serve, score.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="replay policies over carbon/request traces")
    sim.add_argument("--carbon", help="carbon trace CSV/JSON (default: bundled sample)")
    sim.add_argument("--requests", help="request trace CSV (default: bundled sample)")
    pool_group = sim.add_mutually_exclusive_group()
    pool_group.add_argument("--pool", help="pool CSV path")
    pool_group.add_argument(
        "--pool-builtin", choices=("full", "resnet"), help="bundled pool variant"
    )
    sim.add_argument("--mapping", choices=MAPPING_DIRECTIONS)
    sim.add_argument("--window", help="'whole' or a trailing hour count")
    sim.add_argument("--baseline", help="policy the CEE compares against")
    sim.add_argument("--out", help="report file path (default report.<format>)")
    sim.add_argument("--format", choices=("json", "csv"), dest="fmt")
    sim.add_argument("--config", help="JSON config file")

    serve = sub.add_parser("serve", help="run the live selection service")
    serve.add_argument("--config", help="JSON config file")
    serve.add_argument("--feed-url", help="intensity feed endpoint")
    serve.add_argument("--poll-seconds", type=float)
    serve_pool = serve.add_mutually_exclusive_group()
    serve_pool.add_argument("--pool", help="pool CSV path")
    serve_pool.add_argument("--pool-builtin", choices=("full", "resnet"))
    serve.add_argument("--mapping", choices=MAPPING_DIRECTIONS)
    serve.add_argument("--window", help="'whole' or a trailing hour count")
    serve.add_argument("--decision-log", help="JSON-lines decision log path")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)

    cee = sub.add_parser("cee", help="carbon-emission efficiency from explicit numbers")
    cee.add_argument("--baseline-error", type=float, required=True)
    cee.add_argument("--candidate-error", type=float, required=True)
    cee.add_argument("--baseline-carbon", type=float, required=True)
    cee.add_argument("--candidate-carbon", type=float, required=True)

    val = sub.add_parser("validate", help="check one input file and print a summary")
    val_group = val.add_mutually_exclusive_group(required=True)
    val_group.add_argument("--carbon", help="carbon trace CSV/JSON")
    val_group.add_argument("--requests", help="request trace CSV")
    val_group.add_argument("--pool", help="pool CSV path")
    val_group.add_argument("--pool-builtin", choices=("full", "resnet"))

    return parser


def _pool_spec(args, config: dict) -> str:
    if getattr(args, "pool", None):
        return args.pool
    if getattr(args, "pool_builtin", None):
        return args.pool_builtin
    env_pool = os.environ.get("CARBONSCHED_POOL")
    if env_pool:
        return env_pool
    return config.get("pool", "resnet")


def _cmd_simulate(args) -> int:
    config = _load_config_file(args.config)
    carbon_path = _setting(args.carbon, None, config, "carbon", _sample_path(SAMPLE_CARBON))
    requests_path = _setting(
        args.requests, None, config, "requests", _sample_path(SAMPLE_REQUESTS)
    )
    mapping = _setting(args.mapping, "CARBONSCHED_MAPPING", config, "mapping", "prose")
    window = _window_from(config, args.window, BoundsWindow.whole_trace())
    baseline = _setting(args.baseline, None, config, "baseline", "ResNet50")
    fmt = _setting(args.fmt, None, config, "format", "json")
    out = _setting(args.out, None, config, "out", f"report.{fmt}")
    gap_policy = config.get("gap_policy", "strict")

    carbon = load_carbon_trace_file(carbon_path)
    requests = load_request_trace_file(requests_path)
    sim_config = SimulationConfig(
        pool=_pool_spec(args, config),
        mapping=mapping,
        window=window,
        gap_policy=gap_policy,
        baseline=baseline,
    )
    report = run(sim_config, carbon, requests)

    out_path = Path(out)
    payload = report.to_json() if fmt == "json" else report.to_csv()
    out_path.write_text(payload, encoding="utf-8")

    print(f"simulation over {len(report.summaries[0].per_interval)} intervals")
    print(f"report written to {out_path} ({fmt})")
    print()
    header = f"{'policy':<14} {'total_carbon_g':>14} {'blended_error_%':>16} {'CEE_vs_' + baseline:>16}"
    print(header)
    for summary in report.summaries:
        if summary.policy == baseline:
            cee_text = "(baseline)"
        else:
            comparison = report.comparison_for(summary.policy)
            cee_text = "undefined" if comparison.cee is None else f"{comparison.cee:.4g}"
        print(
            f"{summary.policy:<14} {summary.total_carbon_g:>14.4g} "
            f"{summary.blended_error_pct:>16.4g} {cee_text:>16}"
        )
    print()
    print("(values rounded to 4 significant digits; the report file is authoritative)")
    return 0


def _cmd_serve(args) -> int:
    config = _load_config_file(args.config)
    feed_url = _setting(args.feed_url, "CARBONSCHED_FEED_URL", config, "feed_url", None)
    mapping = _setting(args.mapping, "CARBONSCHED_MAPPING", config, "mapping", "prose")
    window = _window_from(config, args.window, BoundsWindow.trailing(24))
    poll_seconds = float(_setting(args.poll_seconds, None, config, "poll_seconds", 60.0))
    log_path = _setting(args.decision_log, None, config, "decision_log", "decisions.jsonl")
    host = _setting(args.host, None, config, "host", "127.0.0.1")
    port = int(_setting(args.port, None, config, "port", 8080))

    if not feed_url:
        raise ConfigError(
            "no intensity feed configured: set --feed-url, CARBONSCHED_FEED_URL, "
            "or the feed_url config key"
        )
    pool = resolve_pool(_pool_spec(args, config))
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    service = LiveService(
        pool, mapping=mapping, window=window, decision_log=DecisionLog(log_path)
    )
    server = LiveServer(
        service, feed_url=feed_url, poll_seconds=poll_seconds, host=host, port=port
    )
    print(f"serving on {server.url} (feed {feed_url}, poll every {poll_seconds:g}s)")
    print(f"decision log: {log_path}")
    server.serve_forever()
    return 0


def _cmd_cee(args) -> int:
    comparison = efficiency_comparison(
        "baseline",
        "candidate",
        args.baseline_error,
        args.candidate_error,
        args.baseline_carbon,
        args.candidate_carbon,
    )
    print(f"quality_improvement_pct: {comparison.quality_improvement_pct:.6g}")
    print(f"delta_carbon_g: {comparison.delta_carbon_g:.6g}")
    if comparison.cee is None:
        print("cee: undefined (equal carbon totals)")
        raise DataError("CEE undefined: carbon totals are equal")
    print(f"cee: {comparison.cee:.6g}")
    return 0


def _cmd_validate(args) -> int:
    if args.carbon:
        trace = load_carbon_trace_file(args.carbon)
        span = trace.span()
        intensities = trace.intensities()
        print(f"carbon trace OK: {len(trace)} rows")
        print(f"span: {iso_utc(span.start)} .. {iso_utc(span.end)}")
        print(f"intensity g/kWh: min {min(intensities):g}, max {max(intensities):g}")
    elif args.requests:
        trace = load_request_trace_file(args.requests)
        span = trace.span()
        counts = [s.count for s in trace.samples]
        print(f"request trace OK: {len(trace)} rows")
        print(f"span: {iso_utc(span.start)} .. {iso_utc(span.end)}")
        print(f"counts: min {min(counts)}, max {max(counts)}, total {sum(counts)}")
    else:
        pool = (
            builtin_pool(args.pool_builtin)
            if args.pool_builtin
            else load_pool_file(args.pool)
        )
        print(f"pool OK: {len(pool)} rows")
        for profile in pool:
            print(f"{profile.name},{profile.energy_mj!r},{profile.error_rate_pct!r}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "serve": _cmd_serve,
        "cee": _cmd_cee,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CarbonSchedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
