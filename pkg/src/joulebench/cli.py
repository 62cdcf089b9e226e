"""Command-line interface: run | mock | report.

Exit codes: 0 success; 1 configuration, dataset, or report-schema error;
2 endpoint or power-source failure; 3 benchmark completed but some requests
failed.
"""

from __future__ import annotations

import argparse
import errno
import logging
import sys
from pathlib import Path

from . import __version__, harness, report as report_mod
from .config import (
    BenchConfig,
    DispatchMode,
    DispatchPolicy,
    apply_overrides,
    load_config_file,
    validate_config,
)
from .dataset import load_prompts
from .energy import GridProfile
from .errors import (
    BenchError,
    ConfigError,
    DatasetError,
    DispatchAborted,
    EndpointUnreachable,
    InsufficientPrompts,
    NoSources,
    SchemaMismatch,
    SourceInitFailure,
)
from .mock_server import MockConfig, bind_socket, run_mock_server
from .planner import plan_runs

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ENDPOINT = 2
EXIT_PARTIAL = 3


def _comma_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _comma_ints(value: str) -> list[int]:
    return [int(item) for item in _comma_list(value)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="joulebench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"joulebench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a benchmark plan and write a report")
    run.add_argument("--config", help="YAML config file; flags override its fields")
    run.add_argument("--endpoint", help="completions endpoint base URL")
    run.add_argument("--models", type=_comma_list, help="comma-separated model identifiers")
    run.add_argument("--loads", type=_comma_ints, help="comma-separated request loads")
    run.add_argument("--warmup", type=int, help="warm-up requests before every run (default 200)")
    run.add_argument("--repeats", type=int, help="repeats per (model, load) pair")
    run.add_argument("--dataset", help="prompt dataset path")
    run.add_argument("--dataset-format", choices=["hellaswag", "lines"], help="dataset format")
    run.add_argument("--max-prompts", type=int, help="read at most this many prompts")
    run.add_argument("--dispatch", choices=["burst", "rate"], help="dispatch mode")
    run.add_argument("--rate", type=float, help="requests/second for rate dispatch")
    run.add_argument("--sample-interval", type=float, help="power sampling interval seconds (default 15)")
    run.add_argument("--max-tokens", type=int, help="max output tokens per request")
    run.add_argument("--intensity", type=float, help="grid carbon intensity, g CO2eq per kWh")
    run.add_argument("--pue", type=float, help="power usage effectiveness multiplier")
    run.add_argument("--sources", type=_comma_list, help="power sources (auto, mock, gpu, cpu, constant:W, trace:FILE)")
    run.add_argument("--plateau-epsilon", type=float, default=0.05, help="relative plateau threshold")
    run.add_argument("--timeout", type=float, default=300.0, help="per-request timeout seconds")
    run.add_argument("--samples-dir", help="also write raw power samples as CSV per run")
    run.add_argument("--out", default="report.json", help="report output path (default report.json)")
    run.add_argument("-v", "--verbose", action="count", default=0)

    mock = sub.add_parser("mock", help="serve the deterministic mock backend")
    mock.add_argument("--host", default="127.0.0.1")
    mock.add_argument("--port", type=int, default=8000, help="0 picks a free port")
    mock.add_argument("--capacity", type=int, default=100, help="max concurrent batch size")
    mock.add_argument("--duration", type=float, default=2.0, help="seconds each request occupies a slot")
    mock.add_argument("--tokens", type=int, default=16, help="completion tokens per response")
    mock.add_argument("--idle-power", type=float, default=100.0, help="watts at zero load")
    mock.add_argument("--peak-power", type=float, default=300.0, help="extra watts at full batch")
    mock.add_argument("--fault-every", type=int, help="every k-th request returns HTTP 500")
    mock.add_argument("-v", "--verbose", action="count", default=0)

    rep = sub.add_parser("report", help="summarize a report and emit plot data")
    rep.add_argument("path", help="report JSON path")
    rep.add_argument("--out-dir", help="write per-figure CSV files here")
    rep.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _config_from_args(args: argparse.Namespace) -> BenchConfig:
    config = load_config_file(args.config) if args.config else BenchConfig()
    dispatch = None
    if args.dispatch is not None or args.rate is not None:
        mode = DispatchMode.FIXED_RATE if (args.dispatch == "rate" or (args.dispatch is None and args.rate is not None)) else DispatchMode.BURST
        dispatch = DispatchPolicy(mode, args.rate)
    grid = None
    if args.intensity is not None or args.pue is not None:
        grid = GridProfile(
            carbon_intensity=args.intensity if args.intensity is not None else config.grid.carbon_intensity,
            pue=args.pue if args.pue is not None else config.grid.pue,
        )
    return apply_overrides(
        config,
        endpoint_url=args.endpoint,
        models=tuple(args.models) if args.models is not None else None,
        request_loads=tuple(args.loads) if args.loads is not None else None,
        warmup_count=args.warmup,
        repeats=args.repeats,
        dataset_path=args.dataset,
        dataset_format=args.dataset_format,
        max_prompts=args.max_prompts,
        dispatch=dispatch,
        sample_interval=args.sample_interval,
        max_output_tokens=args.max_tokens,
        grid=grid,
        power_sources=tuple(args.sources) if args.sources is not None else None,
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = validate_config(_config_from_args(args))
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        prompts = load_prompts(config.dataset_path, config.dataset_format, config.max_prompts)
        plan = plan_runs(config, prompts)
    except (DatasetError, InsufficientPrompts) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.info("plan: %d runs (%d models x %d loads x %d repeats)",
             len(plan), len(config.models), len(config.request_loads), config.repeats)
    try:
        report = harness.run_benchmark(
            config,
            prompts,
            plan,
            plateau_epsilon=args.plateau_epsilon,
            samples_dir=args.samples_dir,
            request_timeout=args.timeout,
        )
    except (EndpointUnreachable, DispatchAborted, NoSources, SourceInitFailure) as exc:
        print(f"benchmark aborted: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT

    report_mod.write_report(report, args.out)
    print(report_mod.render_summary(report))
    print(f"report written to {args.out}")
    failed = report["meta"]["failed_requests_total"]
    if failed:
        print(f"warning: {failed} requests failed "
              f"(runs: {', '.join(report['meta']['runs_with_failures'])})", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_mock(args: argparse.Namespace) -> int:
    fault = None
    if args.fault_every is not None:
        if args.fault_every < 1:
            print("--fault-every must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        every = args.fault_every
        fault = lambda index: (index + 1) % every == 0  # noqa: E731
    try:
        cfg = MockConfig(
            capacity=args.capacity,
            per_request_duration=args.duration,
            tokens_per_response=args.tokens,
            idle_power=args.idle_power,
            peak_power=args.peak_power,
            fault_schedule=fault,
        )
    except ValueError as exc:
        print(f"mock config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sock = bind_socket(args.host, args.port)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            print(f"port {args.port} already in use on {args.host}", file=sys.stderr)
            return EXIT_CONFIG
        raise
    host, port = sock.getsockname()[:2]
    print(f"mock serving on http://{host}:{port} "
          f"(capacity={cfg.capacity}, duration={cfg.per_request_duration}s, "
          f"idle={cfg.idle_power}W, peak={cfg.peak_power}W)", flush=True)
    try:
        run_mock_server(cfg, sock)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        report = report_mod.load_report(args.path)
    except FileNotFoundError:
        print(f"no report at {args.path}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaMismatch as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report_mod.render_summary(report))
    if args.out_dir:
        for path in report_mod.emit_plot_data(report, args.out_dir):
            print(f"wrote {path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "mock":
            return cmd_mock(args)
        if args.command == "report":
            return cmd_report(args)
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError(f"unhandled command {args.command}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
