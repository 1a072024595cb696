"""Command-line interface.

Thin client over the HTTP service: every subcommand builds a request and the
in-process app (or a remote server via --server) does the real work, so CLI
and service behavior cannot drift apart.

Exit codes: 0 success, 1 runtime/sweep failure, 2 bad flags, 3 validation
failure, 4 placement failure. FOGSIM_LOG=DEBUG|INFO|... controls logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import resource
import sys
import time
from pathlib import Path
from typing import List, Optional

import httpx

from .metrics import SWEEP_COLUMNS

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_PLACEMENT = 4

_CODE_TO_EXIT = {
    "invalid_request": EXIT_USAGE,
    "validation_failed": EXIT_VALIDATION,
    "placement_failed": EXIT_PLACEMENT,
}

log = logging.getLogger("fogsim.cli")


class ServiceError(Exception):
    def __init__(self, exit_code: int, message: str, details: List[str]):
        super().__init__(message)
        self.exit_code = exit_code
        self.details = details


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service.client import in_process_client

    return in_process_client()


def _call(client: httpx.Client, method: str, path: str, payload=None) -> dict:
    resp = client.request(method, path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()["error"]
        code = body.get("code", "")
        message = body.get("message", resp.text)
        details = body.get("details", [])
    except Exception:
        code, message, details = "", f"HTTP {resp.status_code}: {resp.text}", []
    raise ServiceError(_CODE_TO_EXIT.get(code, EXIT_FAILURE), message, details)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ServiceError(EXIT_USAGE, f"cannot read {path}: {exc}", [])
    except json.JSONDecodeError as exc:
        raise ServiceError(EXIT_VALIDATION, f"{path}: invalid JSON: {exc}", [])


def _read_constraints(path: Optional[str]) -> List[dict]:
    if not path:
        return []
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ServiceError(EXIT_VALIDATION, f"{path}: expected a JSON list", [])
    return doc


def _parse_configs(text: str) -> List[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad config list {text!r}; use forms like 3, 1,2,4 or 1..5"
        )
    if not values:
        raise argparse.ArgumentTypeError("config list is empty")
    return values


def _csv_list(text: str) -> List[str]:
    values = [part.strip() for part in text.split(",") if part.strip()]
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _write_report_files(out_dir: str, report: dict, wall_ms: float,
                        client_wall_ms: float) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    # identical runs must produce identical bytes; keep host-dependent
    # timings out of report.json and in the sidecar instead
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    runstats = {
        "wall_ms": round(wall_ms, 3),
        "client_wall_ms": round(client_wall_ms, 3),
        "peak_rss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
    }
    (out / "runstats.json").write_text(json.dumps(runstats, indent=2) + "\n")
    return report_path


def _print_run_summary(report: dict, report_path: Path) -> None:
    params = report.get("parameters", {})
    bits = [f"scenario {report['scenario']}"]
    if "config" in params:
        bits.append(f"config {params['config']}")
    if params.get("variant") and params["variant"] != "-":
        bits.append(f"variant {params['variant']}")
    bits.append(f"placement {report['placement_policy']}")
    print(" ".join(bits))
    for loop in report.get("loops", []):
        print(
            f"loop {loop['name']}: mean {loop['mean_ms']:.3f} ms "
            f"(n={loop['count']}, min {loop['min_ms']}, max {loop['max_ms']})"
        )
    net = report.get("network", {})
    print(f"network usage: {net.get('usage', 0.0):.3f}")
    energy = report.get("energy", {}).get("by_class_j", {})
    if energy:
        print("energy (J): " + ", ".join(f"{k} {v:.1f}" for k, v in energy.items()))
    print(f"report: {report_path}")


def cmd_run(args) -> int:
    if args.scenario and (args.topology or args.app):
        raise ServiceError(EXIT_USAGE, "--scenario and --topology/--app are exclusive", [])
    if not args.scenario and not (args.topology and args.app):
        raise ServiceError(EXIT_USAGE, "need --scenario, or both --topology and --app", [])
    if args.scenario:
        payload = {
            "scenario": {
                "scenario": args.scenario,
                "config": args.config,
                "variant": args.headset,
                "placement": args.placement,
                "duration_ms": args.duration_ms,
                "seed": args.seed,
                "distribution": args.distribution,
                "ggs_period_ms": args.ggs_period_ms,
            }
        }
    else:
        if args.duration_ms is None:
            raise ServiceError(EXIT_USAGE, "--duration-ms is required for custom runs", [])
        payload = {
            "custom": {
                "topology": _read_json(args.topology),
                "app": _read_json(args.app),
                "constraints": _read_constraints(args.constraints),
                "placement": args.placement,
                "duration_ms": args.duration_ms,
                "seed": args.seed,
                "distribution": args.distribution,
            }
        }
    t0 = time.perf_counter()
    with _client(args.server) as client:
        data = _call(client, "POST", "/runs", payload)
    client_wall_ms = (time.perf_counter() - t0) * 1000.0
    report_path = _write_report_files(
        args.out, data["report"], data["wall_ms"], client_wall_ms
    )
    _print_run_summary(data["report"], report_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    payload = {
        "scenario": args.scenario,
        "configs": args.configs,
        "placements": args.placements,
        "variants": args.headsets,
        "duration_ms": args.duration_ms,
        "seed": args.seed,
        "distribution": args.distribution,
        "ggs_period_ms": args.ggs_period_ms,
        "jobs": args.jobs,
    }
    with _client(args.server) as client:
        data = _call(client, "POST", "/sweeps", payload)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in data["rows"]:
            writer.writerow(row)
    print(f"wrote {len(data['rows'])} rows to {csv_path}")
    if data["failures"]:
        for failure in data["failures"]:
            print(
                f"FAILED {failure['scenario']} config {failure['config']} "
                f"variant {failure['variant']} placement {failure['placement']}: "
                f"{failure['error']}",
                file=sys.stderr,
            )
        return EXIT_FAILURE
    return EXIT_OK


def cmd_validate(args) -> int:
    payload = {
        "topology": _read_json(args.topology),
        "app": _read_json(args.app),
        "constraints": _read_constraints(args.constraints),
        "placement": args.placement,
    }
    with _client(args.server) as client:
        data = _call(client, "POST", "/validate", payload)
    for line in data["violations"]:
        print(f"violation: {line}", file=sys.stderr)
    for line in data["warnings"]:
        print(f"warning: {line}", file=sys.stderr)
    if data["valid"]:
        print("valid")
        return EXIT_OK
    return EXIT_VALIDATION


def cmd_list_scenarios(args) -> int:
    with _client(args.server) as client:
        data = _call(client, "GET", "/scenarios")
    for s in data["scenarios"]:
        configs = ",".join(str(c) for c in s["configs"])
        variants = ",".join(s["variants"])
        print(f"{s['name']}: configs [{configs}] variants [{variants}] "
              f"default {s['default_duration_ms']:.0f} ms")
        print(f"  {s['description']}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("fogsim.service.app:app", host=args.host, port=args.port,
                log_level=(os.environ.get("FOGSIM_LOG") or "info").lower())
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--server", help="remote service URL; default runs in-process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fogsim",
        description="Discrete-event fog/edge application simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario or a custom model")
    run.add_argument("--scenario", help="built-in scenario name")
    run.add_argument("--config", type=int, default=1, help="scale level 1..5")
    run.add_argument("--headset", choices=["A", "B"], help="eeg_game variant")
    run.add_argument("--topology", help="topology JSON file (custom run)")
    run.add_argument("--app", help="application JSON file (custom run)")
    run.add_argument("--constraints", help="placement constraints JSON file")
    run.add_argument("--placement", choices=["cloud", "edgeward"],
                     default="edgeward")
    run.add_argument("--duration-ms", type=float, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--distribution", choices=["deterministic", "exponential"])
    run.add_argument("--ggs-period-ms", type=float, default=None,
                     help="eeg_game global-state broadcast period")
    run.add_argument("--out", default=".", help="directory for report.json")
    _add_common(run)
    run.set_defaults(fn=cmd_run)

    sweep = sub.add_parser("sweep", help="run a scenario grid, write sweep.csv")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--configs", type=_parse_configs, default=[1, 2, 3, 4, 5],
                       help="e.g. 3 or 1,2,4 or 1..5")
    sweep.add_argument("--placements", type=_csv_list, default=["cloud", "edgeward"])
    sweep.add_argument("--headsets", type=_csv_list, default=None,
                       help="eeg_game variants, e.g. A,B")
    sweep.add_argument("--duration-ms", type=float, default=None)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--distribution", choices=["deterministic", "exponential"])
    sweep.add_argument("--ggs-period-ms", type=float, default=None)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel workers")
    sweep.add_argument("--out", default=".", help="directory for sweep.csv")
    _add_common(sweep)
    sweep.set_defaults(fn=cmd_sweep)

    val = sub.add_parser("validate", help="validate model files")
    val.add_argument("--topology", required=True)
    val.add_argument("--app", required=True)
    val.add_argument("--constraints")
    val.add_argument("--placement", choices=["cloud", "edgeward"],
                     help="also dry-run this placement policy")
    _add_common(val)
    val.set_defaults(fn=cmd_validate)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    _add_common(ls)
    ls.set_defaults(fn=cmd_list_scenarios)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("FOGSIM_LOG")
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING) if level else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in exc.details:
            print(f"  {line}", file=sys.stderr)
        return exc.exit_code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
