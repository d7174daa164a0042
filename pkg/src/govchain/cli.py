"""Command-line interface.

Subcommand handlers return the text to print. Failures come back as
``"Error: ..."`` strings, which ``main`` routes to stderr with a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import difflib
import json
import pathlib
import sys
from collections.abc import Sequence

import structlog
from rich.console import Console

from govchain.config import GovchainSettings
from govchain.config import load_scenario
from govchain.exceptions import GovchainError
from govchain.ledger import filter_events
from govchain.log import configure_logging
from govchain.presets import PRESETS
from govchain.presets import preset
from govchain.presets import preset_document
from govchain.report import REGISTRY_NAMES
from govchain.report import RunReport
from govchain.report import conformance_matrix
from govchain.report import load_report
from govchain.report import registry_rows
from govchain.report import render_plain
from govchain.report import render_rich
from govchain.runner import run_scenario

logger = structlog.get_logger()

DIFF_CONTEXT_LINES = 20


def _default_out(settings: GovchainSettings, stem: str) -> pathlib.Path:
    return settings.parse_reports_dir() / f"{stem}.json"


def _summary(report: RunReport, path: pathlib.Path) -> str:
    lines = [f"report: {path}", f"profile: {report.profile}"]
    lines.extend(
        f"{node.node_id} [{node.chain_id}] tip={node.tip_height} "
        f"finalized={node.finalized_height} state={node.state_hash[:16]}"
        for node in report.nodes
    )
    lines.extend(
        f"proposal {outcome.proposal_id} [{outcome.chain_id}]: "
        f"{outcome.status}"
        for outcome in report.proposals
    )
    return "\n".join(lines)


def cmd_run(
    config_path: str,
    out: str | None,
    settings: GovchainSettings,
) -> str:
    """Run a scenario file and write its report."""
    try:
        config = load_scenario(config_path)
        path = (
            pathlib.Path(out)
            if out
            else _default_out(settings, pathlib.Path(config_path).stem)
        )
        report = run_scenario(config, path, settings)
    except GovchainError as e:
        return f"Error: {e}"
    return _summary(report, path)


def cmd_preset(
    name: str,
    out: str | None,
    settings: GovchainSettings,
    *,
    document: bool = False,
) -> str:
    """Run a preset, or print its scenario document."""
    try:
        if document:
            text = json.dumps(preset_document(name), indent=2) + "\n"
            if out:
                pathlib.Path(out).write_text(text)
                return f"scenario written: {out}"
            return text.rstrip("\n")
        config = preset(name)
        path = pathlib.Path(out) if out else _default_out(settings, name)
        report = run_scenario(config, path, settings)
    except GovchainError as e:
        return f"Error: {e}"
    return _summary(report, path)


def cmd_matrix(
    report_paths: Sequence[str],
    *,
    output: str = "plain",
    console: Console | None = None,
) -> str:
    """Conformance matrix over one column per report."""
    try:
        matrix = conformance_matrix(
            [load_report(path) for path in report_paths]
        )
    except GovchainError as e:
        return f"Error: {e}"
    if output == "json":
        return matrix.to_json().rstrip("\n")
    if output == "rich":
        render_rich(matrix, console or Console())
        return ""
    return render_plain(matrix).rstrip("\n")


def cmd_logs(
    report_path: str,
    topic: str | None = None,
    height_from: int | None = None,
    height_to: int | None = None,
    chain_id: str | None = None,
) -> str:
    """On-chain events of a report, one JSON object per line."""
    try:
        report = load_report(report_path)
        if chain_id is not None and chain_id not in report.chain_events:
            available = ", ".join(report.chain_events)
            return (
                f"Error: Chain '{chain_id}' not in report. "
                f"Available chains: {available}"
            )
        height_range = None
        if height_from is not None or height_to is not None:
            height_range = (
                height_from if height_from is not None else 0,
                height_to if height_to is not None else sys.maxsize,
            )
        lines = []
        for chain, events in report.chain_events.items():
            if chain_id is not None and chain != chain_id:
                continue
            for event in filter_events(events, topic, height_range):
                record = {"chain_id": chain, **event.model_dump(mode="json")}
                lines.append(json.dumps(record, sort_keys=True))
    except GovchainError as e:
        return f"Error: {e}"
    return "\n".join(lines)


def cmd_replay(
    config_path: str,
    expect_path: str,
    settings: GovchainSettings,
) -> str:
    """Regenerate a report and compare it bytewise with a stored one."""
    try:
        expected = pathlib.Path(expect_path).read_text()
    except OSError as e:
        return f"Error: Cannot read expected report: {e}"
    try:
        actual = run_scenario(load_scenario(config_path), None, settings)
    except GovchainError as e:
        return f"Error: {e}"
    produced = actual.to_json()
    if produced == expected:
        return f"replay matches {expect_path}"
    diff = difflib.unified_diff(
        expected.splitlines(),
        produced.splitlines(),
        fromfile=expect_path,
        tofile="replay",
        lineterm="",
    )
    excerpt = "\n".join(list(diff)[:DIFF_CONTEXT_LINES])
    logger.warning("replay mismatch", expected=expect_path)
    return f"Error: Replay differs from {expect_path}\n{excerpt}"


def cmd_registry(
    report_path: str,
    name: str,
    chain_id: str | None = None,
) -> str:
    """One registry of a chain's reference node as an aligned table."""
    try:
        report = load_report(report_path)
        if not report.registries:
            return "Error: Report holds no registries"
        chain = chain_id or next(iter(report.registries))
        if chain not in report.registries:
            available = ", ".join(report.registries)
            return (
                f"Error: Chain '{chain}' not in report. "
                f"Available chains: {available}"
            )
        rows = registry_rows(report.registries[chain], name)
    except GovchainError as e:
        return f"Error: {e}"
    if not rows:
        return f"{name} [{chain}]: empty"
    width = max(len(key) for key, _ in rows)
    lines = [f"{name} [{chain}]"]
    lines.extend(f"{key.ljust(width)}  {value}" for key, value in rows)
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="govchain",
        description="Blockchain governance pattern simulator.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a scenario file")
    run.add_argument("config", help="scenario JSON file")
    run.add_argument("--out", help="report path")

    pre = commands.add_parser("preset", help="run a reference profile")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("--out", help="report (or document) path")
    pre.add_argument(
        "--document",
        action="store_true",
        help="emit the scenario document instead of running it",
    )

    matrix = commands.add_parser("matrix", help="conformance matrix")
    matrix.add_argument("reports", nargs="+", help="run report files")
    matrix.add_argument(
        "--output", choices=("plain", "rich", "json"), default="plain"
    )

    logs = commands.add_parser("logs", help="query on-chain event logs")
    logs.add_argument("report")
    logs.add_argument("--topic")
    logs.add_argument("--from", dest="height_from", type=int)
    logs.add_argument("--to", dest="height_to", type=int)
    logs.add_argument("--chain")

    replay = commands.add_parser("replay", help="check a stored report")
    replay.add_argument("config")
    replay.add_argument("--expect", required=True, help="stored report")

    registry = commands.add_parser("registry", help="print a registry")
    registry.add_argument("report")
    registry.add_argument("name", choices=REGISTRY_NAMES)
    registry.add_argument("--chain")
    return parser


def dispatch(args: argparse.Namespace, settings: GovchainSettings) -> str:
    match args.command:
        case "run":
            return cmd_run(args.config, args.out, settings)
        case "preset":
            return cmd_preset(
                args.name, args.out, settings, document=args.document
            )
        case "matrix":
            return cmd_matrix(args.reports, output=args.output)
        case "logs":
            return cmd_logs(
                args.report,
                args.topic,
                args.height_from,
                args.height_to,
                args.chain,
            )
        case "replay":
            return cmd_replay(args.config, args.expect, settings)
        case "registry":
            return cmd_registry(args.report, args.name, args.chain)
    msg = f"unknown command {args.command}"
    raise AssertionError(msg)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = GovchainSettings()
    configure_logging(settings)
    output = dispatch(args, settings)
    if output.startswith("Error"):
        print(output, file=sys.stderr)
        return 1
    if output:
        print(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
