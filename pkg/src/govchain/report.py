"""Run reports and the evidence-based conformance matrix."""

from __future__ import annotations

import json
import pathlib
from collections.abc import Iterable
from collections.abc import Sequence
from enum import StrEnum
from typing import Any

import pydantic
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from rich.console import Console
from rich.table import Table

from govchain.config import Pattern
from govchain.exceptions import ConfigurationError
from govchain.node import SimEvent
from govchain.registry import social_contract_get
from govchain.state import ChainState
from govchain.state import EventRecord

REPORT_VERSION = 1

# The fourteen components compared across the two reference profiles.
TABLE_ROWS: tuple[Pattern, ...] = (
    Pattern.NETWORK_FREEZER,
    Pattern.SHARDED_CHAIN,
    Pattern.INCENTIVE_DISTRIBUTOR,
    Pattern.PROTOCOL_UPGRADE,
    Pattern.DATA_MIGRATOR,
    Pattern.PARTICIPATION_PERMISSION,
    Pattern.ACCOUNTABILITY_TRACER,
    Pattern.BENEVOLENT_DICTATOR,
    Pattern.TRANSACTION_FILTER,
    Pattern.VALIDATOR_SELECTION,
    Pattern.BLOCK_FINALITY_DECIDER,
    Pattern.LOG_EXTRACTOR,
    Pattern.TOKEN_LOCKER,
    Pattern.CARBONVOTE,
)
EXTENDED_ROWS: tuple[Pattern, ...] = tuple(
    pattern for pattern in Pattern if pattern not in TABLE_ROWS
)


class CellState(StrEnum):
    ACTIVE = "active"
    DISABLED = "disabled"
    NOT_APPLICABLE = "n/a"

    @property
    def present(self) -> bool:
        return self is not CellState.NOT_APPLICABLE


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MatrixCell(_Frozen):
    state: CellState
    mechanism: str = ""


class NodeSummary(_Frozen):
    node_id: str
    chain_id: str
    tip_height: int
    head: str
    finalized_height: int
    state_hash: str
    protocol_version: int
    rejected_blocks: int


class ProposalOutcome(_Frozen):
    chain_id: str
    proposal_id: str
    status: str
    action: str
    scheme: str
    yes_weight: str | None = None
    no_weight: str | None = None
    turnout: str | None = None


class SupplySummary(_Frozen):
    chain_id: str
    genesis: int
    minted: int
    slashed: int
    destroyed: int
    total_balance: int
    locked: int
    reconciles: bool


class RegistryView(_Frozen):
    """Built-in contract registries of one chain at the end of a run."""

    scam_list: dict[str, str] = Field(default_factory=dict)
    social_contract: str | None = None
    freezes: dict[str, bool] = Field(default_factory=dict)
    roles: dict[str, list[str]] = Field(default_factory=dict)
    members: dict[str, str | None] = Field(default_factory=dict)


REGISTRY_NAMES = (
    "scam-list",
    "social-contract",
    "freezes",
    "roles",
    "members",
)


def registry_view(state: ChainState) -> RegistryView:
    return RegistryView(
        scam_list={
            address: entry.value.get("note", "")
            for address, entry in sorted(state.scam_list.items())
        },
        social_contract=social_contract_get(state),
        freezes={
            target: flag.frozen
            for target, flag in sorted(state.freezes.items())
        },
        roles={
            address: [role.value for role in roles]
            for address, roles in sorted(state.roles.items())
        },
        members=dict(sorted(state.membership.members.items())),
    )


def registry_rows(view: RegistryView, name: str) -> list[tuple[str, str]]:
    """``(key, value)`` rows of one registry for display.

    Raises:
        ConfigurationError: ``name`` is not a registry.
    """
    match name:
        case "scam-list":
            return list(view.scam_list.items())
        case "social-contract":
            return [("maintainer", view.social_contract or "")]
        case "freezes":
            return [
                (target, "frozen" if frozen else "active")
                for target, frozen in view.freezes.items()
            ]
        case "roles":
            return [(a, ", ".join(r)) for a, r in view.roles.items()]
        case "members":
            return [(a, i or "") for a, i in view.members.items()]
    msg = f"unknown registry '{name}' (one of {', '.join(REGISTRY_NAMES)})"
    raise ConfigurationError(msg)


class RunReport(_Frozen):
    """Everything a run produced; regenerating it reproduces the bytes.

    ``events`` is the off-chain log of nodes and network;
    ``chain_events`` holds each chain's on-chain log as seen by its
    reference node.
    """

    report_version: int = REPORT_VERSION
    profile: str
    config_digest: str
    seed: int
    horizon: int
    nodes: list[NodeSummary]
    finalized_heights: dict[str, int]
    proposals: list[ProposalOutcome]
    supply: list[SupplySummary]
    matrix: dict[Pattern, MatrixCell]
    stats: dict[str, int] = Field(default_factory=dict)
    events: list[SimEvent] = Field(default_factory=list)
    chain_events: dict[str, list[EventRecord]] = Field(default_factory=dict)
    registries: dict[str, RegistryView] = Field(default_factory=dict)

    def to_json(self) -> str:
        data = self.model_dump(mode="json")
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def write(self, path: str | pathlib.Path) -> pathlib.Path:
        path = pathlib.Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def load_report(path: str | pathlib.Path) -> RunReport:
    path = pathlib.Path(path)
    try:
        return RunReport.model_validate_json(path.read_text())
    except FileNotFoundError:
        msg = f"report not found: {path}"
        raise ConfigurationError(msg) from None
    except pydantic.ValidationError as exc:
        msg = f"{path} is not a run report: {exc.errors()[0]['msg']}"
        raise ConfigurationError(msg) from None


# -- evidence -------------------------------------------------------------


class EvidenceLog:
    """Chain and network events of one run, searchable by topic.

    Chain events caused by a transaction are remembered as such, which
    tells genesis allocations apart from runtime activity.
    """

    def __init__(
        self,
        sim_events: Iterable[SimEvent],
        chain_events: Iterable[EventRecord],
    ):
        self._by_topic: dict[str, list[tuple[dict[str, Any], bool]]] = {}
        for event in sim_events:
            self._add(event.topic, event.payload, False)
        for record in chain_events:
            self._add(record.topic, record.payload, record.tx_hash is not None)

    def _add(self, topic: str, payload: dict[str, Any], by_tx: bool) -> None:
        self._by_topic.setdefault(topic, []).append((payload, by_tx))

    def find(
        self, topic: str, *, by_tx: bool = False, **match: Any
    ) -> list[dict[str, Any]]:
        """Payloads of ``topic`` events with the given field values.

        ``by_tx`` keeps only chain events caused by a transaction.
        """
        return [
            payload
            for payload, caused in self._by_topic.get(topic, [])
            if (caused or not by_tx)
            and all(payload.get(k) == v for k, v in match.items())
        ]

    def values(
        self, topic: str, key: str, *, by_tx: bool = False, **match: Any
    ) -> list[str]:
        found = self.find(topic, by_tx=by_tx, **match)
        return sorted({str(p.get(key)) for p in found})


def _active(mechanism: str) -> MatrixCell:
    return MatrixCell(state=CellState.ACTIVE, mechanism=mechanism)


NOT_APPLICABLE = MatrixCell(state=CellState.NOT_APPLICABLE)


def evidence_cell(pattern: Pattern, log: EvidenceLog) -> MatrixCell:
    """Cell of one pattern; active only with a characteristic event."""
    match pattern:
        case Pattern.NETWORK_FREEZER:
            if log.find("network.frozen"):
                authority = log.values("network.frozen", "authority")
                kinds = {
                    "validator-vote" if a == "validator-vote" else "admin"
                    for a in authority
                }
                return _active(f"freeze by {', '.join(sorted(kinds))}")
        case Pattern.SHARDED_CHAIN:
            included = log.find("relay.included")
            if included:
                shards = log.values("relay.included", "shard_id")
                return _active(
                    f"relay carried {len(included)} headers from shards "
                    f"{', '.join(shards)}"
                )
        case Pattern.INCENTIVE_DISTRIBUTOR:
            if log.find("incentive.distributed"):
                return _active("block rewards and fee split")
            if log.find("incentive.configured", enabled=False):
                return MatrixCell(
                    state=CellState.DISABLED,
                    mechanism="present, disabled by configuration",
                )
        case Pattern.PROTOCOL_UPGRADE:
            if log.find("upgrade.enacted"):
                kinds = log.values("upgrade.enacted", "compatibility")
                return _active(f"enacted {', '.join(kinds)}")
        case Pattern.DATA_MIGRATOR:
            if log.find("migration.completed"):
                targets = log.values("migration.completed", "target_chain_id")
                return _active(f"snapshot migration to {', '.join(targets)}")
        case Pattern.PARTICIPATION_PERMISSION:
            if log.find("member.joined", mode="permissioned"):
                if log.find("invite.consumed"):
                    return _active("invitation and identity")
                return _active("authority-approved membership")
        case Pattern.ACCOUNTABILITY_TRACER:
            traced = [
                p
                for p in log.find("accountability.traced")
                if p.get("transactions", 0) > 0
            ]
            if traced:
                kinds = sorted({str(p["mechanism"]) for p in traced})
                return _active(f"sender {', '.join(kinds)}")
        case Pattern.BENEVOLENT_DICTATOR:
            overrides = [
                name
                for topic, name in (
                    ("proposal.fast-tracked", "fast-track"),
                    ("proposal.cancelled", "cancel"),
                )
                if log.find(topic)
            ]
            if overrides:
                return _active(f"override: {', '.join(overrides)}")
        case Pattern.TRANSACTION_FILTER:
            if log.find("tx.rejected"):
                reasons = log.values("tx.rejected", "reason")
                return _active(f"rejected by {', '.join(reasons)}")
        case Pattern.VALIDATOR_SELECTION:
            if log.find("block.applied"):
                modes = log.values("block.applied", "selection")
                return _active(", ".join(modes))
        case Pattern.BLOCK_FINALITY_DECIDER:
            if log.find("finality.advanced"):
                modes = log.values("finality.advanced", "mode")
                return _active(", ".join(modes))
        case Pattern.LOG_EXTRACTOR:
            if log.find("logs.extracted"):
                return _active("event log queries")
        case Pattern.CONTRACT_FREEZER:
            if log.find("contract.frozen"):
                targets = log.values("contract.frozen", "target")
                return _active(f"froze {', '.join(targets)}")
        case Pattern.SOCIAL_CONTRACT:
            if log.find("social-contract.set"):
                return _active("maintainer specification")
        case Pattern.SCAM_LIST:
            if log.find("scam-list.added"):
                return _active("flagged addresses")
        case Pattern.TOKEN_LOCKER:
            if log.find("lock.created", by_tx=True):
                purposes = log.values("lock.created", "purpose", by_tx=True)
                return _active(f"locks for {', '.join(purposes)}")
        case Pattern.CARBONVOTE:
            if log.find("vote.cast", scheme="carbonvote"):
                return _active("token-weighted votes")
        case Pattern.QUADRATIC_VOTING:
            if log.find("vote.cast", scheme="quadratic"):
                return _active("n votes cost n squared tokens")
        case Pattern.CROSS_CHAIN_TOKEN_VOTING:
            if log.find("crossvote.resolved"):
                return _active("signed auxiliary tally")
        case Pattern.LIQUID_DEMOCRACY:
            if log.find("vote.delegated"):
                return _active("revocable delegation")
    return NOT_APPLICABLE


def matrix_column(log: EvidenceLog) -> dict[Pattern, MatrixCell]:
    return {pattern: evidence_cell(pattern, log) for pattern in Pattern}


# -- the matrix across runs -----------------------------------------------


class ConformanceMatrix(_Frozen):
    """Patterns by profile, derived from the runs' event logs."""

    profiles: list[str]
    rows: dict[Pattern, dict[str, MatrixCell]]

    def cell(self, pattern: Pattern, profile: str) -> MatrixCell:
        return self.rows[pattern][profile]

    def presence(self, rows: Sequence[Pattern] = TABLE_ROWS) -> dict:
        """``{pattern: {profile: present}}`` for comparisons."""
        return {
            pattern.value: {
                profile: self.rows[pattern][profile].state.present
                for profile in self.profiles
            }
            for pattern in rows
        }

    def to_json(self) -> str:
        data = self.model_dump(mode="json")
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


def conformance_matrix(reports: Sequence[RunReport]) -> ConformanceMatrix:
    profiles: list[str] = []
    for report in reports:
        name = report.profile
        suffix = 2
        while name in profiles:
            name = f"{report.profile}#{suffix}"
            suffix += 1
        profiles.append(name)
    rows = {
        pattern: {
            profile: report.matrix.get(pattern, NOT_APPLICABLE)
            for profile, report in zip(profiles, reports, strict=True)
        }
        for pattern in Pattern
    }
    return ConformanceMatrix(profiles=profiles, rows=rows)


def _cell_text(cell: MatrixCell) -> str:
    if cell.state is CellState.NOT_APPLICABLE:
        return "N/A"
    return f"{cell.state.value}: {cell.mechanism}"


def render_plain(matrix: ConformanceMatrix) -> str:
    """Aligned plain-text table; the six extra patterns follow a rule."""
    header = ["component", *matrix.profiles]
    body = [
        [pattern.value, *(_cell_text(c) for c in cells.values())]
        for pattern, cells in (
            (p, matrix.rows[p]) for p in (*TABLE_ROWS, *EXTENDED_ROWS)
        )
    ]
    widths = [
        max(len(row[i]) for row in [header, *body])
        for i in range(len(header))
    ]

    def line(row: list[str]) -> str:
        return "  ".join(
            text.ljust(width) for text, width in zip(row, widths, strict=True)
        ).rstrip()

    separator = "  ".join("-" * width for width in widths)
    lines = [line(header), separator]
    lines.extend(line(row) for row in body[: len(TABLE_ROWS)])
    lines.append(separator)
    lines.extend(line(row) for row in body[len(TABLE_ROWS) :])
    return "\n".join(lines) + "\n"


def render_rich(matrix: ConformanceMatrix, console: Console) -> None:
    table = Table(title="Conformance matrix", show_lines=False)
    table.add_column("component", style="bold")
    for profile in matrix.profiles:
        table.add_column(profile)
    for index, pattern in enumerate((*TABLE_ROWS, *EXTENDED_ROWS)):
        table.add_row(
            pattern.value,
            *(_cell_text(cell) for cell in matrix.rows[pattern].values()),
            end_section=index == len(TABLE_ROWS) - 1,
        )
    console.print(table)
