"""Snapshot export/import for the data migrator, and event export."""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable
from collections.abc import Sequence
from typing import Any

import pydantic
import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt

from govchain.blocks import Block
from govchain.crypto import HexAddress
from govchain.crypto import HexDigest
from govchain.crypto import HexKey
from govchain.crypto import canonical_json
from govchain.crypto import hash_object
from govchain.exceptions import SnapshotIntegrityError
from govchain.state import ChainState
from govchain.state import EventRecord
from govchain.state import TokenLock

logger = structlog.get_logger()

REGISTRY_FIELDS = ("scam_list", "social_contract", "freezes")
GOVERNANCE_FIELDS = (
    "policy",
    "roles",
    "membership",
    "proposals",
    "ballots",
    "delegations",
    "supply",
    "lock_counter",
)


class SnapshotAccount(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    address: HexAddress
    balance: NonNegativeInt
    public_key: HexKey | None = None
    nonce: NonNegativeInt = 0


class Snapshot(BaseModel):
    """A chain's complete state at one height, with its block history.

    ``state_hash`` is the canonical hash of the exported state; ``digest``
    covers every other field of the document.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    chain_id: str
    taken_at_height: NonNegativeInt
    head: HexDigest | None = None
    state_hash: HexDigest
    accounts: list[SnapshotAccount]
    locks: list[TokenLock]
    registries: dict[str, Any]
    governance: dict[str, Any]
    blocks: list[Block] = Field(default_factory=list)
    digest: HexDigest | None = None

    def content_digest(self) -> str:
        return hash_object(
            self.model_dump(mode="json", exclude={"digest"})
        ).hex()

    def to_json(self) -> str:
        return canonical_json(self.model_dump(mode="json")).decode("ascii")


def export_snapshot(
    state: ChainState, blocks: Sequence[Block] = ()
) -> Snapshot:
    """Snapshot of ``state``; ``blocks`` is the chain leading to its head."""
    canonical = state.canonical_dict()
    accounts = []
    locks = []
    for address in sorted(state.accounts):
        record = canonical["accounts"][address]
        locks.extend(record.pop("locks"))
        accounts.append(record)

    snapshot = Snapshot(
        chain_id=state.chain_id,
        taken_at_height=state.height,
        head=state.head,
        state_hash=state.state_hash(),
        accounts=accounts,
        locks=locks,
        registries={name: canonical[name] for name in REGISTRY_FIELDS},
        governance={name: canonical[name] for name in GOVERNANCE_FIELDS},
        blocks=list(blocks),
    )
    return snapshot.model_copy(update={"digest": snapshot.content_digest()})


def _parse(document: Snapshot | str | bytes) -> Snapshot:
    if isinstance(document, Snapshot):
        return document
    try:
        return Snapshot.model_validate_json(document)
    except (pydantic.ValidationError, UnicodeDecodeError) as exc:
        msg = f"snapshot does not parse: {exc}"
        raise SnapshotIntegrityError(msg) from exc


def _check_blocks(snapshot: Snapshot) -> None:
    if not snapshot.blocks:
        return
    for parent, child in itertools.pairwise(snapshot.blocks):
        if child.header.parent != parent.block_hash:
            msg = f"block {child.block_hash} breaks the chain linkage"
            raise SnapshotIntegrityError(msg)
    if snapshot.blocks[-1].block_hash != snapshot.head:
        msg = "block list does not end at the snapshot head"
        raise SnapshotIntegrityError(msg)


def import_snapshot(
    document: Snapshot | str | bytes, chain_id: str | None = None
) -> ChainState:
    """Rebuild the state held by a snapshot.

    The state keeps the snapshot height; its event log and transaction
    index start empty. ``chain_id`` renames the chain (migration target).

    Raises:
        SnapshotIntegrityError: the document, its digest or the embedded
            state hash does not check out.
    """
    snapshot = _parse(document)
    if snapshot.digest != snapshot.content_digest():
        msg = "snapshot digest mismatch"
        raise SnapshotIntegrityError(msg)
    _check_blocks(snapshot)

    accounts: dict[str, dict[str, Any]] = {}
    for account in snapshot.accounts:
        accounts[account.address] = {**account.model_dump(), "locks": []}
    for lock in snapshot.locks:
        if lock.owner not in accounts:
            msg = f"lock {lock.lock_id} has no owner account"
            raise SnapshotIntegrityError(msg)
        accounts[lock.owner]["locks"].append(lock.model_dump())

    try:
        state = ChainState.model_validate(
            {
                "chain_id": chain_id or snapshot.chain_id,
                "height": snapshot.taken_at_height,
                "head": None,
                "accounts": accounts,
                **snapshot.registries,
                **snapshot.governance,
            }
        )
    except pydantic.ValidationError as exc:
        msg = f"snapshot state does not validate: {exc}"
        raise SnapshotIntegrityError(msg) from exc

    if state.state_hash() != snapshot.state_hash:
        msg = "recomputed state hash differs from the embedded one"
        raise SnapshotIntegrityError(msg)
    logger.info(
        "snapshot imported",
        source=snapshot.chain_id,
        chain_id=state.chain_id,
        height=snapshot.taken_at_height,
    )
    return state


def export_events(events: Iterable[EventRecord]) -> str:
    """One canonical JSON record per line."""
    return "".join(
        canonical_json(event.model_dump(mode="json")).decode("ascii") + "\n"
        for event in events
    )


def load_events(text: str) -> list[EventRecord]:
    return [
        EventRecord.model_validate(json.loads(line))
        for line in text.splitlines()
        if line.strip()
    ]
