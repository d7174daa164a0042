"""Data migrator: move a chain's state onto a fresh target chain."""

from __future__ import annotations

from collections.abc import Callable
from collections.abc import Sequence

import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import NonNegativeInt

from govchain.blocks import Block
from govchain.crypto import HexDigest
from govchain.exceptions import NetworkFrozenError
from govchain.ledger import seal_genesis
from govchain.network import SimNetwork
from govchain.node import NodeInstance
from govchain.snapshot import export_snapshot
from govchain.snapshot import import_snapshot
from govchain.state import ChainState

logger = structlog.get_logger()

TargetFactory = Callable[[Block, ChainState], Sequence[NodeInstance]]


class MigrationRecord(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    source_chain_id: str
    target_chain_id: str
    height: NonNegativeInt
    state_hash: HexDigest
    genesis_hash: HexDigest
    nodes: tuple[str, ...] = ()


def migrate_chain(
    network: SimNetwork,
    source_node_id: str,
    target_chain_id: str,
    target_factory: TargetFactory | None = None,
) -> tuple[Block, ChainState, MigrationRecord]:
    """Start ``target_chain_id`` from a snapshot of a source node's chain.

    The snapshot travels as its JSON document and is verified on import.
    ``target_factory`` builds the target's nodes from the new genesis;
    they join ``network``.

    Raises:
        NetworkFrozenError: the source chain is frozen.
        SnapshotIntegrityError: the exported document fails to verify.
    """
    source = network.nodes[source_node_id]
    if network.is_frozen(source.chain_id):
        network.record(
            "migration.refused",
            {
                "source": source.chain_id,
                "target": target_chain_id,
                "reason": "frozen",
            },
        )
        msg = f"source chain {source.chain_id} is frozen"
        raise NetworkFrozenError(msg)

    state = source.canonical_state()
    document = export_snapshot(state, source.canonical_chain()).to_json()
    imported = import_snapshot(document, chain_id=target_chain_id)
    genesis, genesis_state = seal_genesis(imported)

    nodes: list[str] = []
    if target_factory is not None:
        for node in target_factory(genesis, genesis_state):
            network.add_node(node)
            nodes.append(node.node_id)

    record = MigrationRecord(
        source_chain_id=source.chain_id,
        target_chain_id=target_chain_id,
        height=state.height,
        state_hash=genesis_state.state_hash(),
        genesis_hash=genesis.block_hash,
        nodes=tuple(nodes),
    )
    network.record("migration.completed", record.model_dump(mode="json"))
    logger.info(
        "chain migrated",
        source=source.chain_id,
        target=target_chain_id,
        height=state.height,
    )
    return genesis, genesis_state, record
