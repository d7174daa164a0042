"""Sharded chains coordinated by a relay chain."""

from __future__ import annotations

from typing import TYPE_CHECKING

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import PositiveInt

from govchain.blocks import Block
from govchain.blocks import SignedHeader
from govchain.blocks import header_signature_valid
from govchain.blocks import merkle_root_valid
from govchain.crypto import HexAddress
from govchain.crypto import HexKey
from govchain.transactions import Transaction

if TYPE_CHECKING:
    from govchain.node import NodeInstance


def shard_of(address: str, shard_count: int) -> int:
    """The full address, read as a big-endian integer, modulo S."""
    return int(address, 16) % shard_count


class ShardTopology(BaseModel):
    """Static shard layout.

    Attributes:
        shard_count: Number of shards S.
        relay_chain_id: Chain id of the coordinating relay chain.
        chain_prefix: Shard ``i`` runs chain ``{chain_prefix}-shard-{i}``.
        validator_keys: Public keys of shard validators, by address.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    shard_count: PositiveInt = 1
    relay_chain_id: str
    chain_prefix: str
    validator_keys: dict[HexAddress, HexKey] = Field(default_factory=dict)

    def chain_id(self, shard_id: int) -> str:
        return f"{self.chain_prefix}-shard-{shard_id}"

    @property
    def shard_chain_ids(self) -> list[str]:
        return [self.chain_id(i) for i in range(self.shard_count)]


def route_shard_tx(topology: ShardTopology, tx: Transaction) -> int:
    """Shard that processes ``tx``, decided by its sender."""
    return shard_of(tx.sender, topology.shard_count)


def relay_include(node: NodeInstance, shard_block: Block) -> bool:
    """Queue a valid shard block header for the node's next relay block.

    Invalid shard blocks are excluded with a ``relay.excluded`` event.
    """
    header = shard_block.header
    reason = None
    if header.shard_id < 0:
        reason = "not-a-shard-block"
    elif not merkle_root_valid(shard_block):
        reason = "merkle-root"
    elif not header_signature_valid(
        header,
        shard_block.signature,
        node.shard_keys.get(header.validator or ""),
    ):
        reason = "signature"
    if reason is not None:
        node.record(
            "relay.excluded",
            {
                "block_hash": shard_block.block_hash,
                "shard_id": header.shard_id,
                "reason": reason,
            },
        )
        return False
    node.pending_headers[shard_block.block_hash] = SignedHeader(
        header=header, signature=shard_block.signature
    )
    return True


def finalized_shard_heights(relay: NodeInstance) -> dict[int, int]:
    """Per shard, the greatest height carried by a finalized relay block."""
    heights: dict[int, int] = {}
    for block in relay.canonical_chain():
        if block.height > relay.finalized_height:
            break
        for item in block.included_headers:
            shard = item.header.shard_id
            heights[shard] = max(heights.get(shard, 0), item.header.height)
    return heights


def shard_block_finalized(relay: NodeInstance, block_hash: str) -> bool:
    """A shard block is final once a finalized relay block carries it."""
    for block in relay.canonical_chain():
        if block.height > relay.finalized_height:
            return False
        if any(
            item.header.block_hash == block_hash
            for item in block.included_headers
        ):
            return True
    return False
