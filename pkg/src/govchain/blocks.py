"""Block headers, blocks and the block tree kept by every node."""

from __future__ import annotations

import functools
from collections.abc import Iterator
from collections.abc import Sequence

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import NonNegativeInt

from govchain.crypto import HexAddress
from govchain.crypto import HexDigest
from govchain.crypto import HexSignature
from govchain.crypto import KeyPair
from govchain.crypto import canonical_json
from govchain.crypto import hash_object
from govchain.crypto import sign
from govchain.crypto import verify_hex
from govchain.merkle import merkle_root
from govchain.transactions import Transaction

# Leaf used for blocks without payload so the root stays well defined.
EMPTY_LEAF = b""
RELAY_SHARD = -1


class BlockHeader(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    chain_id: str
    parent: HexDigest | None
    height: NonNegativeInt
    slot: NonNegativeInt
    merkle_root: HexDigest
    validator: HexAddress | None
    protocol_version: NonNegativeInt = 1
    shard_id: int = 0

    @functools.cached_property
    def block_hash(self) -> str:
        return hash_object(self.model_dump(mode="json")).hex()

    def signing_bytes(self) -> bytes:
        return canonical_json(self.model_dump(mode="json"))


class SignedHeader(BaseModel):
    """A shard block header as embedded in a relay block."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    header: BlockHeader
    signature: HexSignature


class Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    header: BlockHeader
    transactions: tuple[Transaction, ...] = ()
    included_headers: tuple[SignedHeader, ...] = ()
    signature: HexSignature | None = None

    @property
    def block_hash(self) -> str:
        return self.header.block_hash

    @property
    def height(self) -> int:
        return self.header.height

    @property
    def total_fees(self) -> int:
        return sum(tx.fee for tx in self.transactions)


def payload_leaves(
    transactions: Sequence[Transaction],
    included_headers: Sequence[SignedHeader] = (),
) -> list[bytes]:
    leaves = [bytes.fromhex(tx.tx_hash) for tx in transactions]
    leaves.extend(
        bytes.fromhex(item.header.block_hash) for item in included_headers
    )
    return leaves or [EMPTY_LEAF]


def compute_merkle_root(
    transactions: Sequence[Transaction],
    included_headers: Sequence[SignedHeader] = (),
) -> str:
    return merkle_root(payload_leaves(transactions, included_headers)).hex()


def genesis_block(
    chain_id: str, state_hash: str, shard_id: int = 0, height: int = 0
) -> Block:
    """Genesis commits to the initial state hash instead of transactions.

    A chain created from a snapshot starts at the snapshot height.
    """
    header = BlockHeader(
        chain_id=chain_id,
        parent=None,
        height=height,
        slot=0,
        merkle_root=merkle_root([bytes.fromhex(state_hash)]).hex(),
        validator=None,
        shard_id=shard_id,
    )
    return Block(header=header)


def seal_block(
    key: KeyPair,
    *,
    chain_id: str,
    parent: str,
    height: int,
    slot: int,
    transactions: Sequence[Transaction] = (),
    included_headers: Sequence[SignedHeader] = (),
    protocol_version: int = 1,
    shard_id: int = 0,
) -> Block:
    """Assemble a block, compute its Merkle root and sign the header."""
    header = BlockHeader(
        chain_id=chain_id,
        parent=parent,
        height=height,
        slot=slot,
        merkle_root=compute_merkle_root(transactions, included_headers),
        validator=key.address,
        protocol_version=protocol_version,
        shard_id=shard_id,
    )
    return Block(
        header=header,
        transactions=tuple(transactions),
        included_headers=tuple(included_headers),
        signature=sign(key, header.signing_bytes()).hex(),
    )


def merkle_root_valid(block: Block) -> bool:
    expected = compute_merkle_root(block.transactions, block.included_headers)
    return block.header.merkle_root == expected


def header_signature_valid(
    header: BlockHeader, signature: str | None, public_key: str | None
) -> bool:
    if signature is None or public_key is None:
        return False
    return verify_hex(public_key, header.signing_bytes(), signature)


class BlockTree:
    """All known valid blocks of one chain, rooted at its genesis."""

    def __init__(self, genesis: Block):
        self.genesis_hash = genesis.block_hash
        self.genesis_height = genesis.height
        self._blocks: dict[str, Block] = {genesis.block_hash: genesis}
        self._children: dict[str, list[str]] = {genesis.block_hash: []}

    def __contains__(self, block_hash: object) -> bool:
        return block_hash in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self._blocks.values())

    def get(self, block_hash: str) -> Block:
        return self._blocks[block_hash]

    def add(self, block: Block) -> bool:
        """Insert a block whose parent is known; False if already present."""
        block_hash = block.block_hash
        if block_hash in self._blocks:
            return False
        parent = block.header.parent
        if parent not in self._blocks:
            msg = f"unknown parent {parent}"
            raise KeyError(msg)
        self._blocks[block_hash] = block
        self._children[block_hash] = []
        self._children[parent].append(block_hash)
        return True

    def tips(self) -> list[str]:
        return sorted(h for h, kids in self._children.items() if not kids)

    def chain_to(self, block_hash: str) -> list[Block]:
        """Blocks from genesis to ``block_hash`` inclusive."""
        chain: list[Block] = []
        current: str | None = block_hash
        while current is not None:
            block = self._blocks[current]
            chain.append(block)
            current = block.header.parent
        chain.reverse()
        return chain

    def ancestor_at(self, block_hash: str, height: int) -> str | None:
        if block_hash not in self._blocks:
            return None
        block = self._blocks[block_hash]
        if height > block.height or height < self.genesis_height:
            return None
        while block.height > height:
            block = self._blocks[block.header.parent]
        return block.block_hash

    def is_ancestor(self, ancestor: str, descendant: str) -> bool:
        if ancestor not in self._blocks or descendant not in self._blocks:
            return False
        height = self._blocks[ancestor].height
        return self.ancestor_at(descendant, height) == ancestor

