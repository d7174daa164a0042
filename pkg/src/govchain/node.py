"""A simulated node: local chain replica, pool and message handling.

Nodes never talk to each other directly. They return outgoing messages
from every handler and the network decides when (and whether) those
arrive.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Callable
from typing import Any

import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field

from govchain.blocks import RELAY_SHARD
from govchain.blocks import Block
from govchain.blocks import BlockTree
from govchain.blocks import SignedHeader
from govchain.consensus import choose_canonical_chain
from govchain.consensus import finalized_height
from govchain.consensus import produces_in_slot
from govchain.consensus import select_validator
from govchain.consensus import validator_weights
from govchain.crypto import KeyPair
from govchain.exceptions import BlockRejectedError
from govchain.exceptions import NoEligibleValidatorError
from govchain.filters import REASON_DUPLICATE
from govchain.ledger import apply_block
from govchain.ledger import extract_logs
from govchain.policy import FinalityMode
from govchain.pool import TxPool
from govchain.pool import TxVerdict
from govchain.pool import build_candidate_block
from govchain.proposals import CrossChainResult
from govchain.sharding import relay_include
from govchain.state import ChainState
from govchain.state import EventRecord
from govchain.transactions import CrossChainResultPayload
from govchain.transactions import Transaction
from govchain.transactions import make_transaction
from govchain.upgrades import RuleSet
from govchain.upgrades import accepts_version
from govchain.upgrades import enact_upgrade
from govchain.upgrades import pending_upgrades

logger = structlog.get_logger()


class SimEvent(BaseModel):
    """Off-chain event observed by a node or the network fabric."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int
    source: str
    topic: str
    payload: dict[str, Any] = Field(default_factory=dict)


# -- messages -------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class TxMessage:
    tx: Transaction


@dataclasses.dataclass(frozen=True)
class BlockMessage:
    block: Block


@dataclasses.dataclass(frozen=True)
class BlockRequest:
    block_hash: str


@dataclasses.dataclass(frozen=True)
class FinalityVote:
    validator: str
    block_hash: str


@dataclasses.dataclass(frozen=True)
class ShardBlockMessage:
    """A shard block offered to the relay chain for inclusion."""

    block: Block


@dataclasses.dataclass(frozen=True)
class CrossChainMessage:
    record: CrossChainResult


Message = (
    TxMessage
    | BlockMessage
    | BlockRequest
    | FinalityVote
    | ShardBlockMessage
    | CrossChainMessage
)

# (recipient node id or None for every chain peer, message)
Outgoing = tuple[str | None, Message]


class NodeInstance:
    """One participant maintaining a replica of one chain.

    Attributes:
        node_id: Stable name used for routing and logs.
        key: The node's signing key; its address is the validator id.
        shard_id: Shard served, :data:`RELAY_SHARD` for the relay chain.
        adopts_upgrades: Whether enacted upgrades are adopted.
        rules: Current protocol version and fork rules.
    """

    def __init__(
        self,
        node_id: str,
        key: KeyPair,
        genesis: Block,
        genesis_state: ChainState,
        *,
        max_block_txs: int = 50,
        adopts_upgrades: bool = True,
        shard_id: int = 0,
        sink: Callable[[SimEvent], None] | None = None,
    ):
        self.node_id = node_id
        self.key = key
        self.chain_id = genesis_state.chain_id
        self.shard_id = shard_id
        self.max_block_txs = max_block_txs
        self.adopts_upgrades = adopts_upgrades
        self.rules = RuleSet()
        self.clock = 0
        self.events: list[SimEvent] = []
        self.sink = sink

        self.tree = BlockTree(genesis)
        self.states: dict[str, ChainState] = {
            genesis.block_hash: genesis_state
        }
        self.head = genesis.block_hash
        self.finalized_hash = genesis.block_hash
        self.finalized_height = genesis.height
        self.pool = TxPool()
        self.orphans: dict[str, list[Block]] = {}
        self.rejected: set[str] = set()
        self.finality_votes: dict[str, str] = {}
        self.pending_headers: dict[str, SignedHeader] = {}
        self.shard_keys: dict[str, str] = {}

    @property
    def address(self) -> str:
        return self.key.address

    @property
    def is_relay(self) -> bool:
        return self.shard_id == RELAY_SHARD

    def __repr__(self) -> str:
        return f"NodeInstance({self.node_id!r}, chain={self.chain_id!r})"

    # -- bookkeeping ------------------------------------------------------

    def record(self, topic: str, payload: dict[str, Any] | None = None):
        event = SimEvent(
            tick=self.clock,
            source=self.node_id,
            topic=topic,
            payload=payload or {},
        )
        self.events.append(event)
        if self.sink is not None:
            self.sink(event)
        return event

    def canonical_state(self) -> ChainState:
        return self.states[self.head]

    def canonical_chain(self) -> list[Block]:
        return self.tree.chain_to(self.head)

    def tip_height(self) -> int:
        return self.tree.get(self.head).height

    def block_at(self, height: int) -> str | None:
        return self.tree.ancestor_at(self.head, height)

    # -- transactions -----------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> TxVerdict:
        """Admit a transaction; every rejection is logged."""
        verdict = self.pool.admit(tx, self.canonical_state())
        if not verdict.accepted:
            self.record(
                "tx.rejected",
                {
                    "tx_hash": tx.tx_hash,
                    "sender": tx.sender,
                    "reason": verdict.reason,
                },
            )
        return verdict

    def _receive_transaction(self, tx: Transaction) -> None:
        verdict = self.pool.admit(tx, self.canonical_state())
        if not verdict.accepted and verdict.reason != REASON_DUPLICATE:
            self.record(
                "tx.rejected",
                {
                    "tx_hash": tx.tx_hash,
                    "sender": tx.sender,
                    "reason": verdict.reason,
                },
            )

    # -- blocks -----------------------------------------------------------

    def receive_block(self, block: Block) -> list[Outgoing]:
        """Validate and store a block, then any orphans waiting on it."""
        block_hash = block.block_hash
        if block_hash in self.tree or block_hash in self.rejected:
            return []
        if block.header.chain_id != self.chain_id:
            return []
        parent = block.header.parent
        if parent not in self.tree:
            waiting = self.orphans.setdefault(parent, [])
            if all(b.block_hash != block_hash for b in waiting):
                waiting.append(block)
            return [(None, BlockRequest(parent))]

        pending = [block]
        while pending:
            current = pending.pop(0)
            if self._attach(current):
                pending.extend(self.orphans.pop(current.block_hash, []))
        return self._update_head()

    def _attach(self, block: Block) -> bool:
        parent_state = self.states.get(block.header.parent)
        if parent_state is None:
            self._reject(block, "below-finality")
            return False
        if not accepts_version(self.rules, parent_state, block.header):
            self._reject(block, "version")
            return False
        try:
            new_state = apply_block(parent_state, block)
        except BlockRejectedError as exc:
            self._reject(block, exc.reason, exc.detail)
            return False
        self.tree.add(block)
        self.states[block.block_hash] = new_state
        return True

    def _reject(self, block: Block, reason: str, detail: str = "") -> None:
        self.rejected.add(block.block_hash)
        self.record(
            "block.rejected",
            {
                "block_hash": block.block_hash,
                "height": block.height,
                "reason": reason,
                "detail": detail,
                "version": block.header.protocol_version,
            },
        )

    def _update_head(self) -> list[Outgoing]:
        new_head = choose_canonical_chain(self.tree, self.finalized_hash)
        if new_head == self.head:
            return []
        previous = self.head
        self.head = new_head
        if not self.tree.is_ancestor(previous, new_head):
            self.record(
                "chain.reorganized",
                {"from": previous, "to": new_head},
            )
        state = self.canonical_state()
        for block in reversed(self.canonical_chain()):
            if self.tree.is_ancestor(block.block_hash, previous):
                break
            for tx in block.transactions:
                self.pool.discard(tx)
        for verdict in self.pool.revalidate(state):
            self.record(
                "tx.evicted",
                {"tx_hash": verdict.tx_hash, "reason": verdict.reason},
            )
        if self.adopts_upgrades:
            for proposal_id in pending_upgrades(state, self.rules):
                enact_upgrade(self, proposal_id)
        return self._vote_and_finalize()

    # -- finality ---------------------------------------------------------

    def _vote_and_finalize(self) -> list[Outgoing]:
        outgoing: list[Outgoing] = []
        policy = self.canonical_state().policy.finality
        if policy.mode is FinalityMode.SUPERMAJORITY_VOTE and (
            self.address in validator_weights(self.canonical_state())
        ):
            self.finality_votes[self.address] = self.head
            outgoing.append((None, FinalityVote(self.address, self.head)))
        self._advance_finality()
        return outgoing

    def receive_vote(self, vote: FinalityVote) -> None:
        self.finality_votes[vote.validator] = vote.block_hash
        self._advance_finality()

    def _advance_finality(self) -> None:
        state = self.canonical_state()
        height = finalized_height(
            self.tree,
            state.policy.finality,
            self.finality_votes,
            validator_weights(state),
            tip=self.head,
        )
        if height <= self.finalized_height:
            return
        self.finalized_height = height
        self.finalized_hash = self.block_at(height)
        self.record(
            "finality.advanced",
            {
                "height": height,
                "block_hash": self.finalized_hash,
                "mode": state.policy.finality.mode.value,
            },
        )
        self._prune_states()

    def _prune_states(self) -> None:
        """Drop states of blocks off the finalized chain and its future."""
        finalized = self.finalized_hash
        stale = [
            block_hash
            for block_hash in self.states
            if not self.tree.is_ancestor(block_hash, finalized)
            and not self.tree.is_ancestor(finalized, block_hash)
        ]
        for block_hash in stale:
            del self.states[block_hash]
        if stale:
            logger.debug(
                "states pruned",
                node_id=self.node_id,
                finalized_height=self.finalized_height,
                pruned=len(stale),
            )

    def finalized_state(self) -> ChainState:
        return self.states[self.finalized_hash]

    # -- production -------------------------------------------------------

    def produce(self, slot: int) -> Block | None:
        """Seal a block for ``slot`` when this node is its validator."""
        state = self.canonical_state()
        if slot <= state.slot:
            return None
        selection = state.policy.selection
        if not produces_in_slot(selection, slot):
            return None
        try:
            validator = select_validator(state, slot)
        except NoEligibleValidatorError as exc:
            self.record("round.halted", {"slot": slot, "reason": str(exc)})
            return None
        if validator != self.address:
            return None

        block, failed = build_candidate_block(
            self.pool,
            state,
            self.key,
            slot=slot,
            max_txs=self.max_block_txs,
            protocol_version=self.rules.version,
            shard_id=self.shard_id,
            included_headers=self._headers_to_include(),
        )
        for verdict in failed:
            self.record(
                "tx.dropped",
                {"tx_hash": verdict.tx_hash, "reason": verdict.reason},
            )
        return block

    def _headers_to_include(self) -> list[SignedHeader]:
        if not self.pending_headers:
            return []
        included = {
            item.header.block_hash
            for block in self.canonical_chain()
            for item in block.included_headers
        }
        return [
            self.pending_headers[h]
            for h in sorted(self.pending_headers)
            if h not in included
        ]

    # -- dispatch ---------------------------------------------------------

    def handle(self, sender: str, message: Message) -> list[Outgoing]:
        """Process one delivered message; returns replies to send."""
        match message:
            case TxMessage(tx=tx):
                self._receive_transaction(tx)
            case BlockMessage(block=block):
                return [
                    (sender if isinstance(reply, BlockRequest) else to, reply)
                    for to, reply in self.receive_block(block)
                ]
            case BlockRequest(block_hash=block_hash):
                if block_hash in self.tree:
                    return [(sender, BlockMessage(self.tree.get(block_hash)))]
            case FinalityVote():
                self.receive_vote(message)
            case ShardBlockMessage(block=block):
                relay_include(self, block)
            case CrossChainMessage(record=record):
                return self._relay_result(record)
        return []

    def next_nonce(self, address: str | None = None) -> int:
        """Next nonce for ``address`` (default: this node) given the pool."""
        address = address or self.address
        account = self.canonical_state().accounts.get(address)
        nonce = account.nonce if account else 0
        queued = [tx.nonce for tx in self.pool if tx.sender == address]
        return max([nonce, *(n + 1 for n in queued)])

    def _relay_result(self, record: CrossChainResult) -> list[Outgoing]:
        """Carry a cross-chain tally onto this chain as a transaction."""
        tx = make_transaction(
            self.key,
            self.chain_id,
            CrossChainResultPayload(record=record),
            self.next_nonce(),
        )
        verdict = self.submit_transaction(tx)
        if not verdict.accepted:
            return []
        return [(None, TxMessage(tx))]

    # -- log extractor ----------------------------------------------------

    def extract_logs(
        self,
        topic: str | None = None,
        height_range: tuple[int, int] | None = None,
    ) -> list[EventRecord]:
        records = extract_logs(self.canonical_state(), topic, height_range)
        self.record(
            "logs.extracted",
            {
                "topic": topic,
                "height_range": list(height_range) if height_range else None,
                "count": len(records),
            },
        )
        return records
