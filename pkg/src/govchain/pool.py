"""Per-node transaction pool and candidate block assembly."""

from __future__ import annotations

from collections.abc import Iterator
from collections.abc import Sequence

import structlog
from pydantic import BaseModel
from pydantic import ConfigDict

from govchain.blocks import Block
from govchain.blocks import SignedHeader
from govchain.blocks import seal_block
from govchain.crypto import KeyPair
from govchain.exceptions import BlockRejectedError
from govchain.filters import REASON_DUPLICATE
from govchain.filters import screen
from govchain.ledger import apply_transaction
from govchain.state import ChainState
from govchain.tokens import release_expired_locks
from govchain.transactions import Transaction

logger = structlog.get_logger()


class TxVerdict(BaseModel):
    """Admission outcome; ``reason`` is a stable machine-readable id."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tx_hash: str
    accepted: bool
    reason: str | None = None

    @classmethod
    def accept(cls, tx: Transaction) -> TxVerdict:
        return cls(tx_hash=tx.tx_hash, accepted=True)

    @classmethod
    def reject(cls, tx: Transaction, reason: str) -> TxVerdict:
        return cls(tx_hash=tx.tx_hash, accepted=False, reason=reason)


class TxPool:
    """Pending transactions keyed by ``(sender, nonce)``.

    Only transactions that pass every active filter are held; call
    :meth:`revalidate` whenever the reference state changes.
    """

    def __init__(self) -> None:
        self._pending: dict[tuple[str, int], Transaction] = {}

    def __len__(self) -> int:
        return len(self._pending)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self._pending.values())

    def __contains__(self, tx_hash: object) -> bool:
        return any(tx.tx_hash == tx_hash for tx in self._pending.values())

    def admit(self, tx: Transaction, state: ChainState) -> TxVerdict:
        key = (tx.sender, tx.nonce)
        if key in self._pending:
            return TxVerdict.reject(tx, REASON_DUPLICATE)
        reason = screen(tx, state, exact_nonce=False)
        if reason is not None:
            return TxVerdict.reject(tx, reason)
        self._pending[key] = tx
        return TxVerdict.accept(tx)

    def revalidate(self, state: ChainState) -> list[TxVerdict]:
        """Drop every pending transaction that no longer passes."""
        dropped: list[TxVerdict] = []
        for key in sorted(self._pending):
            tx = self._pending[key]
            reason = screen(tx, state, exact_nonce=False)
            if reason is not None:
                del self._pending[key]
                dropped.append(TxVerdict.reject(tx, reason))
        return dropped

    def discard(self, tx: Transaction) -> None:
        self._pending.pop((tx.sender, tx.nonce), None)

    def ordered(self) -> list[Transaction]:
        """Fee descending, then sender ascending, then nonce ascending."""
        return sorted(
            self._pending.values(),
            key=lambda tx: (-tx.fee, tx.sender, tx.nonce),
        )


def select_transactions(
    pool: TxPool, state: ChainState, max_txs: int
) -> tuple[list[Transaction], list[TxVerdict]]:
    """Choose up to ``max_txs`` transactions for the next block.

    Walks the pool in :meth:`TxPool.ordered` order, taking a transaction
    once its sender's previous nonce is taken and a dry run on the
    successor state succeeds. Transactions found invalid at their turn
    are discarded from the pool and reported.
    """
    scratch = state.model_copy(deep=True)
    scratch.height = state.height + 1
    release_expired_locks(scratch)

    chosen: list[Transaction] = []
    failed: list[TxVerdict] = []
    remaining = pool.ordered()
    progress = True
    while progress and len(chosen) < max_txs:
        progress = False
        for tx in list(remaining):
            if len(chosen) >= max_txs:
                break
            account = scratch.accounts.get(tx.sender)
            if tx.nonce != (account.nonce if account else 0):
                continue
            trial = scratch.model_copy(deep=True)
            try:
                apply_transaction(trial, tx, "0" * 64, len(chosen))
            except BlockRejectedError as exc:
                remaining.remove(tx)
                failed.append(TxVerdict.reject(tx, exc.reason))
                pool.discard(tx)
                continue
            scratch = trial
            chosen.append(tx)
            remaining.remove(tx)
            progress = True
    return chosen, failed


def build_candidate_block(
    pool: TxPool,
    state: ChainState,
    key: KeyPair,
    *,
    slot: int,
    max_txs: int,
    protocol_version: int = 1,
    shard_id: int = 0,
    included_headers: Sequence[SignedHeader] = (),
) -> tuple[Block, list[TxVerdict]]:
    """Assemble and sign a block on top of ``state``.

    An empty pool gives a valid empty block; transactions that fail their
    dry run leave the pool and are reported.
    """
    chosen, failed = select_transactions(pool, state, max_txs)
    for verdict in failed:
        logger.debug("candidate tx dropped", tx_hash=verdict.tx_hash)
    block = seal_block(
        key,
        chain_id=state.chain_id,
        parent=state.head,
        height=state.height + 1,
        slot=slot,
        transactions=chosen,
        included_headers=included_headers,
        protocol_version=protocol_version,
        shard_id=shard_id,
    )
    return block, failed
