"""Token movements and the token locker."""

from __future__ import annotations

import structlog

from govchain.exceptions import InsufficientBalanceError
from govchain.exceptions import LedgerError
from govchain.exceptions import UnknownLockError
from govchain.state import ChainState
from govchain.state import TokenLock
from govchain.state import transition
from govchain.transactions import LockPurpose

logger = structlog.get_logger()


def debit(state: ChainState, address: str, amount: int) -> None:
    """Remove spendable tokens from ``address`` (in place)."""
    available = state.spendable(address)
    if amount > available:
        raise InsufficientBalanceError(address, amount, available)
    state.account(address).balance -= amount


def credit(state: ChainState, address: str, amount: int) -> None:
    state.ensure_account(address).balance += amount


@transition
def transfer(
    state: ChainState,
    sender: str,
    recipient: str,
    amount: int,
    tx_hash: str | None = None,
) -> None:
    if amount <= 0:
        msg = "transfer amount must be positive"
        raise LedgerError(msg)
    debit(state, sender, amount)
    credit(state, recipient, amount)
    state.emit(
        "transfer",
        {"from": sender, "to": recipient, "amount": amount},
        tx_hash,
    )


def mint(state: ChainState, address: str, amount: int) -> None:
    if amount <= 0:
        return
    credit(state, address, amount)
    state.supply.minted += amount


def destroy(state: ChainState, amount: int) -> None:
    """Account for tokens already removed from balances (burned fees)."""
    state.supply.destroyed += amount


@transition
def lock_tokens(
    state: ChainState,
    address: str,
    amount: int,
    duration_blocks: int,
    purpose: LockPurpose,
    target: str | None = None,
    tx_hash: str | None = None,
) -> None:
    """Lock ``amount`` spendable tokens until ``height + duration``."""
    if amount <= 0:
        msg = "lock amount must be positive"
        raise LedgerError(msg)
    if duration_blocks <= 0:
        msg = "lock duration must be positive"
        raise LedgerError(msg)
    available = state.spendable(address)
    if amount > available:
        raise InsufficientBalanceError(address, amount, available)

    state.lock_counter += 1
    lock = TokenLock(
        lock_id=f"lock-{state.lock_counter}",
        owner=address,
        amount=amount,
        unlock_height=state.height + duration_blocks,
        purpose=purpose,
        target=target,
        created_height=state.height,
    )
    state.account(address).locks.append(lock)
    state.emit(
        "lock.created",
        {
            "lock_id": lock.lock_id,
            "owner": address,
            "amount": amount,
            "unlock_height": lock.unlock_height,
            "purpose": purpose.value,
            "target": target,
        },
        tx_hash,
    )


@transition
def slash_lock(
    state: ChainState,
    address: str,
    lock_id: str,
    reason: str = "",
    tx_hash: str | None = None,
) -> None:
    """Destroy the tokens held by an active lock."""
    account = state.accounts.get(address)
    lock = None
    if account is not None:
        lock = next((x for x in account.locks if x.lock_id == lock_id), None)
    if lock is None:
        msg = f"no lock {lock_id} for {address}"
        raise UnknownLockError(msg)
    if not lock.active_at(state.height):
        msg = f"lock {lock_id} expired at height {lock.unlock_height}"
        raise UnknownLockError(msg)

    account.locks.remove(lock)
    account.balance -= lock.amount
    state.supply.slashed += lock.amount
    state.emit(
        "slash",
        {
            "lock_id": lock_id,
            "owner": address,
            "amount": lock.amount,
            "purpose": lock.purpose.value,
            "reason": reason,
        },
        tx_hash,
    )
    logger.info(
        "lock slashed", owner=address, lock_id=lock_id, amount=lock.amount
    )


def release_expired_locks(state: ChainState) -> None:
    """Drop locks whose unlock height has been reached (in place)."""
    for address in sorted(state.accounts):
        account = state.accounts[address]
        expired = [x for x in account.locks if not x.active_at(state.height)]
        for lock in expired:
            account.locks.remove(lock)
            state.emit(
                "lock.released",
                {
                    "lock_id": lock.lock_id,
                    "owner": address,
                    "amount": lock.amount,
                },
            )
