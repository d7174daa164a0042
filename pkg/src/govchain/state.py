"""ChainState: the ledger of one simulated chain instance.

State values are only ever modified through transition functions that
work on a deep copy (see :func:`transition`), so a state handed out by a
node is never mutated afterwards.
"""

from __future__ import annotations

import functools
from collections.abc import Callable
from enum import StrEnum
from typing import Any
from typing import Concatenate
from typing import ParamSpec

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt

from govchain.crypto import HexAddress
from govchain.crypto import HexDigest
from govchain.crypto import HexKey
from govchain.crypto import hash_object
from govchain.exceptions import LedgerError
from govchain.policy import DecentralisationMode
from govchain.policy import GovernancePolicy
from govchain.proposals import Ballot
from govchain.proposals import Proposal
from govchain.transactions import LockPurpose
from govchain.transactions import RoleName

P = ParamSpec("P")


class TokenLock(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lock_id: str
    owner: HexAddress
    amount: PositiveInt
    unlock_height: NonNegativeInt
    purpose: LockPurpose
    target: str | None = None
    created_height: NonNegativeInt = 0

    def active_at(self, height: int) -> bool:
        return height < self.unlock_height


class Account(BaseModel):
    model_config = ConfigDict(extra="forbid")

    address: HexAddress
    balance: NonNegativeInt = 0
    public_key: HexKey | None = None
    nonce: NonNegativeInt = 0
    locks: list[TokenLock] = Field(default_factory=list)


class EventRecord(BaseModel):
    """One append-only log entry, ordered by (height, index)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    height: NonNegativeInt
    index: NonNegativeInt
    tx_hash: HexDigest | None = None
    topic: str
    payload: dict[str, Any] = Field(default_factory=dict)


class RegistryName(StrEnum):
    SCAM_LIST = "scam-list"
    SOCIAL_CONTRACT = "social-contract"


class RegistryEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    registry: RegistryName
    key: str
    value: dict[str, Any] = Field(default_factory=dict)
    added_by: HexAddress
    height: NonNegativeInt


class FreezeFlag(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    target: str
    frozen: bool
    frozen_by: HexAddress
    height: NonNegativeInt


class MembershipRegistry(BaseModel):
    """Participation permission.

    ``invites`` maps an invitation-code digest to whether it was consumed;
    ``members`` maps addresses to an optional real-world identity label.
    """

    model_config = ConfigDict(extra="forbid")

    mode: DecentralisationMode = DecentralisationMode.PERMISSIONLESS
    invites: dict[HexDigest, bool] = Field(default_factory=dict)
    members: dict[HexAddress, str | None] = Field(default_factory=dict)


class SupplyLedger(BaseModel):
    """Token supply accounting for the conservation invariant.

    ``pending_fees`` holds fees collected from the senders of the block
    being applied until consensus pays them out; it is zero between blocks.
    """

    model_config = ConfigDict(extra="forbid")

    genesis: NonNegativeInt = 0
    minted: NonNegativeInt = 0
    slashed: NonNegativeInt = 0
    destroyed: NonNegativeInt = 0
    pending_fees: NonNegativeInt = 0

    @property
    def expected_total(self) -> int:
        return self.genesis + self.minted - self.slashed - self.destroyed


class TxLocation(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    height: NonNegativeInt
    block_hash: HexDigest
    sender: HexAddress
    index: NonNegativeInt


# Excluded from the canonical state hash: positional data and derived
# indexes that a snapshot import rebuilds rather than carries.
NON_CANONICAL_FIELDS = frozenset(
    {"chain_id", "height", "slot", "head", "events", "tx_index"}
)


class ChainState(BaseModel):
    model_config = ConfigDict(extra="forbid")

    chain_id: str
    height: NonNegativeInt = 0
    slot: NonNegativeInt = 0
    head: HexDigest | None = None
    policy: GovernancePolicy = Field(default_factory=GovernancePolicy)
    accounts: dict[HexAddress, Account] = Field(default_factory=dict)
    roles: dict[HexAddress, list[RoleName]] = Field(default_factory=dict)
    membership: MembershipRegistry = Field(default_factory=MembershipRegistry)
    proposals: dict[str, Proposal] = Field(default_factory=dict)
    ballots: dict[str, dict[HexAddress, Ballot]] = Field(default_factory=dict)
    delegations: dict[str, dict[HexAddress, HexAddress]] = Field(
        default_factory=dict
    )
    scam_list: dict[HexAddress, RegistryEntry] = Field(default_factory=dict)
    social_contract: RegistryEntry | None = None
    freezes: dict[str, FreezeFlag] = Field(default_factory=dict)
    supply: SupplyLedger = Field(default_factory=SupplyLedger)
    lock_counter: NonNegativeInt = 0
    events: list[EventRecord] = Field(default_factory=list)
    tx_index: dict[HexDigest, TxLocation] = Field(default_factory=dict)

    # -- accounts ---------------------------------------------------------

    def account(self, address: str) -> Account:
        try:
            return self.accounts[address]
        except KeyError:
            msg = f"unknown account {address}"
            raise LedgerError(msg) from None

    def ensure_account(self, address: str) -> Account:
        if address not in self.accounts:
            self.accounts[address] = Account(address=address)
        return self.accounts[address]

    def balance_of(self, address: str) -> int:
        account = self.accounts.get(address)
        return account.balance if account else 0

    def active_locks(
        self, address: str, purpose: LockPurpose | None = None
    ) -> list[TokenLock]:
        account = self.accounts.get(address)
        if account is None:
            return []
        return [
            lock
            for lock in account.locks
            if lock.active_at(self.height)
            and (purpose is None or lock.purpose is purpose)
        ]

    def spendable(self, address: str) -> int:
        locked = sum(lock.amount for lock in self.active_locks(address))
        return self.balance_of(address) - locked

    def total_balance(self) -> int:
        return sum(account.balance for account in self.accounts.values())

    def supply_reconciles(self) -> bool:
        held = self.total_balance() + self.supply.pending_fees
        return held == self.supply.expected_total

    def find_lock(self, lock_id: str) -> TokenLock | None:
        for account in self.accounts.values():
            for lock in account.locks:
                if lock.lock_id == lock_id:
                    return lock
        return None

    # -- roles and membership -------------------------------------------

    def has_role(self, address: str, *roles: RoleName) -> bool:
        held = self.roles.get(address, [])
        return any(role in held for role in roles)

    def is_member(self, address: str) -> bool:
        return address in self.membership.members

    def is_frozen(self, target: str) -> bool:
        flag = self.freezes.get(target)
        return flag is not None and flag.frozen

    # -- events -----------------------------------------------------------

    def emit(
        self,
        topic: str,
        payload: dict[str, Any] | None = None,
        tx_hash: str | None = None,
    ) -> EventRecord:
        """Append an event at the current height."""
        index = 0
        if self.events and self.events[-1].height == self.height:
            index = self.events[-1].index + 1
        record = EventRecord(
            height=self.height,
            index=index,
            tx_hash=tx_hash,
            topic=topic,
            payload=payload or {},
        )
        self.events.append(record)
        return record

    # -- hashing ----------------------------------------------------------

    def canonical_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude=set(NON_CANONICAL_FIELDS))

    def state_hash(self) -> str:
        """Hash of a sorted serialization of accounts, locks and registries."""
        return hash_object(self.canonical_dict()).hex()


def transition(
    func: Callable[Concatenate[ChainState, P], Any],
) -> Callable[Concatenate[ChainState, P], ChainState]:
    """Turn an in-place state mutation into a pure transition.

    The wrapped function receives a deep copy; the original is returned
    untouched even when the mutation raises. The in-place variant stays
    reachable as ``.in_place`` for composite transitions such as
    ``apply_block``.
    """

    @functools.wraps(func)
    def wrapper(state: ChainState, *args: P.args, **kwargs: P.kwargs):
        new_state = state.model_copy(deep=True)
        func(new_state, *args, **kwargs)
        return new_state

    wrapper.in_place = func  # type: ignore[attr-defined]
    return wrapper
