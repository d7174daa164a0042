"""Block application, genesis construction and ledger queries."""

from __future__ import annotations

from collections.abc import Iterable

import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import NonNegativeInt
from pydantic import PositiveInt

from govchain import governance
from govchain import registry
from govchain import tokens
from govchain.blocks import Block
from govchain.blocks import genesis_block
from govchain.blocks import header_signature_valid
from govchain.blocks import merkle_root_valid
from govchain.consensus import pay_incentives
from govchain.consensus import produces_in_slot
from govchain.consensus import select_validator
from govchain.crypto import HexAddress
from govchain.crypto import HexKey
from govchain.exceptions import BlockRejectedError
from govchain.exceptions import GovchainError
from govchain.exceptions import LedgerError
from govchain.exceptions import LogQueryError
from govchain.exceptions import NoEligibleValidatorError
from govchain.exceptions import UnknownTransactionError
from govchain.filters import screen
from govchain.policy import GovernancePolicy
from govchain.state import ChainState
from govchain.state import EventRecord
from govchain.state import MembershipRegistry
from govchain.state import TxLocation
from govchain.transactions import CastVotePayload
from govchain.transactions import CrossChainResultPayload
from govchain.transactions import DelegatePayload
from govchain.transactions import FreezeContractPayload
from govchain.transactions import GrantRolePayload
from govchain.transactions import IssueInvitePayload
from govchain.transactions import JoinPayload
from govchain.transactions import LockPayload
from govchain.transactions import LockPurpose
from govchain.transactions import NominatePayload
from govchain.transactions import OverridePayload
from govchain.transactions import RevokeDelegationPayload
from govchain.transactions import RoleName
from govchain.transactions import ScamListAddPayload
from govchain.transactions import SocialContractSetPayload
from govchain.transactions import SubmitProposalPayload
from govchain.transactions import Transaction
from govchain.transactions import TransferPayload
from govchain.transactions import UnfreezeContractPayload

logger = structlog.get_logger()

GENESIS_STAKE_DURATION = 1_000_000


# -- genesis --------------------------------------------------------------


class GenesisAccount(BaseModel):
    """One pre-funded participant of a fresh chain."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    address: HexAddress
    public_key: HexKey | None = None
    balance: NonNegativeInt = 0
    roles: tuple[RoleName, ...] = ()
    member: bool = True
    identity: str | None = None
    stake: NonNegativeInt = 0
    stake_duration: PositiveInt = GENESIS_STAKE_DURATION


def build_genesis(
    chain_id: str,
    policy: GovernancePolicy,
    accounts: Iterable[GenesisAccount] = (),
    invite_digests: Iterable[str] = (),
    *,
    incentives_deployed: bool = True,
) -> ChainState:
    """Initial state of a chain; stakes become candidacy locks.

    A deployed incentive distributor announces its configuration, even
    when disabled.
    """
    state = ChainState(
        chain_id=chain_id,
        policy=policy,
        membership=MembershipRegistry(mode=policy.mode),
    )
    for digest in invite_digests:
        state.membership.invites[digest] = False
    if incentives_deployed:
        state.emit(
            "incentive.configured",
            {
                "enabled": policy.incentive.enabled,
                "block_reward": policy.incentive.block_reward,
                "validator_fee_share": str(
                    policy.incentive.validator_fee_share
                ),
            },
        )
    for entry in sorted(accounts, key=lambda a: a.address):
        account = state.ensure_account(entry.address)
        account.balance = entry.balance
        account.public_key = entry.public_key
        state.supply.genesis += entry.balance
        if entry.roles:
            state.roles[entry.address] = sorted(set(entry.roles))
        if entry.member:
            state.membership.members[entry.address] = entry.identity
            state.emit(
                "member.joined",
                {
                    "address": entry.address,
                    "identity": entry.identity,
                    "mode": policy.mode.value,
                    "via": "genesis",
                },
            )
        if entry.stake:
            tokens.lock_tokens.in_place(
                state,
                entry.address,
                entry.stake,
                entry.stake_duration,
                LockPurpose.VALIDATOR_CANDIDACY,
            )
    return state


def seal_genesis(
    state: ChainState, shard_id: int = 0
) -> tuple[Block, ChainState]:
    """Genesis block committing to ``state``, and the state headed by it."""
    block = genesis_block(
        state.chain_id, state.state_hash(), shard_id, state.height
    )
    sealed = state.model_copy(deep=True)
    sealed.head = block.block_hash
    return block, sealed


# -- block application ----------------------------------------------------


def _validate_header(state: ChainState, block: Block) -> None:
    header = block.header
    if header.chain_id != state.chain_id:
        raise BlockRejectedError("chain", header.chain_id)
    if header.parent != state.head or header.height != state.height + 1:
        raise BlockRejectedError(
            "linkage", f"height {header.height} on {header.parent}"
        )
    if header.slot <= state.slot:
        raise BlockRejectedError("slot", f"slot {header.slot}")
    if not merkle_root_valid(block):
        raise BlockRejectedError("merkle-root", header.merkle_root)

    selection = state.policy.selection
    if not produces_in_slot(selection, header.slot):
        raise BlockRejectedError(
            "validator", f"no block in slot {header.slot}"
        )
    try:
        expected = select_validator(state, header.slot)
    except NoEligibleValidatorError as exc:
        raise BlockRejectedError("validator", str(exc)) from exc
    if header.validator != expected:
        raise BlockRejectedError(
            "validator", f"{header.validator} is not {expected}"
        )
    account = state.accounts.get(expected)
    public_key = account.public_key if account else None
    if not header_signature_valid(header, block.signature, public_key):
        raise BlockRejectedError("signature", block.block_hash)


def execute_payload(state: ChainState, tx: Transaction) -> None:
    """Apply the effect of one screened transaction (in place)."""
    sender = tx.sender
    tx_hash = tx.tx_hash
    payload = tx.payload
    match payload:
        case TransferPayload():
            tokens.transfer.in_place(
                state, sender, payload.to, payload.amount, tx_hash
            )
        case LockPayload() | NominatePayload():
            if not state.policy.token_locker:
                msg = "token locker is not active on this chain"
                raise LedgerError(msg)
            if isinstance(payload, NominatePayload):
                purpose, target = LockPurpose.NOMINATION, payload.candidate
            elif payload.purpose in (
                LockPurpose.NOMINATION,
                LockPurpose.PROPOSAL_DEPOSIT,
            ):
                msg = f"{payload.purpose.value} locks are not created directly"
                raise LedgerError(msg)
            else:
                purpose, target = payload.purpose, None
            tokens.lock_tokens.in_place(
                state,
                sender,
                payload.amount,
                payload.duration,
                purpose,
                target=target,
                tx_hash=tx_hash,
            )
        case JoinPayload():
            governance.join.in_place(
                state, sender, payload.invite_code, payload.identity, tx_hash
            )
        case IssueInvitePayload():
            governance.issue_invite.in_place(
                state, sender, payload.code_digest, tx_hash
            )
        case GrantRolePayload():
            governance.grant_role.in_place(
                state, sender, payload.address, payload.role, tx_hash
            )
        case SubmitProposalPayload():
            governance.submit_proposal.in_place(
                state,
                sender,
                payload.proposal_id,
                payload.action,
                payload.voting_period,
                payload.scheme,
                payload.threshold,
                payload.description,
                tx_hash,
            )
        case CastVotePayload():
            governance.cast_vote.in_place(
                state,
                sender,
                payload.proposal_id,
                payload.choice,
                payload.votes_cast,
                tx_hash,
            )
        case DelegatePayload():
            governance.delegate.in_place(
                state, sender, payload.proposal_id, payload.target, tx_hash
            )
        case RevokeDelegationPayload():
            governance.revoke_delegation.in_place(
                state, sender, payload.proposal_id, tx_hash
            )
        case OverridePayload():
            governance.dictator_override.in_place(
                state,
                sender,
                payload.proposal_id,
                payload.action,
                payload.slash_deposit,
                tx_hash,
            )
        case CrossChainResultPayload():
            governance.accept_cross_chain_result.in_place(
                state, payload.record, tx_hash
            )
        case ScamListAddPayload():
            registry.scam_list_add.in_place(
                state, sender, payload.address, payload.note, tx_hash
            )
        case SocialContractSetPayload():
            registry.social_contract_set.in_place(
                state, sender, payload.maintainer_spec, tx_hash
            )
        case FreezeContractPayload():
            registry.freeze_contract.in_place(
                state, sender, payload.target, tx_hash
            )
        case UnfreezeContractPayload():
            registry.unfreeze_contract.in_place(
                state, sender, payload.target, tx_hash
            )


def apply_transaction(
    state: ChainState, tx: Transaction, block_hash: str, index: int
) -> None:
    """Screen, charge and execute one transaction of a block (in place).

    Raises:
        BlockRejectedError: the transaction is invalid at this point.
    """
    reason = screen(tx, state, exact_nonce=True)
    if reason is not None:
        raise BlockRejectedError(reason, tx.tx_hash)
    account = state.ensure_account(tx.sender)
    if account.public_key is None:
        account.public_key = tx.public_key
    try:
        tokens.debit(state, tx.sender, tx.fee)
        state.supply.pending_fees += tx.fee
        execute_payload(state, tx)
    except GovchainError as exc:
        detail = f"{tx.tx_hash}: {exc}"
        raise BlockRejectedError("execution", detail) from exc
    account.nonce += 1
    state.tx_index[tx.tx_hash] = TxLocation(
        height=state.height,
        block_hash=block_hash,
        sender=tx.sender,
        index=index,
    )


def apply_block(state: ChainState, block: Block) -> ChainState:
    """Validate ``block`` against ``state`` and return the successor state.

    The whole block is rejected when any transaction is invalid; the input
    state is never modified.

    Raises:
        BlockRejectedError: naming the failed check.
    """
    _validate_header(state, block)
    header = block.header

    new_state = state.model_copy(deep=True)
    new_state.height = header.height
    new_state.slot = header.slot
    new_state.head = block.block_hash
    tokens.release_expired_locks(new_state)

    for index, tx in enumerate(block.transactions):
        apply_transaction(new_state, tx, block.block_hash, index)

    governance.close_due_proposals(new_state)
    for item in block.included_headers:
        new_state.emit(
            "relay.included",
            {
                "shard_id": item.header.shard_id,
                "height": item.header.height,
                "block_hash": item.header.block_hash,
                "validator": item.header.validator,
            },
        )
    pay_incentives(new_state, header.validator, block.total_fees)
    new_state.emit(
        "block.applied",
        {
            "block_hash": block.block_hash,
            "validator": header.validator,
            "selection": state.policy.selection.mode.value,
            "slot": header.slot,
            "transactions": len(block.transactions),
            "protocol_version": header.protocol_version,
        },
    )
    logger.debug(
        "block applied",
        chain_id=state.chain_id,
        height=header.height,
        txs=len(block.transactions),
    )
    return new_state


# -- queries --------------------------------------------------------------


def extract_logs(
    state: ChainState,
    topic: str | None = None,
    height_range: tuple[int, int] | None = None,
) -> list[EventRecord]:
    """Events matching every given filter, in chain order.

    Raises:
        LogQueryError: ``height_range`` is inverted.
    """
    return filter_events(state.events, topic, height_range)


def filter_events(
    events: Iterable[EventRecord],
    topic: str | None = None,
    height_range: tuple[int, int] | None = None,
) -> list[EventRecord]:
    if height_range is not None:
        low, high = height_range
        if low > high:
            msg = f"inverted height range {low}..{high}"
            raise LogQueryError(msg)
    return [
        event
        for event in events
        if (topic is None or event.topic == topic)
        and (
            height_range is None
            or height_range[0] <= event.height <= height_range[1]
        )
    ]


class SenderTrace(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    address: HexAddress
    identity: str | None = None


def trace_sender(
    state: ChainState, tx_hash: str, finalized_height: int | None = None
) -> SenderTrace:
    """Identify who sent a transaction in a (finalized) block.

    Permissioned chains also reveal the sender's identity label.

    Raises:
        UnknownTransactionError: unknown hash or not yet finalized.
    """
    location = state.tx_index.get(tx_hash)
    if location is None or (
        finalized_height is not None and location.height > finalized_height
    ):
        msg = f"no finalized transaction {tx_hash}"
        raise UnknownTransactionError(msg)
    identity = None
    if state.policy.permissioned:
        identity = state.membership.members.get(location.sender)
    return SenderTrace(address=location.sender, identity=identity)

