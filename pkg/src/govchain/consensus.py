"""Validator selection, fork choice, finality and incentive distribution.

Every function here is a pure decision over state values and block trees;
nodes call them, they never call back into a node.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from fractions import Fraction

import structlog

from govchain.blocks import Block
from govchain.blocks import BlockTree
from govchain.crypto import hash_bytes
from govchain.exceptions import LedgerError
from govchain.exceptions import NoEligibleValidatorError
from govchain.policy import FinalityMode
from govchain.policy import FinalityPolicy
from govchain.policy import IncentivePolicy
from govchain.policy import SelectionMode
from govchain.policy import ValidatorSelectionPolicy
from govchain.state import ChainState
from govchain.state import transition
from govchain.tokens import credit
from govchain.tokens import debit
from govchain.tokens import destroy
from govchain.tokens import mint
from govchain.transactions import LockPurpose

logger = structlog.get_logger()


# -- validator selection --------------------------------------------------


def stake_table(state: ChainState) -> dict[str, int]:
    """Active candidacy stake per candidate, nominations included.

    Nominations only count behind an address that holds its own active
    validator-candidacy lock.
    """
    stakes: dict[str, int] = {}
    for address in sorted(state.accounts):
        own = state.active_locks(address, LockPurpose.VALIDATOR_CANDIDACY)
        if own:
            stakes[address] = sum(lock.amount for lock in own)
    for address in sorted(state.accounts):
        for lock in state.active_locks(address, LockPurpose.NOMINATION):
            if lock.target in stakes:
                stakes[lock.target] += lock.amount
    return stakes


def lottery_draw(chain_id: str, round_: int, seed: int, total: int) -> int:
    """Deterministic draw in ``[0, total)`` keyed by chain, round and seed."""
    digest = hash_bytes(f"{chain_id}:{round_}:{seed}".encode())
    return int.from_bytes(digest, "big") % total


def produces_in_slot(policy: ValidatorSelectionPolicy, round_: int) -> bool:
    """Whether any block may be appended in this round.

    Only the proof-of-work stub skips rounds, to simulate difficulty.
    """
    if policy.mode is SelectionMode.PROOF_OF_WORK:
        return round_ % policy.pow_difficulty == 0
    return True


def select_validator(
    state: ChainState,
    round_: int,
    seed: int | None = None,
    policy: ValidatorSelectionPolicy | None = None,
) -> str:
    """The single address allowed to append the block of ``round_``.

    Raises:
        NoEligibleValidatorError: no staker (PoS), an empty authority
            list, or a proof-of-work round without a block.
    """
    policy = policy or state.policy.selection
    seed = state.policy.seed if seed is None else seed

    if policy.mode is SelectionMode.PROOF_OF_STAKE:
        stakes = stake_table(state)
        total = sum(stakes.values())
        if total == 0:
            msg = f"no active validator candidacy on {state.chain_id}"
            raise NoEligibleValidatorError(msg)
        point = lottery_draw(state.chain_id, round_, seed, total)
        cumulative = 0
        for address, stake in stakes.items():
            cumulative += stake
            if point < cumulative:
                return address

    authorities = policy.authorities
    if not authorities:
        msg = f"empty authority list on {state.chain_id}"
        raise NoEligibleValidatorError(msg)
    if policy.mode is SelectionMode.PROOF_OF_WORK:
        if not produces_in_slot(policy, round_):
            msg = f"round {round_} below proof-of-work difficulty"
            raise NoEligibleValidatorError(msg)
        index = (round_ // policy.pow_difficulty) % len(authorities)
        return authorities[index]
    return authorities[round_ % len(authorities)]


def validator_weights(state: ChainState) -> dict[str, int]:
    """Finality voting weight: stake under PoS, one per authority otherwise."""
    if state.policy.selection.mode is SelectionMode.PROOF_OF_STAKE:
        return stake_table(state)
    return dict.fromkeys(state.policy.selection.authorities, 1)


# -- fork choice and finality ---------------------------------------------


def choose_canonical_chain(
    tree: BlockTree, anchor: str | None = None
) -> str:
    """Tip of the longest chain; equal lengths go to the smaller hash.

    With ``anchor`` only descendants of that block compete, which keeps a
    finalized block on the canonical chain.
    """
    candidates = [
        block
        for block in tree
        if anchor is None or tree.is_ancestor(anchor, block.block_hash)
    ]
    best = min(candidates, key=lambda b: (-b.height, b.block_hash))
    return best.block_hash


def finalized_height(
    tree: BlockTree,
    policy: FinalityPolicy,
    votes: Mapping[str, str] | None = None,
    weights: Mapping[str, int] | None = None,
    tip: str | None = None,
) -> int:
    """Greatest height of the canonical chain regarded as irreversible.

    ``votes`` maps each validator to the block it affirms (its own tip);
    a validator affirms every ancestor of that block as well.
    ``weights`` defaults to one per voter.
    """
    tip = tip or choose_canonical_chain(tree)
    tip_height = tree.get(tip).height

    match policy.mode:
        case FinalityMode.IMMEDIATE:
            return tip_height
        case FinalityMode.K_DEEP:
            return max(tree.genesis_height, tip_height - policy.k)

    votes = votes or {}
    if weights is None:
        weights = dict.fromkeys(votes, 1)
    total = sum(weights.values())
    if total == 0:
        return tree.genesis_height
    for height in range(tip_height, tree.genesis_height, -1):
        block_hash = tree.ancestor_at(tip, height)
        affirming = sum(
            weights.get(validator, 0)
            for validator, voted in votes.items()
            if tree.is_ancestor(block_hash, voted)
        )
        if Fraction(affirming, total) > policy.quorum_fraction:
            return height
    return tree.genesis_height


# -- incentives -----------------------------------------------------------


def pay_incentives(
    state: ChainState,
    validator: str | None,
    fees: int,
    policy: IncentivePolicy | None = None,
) -> None:
    """Pay out ``fees`` held in the pending pool plus the block reward.

    Disabled incentives mint nothing and destroy the collected fees.
    """
    policy = policy or state.policy.incentive
    if fees > state.supply.pending_fees:
        msg = f"{fees} fees to pay but {state.supply.pending_fees} collected"
        raise LedgerError(msg)
    state.supply.pending_fees -= fees

    if not policy.enabled or validator is None:
        if fees:
            destroy(state, fees)
            state.emit("fees.burned", {"amount": fees})
        return

    validator_fees = math.floor(fees * policy.validator_fee_share)
    treasury_fees = fees - validator_fees
    mint(state, validator, policy.block_reward)
    if validator_fees:
        credit(state, validator, validator_fees)
    if treasury_fees:
        if policy.treasury is None:
            destroy(state, treasury_fees)
        else:
            credit(state, policy.treasury, treasury_fees)
    state.emit(
        "incentive.distributed",
        {
            "validator": validator,
            "reward": policy.block_reward,
            "validator_fees": validator_fees,
            "treasury": policy.treasury,
            "treasury_fees": treasury_fees,
        },
    )


@transition
def distribute_incentives(
    state: ChainState, block: Block, policy: IncentivePolicy | None = None
) -> None:
    """Collect the fees of ``block`` and credit its validator and treasury.

    Fees are charged to the transaction senders here, so ``state`` must not
    have paid them yet. Disabled incentives leave every balance unchanged.

    Raises:
        InsufficientBalanceError: a sender cannot cover its fee.
    """
    policy = policy or state.policy.incentive
    fees = block.total_fees
    if not policy.enabled:
        logger.debug(
            "incentives disabled",
            chain_id=state.chain_id,
            height=block.height,
        )
        return
    for tx in block.transactions:
        debit(state, tx.sender, tx.fee)
    state.supply.pending_fees += fees
    pay_incentives(state, block.header.validator, fees, policy)
    logger.debug(
        "incentives distributed",
        chain_id=state.chain_id,
        height=block.height,
        fees=fees,
    )
