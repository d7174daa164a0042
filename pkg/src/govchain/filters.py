"""Transaction filter evaluation.

Verdicts are deterministic, side-effect free functions of the rule set,
the transaction and the chain state they are checked against.
"""

from __future__ import annotations

from collections.abc import Sequence

from govchain.crypto import address_of
from govchain.registry import scam_list_check
from govchain.state import ChainState
from govchain.transactions import CONTRACT_TARGETS
from govchain.transactions import FilterKind
from govchain.transactions import FilterRule
from govchain.transactions import JoinPayload
from govchain.transactions import Transaction

REASON_SIGNATURE = "signature"
REASON_NONCE = "nonce"
REASON_CHAIN = "chain"
REASON_DUPLICATE = "duplicate"
REASON_FROZEN = "frozen"


def filter_reason(rule: FilterRule) -> str:
    return f"filter.{rule.identifier}"


def rule_violated(
    rule: FilterRule, tx: Transaction, state: ChainState
) -> bool:
    if not rule.applies_to(tx.sender):
        return False
    match rule.kind:
        case FilterKind.MAX_PAYLOAD_SIZE:
            return rule.max_bytes is not None and (
                tx.payload_size > rule.max_bytes
            )
        case FilterKind.ALLOWED_PAYLOAD_TYPES:
            return rule.allowed_types is not None and (
                tx.category not in rule.allowed_types
            )
        case FilterKind.SCAM_LIST_CHECK:
            return scam_list_check(state, tx.sender)
        case FilterKind.PERMISSIONED_SENDER_CHECK:
            if isinstance(tx.payload, JoinPayload):
                return False
            return not state.is_member(tx.sender)
    return False


def check_filters(
    rules: Sequence[FilterRule], tx: Transaction, state: ChainState
) -> str | None:
    """First violated rule's reason, in rule order, or None."""
    for rule in rules:
        if rule_violated(rule, tx, state):
            return filter_reason(rule)
    return None


def screen(
    tx: Transaction, state: ChainState, *, exact_nonce: bool
) -> str | None:
    """Full admission check shared by the pool and block validation.

    ``exact_nonce`` demands the next expected nonce (block validation);
    otherwise any non-stale nonce passes (pool admission).
    """
    if tx.chain_id != state.chain_id:
        return REASON_CHAIN
    if not tx.signature_valid():
        return REASON_SIGNATURE
    if address_of(bytes.fromhex(tx.public_key)) != tx.sender:
        return REASON_SIGNATURE
    account = state.accounts.get(tx.sender)
    if account is not None and account.public_key not in (
        None,
        tx.public_key,
    ):
        return REASON_SIGNATURE

    expected = account.nonce if account is not None else 0
    if tx.nonce < expected or (exact_nonce and tx.nonce != expected):
        return REASON_NONCE

    target = CONTRACT_TARGETS.get(tx.payload.kind)
    if target is not None and state.is_frozen(target):
        return REASON_FROZEN

    return check_filters(state.policy.filter_rules, tx, state)
