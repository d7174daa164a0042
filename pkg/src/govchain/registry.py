"""Built-in governance contracts: scam list, social contract, freezer.

These are named registries with access control rather than user
programs. Every mutation is authorised, logged, and refused while its
contract is frozen.
"""

from __future__ import annotations

import structlog

from govchain.exceptions import AuthorizationError
from govchain.exceptions import ContractFrozenError
from govchain.exceptions import RegistryError
from govchain.proposals import ProposalStatus
from govchain.state import ChainState
from govchain.state import FreezeFlag
from govchain.state import RegistryEntry
from govchain.state import RegistryName
from govchain.state import transition

logger = structlog.get_logger()

GOVERNANCE_CONTRACT = "governance"
FREEZABLE_TARGETS = frozenset(
    {
        RegistryName.SCAM_LIST.value,
        RegistryName.SOCIAL_CONTRACT.value,
        GOVERNANCE_CONTRACT,
    }
)


def ensure_not_frozen(state: ChainState, target: str) -> None:
    if state.is_frozen(target):
        raise ContractFrozenError(target)


@transition
def scam_list_add(
    state: ChainState,
    actor: str,
    address: str,
    note: str = "",
    tx_hash: str | None = None,
) -> None:
    ensure_not_frozen(state, RegistryName.SCAM_LIST)
    editors = state.policy.scam_list_editors
    if not state.has_role(actor, *editors):
        msg = f"{actor} may not edit the scam list"
        raise AuthorizationError(msg)
    state.scam_list[address] = RegistryEntry(
        registry=RegistryName.SCAM_LIST,
        key=address,
        value={"note": note},
        added_by=actor,
        height=state.height,
    )
    state.emit(
        "scam-list.added",
        {"address": address, "note": note, "actor": actor},
        tx_hash,
    )


def scam_list_check(state: ChainState, address: str) -> bool:
    """Read-only; answers even while the scam list is frozen."""
    return address in state.scam_list


@transition
def social_contract_set(
    state: ChainState,
    actor: str,
    maintainer_spec: str,
    tx_hash: str | None = None,
) -> None:
    ensure_not_frozen(state, RegistryName.SOCIAL_CONTRACT)
    if not state.has_role(actor, *state.policy.social_contract_setters):
        msg = f"{actor} may not set the social contract"
        raise AuthorizationError(msg)
    previous = state.social_contract
    state.social_contract = RegistryEntry(
        registry=RegistryName.SOCIAL_CONTRACT,
        key="maintainer",
        value={"maintainer_spec": maintainer_spec},
        added_by=actor,
        height=state.height,
    )
    state.emit(
        "social-contract.set",
        {
            "maintainer_spec": maintainer_spec,
            "previous": (
                previous.value["maintainer_spec"] if previous else None
            ),
            "actor": actor,
        },
        tx_hash,
    )


def social_contract_get(state: ChainState) -> str | None:
    if state.social_contract is None:
        return None
    return state.social_contract.value["maintainer_spec"]


def _check_freezer(state: ChainState, actor: str, target: str) -> None:
    if target not in FREEZABLE_TARGETS:
        msg = f"unknown freeze target '{target}'"
        raise RegistryError(msg)
    if actor not in state.policy.freezer_eligible:
        msg = f"{actor} is not eligible to trigger the contract freezer"
        raise AuthorizationError(msg)


def _set_freeze(
    state: ChainState,
    actor: str,
    target: str,
    frozen: bool,
    tx_hash: str | None = None,
) -> None:
    if state.is_frozen(target) == frozen:
        topic = "contract.freeze-noop" if frozen else "contract.unfreeze-noop"
        state.emit(topic, {"target": target, "actor": actor}, tx_hash)
        return
    state.freezes[target] = FreezeFlag(
        target=target, frozen=frozen, frozen_by=actor, height=state.height
    )
    topic = "contract.frozen" if frozen else "contract.unfrozen"
    state.emit(topic, {"target": target, "actor": actor}, tx_hash)
    logger.info(topic, target=target, actor=actor, height=state.height)


def enact_freeze(
    state: ChainState, proposal_id: str, target: str, frozen: bool
) -> None:
    """Apply the freeze action of an approved proposal (in place).

    The vote stands in for freezer eligibility, so the proposal must exist
    and be approved.

    Raises:
        AuthorizationError: no approved proposal carries the action.
        RegistryError: the target is not freezable.
    """
    if target not in FREEZABLE_TARGETS:
        msg = f"unknown freeze target '{target}'"
        raise RegistryError(msg)
    proposal = state.proposals.get(proposal_id)
    if proposal is None or proposal.status is not ProposalStatus.APPROVED:
        msg = f"no approved proposal '{proposal_id}' to enact"
        raise AuthorizationError(msg)
    _set_freeze(state, proposal.proposer, target, frozen)


@transition
def freeze_contract(
    state: ChainState, actor: str, target: str, tx_hash: str | None = None
) -> None:
    _check_freezer(state, actor, target)
    _set_freeze(state, actor, target, True, tx_hash)


@transition
def unfreeze_contract(
    state: ChainState, actor: str, target: str, tx_hash: str | None = None
) -> None:
    _check_freezer(state, actor, target)
    _set_freeze(state, actor, target, False, tx_hash)
