"""Roles, membership and the improvement-proposal lifecycle.

Each public operation is a pure transition (see
:func:`govchain.state.transition`); ``apply_block`` dispatches to the
``.in_place`` variants so a failing transaction leaves nothing behind.
"""

from __future__ import annotations

from typing import Any

import pydantic
import structlog

from govchain.crypto import hash_bytes
from govchain.crypto import verify_hex
from govchain.exceptions import AuthorizationError
from govchain.exceptions import CrossChainError
from govchain.exceptions import MembershipError
from govchain.exceptions import ProposalError
from govchain.exceptions import VoteRejectedError
from govchain.policy import GovernancePolicy
from govchain.proposals import STATUS_TRANSITIONS
from govchain.proposals import Ballot
from govchain.proposals import Choice
from govchain.proposals import CrossChainResult
from govchain.proposals import FreezeAction
from govchain.proposals import ParameterChange
from govchain.proposals import Proposal
from govchain.proposals import ProposalAction
from govchain.proposals import ProposalStatus
from govchain.proposals import ProtocolUpgrade
from govchain.proposals import SchemeKind
from govchain.proposals import TallyResult
from govchain.proposals import ThresholdPolicy
from govchain.proposals import VotingScheme
from govchain.registry import FREEZABLE_TARGETS
from govchain.registry import GOVERNANCE_CONTRACT
from govchain.registry import enact_freeze
from govchain.registry import ensure_not_frozen
from govchain.state import ChainState
from govchain.state import transition
from govchain.tokens import credit
from govchain.tokens import debit
from govchain.tokens import lock_tokens
from govchain.tokens import slash_lock
from govchain.transactions import FilterKind
from govchain.transactions import LockPurpose
from govchain.transactions import OverrideAction
from govchain.transactions import RoleName
from govchain.voting import capture_snapshot
from govchain.voting import compute_tally
from govchain.voting import decide
from govchain.voting import snapshot_due

logger = structlog.get_logger()

ROLE_GRANTERS = (RoleName.DEPLOYER, RoleName.ADMINISTRATOR)


def invite_digest(code: str) -> str:
    """Invitation codes are stored only as digests."""
    return hash_bytes(code.encode()).hex()


# -- membership and roles -------------------------------------------------


@transition
def join(
    state: ChainState,
    address: str,
    invite_code: str | None = None,
    identity: str | None = None,
    tx_hash: str | None = None,
) -> None:
    """Register ``address`` as a participant.

    Permissioned chains require an unconsumed invitation and an identity
    label; the invitation is consumed.
    """
    if state.is_member(address):
        msg = f"{address} is already a member"
        raise MembershipError(msg)

    mode = state.membership.mode
    if state.policy.permissioned:
        if invite_code is None:
            msg = "permissioned join requires an invitation code"
            raise MembershipError(msg)
        if not identity:
            msg = "permissioned join requires an identity label"
            raise MembershipError(msg)
        digest = invite_digest(invite_code)
        consumed = state.membership.invites.get(digest)
        if consumed is None:
            msg = "unknown invitation code"
            raise MembershipError(msg)
        if consumed:
            msg = "invitation code already used"
            raise MembershipError(msg)
        state.membership.invites[digest] = True
        state.emit(
            "invite.consumed", {"digest": digest, "address": address}, tx_hash
        )

    state.membership.members[address] = identity
    state.emit(
        "member.joined",
        {"address": address, "identity": identity, "mode": mode.value},
        tx_hash,
    )


@transition
def issue_invite(
    state: ChainState,
    actor: str,
    code_digest: str,
    tx_hash: str | None = None,
) -> None:
    if not state.has_role(actor, *state.policy.invite_issuers):
        msg = f"{actor} may not issue invitations"
        raise AuthorizationError(msg)
    if code_digest in state.membership.invites:
        msg = "invitation already issued"
        raise MembershipError(msg)
    state.membership.invites[code_digest] = False
    state.emit(
        "invite.issued", {"digest": code_digest, "actor": actor}, tx_hash
    )


@transition
def grant_role(
    state: ChainState,
    actor: str,
    address: str,
    role: RoleName,
    tx_hash: str | None = None,
) -> None:
    """Grant ``role``; a deployer grant also admits a non-member."""
    if not state.has_role(actor, *ROLE_GRANTERS):
        msg = f"{actor} may not grant roles"
        raise AuthorizationError(msg)
    held = state.roles.setdefault(address, [])
    if role not in held:
        held.append(role)
        held.sort()
    state.emit(
        "role.granted",
        {"address": address, "role": role.value, "actor": actor},
        tx_hash,
    )
    if not state.is_member(address) and state.has_role(
        actor, RoleName.DEPLOYER
    ):
        state.membership.members[address] = None
        state.emit(
            "member.joined",
            {
                "address": address,
                "identity": None,
                "mode": state.membership.mode.value,
                "via": "grant",
            },
            tx_hash,
        )


# -- proposals ------------------------------------------------------------

PARAMETER_KEYS = frozenset(
    {
        "block_reward",
        "validator_fee_share",
        "proposal_deposit",
        "fast_track_window",
        "max_payload_bytes",
        "allowed_payload_types",
        "scam_list_filter",
    }
)


def _replace_rule(
    rules: list[dict[str, Any]], kind: FilterKind, rule: dict | None
) -> list[dict[str, Any]]:
    kept = [r for r in rules if r["kind"] != kind.value]
    if rule is not None:
        kept.append(rule)
    return kept


def updated_policy(
    policy: GovernancePolicy, key: str, value: Any
) -> GovernancePolicy:
    """Policy with one governed parameter changed.

    Raises:
        ProposalError: unknown key or a value the policy rejects.
    """
    if key not in PARAMETER_KEYS:
        msg = f"parameter '{key}' is not governed by proposals"
        raise ProposalError(msg)
    data = policy.model_dump(mode="json")
    rules = data["filter_rules"]
    match key:
        case "block_reward" | "validator_fee_share":
            data["incentive"][key] = value
        case "proposal_deposit" | "fast_track_window":
            data[key] = value
        case "max_payload_bytes":
            data["filter_rules"] = _replace_rule(
                rules,
                FilterKind.MAX_PAYLOAD_SIZE,
                {
                    "kind": FilterKind.MAX_PAYLOAD_SIZE.value,
                    "max_bytes": value,
                },
            )
        case "allowed_payload_types":
            data["filter_rules"] = _replace_rule(
                rules,
                FilterKind.ALLOWED_PAYLOAD_TYPES,
                {
                    "kind": FilterKind.ALLOWED_PAYLOAD_TYPES.value,
                    "allowed_types": value,
                },
            )
        case "scam_list_filter":
            rule = (
                {"kind": FilterKind.SCAM_LIST_CHECK.value} if value else None
            )
            data["filter_rules"] = _replace_rule(
                rules, FilterKind.SCAM_LIST_CHECK, rule
            )
    try:
        return GovernancePolicy.model_validate(data)
    except pydantic.ValidationError as exc:
        msg = f"invalid value for '{key}': {exc.errors()[0]['msg']}"
        raise ProposalError(msg) from exc


def _check_action(
    state: ChainState, action: ProposalAction, deadline: int
) -> None:
    match action:
        case ProtocolUpgrade():
            if action.new_version < 2:
                msg = "upgrade must target a version above the initial one"
                raise ProposalError(msg)
            if action.activation_height <= deadline:
                msg = (
                    f"activation height {action.activation_height} must "
                    f"follow the voting deadline {deadline}"
                )
                raise ProposalError(msg)
        case ParameterChange():
            updated_policy(state.policy, action.key, action.value)
        case FreezeAction():
            if action.target not in FREEZABLE_TARGETS:
                msg = f"unknown freeze target '{action.target}'"
                raise ProposalError(msg)


def _cost_account(state: ChainState, scheme: VotingScheme) -> str | None:
    return scheme.cost_account or state.policy.incentive.treasury


def _check_scheme(state: ChainState, scheme: VotingScheme) -> None:
    if scheme.kind is SchemeKind.QUADRATIC and (
        _cost_account(state, scheme) is None
    ):
        msg = "quadratic voting needs a cost account or a treasury"
        raise ProposalError(msg)
    if scheme.kind is SchemeKind.CROSS_CHAIN_TOKEN and not scheme.aux_chain_id:
        msg = "cross-chain token voting needs an auxiliary chain id"
        raise ProposalError(msg)


def _move_status(proposal: Proposal, status: ProposalStatus) -> None:
    if status not in STATUS_TRANSITIONS[proposal.status]:
        msg = (
            f"proposal '{proposal.id}' cannot move from "
            f"{proposal.status.value} to {status.value}"
        )
        raise ProposalError(msg)
    proposal.status = status


def _open_proposal(state: ChainState, proposal_id: str) -> Proposal:
    proposal = state.proposals.get(proposal_id)
    if proposal is None:
        msg = f"unknown proposal '{proposal_id}'"
        raise ProposalError(msg)
    if proposal.status is not ProposalStatus.OPEN:
        msg = f"proposal '{proposal_id}' is {proposal.status.value}"
        raise ProposalError(msg)
    return proposal


@transition
def submit_proposal(
    state: ChainState,
    proposer: str,
    proposal_id: str,
    action: ProposalAction,
    voting_period: int,
    scheme: VotingScheme | None = None,
    threshold: ThresholdPolicy | None = None,
    description: str = "",
    tx_hash: str | None = None,
) -> None:
    """Open a proposal; read it back as ``state.proposals[proposal_id]``.

    Raises:
        MembershipError: the proposer is not a member.
        ProposalError: duplicate id, invalid action or scheme.
        InsufficientBalanceError: the required deposit cannot be locked.
    """
    ensure_not_frozen(state, GOVERNANCE_CONTRACT)
    scheme = scheme or VotingScheme()
    threshold = threshold or ThresholdPolicy()
    if not state.is_member(proposer):
        msg = f"{proposer} is not a member"
        raise MembershipError(msg)
    if proposal_id in state.proposals:
        msg = f"proposal '{proposal_id}' already exists"
        raise ProposalError(msg)
    if voting_period <= 0:
        msg = "voting period must be positive"
        raise ProposalError(msg)
    deadline = state.height + voting_period
    _check_action(state, action, deadline)
    _check_scheme(state, scheme)

    deposit_lock_id = None
    if state.policy.require_deposit and state.policy.proposal_deposit:
        lock_tokens.in_place(
            state,
            proposer,
            state.policy.proposal_deposit,
            voting_period,
            LockPurpose.PROPOSAL_DEPOSIT,
            target=proposal_id,
            tx_hash=tx_hash,
        )
        deposit_lock_id = f"lock-{state.lock_counter}"

    proposal = Proposal(
        id=proposal_id,
        proposer=proposer,
        description=description,
        action=action,
        scheme=scheme,
        threshold=threshold,
        deposit_lock_id=deposit_lock_id,
        submitted_height=state.height,
        voting_deadline=deadline,
    )
    if scheme.kind is SchemeKind.CARBONVOTE and (
        snapshot_due(proposal) == state.height
    ):
        capture_snapshot(state, proposal)
    state.proposals[proposal_id] = proposal
    state.ballots[proposal_id] = {}
    state.delegations[proposal_id] = {}
    state.emit(
        "proposal.open",
        {
            "proposal_id": proposal_id,
            "proposer": proposer,
            "action": action.type,
            "scheme": scheme.kind.value,
            "threshold": threshold.kind.value,
            "deadline": deadline,
            "deposit_lock_id": deposit_lock_id,
        },
        tx_hash,
    )


def _check_voting_open(
    state: ChainState, proposal_id: str, voter: str
) -> Proposal:
    ensure_not_frozen(state, GOVERNANCE_CONTRACT)
    proposal = _open_proposal(state, proposal_id)
    if state.height >= proposal.voting_deadline:
        msg = (
            f"voting on '{proposal_id}' closed at height "
            f"{proposal.voting_deadline}"
        )
        raise VoteRejectedError(msg)
    if state.policy.permissioned and not state.is_member(voter):
        msg = f"{voter} is not a member"
        raise VoteRejectedError(msg)
    return proposal


@transition
def cast_vote(
    state: ChainState,
    voter: str,
    proposal_id: str,
    choice: Choice,
    votes_cast: int = 1,
    tx_hash: str | None = None,
) -> None:
    """Record a ballot, replacing the voter's earlier ballot or delegation.

    Quadratic ballots cost ``votes_cast ** 2`` tokens, paid to the cost
    account; a replaced ballot's cost is refunded first.
    """
    proposal = _check_voting_open(state, proposal_id, voter)
    scheme = proposal.scheme
    if scheme.kind is SchemeKind.CROSS_CHAIN_TOKEN:
        msg = f"'{proposal_id}' is voted on chain {scheme.aux_chain_id}"
        raise VoteRejectedError(msg)
    if votes_cast <= 0:
        msg = "a ballot must cast at least one vote"
        raise VoteRejectedError(msg)

    ballots = state.ballots.setdefault(proposal_id, {})
    cost = 0
    if scheme.kind is SchemeKind.QUADRATIC:
        account = _cost_account(state, scheme)
        previous = ballots.get(voter)
        if previous is not None and previous.cost_paid:
            debit(state, account, previous.cost_paid)
            credit(state, voter, previous.cost_paid)
        cost = votes_cast**2
        available = state.spendable(voter)
        if cost > available:
            msg = (
                f"{votes_cast} votes cost {cost} tokens, {voter} has "
                f"{available}"
            )
            raise VoteRejectedError(msg)
        debit(state, voter, cost)
        credit(state, account, cost)
    else:
        votes_cast = 1

    state.delegations.setdefault(proposal_id, {}).pop(voter, None)
    ballots[voter] = Ballot(
        voter=voter,
        proposal_id=proposal_id,
        choice=choice,
        votes_cast=votes_cast,
        cost_paid=cost,
        height=state.height,
    )
    state.emit(
        "vote.cast",
        {
            "proposal_id": proposal_id,
            "voter": voter,
            "choice": choice.value,
            "scheme": scheme.kind.value,
            "votes_cast": votes_cast,
            "cost": cost,
        },
        tx_hash,
    )


@transition
def delegate(
    state: ChainState,
    voter: str,
    proposal_id: str,
    target: str,
    tx_hash: str | None = None,
) -> None:
    proposal = _check_voting_open(state, proposal_id, voter)
    if proposal.scheme.kind is not SchemeKind.LIQUID_DEMOCRACY:
        msg = f"'{proposal_id}' does not accept delegations"
        raise VoteRejectedError(msg)
    if target == voter:
        msg = "cannot delegate to oneself"
        raise VoteRejectedError(msg)
    known = state.is_member(target) or (
        not state.policy.permissioned and target in state.accounts
    )
    if not known:
        msg = f"delegation target {target} is not a member"
        raise VoteRejectedError(msg)

    ballots = state.ballots.setdefault(proposal_id, {})
    ballots.pop(voter, None)
    state.delegations.setdefault(proposal_id, {})[voter] = target
    state.emit(
        "vote.delegated",
        {"proposal_id": proposal_id, "voter": voter, "target": target},
        tx_hash,
    )


@transition
def revoke_delegation(
    state: ChainState,
    voter: str,
    proposal_id: str,
    tx_hash: str | None = None,
) -> None:
    _check_voting_open(state, proposal_id, voter)
    delegations = state.delegations.setdefault(proposal_id, {})
    target = delegations.pop(voter, None)
    if target is None:
        msg = f"{voter} has no delegation on '{proposal_id}'"
        raise VoteRejectedError(msg)
    state.emit(
        "vote.delegation-revoked",
        {"proposal_id": proposal_id, "voter": voter, "target": target},
        tx_hash,
    )


@transition
def dictator_override(
    state: ChainState,
    actor: str,
    proposal_id: str,
    action: OverrideAction,
    slash_deposit: bool = False,
    tx_hash: str | None = None,
) -> None:
    """Cancel or fast-track a proposal on behalf of a privileged role."""
    ensure_not_frozen(state, GOVERNANCE_CONTRACT)
    if not state.has_role(actor, *state.policy.override_roles):
        msg = f"{actor} holds no override role"
        raise AuthorizationError(msg)
    proposal = _open_proposal(state, proposal_id)

    if action is OverrideAction.CANCEL:
        _move_status(proposal, ProposalStatus.CANCELLED)
        slashed = False
        lock_id = proposal.deposit_lock_id
        if slash_deposit and lock_id is not None:
            lock = state.find_lock(lock_id)
            if lock is not None and lock.active_at(state.height):
                slash_lock.in_place(
                    state,
                    proposal.proposer,
                    lock_id,
                    reason=f"proposal {proposal_id} cancelled",
                    tx_hash=tx_hash,
                )
                slashed = True
        state.emit(
            "proposal.cancelled",
            {
                "proposal_id": proposal_id,
                "actor": actor,
                "deposit_slashed": slashed,
            },
            tx_hash,
        )
        return

    previous = proposal.voting_deadline
    proposal.voting_deadline = min(
        previous, state.height + state.policy.fast_track_window
    )
    state.emit(
        "proposal.fast-tracked",
        {
            "proposal_id": proposal_id,
            "actor": actor,
            "previous_deadline": previous,
            "deadline": proposal.voting_deadline,
        },
        tx_hash,
    )


# -- resolution -----------------------------------------------------------


def _enact_action(state: ChainState, proposal: Proposal) -> None:
    """Apply an approved parameter change or freeze action."""
    action = proposal.action
    if isinstance(action, ParameterChange):
        state.policy = updated_policy(state.policy, action.key, action.value)
    elif isinstance(action, FreezeAction):
        enact_freeze(state, proposal.id, action.target, action.freeze)
    _move_status(proposal, ProposalStatus.ENACTED)
    state.emit(
        "proposal.enacted",
        {"proposal_id": proposal.id, "action": action.type},
    )


def resolve_proposal(
    state: ChainState,
    proposal: Proposal,
    result: TallyResult,
    tx_hash: str | None = None,
) -> None:
    """Move an open proposal to approved or rejected (in place)."""
    proposal.result = result
    _move_status(proposal, result.outcome)
    state.emit(
        f"proposal.{result.outcome.value}",
        {
            "proposal_id": proposal.id,
            "yes_weight": str(result.yes_weight),
            "no_weight": str(result.no_weight),
            "turnout": str(result.turnout_fraction),
            "required_share": str(result.required_share),
        },
        tx_hash,
    )
    logger.info(
        "proposal resolved",
        chain_id=state.chain_id,
        proposal_id=proposal.id,
        outcome=result.outcome.value,
    )
    if result.approved and not isinstance(proposal.action, ProtocolUpgrade):
        _enact_action(state, proposal)


def _defer_due_proposals(state: ChainState) -> None:
    due = []
    for proposal_id in sorted(state.proposals):
        proposal = state.proposals[proposal_id]
        action = proposal.action
        if (
            proposal.status is ProposalStatus.OPEN
            and proposal.scheme.kind is not SchemeKind.CROSS_CHAIN_TOKEN
            and state.height >= proposal.voting_deadline
        ) or (
            proposal.status is ProposalStatus.APPROVED
            and isinstance(action, ProtocolUpgrade)
            and state.height >= action.activation_height
        ):
            due.append(proposal_id)
    if not due:
        return
    state.emit("governance.deferred", {"proposal_ids": due})
    logger.info(
        "governance frozen, deadlines deferred",
        chain_id=state.chain_id,
        height=state.height,
        proposal_ids=due,
    )


def close_due_proposals(state: ChainState) -> None:
    """End-of-block governance hook (in place).

    Captures due carbonvote snapshots, tallies proposals whose deadline is
    reached and activates approved upgrades at their activation height.
    While the governance contract is frozen nothing is tallied or enacted;
    due proposals stay open and a ``governance.deferred`` event lists them.
    """
    if state.is_frozen(GOVERNANCE_CONTRACT):
        _defer_due_proposals(state)
        return
    for proposal_id in sorted(state.proposals):
        proposal = state.proposals[proposal_id]
        kind = proposal.scheme.kind
        if proposal.status is ProposalStatus.OPEN:
            if (
                kind is SchemeKind.CARBONVOTE
                and proposal.snapshot is None
                and state.height >= snapshot_due(proposal)
            ):
                capture_snapshot(state, proposal)
            if (
                kind is not SchemeKind.CROSS_CHAIN_TOKEN
                and state.height >= proposal.voting_deadline
            ):
                result = compute_tally(state, proposal)
                resolve_proposal(state, proposal, result)
        action = proposal.action
        if (
            proposal.status is ProposalStatus.APPROVED
            and isinstance(action, ProtocolUpgrade)
            and state.height >= action.activation_height
        ):
            _move_status(proposal, ProposalStatus.ENACTED)
            state.emit(
                "upgrade.enacted",
                {
                    "proposal_id": proposal_id,
                    "new_version": action.new_version,
                    "compatibility": action.compatibility.value,
                    "activation_height": action.activation_height,
                },
            )


@transition
def accept_cross_chain_result(
    state: ChainState,
    record: CrossChainResult,
    tx_hash: str | None = None,
) -> None:
    """Resolve a cross-chain token vote from its signed tally record.

    Raises:
        CrossChainError: wrong chain, unknown tally key or bad signature.
        ContractFrozenError: the governance contract is frozen.
    """
    ensure_not_frozen(state, GOVERNANCE_CONTRACT)
    proposal = _open_proposal(state, record.proposal_id)
    scheme = proposal.scheme
    if scheme.kind is not SchemeKind.CROSS_CHAIN_TOKEN:
        msg = f"'{proposal.id}' is not a cross-chain vote"
        raise CrossChainError(msg)
    if record.home_chain_id != state.chain_id:
        msg = f"result addressed to {record.home_chain_id}"
        raise CrossChainError(msg)
    if record.aux_chain_id != scheme.aux_chain_id:
        msg = f"result from {record.aux_chain_id}, not {scheme.aux_chain_id}"
        raise CrossChainError(msg)
    expected_key = state.policy.cross_chain_tally_keys.get(record.aux_chain_id)
    if expected_key is None or expected_key != record.tally_public_key:
        msg = f"untrusted tally key for {record.aux_chain_id}"
        raise CrossChainError(msg)
    if record.signature is None or not verify_hex(
        record.tally_public_key, record.signing_bytes(), record.signature
    ):
        msg = "cross-chain result signature does not verify"
        raise CrossChainError(msg)

    result = decide(
        proposal,
        record.yes_weight,
        record.no_weight,
        record.turnout_fraction,
    )
    state.emit(
        "crossvote.resolved",
        {
            "proposal_id": proposal.id,
            "aux_chain_id": record.aux_chain_id,
            "approved": result.approved,
        },
        tx_hash,
    )
    resolve_proposal(state, proposal, result, tx_hash)
