"""Ballot weighting per voting scheme and the proposal tally."""

from __future__ import annotations

from collections.abc import Mapping
from fractions import Fraction

from govchain.exceptions import ProposalError
from govchain.proposals import Choice
from govchain.proposals import Proposal
from govchain.proposals import SchemeKind
from govchain.proposals import TallyResult
from govchain.proposals import ThresholdKind
from govchain.state import ChainState
from govchain.transactions import LockPurpose


def lock_fraction(state: ChainState, address: str, cap: int) -> Fraction:
    """Remaining vote-weight lock period of ``address`` as a share of cap.

    The longest remaining lock counts; no lock gives zero.
    """
    best = Fraction(0)
    for lock in state.active_locks(address, LockPurpose.VOTE_WEIGHT):
        remaining = lock.unlock_height - state.height
        best = max(best, min(Fraction(1), Fraction(remaining, cap)))
    return best


def capture_snapshot(state: ChainState, proposal: Proposal) -> None:
    """Record carbonvote weights for ``proposal`` at the current height."""
    scheme = proposal.scheme
    if scheme.issued_weights is not None:
        proposal.snapshot = dict(scheme.issued_weights)
    else:
        proposal.snapshot = {
            address: account.balance
            for address, account in sorted(state.accounts.items())
            if account.balance > 0
        }
    if scheme.lock_weight_factor:
        proposal.lock_fractions = {
            address: lock_fraction(state, address, scheme.lock_period_cap)
            for address in proposal.snapshot
        }


def snapshot_due(proposal: Proposal) -> int:
    scheme = proposal.scheme
    if scheme.snapshot_height is None:
        return proposal.submitted_height
    return max(scheme.snapshot_height, proposal.submitted_height)


def carbonvote_weight(proposal: Proposal, address: str) -> Fraction:
    """Snapshot balance, scaled by ``1 + factor * lock fraction``."""
    if proposal.snapshot is None:
        return Fraction(0)
    weight = Fraction(proposal.snapshot.get(address, 0))
    factor = proposal.scheme.lock_weight_factor
    if factor and proposal.lock_fractions:
        share = proposal.lock_fractions.get(address, Fraction(0))
        weight *= 1 + factor * share
    return weight


def resolve_delegations(
    direct: Mapping[str, Choice], delegations: Mapping[str, str]
) -> dict[str, str | None]:
    """Follow each delegation edge to a direct voter.

    Returns, for every delegating address, the direct voter its weight
    lands on, or ``None`` when the path ends in a cycle or at an address
    that neither voted nor delegated.
    """
    resolved: dict[str, str | None] = {}
    for start in sorted(delegations):
        path: list[str] = []
        seen: set[str] = set()
        current = start
        terminal: str | None = None
        while True:
            if current in resolved:
                terminal = resolved[current]
                break
            if current in direct:
                terminal = current
                break
            if current in seen or current not in delegations:
                terminal = None
                break
            seen.add(current)
            path.append(current)
            current = delegations[current]
        for address in path:
            resolved[address] = terminal
    return resolved


def _electorate(state: ChainState, voters: set[str]) -> set[str]:
    if state.policy.permissioned:
        return set(state.membership.members) | voters
    holders = {a for a, acc in state.accounts.items() if acc.balance > 0}
    return holders | voters


def _weigh(
    state: ChainState, proposal: Proposal
) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """(yes, no, participating, electorate) weights for one proposal."""
    ballots = state.ballots.get(proposal.id, {})
    direct = {voter: ballot.choice for voter, ballot in ballots.items()}
    weights = {Choice.YES: Fraction(0), Choice.NO: Fraction(0)}
    kind = proposal.scheme.kind

    if kind is SchemeKind.CARBONVOTE:
        for voter, choice in direct.items():
            weights[choice] += carbonvote_weight(proposal, voter)
        electorate = sum(
            (carbonvote_weight(proposal, a) for a in proposal.snapshot or {}),
            Fraction(0),
        )
        participating = weights[Choice.YES] + weights[Choice.NO]
        return (
            weights[Choice.YES],
            weights[Choice.NO],
            participating,
            electorate,
        )

    if kind is SchemeKind.LIQUID_DEMOCRACY:
        delegations = state.delegations.get(proposal.id, {})
        for voter, choice in direct.items():
            weights[choice] += state.balance_of(voter)
        resolved = resolve_delegations(direct, delegations)
        for delegator, terminal in resolved.items():
            if terminal is not None:
                weights[direct[terminal]] += state.balance_of(delegator)
        participating = weights[Choice.YES] + weights[Choice.NO]
        return (
            weights[Choice.YES],
            weights[Choice.NO],
            participating,
            Fraction(state.total_balance()),
        )

    for voter, ballot in ballots.items():
        if kind is SchemeKind.QUADRATIC:
            weights[ballot.choice] += ballot.votes_cast
        else:
            weights[ballot.choice] += 1
    electorate = len(_electorate(state, set(ballots)))
    return (
        weights[Choice.YES],
        weights[Choice.NO],
        Fraction(len(ballots)),
        Fraction(electorate),
    )


def decide(
    proposal: Proposal,
    yes: Fraction,
    no: Fraction,
    turnout: Fraction,
) -> TallyResult:
    threshold = proposal.threshold
    required = threshold.required_share(turnout)
    cast = yes + no
    if cast == 0:
        approved = False
    elif threshold.kind is ThresholdKind.UNANIMOUS:
        approved = no == 0 and turnout == 1
    else:
        approved = yes / cast > required
    return TallyResult(
        yes_weight=yes,
        no_weight=no,
        turnout_fraction=turnout,
        required_share=required,
        approved=approved,
    )


def compute_tally(state: ChainState, proposal: Proposal) -> TallyResult:
    """Tally without the deadline check."""
    yes, no, participating, electorate = _weigh(state, proposal)
    turnout = participating / electorate if electorate else Fraction(0)
    return decide(proposal, yes, no, min(turnout, Fraction(1)))


def tally(state: ChainState, proposal_id: str) -> TallyResult:
    """Outcome of a proposal whose voting deadline has been reached.

    Raises:
        ProposalError: unknown proposal, deadline not reached, or a
            cross-chain vote whose result has not been imported.
    """
    proposal = state.proposals.get(proposal_id)
    if proposal is None:
        msg = f"unknown proposal '{proposal_id}'"
        raise ProposalError(msg)
    if state.height < proposal.voting_deadline:
        msg = (
            f"proposal '{proposal_id}' voting runs until height "
            f"{proposal.voting_deadline} (now {state.height})"
        )
        raise ProposalError(msg)
    if proposal.scheme.kind is SchemeKind.CROSS_CHAIN_TOKEN:
        if proposal.result is None:
            msg = f"proposal '{proposal_id}' awaits its cross-chain result"
            raise ProposalError(msg)
        return proposal.result
    return compute_tally(state, proposal)


