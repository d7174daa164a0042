"""Cross-chain token voting over the simulated network.

The home chain's proposal is voted on an auxiliary chain holding mirror
tokens; the auxiliary tally returns as a signed result record carried
by a transaction on the home chain.
"""

from __future__ import annotations

import dataclasses
from enum import StrEnum

import structlog

from govchain.crypto import KeyPair
from govchain.crypto import sign
from govchain.exceptions import CrossChainError
from govchain.network import SimNetwork
from govchain.node import CrossChainMessage
from govchain.node import NodeInstance
from govchain.proposals import CrossChainResult
from govchain.proposals import Proposal
from govchain.proposals import ProposalStatus
from govchain.proposals import SchemeKind
from govchain.proposals import SignalAction
from govchain.proposals import VotingScheme
from govchain.state import ChainState
from govchain.transactions import SubmitProposalPayload
from govchain.transactions import Transaction
from govchain.transactions import make_transaction

logger = structlog.get_logger()


def aux_proposal_id(home_chain_id: str, proposal_id: str) -> str:
    return f"{home_chain_id}:{proposal_id}"


def issue_mirror_tokens(snapshot_state: ChainState) -> dict[str, int]:
    """One voting token per home token held in ``snapshot_state``."""
    return {
        address: account.balance
        for address, account in sorted(snapshot_state.accounts.items())
        if account.balance > 0
    }


def mirror_state(home: NodeInstance, proposal: Proposal) -> ChainState:
    """Home state at the proposal's snapshot height on the canonical chain."""
    height = proposal.submitted_height
    if proposal.scheme.snapshot_height is not None:
        height = max(height, proposal.scheme.snapshot_height)
    block_hash = home.block_at(min(height, home.tip_height()))
    if block_hash is None:
        msg = f"no canonical block at height {height} on {home.chain_id}"
        raise CrossChainError(msg)
    return home.states[block_hash]


def open_aux_vote(
    network: SimNetwork,
    aux_node_id: str,
    operator: KeyPair,
    home_chain_id: str,
    proposal: Proposal,
    weights: dict[str, int],
) -> Transaction:
    """Submit the mirror carbonvote for ``proposal`` on the auxiliary chain.

    Raises:
        CrossChainError: the proposal is not a cross-chain token vote,
            the auxiliary chain is frozen, or the submission is refused.
    """
    aux = network.nodes[aux_node_id]
    if proposal.scheme.kind is not SchemeKind.CROSS_CHAIN_TOKEN:
        msg = f"'{proposal.id}' is not a cross-chain vote"
        raise CrossChainError(msg)
    if proposal.scheme.aux_chain_id != aux.chain_id:
        msg = f"'{proposal.id}' is voted on {proposal.scheme.aux_chain_id}"
        raise CrossChainError(msg)
    if network.is_frozen(aux.chain_id):
        msg = f"auxiliary chain {aux.chain_id} is frozen"
        raise CrossChainError(msg)

    reference = aux_proposal_id(home_chain_id, proposal.id)
    payload = SubmitProposalPayload(
        proposal_id=reference,
        description=f"mirror vote for {reference}",
        action=SignalAction(reference=reference),
        scheme=VotingScheme(
            kind=SchemeKind.CARBONVOTE, issued_weights=weights
        ),
        threshold=proposal.threshold,
        voting_period=max(
            1, proposal.voting_deadline - proposal.submitted_height
        ),
    )
    tx = make_transaction(
        operator,
        aux.chain_id,
        payload,
        aux.next_nonce(operator.address),
    )
    verdict = network.submit(aux_node_id, tx)
    if not verdict.accepted:
        msg = f"auxiliary proposal refused: {verdict.reason}"
        raise CrossChainError(msg)
    network.record(
        "crossvote.opened",
        {
            "home_chain_id": home_chain_id,
            "proposal_id": proposal.id,
            "aux_chain_id": aux.chain_id,
            "voters": len(weights),
        },
    )
    return tx


def seal_result(
    aux_state: ChainState,
    tally_key: KeyPair,
    home_chain_id: str,
    proposal_id: str,
) -> CrossChainResult:
    """Signed record of a resolved auxiliary vote.

    Raises:
        CrossChainError: the vote is unknown or unresolved, or
            ``tally_key`` is not the chain's designated tally key.
    """
    designated = aux_state.policy.tally_public_key
    if designated is not None and designated != tally_key.public_hex:
        msg = f"{aux_state.chain_id} does not tally with this key"
        raise CrossChainError(msg)
    reference = aux_proposal_id(home_chain_id, proposal_id)
    aux_proposal = aux_state.proposals.get(reference)
    if aux_proposal is None or aux_proposal.result is None:
        msg = f"auxiliary vote '{reference}' is not resolved"
        raise CrossChainError(msg)
    result = aux_proposal.result
    record = CrossChainResult(
        home_chain_id=home_chain_id,
        proposal_id=proposal_id,
        aux_chain_id=aux_state.chain_id,
        yes_weight=result.yes_weight,
        no_weight=result.no_weight,
        turnout_fraction=result.turnout_fraction,
        approved=result.approved,
        tally_public_key=tally_key.public_hex,
    )
    signature = sign(tally_key, record.signing_bytes()).hex()
    return record.model_copy(update={"signature": signature})


def import_result(
    network: SimNetwork, aux_node_id: str, record: CrossChainResult
) -> bool:
    """Send a sealed result to the home chain's relaying node."""
    if network.is_frozen(record.aux_chain_id) or network.is_frozen(
        record.home_chain_id
    ):
        return False
    schedule = network.broadcast(aux_node_id, CrossChainMessage(record))
    return bool(schedule)


class VoteStatus(StrEnum):
    OPEN = "open"
    SENT = "sent"
    ABORTED = "aborted"


@dataclasses.dataclass
class CrossChainVote:
    """Progress of one cross-chain vote, polled once per tick."""

    home_chain_id: str
    proposal_id: str
    aux_node_id: str
    tally_key: KeyPair
    status: VoteStatus = VoteStatus.OPEN

    def poll(self, network: SimNetwork) -> VoteStatus:
        if self.status is not VoteStatus.OPEN:
            return self.status
        aux = network.nodes[self.aux_node_id]
        if network.is_frozen(aux.chain_id):
            self.status = VoteStatus.ABORTED
            network.record(
                "crossvote.aborted",
                {
                    "home_chain_id": self.home_chain_id,
                    "proposal_id": self.proposal_id,
                    "aux_chain_id": aux.chain_id,
                    "reason": "frozen",
                },
            )
            logger.warning(
                "cross-chain vote aborted",
                proposal_id=self.proposal_id,
                aux_chain_id=aux.chain_id,
            )
            return self.status
        reference = aux_proposal_id(self.home_chain_id, self.proposal_id)
        aux_proposal = aux.canonical_state().proposals.get(reference)
        if aux_proposal is None or aux_proposal.result is None:
            return self.status
        record = seal_result(
            aux.canonical_state(),
            self.tally_key,
            self.home_chain_id,
            self.proposal_id,
        )
        if import_result(network, self.aux_node_id, record):
            self.status = VoteStatus.SENT
        return self.status


def run_cross_chain_vote(
    network: SimNetwork,
    vote: CrossChainVote,
    operator: KeyPair,
    max_ticks: int = 100,
) -> ProposalStatus:
    """Run a cross-chain vote to completion on ``network``.

    Ballots are expected to reach the auxiliary chain on their own.
    Returns the home proposal's status once resolved, after an abort,
    or when ``max_ticks`` run out.
    """
    home = network.nodes[network.home_nodes[vote.home_chain_id]]
    proposal = home.canonical_state().proposals.get(vote.proposal_id)
    if proposal is None:
        msg = f"unknown proposal '{vote.proposal_id}'"
        raise CrossChainError(msg)
    weights = issue_mirror_tokens(mirror_state(home, proposal))
    open_aux_vote(
        network,
        vote.aux_node_id,
        operator,
        vote.home_chain_id,
        proposal,
        weights,
    )
    for _ in range(max_ticks):
        network.advance()
        if vote.poll(network) is VoteStatus.ABORTED:
            break
        status = home.canonical_state().proposals[vote.proposal_id].status
        if status is not ProposalStatus.OPEN:
            return status
    return home.canonical_state().proposals[vote.proposal_id].status
