"""Tests for govchain.voting module."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from govchain.exceptions import ProposalError
from govchain.governance import cast_vote
from govchain.governance import delegate
from govchain.governance import submit_proposal
from govchain.policy import DecentralisationMode
from govchain.proposals import Choice
from govchain.proposals import Proposal
from govchain.proposals import SchemeKind
from govchain.proposals import SignalAction
from govchain.proposals import ThresholdKind
from govchain.proposals import ThresholdPolicy
from govchain.proposals import VotingScheme
from govchain.tokens import lock_tokens
from govchain.transactions import LockPurpose
from govchain.voting import capture_snapshot
from govchain.voting import compute_tally
from govchain.voting import decide
from govchain.voting import lock_fraction
from govchain.voting import resolve_delegations
from govchain.voting import snapshot_due
from govchain.voting import tally

SIGNAL = SignalAction(reference="poll")
ZERO = "00" * 20


def _proposal(threshold=None, scheme=None):
    return Proposal(
        id="p",
        proposer=ZERO,
        action=SIGNAL,
        scheme=scheme or VotingScheme(),
        threshold=threshold or ThresholdPolicy(),
        submitted_height=4,
        voting_deadline=10,
    )


class TestDelegations:
    """Test delegation resolution."""

    def test_chain_reaches_direct_voter(self):
        """Test a chain of delegations lands on its direct voter."""
        resolved = resolve_delegations(
            {"d": Choice.YES}, {"a": "b", "b": "c", "c": "d"}
        )
        assert resolved == {"a": "d", "b": "d", "c": "d"}

    def test_cycle_is_dropped(self):
        """Test weight on a delegation cycle is lost."""
        resolved = resolve_delegations({}, {"a": "b", "b": "a"})
        assert resolved == {"a": None, "b": None}

    def test_dead_end_is_dropped(self):
        """Test a path to a non-voter is lost."""
        assert resolve_delegations({}, {"a": "b"}) == {"a": None}

    @given(
        st.dictionaries(
            st.sampled_from("abcdefgh"),
            st.sampled_from("abcdefgh"),
            max_size=8,
        ),
        st.sets(st.sampled_from("abcdefgh")),
    )
    def test_terminals_are_direct_voters(self, edges, voters):
        """Test every resolved terminal is a direct voter."""
        edges = {k: v for k, v in edges.items() if k != v}
        direct = dict.fromkeys(voters - set(edges), Choice.YES)
        resolved = resolve_delegations(direct, edges)
        assert set(resolved) <= set(edges)
        assert all(t is None or t in direct for t in resolved.values())


def _decide(proposal, yes, no, turnout):
    return decide(proposal, Fraction(yes), Fraction(no), Fraction(turnout))


class TestDecide:
    """Test threshold decisions."""

    def test_fixed_is_strict(self):
        """Test a fixed half requires strictly more than half."""
        proposal = _proposal()
        assert not _decide(proposal, 1, 1, 1).approved
        assert _decide(proposal, 2, 1, 1).approved

    def test_no_ballots(self):
        """Test an empty tally never approves."""
        assert not _decide(_proposal(), 0, 0, 0).approved

    @pytest.mark.parametrize(
        ("turnout", "required"),
        [(Fraction(1, 5), Fraction(9, 10)), (Fraction(1), Fraction(1, 2))],
    )
    def test_adaptive_turnout(self, turnout, required):
        """Test low turnout demands a larger majority."""
        proposal = _proposal(
            ThresholdPolicy(kind=ThresholdKind.ADAPTIVE_TURNOUT)
        )
        result = _decide(proposal, 4, 1, turnout)
        assert result.required_share == required
        assert result.approved is (Fraction(4, 5) > required)

    def test_unanimous(self):
        """Test unanimity needs full turnout and no dissent."""
        proposal = _proposal(ThresholdPolicy(kind=ThresholdKind.UNANIMOUS))
        assert _decide(proposal, 3, 0, 1).approved
        assert not _decide(proposal, 3, 0, Fraction(3, 4)).approved
        assert not _decide(proposal, 3, 1, 1).approved


class TestTally:
    """Test per-scheme weighting."""

    def test_one_address_one_vote(self, make_state, addr):
        """Test the electorate is every holder of a positive balance."""
        state = make_state(balances={"dave": 0})
        state = submit_proposal(state, addr["alice"], "p", SIGNAL, 3)
        state = cast_vote(state, addr["alice"], "p", Choice.YES)
        state = cast_vote(state, addr["bob"], "p", Choice.NO)
        state = cast_vote(state, addr["carol"], "p", Choice.YES)
        result = compute_tally(state, state.proposals["p"])
        assert (result.yes_weight, result.no_weight) == (2, 1)
        assert result.turnout_fraction == Fraction(3, 6)
        assert result.approved

    def test_permissioned_electorate(self, make_state, policy, addr):
        """Test the permissioned electorate is the member set."""
        permissioned = policy.model_copy(
            update={"mode": DecentralisationMode.PERMISSIONED}
        )
        state = make_state(
            chain_policy=permissioned, members=("alice", "bob")
        )
        state = submit_proposal(state, addr["alice"], "p", SIGNAL, 3)
        state = cast_vote(state, addr["alice"], "p", Choice.YES)
        result = compute_tally(state, state.proposals["p"])
        assert result.turnout_fraction == Fraction(1, 2)

    def test_liquid_democracy(self, make_state, addr):
        """Test delegated balances follow their direct voter's choice."""
        state = make_state(
            balances={"alice": 10, "bob": 20, "carol": 30, "dave": 40}
        )
        scheme = VotingScheme(kind=SchemeKind.LIQUID_DEMOCRACY)
        state = submit_proposal(state, addr["alice"], "l", SIGNAL, 3, scheme)
        state = cast_vote(state, addr["alice"], "l", Choice.YES)
        state = cast_vote(state, addr["dave"], "l", Choice.NO)
        state = delegate(state, addr["bob"], "l", addr["carol"])
        state = delegate(state, addr["carol"], "l", addr["alice"])
        result = compute_tally(state, state.proposals["l"])
        assert result.yes_weight == 60
        assert result.no_weight == 40

    def test_carbonvote_snapshot_at_submission(self, make_state, addr):
        """Test carbonvote weights come from the submission snapshot."""
        state = make_state(balances={"alice": 70, "bob": 30})
        scheme = VotingScheme(kind=SchemeKind.CARBONVOTE)
        state = submit_proposal(state, addr["alice"], "c", SIGNAL, 3, scheme)
        assert state.proposals["c"].snapshot[addr["alice"]] == 70
        state.accounts[addr["bob"]].balance += 1000
        state = cast_vote(state, addr["alice"], "c", Choice.YES)
        state = cast_vote(state, addr["bob"], "c", Choice.NO)
        result = compute_tally(state, state.proposals["c"])
        assert (result.yes_weight, result.no_weight) == (70, 30)

    def test_lock_weighting(self, make_state, addr):
        """Test vote-weight locks scale carbonvote weight."""
        state = make_state(balances={"alice": 100})
        state = lock_tokens(
            state, addr["alice"], 10, 50, LockPurpose.VOTE_WEIGHT
        )
        assert lock_fraction(state, addr["alice"], 100) == Fraction(1, 2)
        assert lock_fraction(state, addr["alice"], 25) == 1
        assert lock_fraction(state, addr["bob"], 100) == 0
        scheme = VotingScheme(
            kind=SchemeKind.CARBONVOTE,
            lock_weight_factor=Fraction(1),
            lock_period_cap=100,
        )
        proposal = _proposal(scheme=scheme)
        capture_snapshot(state, proposal)
        assert proposal.lock_fractions[addr["alice"]] == Fraction(1, 2)

    def test_snapshot_due(self):
        """Test a snapshot height never precedes submission."""
        assert snapshot_due(_proposal()) == 4
        early = VotingScheme(kind=SchemeKind.CARBONVOTE, snapshot_height=1)
        late = VotingScheme(kind=SchemeKind.CARBONVOTE, snapshot_height=8)
        assert snapshot_due(_proposal(scheme=early)) == 4
        assert snapshot_due(_proposal(scheme=late)) == 8

    def test_tally_before_deadline(self, make_state, addr):
        """Test tallying waits for the deadline."""
        state = submit_proposal(make_state(), addr["alice"], "p", SIGNAL, 3)
        with pytest.raises(ProposalError, match="runs until"):
            tally(state, "p")
        with pytest.raises(ProposalError, match="unknown"):
            tally(state, "missing")
