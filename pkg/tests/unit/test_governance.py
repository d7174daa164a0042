"""Tests for govchain.governance module."""

from __future__ import annotations

from fractions import Fraction

import pytest

from govchain.crypto import derive_keypair
from govchain.crypto import sign
from govchain.exceptions import AuthorizationError
from govchain.exceptions import ContractFrozenError
from govchain.exceptions import CrossChainError
from govchain.exceptions import InsufficientBalanceError
from govchain.exceptions import MembershipError
from govchain.exceptions import ProposalError
from govchain.exceptions import VoteRejectedError
from govchain.governance import accept_cross_chain_result
from govchain.governance import cast_vote
from govchain.governance import close_due_proposals
from govchain.governance import delegate
from govchain.governance import dictator_override
from govchain.governance import grant_role
from govchain.governance import invite_digest
from govchain.governance import issue_invite
from govchain.governance import join
from govchain.governance import revoke_delegation
from govchain.governance import submit_proposal
from govchain.governance import updated_policy
from govchain.policy import DecentralisationMode
from govchain.proposals import Choice
from govchain.proposals import Compatibility
from govchain.proposals import CrossChainResult
from govchain.proposals import FreezeAction
from govchain.proposals import ParameterChange
from govchain.proposals import ProposalStatus
from govchain.proposals import ProtocolUpgrade
from govchain.proposals import SchemeKind
from govchain.proposals import SignalAction
from govchain.proposals import VotingScheme
from govchain.registry import GOVERNANCE_CONTRACT
from govchain.registry import freeze_contract
from govchain.registry import unfreeze_contract
from govchain.state import RegistryName
from govchain.transactions import FilterKind
from govchain.transactions import OverrideAction
from govchain.transactions import RoleName

SIGNAL = SignalAction(reference="poll")


@pytest.fixture
def permissioned(policy):
    return policy.model_copy(
        update={"mode": DecentralisationMode.PERMISSIONED}
    )


def _at(state, height):
    moved = state.model_copy(deep=True)
    moved.height = height
    return moved


def _freeze_governance(state, freezer):
    """Make ``freezer`` eligible and let it freeze the governance contract."""
    eligible = state.model_copy(deep=True)
    eligible.policy = eligible.policy.model_copy(
        update={"freezer_eligible": [freezer]}
    )
    return freeze_contract(eligible, freezer, GOVERNANCE_CONTRACT)


class TestMembership:
    """Test joining and invitations."""

    def test_permissionless_join(self, make_state, addr):
        """Test anyone may join a permissionless chain."""
        state = make_state(members=("alice",))
        joined = join(state, addr["bob"])
        assert joined.is_member(addr["bob"])
        assert not state.is_member(addr["bob"])
        assert joined.events[-1].topic == "member.joined"

    def test_already_member(self, make_state, addr):
        """Test a member cannot join twice."""
        with pytest.raises(MembershipError, match="already"):
            join(make_state(), addr["alice"])

    def test_invite_consumed_once(self, make_state, permissioned, addr):
        """Test a permissioned invitation admits exactly one address."""
        state = make_state(
            chain_policy=permissioned,
            members=("alice",),
            invites=(invite_digest("welcome"),),
        )
        state = join(state, addr["bob"], "welcome", "Bob Ltd")
        assert state.membership.members[addr["bob"]] == "Bob Ltd"
        assert state.membership.invites[invite_digest("welcome")] is True
        with pytest.raises(MembershipError, match="already used"):
            join(state, addr["carol"], "welcome", "Carol Ltd")

    @pytest.mark.parametrize(
        ("code", "identity", "match"),
        [
            (None, "X", "invitation code"),
            ("welcome", None, "identity"),
            ("wrong", "X", "unknown invitation"),
        ],
    )
    def test_permissioned_join_rejected(
        self, make_state, permissioned, addr, code, identity, match
    ):
        """Test a permissioned join needs a valid code and identity."""
        state = make_state(
            chain_policy=permissioned,
            members=("alice",),
            invites=(invite_digest("welcome"),),
        )
        with pytest.raises(MembershipError, match=match):
            join(state, addr["bob"], code, identity)

    def test_issue_invite_requires_role(self, make_state, addr):
        """Test only deployers and administrators issue invitations."""
        state = make_state(roles={"alice": (RoleName.ADMINISTRATOR,)})
        issued = issue_invite(state, addr["alice"], invite_digest("x"))
        assert issued.membership.invites[invite_digest("x")] is False
        with pytest.raises(AuthorizationError):
            issue_invite(state, addr["bob"], invite_digest("y"))
        with pytest.raises(MembershipError, match="already issued"):
            issue_invite(issued, addr["alice"], invite_digest("x"))

    def test_deployer_grant_admits(self, make_state, addr):
        """Test a deployer's role grant also admits a non-member."""
        state = make_state(
            members=("alice",), roles={"alice": (RoleName.DEPLOYER,)}
        )
        granted = grant_role(
            state, addr["alice"], addr["bob"], RoleName.ADMINISTRATOR
        )
        assert granted.has_role(addr["bob"], RoleName.ADMINISTRATOR)
        assert granted.is_member(addr["bob"])
        with pytest.raises(AuthorizationError):
            grant_role(state, addr["bob"], addr["bob"], RoleName.DEPLOYER)


class TestParameters:
    """Test governed parameter changes."""

    def test_block_reward(self, policy):
        """Test an incentive parameter lands in the incentive policy."""
        assert updated_policy(policy, "block_reward", 3).incentive == (
            policy.incentive.model_copy(update={"block_reward": 3})
        )

    def test_filter_rule_parameter(self, policy):
        """Test payload limits become filter rules."""
        updated = updated_policy(policy, "max_payload_bytes", 64)
        assert [rule.kind for rule in updated.filter_rules] == [
            FilterKind.MAX_PAYLOAD_SIZE
        ]
        cleared = updated_policy(updated, "scam_list_filter", False)
        assert len(cleared.filter_rules) == 1

    def test_unknown_key(self, policy):
        """Test only whitelisted keys are governed."""
        with pytest.raises(ProposalError, match="not governed"):
            updated_policy(policy, "seed", 1)

    def test_invalid_value(self, policy):
        """Test values the policy rejects surface as proposal errors."""
        with pytest.raises(ProposalError, match="block_reward"):
            updated_policy(policy, "block_reward", -1)


class TestSubmit:
    """Test proposal submission."""

    def test_opens_with_deadline(self, make_state, addr):
        """Test the deadline is the submission height plus the period."""
        state = _at(make_state(), 3)
        state = submit_proposal(state, addr["alice"], "p", SIGNAL, 5)
        proposal = state.proposals["p"]
        assert proposal.voting_deadline == 8
        assert proposal.status is ProposalStatus.OPEN
        assert state.events[-1].topic == "proposal.open"

    def test_activation_after_deadline(self, make_state, addr):
        """Test an upgrade may not activate before voting ends."""
        upgrade = ProtocolUpgrade(
            new_version=2,
            compatibility=Compatibility.SOFT_FORK,
            activation_height=5,
        )
        with pytest.raises(ProposalError, match="activation height"):
            submit_proposal(make_state(), addr["alice"], "p", upgrade, 5)

    def test_non_member(self, make_state, addr):
        """Test only members submit proposals."""
        state = make_state(members=("alice",))
        with pytest.raises(MembershipError):
            submit_proposal(state, addr["bob"], "p", SIGNAL, 5)

    def test_duplicate_id(self, make_state, addr):
        """Test proposal ids are unique."""
        state = submit_proposal(make_state(), addr["alice"], "p", SIGNAL, 5)
        with pytest.raises(ProposalError, match="already exists"):
            submit_proposal(state, addr["bob"], "p", SIGNAL, 5)

    def test_deposit_locked(self, make_state, policy, addr):
        """Test a required deposit becomes a proposal-deposit lock."""
        chain_policy = policy.model_copy(
            update={"require_deposit": True, "proposal_deposit": 40}
        )
        state = make_state(chain_policy=chain_policy, balances={"bob": 30})
        state = submit_proposal(state, addr["alice"], "p", SIGNAL, 5)
        assert state.spendable(addr["alice"]) == 960
        assert state.proposals["p"].deposit_lock_id is not None
        with pytest.raises(InsufficientBalanceError):
            submit_proposal(state, addr["bob"], "q", SIGNAL, 5)

    def test_quadratic_needs_cost_account(self, make_state, addr):
        """Test quadratic voting needs somewhere to pay costs."""
        scheme = VotingScheme(kind=SchemeKind.QUADRATIC)
        with pytest.raises(ProposalError, match="cost account"):
            submit_proposal(
                make_state(), addr["alice"], "p", SIGNAL, 5, scheme
            )

    def test_frozen_governance(self, make_state, addr):
        """Test a frozen governance contract refuses proposals."""
        state = _freeze_governance(make_state(), addr["v1"])
        with pytest.raises(ContractFrozenError):
            submit_proposal(state, addr["alice"], "p", SIGNAL, 5)


class TestVoting:
    """Test ballots and delegations."""

    @pytest.fixture
    def quadratic(self, make_state, addr):
        scheme = VotingScheme(
            kind=SchemeKind.QUADRATIC, cost_account=addr["dave"]
        )
        return submit_proposal(
            make_state(), addr["alice"], "q", SIGNAL, 5, scheme
        )

    def test_quadratic_cost(self, quadratic, addr):
        """Test n votes cost n squared tokens."""
        state = cast_vote(quadratic, addr["bob"], "q", Choice.YES, 3)
        assert state.balance_of(addr["bob"]) == 991
        assert state.balance_of(addr["dave"]) == 1009
        assert state.ballots["q"][addr["bob"]].votes_cast == 3

    def test_quadratic_refund_on_replace(self, quadratic, addr):
        """Test a replaced ballot's cost is refunded first."""
        state = cast_vote(quadratic, addr["bob"], "q", Choice.YES, 3)
        state = cast_vote(state, addr["bob"], "q", Choice.NO, 2)
        assert state.balance_of(addr["bob"]) == 996
        assert state.balance_of(addr["dave"]) == 1004
        assert state.supply_reconciles()

    def test_quadratic_unaffordable(self, make_state, addr):
        """Test a voter cannot spend more than they hold."""
        scheme = VotingScheme(
            kind=SchemeKind.QUADRATIC, cost_account=addr["dave"]
        )
        state = submit_proposal(
            make_state(balances={"bob": 8}),
            addr["alice"],
            "q",
            SIGNAL,
            5,
            scheme,
        )
        with pytest.raises(VoteRejectedError, match="cost 9"):
            cast_vote(state, addr["bob"], "q", Choice.YES, 3)

    def test_simple_scheme_ignores_vote_count(self, make_state, addr):
        """Test non-quadratic ballots always cast one vote."""
        state = submit_proposal(make_state(), addr["alice"], "p", SIGNAL, 5)
        state = cast_vote(state, addr["bob"], "p", Choice.YES, 4)
        assert state.ballots["p"][addr["bob"]].votes_cast == 1

    def test_closed_voting(self, make_state, addr):
        """Test ballots after the deadline are rejected."""
        state = submit_proposal(make_state(), addr["alice"], "p", SIGNAL, 5)
        with pytest.raises(VoteRejectedError, match="closed"):
            cast_vote(_at(state, 5), addr["bob"], "p", Choice.YES)

    def test_permissioned_voter(self, make_state, permissioned, addr):
        """Test non-members cannot vote on a permissioned chain."""
        state = make_state(chain_policy=permissioned, members=("alice",))
        state = submit_proposal(state, addr["alice"], "p", SIGNAL, 5)
        with pytest.raises(VoteRejectedError, match="not a member"):
            cast_vote(state, addr["bob"], "p", Choice.YES)

    def test_delegation_lifecycle(self, make_state, addr):
        """Test delegations replace ballots and can be revoked."""
        scheme = VotingScheme(kind=SchemeKind.LIQUID_DEMOCRACY)
        state = submit_proposal(
            make_state(), addr["alice"], "l", SIGNAL, 5, scheme
        )
        state = cast_vote(state, addr["bob"], "l", Choice.YES)
        state = delegate(state, addr["bob"], "l", addr["carol"])
        assert addr["bob"] not in state.ballots["l"]
        assert state.delegations["l"] == {addr["bob"]: addr["carol"]}
        state = revoke_delegation(state, addr["bob"], "l")
        assert state.delegations["l"] == {}
        with pytest.raises(VoteRejectedError, match="no delegation"):
            revoke_delegation(state, addr["bob"], "l")

    def test_delegation_rules(self, make_state, addr):
        """Test self-delegation and non-liquid schemes are rejected."""
        scheme = VotingScheme(kind=SchemeKind.LIQUID_DEMOCRACY)
        state = submit_proposal(
            make_state(), addr["alice"], "l", SIGNAL, 5, scheme
        )
        state = submit_proposal(state, addr["alice"], "p", SIGNAL, 5)
        with pytest.raises(VoteRejectedError, match="oneself"):
            delegate(state, addr["bob"], "l", addr["bob"])
        with pytest.raises(VoteRejectedError, match="delegations"):
            delegate(state, addr["bob"], "p", addr["carol"])


class TestOverride:
    """Test the benevolent-dictator override."""

    @pytest.fixture
    def opened(self, make_state, policy, addr):
        chain_policy = policy.model_copy(
            update={
                "require_deposit": True,
                "proposal_deposit": 50,
                "fast_track_window": 3,
            }
        )
        state = make_state(
            chain_policy=chain_policy,
            roles={"dave": (RoleName.BENEVOLENT_DICTATOR,)},
        )
        return submit_proposal(state, addr["alice"], "p", SIGNAL, 20)

    def test_cancel_slashes_deposit(self, opened, addr):
        """Test a cancel may slash the proposer's deposit."""
        state = dictator_override(
            opened,
            addr["dave"],
            "p",
            OverrideAction.CANCEL,
            slash_deposit=True,
        )
        assert state.proposals["p"].status is ProposalStatus.CANCELLED
        assert state.balance_of(addr["alice"]) == 950
        assert state.supply.slashed == 50
        assert state.supply_reconciles()

    def test_fast_track(self, opened, addr):
        """Test fast-tracking only ever shortens the deadline."""
        state = dictator_override(
            _at(opened, 2), addr["dave"], "p", OverrideAction.FAST_TRACK
        )
        assert state.proposals["p"].voting_deadline == 5
        again = dictator_override(
            _at(state, 4), addr["dave"], "p", OverrideAction.FAST_TRACK
        )
        assert again.proposals["p"].voting_deadline == 5

    def test_requires_role(self, opened, addr):
        """Test ordinary accounts cannot override."""
        with pytest.raises(AuthorizationError):
            dictator_override(
                opened, addr["bob"], "p", OverrideAction.CANCEL
            )

    def test_closed_proposal(self, opened, addr):
        """Test a cancelled proposal cannot be overridden again."""
        state = dictator_override(
            opened, addr["dave"], "p", OverrideAction.CANCEL
        )
        with pytest.raises(ProposalError, match="cancelled"):
            dictator_override(
                state, addr["dave"], "p", OverrideAction.FAST_TRACK
            )

    @pytest.mark.parametrize(
        "action", [OverrideAction.CANCEL, OverrideAction.FAST_TRACK]
    )
    def test_frozen_governance(self, opened, addr, action):
        """Test a frozen governance contract refuses overrides."""
        state = _freeze_governance(opened, addr["v1"])
        with pytest.raises(ContractFrozenError):
            dictator_override(state, addr["dave"], "p", action)
        assert state.proposals["p"].status is ProposalStatus.OPEN


class TestResolution:
    """Test end-of-block tallying and enactment."""

    def test_parameter_change_enacted(self, make_state, addr):
        """Test an approved parameter change updates the policy."""
        action = ParameterChange(key="fast_track_window", value=2)
        state = submit_proposal(make_state(), addr["alice"], "p", action, 2)
        for name in ("alice", "bob", "carol", "dave", "v1"):
            state = cast_vote(state, addr[name], "p", Choice.YES)
        state = _at(state, 2)
        close_due_proposals(state)
        assert state.proposals["p"].status is ProposalStatus.ENACTED
        assert state.policy.fast_track_window == 2

    def test_rejected_without_votes(self, make_state, addr):
        """Test a proposal nobody voted on is rejected."""
        state = submit_proposal(make_state(), addr["alice"], "p", SIGNAL, 2)
        state = _at(state, 2)
        close_due_proposals(state)
        assert state.proposals["p"].status is ProposalStatus.REJECTED
        assert state.events[-1].topic == "proposal.rejected"

    def test_upgrade_enacted_at_activation(self, make_state, addr):
        """Test an approved upgrade waits for its activation height."""
        upgrade = ProtocolUpgrade(
            new_version=2,
            compatibility=Compatibility.HARD_FORK,
            activation_height=6,
        )
        state = submit_proposal(make_state(), addr["alice"], "u", upgrade, 2)
        for name in ("alice", "bob", "carol", "dave", "v1"):
            state = cast_vote(state, addr[name], "u", Choice.YES)
        state = _at(state, 2)
        close_due_proposals(state)
        assert state.proposals["u"].status is ProposalStatus.APPROVED
        state = _at(state, 6)
        close_due_proposals(state)
        assert state.proposals["u"].status is ProposalStatus.ENACTED
        assert state.events[-1].topic == "upgrade.enacted"

    def test_freeze_proposal_enacted(self, make_state, addr):
        """Test an approved freeze action freezes its target."""
        target = RegistryName.SCAM_LIST.value
        action = FreezeAction(target=target)
        state = submit_proposal(make_state(), addr["alice"], "f", action, 2)
        for name in ("alice", "bob", "carol", "dave", "v1"):
            state = cast_vote(state, addr[name], "f", Choice.YES)
        state = _at(state, 2)
        close_due_proposals(state)
        assert state.proposals["f"].status is ProposalStatus.ENACTED
        assert state.is_frozen(target)
        assert state.freezes[target].frozen_by == addr["alice"]

    def test_frozen_governance_defers_deadline(self, make_state, addr):
        """Test a frozen contract keeps due proposals open and unchanged."""
        action = ParameterChange(key="fast_track_window", value=2)
        state = submit_proposal(make_state(), addr["alice"], "p", action, 2)
        for name in ("alice", "bob", "carol", "dave", "v1"):
            state = cast_vote(state, addr[name], "p", Choice.YES)
        state = _freeze_governance(state, addr["v1"])
        before = state.state_hash()

        state = _at(state, 2)
        close_due_proposals(state)
        assert state.state_hash() == before
        assert state.proposals["p"].status is ProposalStatus.OPEN
        assert state.events[-1].topic == "governance.deferred"
        assert state.events[-1].payload["proposal_ids"] == ["p"]

        state = unfreeze_contract(state, addr["v1"], GOVERNANCE_CONTRACT)
        close_due_proposals(state)
        assert state.proposals["p"].status is ProposalStatus.ENACTED
        assert state.policy.fast_track_window == 2

    def test_frozen_governance_holds_upgrade(self, make_state, addr):
        """Test an approved upgrade is not enacted while frozen."""
        upgrade = ProtocolUpgrade(
            new_version=2,
            compatibility=Compatibility.SOFT_FORK,
            activation_height=4,
        )
        state = submit_proposal(make_state(), addr["alice"], "u", upgrade, 2)
        for name in ("alice", "bob", "carol", "dave", "v1"):
            state = cast_vote(state, addr[name], "u", Choice.YES)
        state = _at(state, 2)
        close_due_proposals(state)
        state = _freeze_governance(_at(state, 4), addr["v1"])
        before = state.state_hash()
        close_due_proposals(state)
        assert state.state_hash() == before
        assert state.proposals["u"].status is ProposalStatus.APPROVED


class TestCrossChain:
    """Test importing signed auxiliary-chain tallies."""

    @pytest.fixture
    def tally_key(self):
        return derive_keypair(0, "tally")

    @pytest.fixture
    def pending(self, make_state, policy, addr, tally_key):
        chain_policy = policy.model_copy(
            update={"cross_chain_tally_keys": {"aux": tally_key.public_hex}}
        )
        scheme = VotingScheme(
            kind=SchemeKind.CROSS_CHAIN_TOKEN, aux_chain_id="aux"
        )
        return submit_proposal(
            make_state(chain_policy=chain_policy),
            addr["alice"],
            "x",
            SIGNAL,
            5,
            scheme,
        )

    def _record(self, key, signer=None, **overrides):
        fields = {
            "home_chain_id": "test",
            "proposal_id": "x",
            "aux_chain_id": "aux",
            "yes_weight": Fraction(3),
            "no_weight": Fraction(1),
            "turnout_fraction": Fraction(1, 2),
            "approved": True,
            "tally_public_key": key.public_hex,
            **overrides,
        }
        record = CrossChainResult(**fields)
        signature = sign(signer or key, record.signing_bytes()).hex()
        return record.model_copy(update={"signature": signature})

    def test_accepted(self, pending, tally_key):
        """Test a correctly signed result resolves the proposal."""
        state = accept_cross_chain_result(pending, self._record(tally_key))
        assert state.proposals["x"].status is ProposalStatus.ENACTED

    def test_frozen_governance(self, pending, addr, tally_key):
        """Test a valid result is refused while governance is frozen."""
        state = _freeze_governance(pending, addr["v1"])
        with pytest.raises(ContractFrozenError):
            accept_cross_chain_result(state, self._record(tally_key))

    def test_direct_votes_refused(self, pending, addr):
        """Test a cross-chain vote takes no home-chain ballots."""
        with pytest.raises(VoteRejectedError, match="aux"):
            cast_vote(pending, addr["bob"], "x", Choice.YES)

    def test_bad_signature(self, pending, tally_key):
        """Test a result signed by another key is refused."""
        forged = self._record(tally_key, signer=derive_keypair(0, "mallory"))
        with pytest.raises(CrossChainError, match="signature"):
            accept_cross_chain_result(pending, forged)

    def test_untrusted_key(self, pending):
        """Test the tally key must be configured for the aux chain."""
        other = derive_keypair(1, "tally")
        with pytest.raises(CrossChainError, match="untrusted"):
            accept_cross_chain_result(pending, self._record(other))

    def test_wrong_home(self, pending, tally_key):
        """Test a result addressed to another chain is refused."""
        record = self._record(tally_key, home_chain_id="elsewhere")
        with pytest.raises(CrossChainError, match="addressed"):
            accept_cross_chain_result(pending, record)
