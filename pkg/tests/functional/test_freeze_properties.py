"""Property checks of the contract freezer on real chain states."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from govchain.exceptions import BlockRejectedError
from govchain.exceptions import ContractFrozenError
from govchain.filters import REASON_FROZEN
from govchain.governance import accept_cross_chain_result
from govchain.governance import cast_vote
from govchain.governance import delegate
from govchain.governance import dictator_override
from govchain.governance import revoke_delegation
from govchain.governance import submit_proposal
from govchain.proposals import Choice
from govchain.proposals import CrossChainResult
from govchain.proposals import ProposalStatus
from govchain.proposals import SignalAction
from govchain.registry import FREEZABLE_TARGETS
from govchain.registry import GOVERNANCE_CONTRACT
from govchain.registry import freeze_contract
from govchain.registry import scam_list_add
from govchain.registry import social_contract_set
from govchain.state import RegistryName
from govchain.transactions import CastVotePayload
from govchain.transactions import CrossChainResultPayload
from govchain.transactions import OverrideAction
from govchain.transactions import OverridePayload
from govchain.transactions import ScamListAddPayload
from govchain.transactions import SocialContractSetPayload
from govchain.transactions import make_transaction

from .chains import CHAIN_ID
from .chains import extend
from .chains import genesis
from .chains import key

SIGNAL = SignalAction(reference="freeze")
SCAM_LIST = RegistryName.SCAM_LIST.value
SOCIAL_CONTRACT = RegistryName.SOCIAL_CONTRACT.value


def _address(name):
    return key(name).address


RESULT = CrossChainResult(
    home_chain_id=CHAIN_ID,
    proposal_id="p",
    aux_chain_id="aux",
    yes_weight=Fraction(1),
    no_weight=Fraction(0),
    turnout_fraction=Fraction(1),
    approved=True,
    tally_public_key=key("tally").public_hex,
)

CALLS = {
    GOVERNANCE_CONTRACT: [
        lambda s: submit_proposal(s, _address("carol"), "q", SIGNAL, 3),
        lambda s: cast_vote(s, _address("carol"), "p", Choice.NO),
        lambda s: delegate(s, _address("carol"), "p", _address("bob")),
        lambda s: revoke_delegation(s, _address("bob"), "p"),
        lambda s: dictator_override(
            s, _address("alice"), "p", OverrideAction.CANCEL
        ),
        lambda s: accept_cross_chain_result(s, RESULT),
    ],
    SCAM_LIST: [
        lambda s: scam_list_add(s, _address("alice"), _address("bob")),
    ],
    SOCIAL_CONTRACT: [
        lambda s: social_contract_set(s, _address("alice"), "maintainers"),
    ],
}

PAYLOADS = {
    GOVERNANCE_CONTRACT: [
        CastVotePayload(proposal_id="p", choice=Choice.NO),
        OverridePayload(proposal_id="p", action=OverrideAction.CANCEL),
        CrossChainResultPayload(record=RESULT),
    ],
    SCAM_LIST: [ScamListAddPayload(address=_address("bob"))],
    SOCIAL_CONTRACT: [SocialContractSetPayload(maintainer_spec="x")],
}


def _frozen_chain(target):
    """Genesis with ``target`` frozen by alice.

    A frozen governance contract also holds an open proposal with a YES
    ballot, due three blocks later.
    """
    state = genesis({"alice": 100, "bob": 100, "carol": 100})
    state.policy = state.policy.model_copy(
        update={"freezer_eligible": [_address("alice")]}
    )
    if target == GOVERNANCE_CONTRACT:
        state = submit_proposal(state, _address("alice"), "p", SIGNAL, 3)
        state = cast_vote(state, _address("bob"), "p", Choice.YES)
    return freeze_contract(state, _address("alice"), target)


steps = st.lists(
    st.tuples(
        st.sampled_from(["call", "tx", "block"]),
        st.integers(min_value=0, max_value=9),
    ),
    max_size=15,
)


class TestFreezeTotality:
    """No mutation of a frozen target changes the canonical state hash."""

    @settings(max_examples=100, deadline=None)
    @given(target=st.sampled_from(sorted(FREEZABLE_TARGETS)), steps=steps)
    def test_random_attempts(self, target, steps):
        """Test direct calls, block transactions and deadlines passing."""
        state = _frozen_chain(target)
        before = state.state_hash()
        for step, index in steps:
            if step == "call":
                calls = CALLS[target]
                with pytest.raises(ContractFrozenError):
                    calls[index % len(calls)](state)
            elif step == "tx":
                payloads = PAYLOADS[target]
                tx = make_transaction(
                    key("bob"), CHAIN_ID, payloads[index % len(payloads)], 0
                )
                with pytest.raises(BlockRejectedError) as rejected:
                    extend(state, [tx])
                assert rejected.value.reason == REASON_FROZEN
            else:
                state, _ = extend(state)
            assert state.state_hash() == before
            assert state.is_frozen(target)
        if target == GOVERNANCE_CONTRACT:
            assert state.proposals["p"].status is ProposalStatus.OPEN
