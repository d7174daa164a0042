"""Tests for govchain.consensus module."""

from __future__ import annotations

from collections import Counter
from fractions import Fraction

import pytest

from govchain.blocks import BlockTree
from govchain.blocks import genesis_block
from govchain.blocks import seal_block
from govchain.consensus import choose_canonical_chain
from govchain.consensus import distribute_incentives
from govchain.consensus import finalized_height
from govchain.consensus import lottery_draw
from govchain.consensus import pay_incentives
from govchain.consensus import produces_in_slot
from govchain.consensus import select_validator
from govchain.consensus import stake_table
from govchain.consensus import validator_weights
from govchain.exceptions import LedgerError
from govchain.exceptions import NoEligibleValidatorError
from govchain.policy import FinalityMode
from govchain.policy import FinalityPolicy
from govchain.policy import IncentivePolicy
from govchain.policy import SelectionMode
from govchain.policy import ValidatorSelectionPolicy
from govchain.tokens import lock_tokens
from govchain.transactions import LockPurpose
from govchain.transactions import TransferPayload


def _pos(policy):
    return policy.model_copy(
        update={
            "selection": ValidatorSelectionPolicy(
                mode=SelectionMode.PROOF_OF_STAKE
            )
        }
    )


def _chain(key, length, *, parent_tree=None, start=None, salt=0):
    """Extend a tree with ``length`` blocks; returns (tree, tip)."""
    if parent_tree is None:
        genesis = genesis_block("test", "00" * 32)
        parent_tree = BlockTree(genesis)
        start = genesis
    parent = start
    for _ in range(length):
        block = seal_block(
            key,
            chain_id="test",
            parent=parent.block_hash,
            height=parent.height + 1,
            slot=parent.header.slot + 1 + salt,
        )
        parent_tree.add(block)
        parent = block
    return parent_tree, parent


class TestSelection:
    """Test validator selection."""

    def test_round_robin_authorities(self, make_state, policy, addr):
        """Test PoA rotates through the authority list."""
        rotating = policy.model_copy(
            update={
                "selection": ValidatorSelectionPolicy(
                    authorities=[addr["v1"], addr["v2"], addr["v3"]]
                )
            }
        )
        state = make_state(chain_policy=rotating)
        chosen = [select_validator(state, r) for r in range(6)]
        assert chosen == [addr[n] for n in ("v1", "v2", "v3") * 2]

    def test_empty_authorities(self, make_state, policy):
        """Test an empty authority list halts selection."""
        empty = policy.model_copy(
            update={"selection": ValidatorSelectionPolicy()}
        )
        with pytest.raises(NoEligibleValidatorError, match="authority"):
            select_validator(make_state(chain_policy=empty), 1)

    def test_pos_without_stake(self, make_state, policy):
        """Test PoS needs at least one candidacy lock."""
        state = make_state(chain_policy=_pos(policy))
        with pytest.raises(NoEligibleValidatorError, match="candidacy"):
            select_validator(state, 1)

    def test_pos_is_deterministic(self, make_state, policy):
        """Test the same seed and round select the same validator."""
        state = make_state(
            chain_policy=_pos(policy), stakes={"v1": 50, "v2": 50}
        )
        assert [select_validator(state, r) for r in range(20)] == [
            select_validator(state, r) for r in range(20)
        ]

    def test_pos_fairness(self, make_state, policy, addr):
        """Test selection frequency tracks the stake share."""
        state = make_state(
            chain_policy=_pos(policy), stakes={"v1": 75, "v2": 25}
        )
        rounds = 10_000
        counts = Counter(select_validator(state, r) for r in range(rounds))
        assert abs(counts[addr["v1"]] / rounds - 0.75) <= 0.02
        assert abs(counts[addr["v2"]] / rounds - 0.25) <= 0.02

    def test_nominations_add_to_candidate(self, make_state, addr):
        """Test nominations count only behind a candidate."""
        state = make_state(stakes={"v1": 100})
        state = lock_tokens(
            state,
            addr["alice"],
            40,
            10,
            LockPurpose.NOMINATION,
            target=addr["v1"],
        )
        state = lock_tokens(
            state,
            addr["bob"],
            40,
            10,
            LockPurpose.NOMINATION,
            target=addr["carol"],
        )
        assert stake_table(state) == {addr["v1"]: 140}

    def test_proof_of_work_stub(self, make_state, policy, addr):
        """Test proof-of-work only produces every difficulty-th slot."""
        pow_policy = ValidatorSelectionPolicy(
            mode=SelectionMode.PROOF_OF_WORK,
            authorities=[addr["v1"], addr["v2"]],
            pow_difficulty=3,
        )
        state = make_state(
            chain_policy=policy.model_copy(update={"selection": pow_policy})
        )
        assert [produces_in_slot(pow_policy, r) for r in range(4)] == [
            True,
            False,
            False,
            True,
        ]
        assert select_validator(state, 3) == addr["v2"]
        with pytest.raises(NoEligibleValidatorError, match="difficulty"):
            select_validator(state, 4)

    def test_lottery_draw_range(self):
        """Test draws fall inside [0, total)."""
        assert all(0 <= lottery_draw("c", r, 1, 7) < 7 for r in range(50))

    def test_validator_weights(self, make_state, policy, addr):
        """Test PoA weights are one per authority."""
        assert validator_weights(make_state()) == {addr["v1"]: 1}
        staked = make_state(
            chain_policy=_pos(policy), stakes={"v1": 30, "v2": 10}
        )
        assert validator_weights(staked) == {addr["v1"]: 30, addr["v2"]: 10}


class TestForkChoice:
    """Test fork choice and finality."""

    def test_longest_chain_wins(self, keys):
        """Test the longer branch is canonical."""
        tree, _ = _chain(keys["v1"], 2)
        genesis = tree.get(tree.genesis_hash)
        tree, long_tip = _chain(
            keys["v2"], 3, parent_tree=tree, start=genesis, salt=1
        )
        assert choose_canonical_chain(tree) == long_tip.block_hash

    def test_tie_breaks_on_smaller_hash(self, keys):
        """Test equal lengths pick the lexicographically smaller hash."""
        tree, a = _chain(keys["v1"], 2)
        genesis = tree.get(tree.genesis_hash)
        tree, b = _chain(keys["v2"], 2, parent_tree=tree, start=genesis)
        expected = min(a.block_hash, b.block_hash)
        assert choose_canonical_chain(tree) == expected

    def test_anchor_restricts_candidates(self, keys):
        """Test a finalized anchor keeps its branch canonical."""
        tree, short_tip = _chain(keys["v1"], 2)
        genesis = tree.get(tree.genesis_hash)
        tree, _ = _chain(
            keys["v2"], 3, parent_tree=tree, start=genesis, salt=1
        )
        anchor = tree.ancestor_at(short_tip.block_hash, 1)
        assert choose_canonical_chain(tree, anchor) == short_tip.block_hash

    def test_k_deep(self, keys):
        """Test k-deep finality trails the tip by k."""
        tree, _ = _chain(keys["v1"], 8)
        policy = FinalityPolicy(mode=FinalityMode.K_DEEP, k=6)
        assert finalized_height(tree, policy) == 2
        short, _ = _chain(keys["v1"], 3)
        assert finalized_height(short, policy) == 0

    def test_immediate(self, keys):
        """Test immediate finality finalizes the tip."""
        tree, _ = _chain(keys["v1"], 4)
        policy = FinalityPolicy(mode=FinalityMode.IMMEDIATE)
        assert finalized_height(tree, policy) == 4

    def test_supermajority(self, keys):
        """Test strictly more than the quorum fraction must affirm."""
        tree, tip = _chain(keys["v1"], 4)
        at_two = tree.ancestor_at(tip.block_hash, 2)
        policy = FinalityPolicy(mode=FinalityMode.SUPERMAJORITY_VOTE)
        weights = {"a": 1, "b": 1, "c": 1}
        two_of_three = {"a": tip.block_hash, "b": tip.block_hash}
        assert finalized_height(tree, policy, two_of_three, weights) == 0
        three = {**two_of_three, "c": at_two}
        assert finalized_height(tree, policy, three, weights) == 2

    def test_quorum_fraction_bounds(self):
        """Test quorum fractions must lie in [0, 1)."""
        with pytest.raises(ValueError, match="quorum_fraction"):
            FinalityPolicy(quorum_fraction=1)


class TestIncentives:
    """Test fee and reward distribution."""

    def test_fees_beyond_pending_raise(self, make_state, addr):
        """Test payouts cannot exceed collected fees."""
        with pytest.raises(LedgerError, match="fees"):
            pay_incentives(make_state(), addr["v1"], 5)

    def test_disabled_burns_fees(self, make_state, addr):
        """Test disabled incentives destroy fees and mint nothing."""
        state = make_state()
        state.supply.pending_fees = 6
        state.accounts[addr["alice"]].balance -= 6
        pay_incentives(state, addr["v1"], 6)
        assert state.supply.destroyed == 6
        assert state.supply.minted == 0
        assert state.supply_reconciles()

    def test_no_treasury_destroys_share(self, make_state, addr):
        """Test the treasury share is destroyed without a treasury."""
        state = make_state()
        state.supply.pending_fees = 5
        state.accounts[addr["alice"]].balance -= 5
        pay_incentives(
            state,
            addr["v1"],
            5,
            IncentivePolicy(block_reward=0),
        )
        assert state.balance_of(addr["v1"]) == 1002
        assert state.supply.destroyed == 3
        assert state.supply_reconciles()


class TestDistributeIncentives:
    """Test paying out a whole block."""

    @pytest.fixture
    def incentive(self, addr):
        return IncentivePolicy(
            block_reward=10,
            validator_fee_share=Fraction(1, 2),
            treasury=addr["carol"],
        )

    def test_reward_and_fee_split(
        self, make_state, make_tx, next_block, addr, incentive
    ):
        """Test reward 10 and fees 4 split evenly."""
        state = make_state()
        pay = TransferPayload(to=addr["bob"], amount=1)
        block = next_block(state, [make_tx("alice", pay, fee=4)])
        paid = distribute_incentives(state, block, incentive)
        assert paid.balance_of(addr["v1"]) == 1012
        assert paid.balance_of(addr["carol"]) == 1002
        assert paid.balance_of(addr["alice"]) == 996
        assert paid.supply.pending_fees == 0
        assert paid.supply_reconciles()
        assert state.balance_of(addr["v1"]) == 1000

    def test_disabled_changes_nothing(
        self, make_state, make_tx, next_block, addr
    ):
        """Test disabled incentives leave every balance as it was."""
        state = make_state()
        pay = TransferPayload(to=addr["bob"], amount=1)
        block = next_block(state, [make_tx("alice", pay, fee=4)])
        paid = distribute_incentives(
            state, block, IncentivePolicy(enabled=False)
        )
        assert paid.accounts == state.accounts
        assert paid.supply == state.supply

    def test_empty_block(self, make_state, next_block, addr, incentive):
        """Test an empty block earns exactly the block reward."""
        state = make_state()
        paid = distribute_incentives(state, next_block(state), incentive)
        assert paid.balance_of(addr["v1"]) == 1010
        assert paid.balance_of(addr["carol"]) == 1000
        assert paid.supply.minted == state.supply.minted + 10
