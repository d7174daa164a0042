"""Shared test fixtures for unit tests."""

from __future__ import annotations

import pathlib
import tempfile

import pytest

from govchain.blocks import seal_block
from govchain.consensus import select_validator
from govchain.crypto import derive_keypair
from govchain.ledger import GenesisAccount
from govchain.ledger import apply_block
from govchain.ledger import build_genesis
from govchain.ledger import seal_genesis
from govchain.policy import GovernancePolicy
from govchain.policy import IncentivePolicy
from govchain.policy import ValidatorSelectionPolicy
from govchain.transactions import make_transaction

CHAIN_ID = "test"
NAMES = ("alice", "bob", "carol", "dave", "v1", "v2", "v3")


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield pathlib.Path(tmpdir)


@pytest.fixture
def keys():
    """Deterministic key pairs for the test actors."""
    return {name: derive_keypair(0, name) for name in NAMES}


@pytest.fixture
def addr(keys):
    """Actor name -> address."""
    return {name: key.address for name, key in keys.items()}


@pytest.fixture
def policy(addr):
    """PoA policy with v1 as the only authority and no incentives."""
    return GovernancePolicy(
        selection=ValidatorSelectionPolicy(authorities=[addr["v1"]]),
        incentive=IncentivePolicy(enabled=False),
    )


@pytest.fixture
def make_state(keys, policy):
    """Factory for a sealed genesis state.

    Every actor gets ``balance`` tokens unless ``balances`` says
    otherwise; ``stakes`` become candidacy locks.
    """

    def factory(
        *,
        chain_policy: GovernancePolicy | None = None,
        balances: dict[str, int] | None = None,
        balance: int = 1000,
        stakes: dict[str, int] | None = None,
        roles: dict[str, tuple] | None = None,
        members: tuple[str, ...] | None = None,
        identities: dict[str, str] | None = None,
        invites: tuple[str, ...] = (),
        chain_id: str = CHAIN_ID,
    ):
        balances = balances or {}
        stakes = stakes or {}
        roles = roles or {}
        identities = identities or {}
        accounts = [
            GenesisAccount(
                address=key.address,
                public_key=key.public_hex,
                balance=balances.get(name, balance),
                roles=tuple(roles.get(name, ())),
                member=members is None or name in members,
                identity=identities.get(name),
                stake=stakes.get(name, 0),
            )
            for name, key in keys.items()
        ]
        state = build_genesis(
            chain_id, chain_policy or policy, accounts, invites
        )
        return seal_genesis(state)[1]

    return factory


@pytest.fixture
def make_tx(keys):
    """Factory for a signed transaction from a named actor."""

    def factory(name, payload, nonce=0, fee=0, chain_id=CHAIN_ID):
        return make_transaction(keys[name], chain_id, payload, nonce, fee)

    return factory


@pytest.fixture
def next_block(keys):
    """Factory for the block the scheduled validator seals next."""
    by_address = {key.address: key for key in keys.values()}

    def factory(state, transactions=(), slot=None, **kwargs):
        slot = state.slot + 1 if slot is None else slot
        validator = select_validator(state, slot)
        return seal_block(
            by_address[validator],
            chain_id=state.chain_id,
            parent=state.head,
            height=state.height + 1,
            slot=slot,
            transactions=transactions,
            **kwargs,
        )

    return factory


@pytest.fixture
def advance(next_block):
    """Apply ``blocks`` blocks; ``transactions`` go into the first."""

    def factory(state, transactions=(), blocks=1):
        state = apply_block(state, next_block(state, transactions))
        for _ in range(blocks - 1):
            state = apply_block(state, next_block(state))
        return state

    return factory
