"""Reference profiles: a relay/parachain network and a consortium chain.

Each preset is a scenario document exercising every component its
architecture uses, so that the evidence-based matrix of a run shows the
component as present. Components the architecture lacks are left out.
"""

from __future__ import annotations

import copy
from typing import Any

from govchain.config import ScenarioConfig
from govchain.config import parse_scenario
from govchain.exceptions import ConfigurationError

POLKADOT_LIKE = "polkadot-like"
QUORUM_LIKE = "quorum-like"


def _validator(name: str, stake: int = 100) -> dict[str, Any]:
    return {"name": name, "balance": 1000, "stake": stake}


_POLKADOT: dict[str, Any] = {
    "spec_version": 1,
    "chain_id": "relay",
    "profile": POLKADOT_LIKE,
    "seed": 7,
    "horizon": 36,
    "mode": "permissionless",
    "patterns": [
        "network-freezer",
        "sharded-chain",
        "incentive-distributor",
        "protocol-upgrade",
        "data-migrator",
        "accountability-tracer",
        "benevolent-dictator",
        "transaction-filter",
        "validator-selection",
        "block-finality-decider",
        "token-locker",
        "carbonvote",
    ],
    "consensus": {
        "selection": "proof-of-stake",
        "finality": "supermajority-vote",
        "quorum_fraction": "2/3",
    },
    "incentive": {
        "enabled": True,
        "block_reward": 10,
        "validator_fee_share": "1/2",
        "treasury": "treasury",
    },
    "governance": {
        "require_deposit": True,
        "proposal_deposit": 10,
        "fast_track_window": 3,
    },
    "actors": [
        _validator("v1"),
        _validator("v2"),
        _validator("v3"),
        _validator("collator0", 50),
        _validator("collator1", 50),
        {"name": "council", "balance": 500, "roles": ["council-member"]},
        {"name": "alice", "balance": 1000},
        {"name": "bob", "balance": 1000},
        {"name": "nominator", "balance": 500},
        {"name": "treasury", "balance": 0},
    ],
    "network": {
        "nodes": [
            {"name": "v1"},
            {"name": "v2"},
            {"name": "v3"},
            {"name": "collator0", "shard": 0},
            {"name": "collator1", "shard": 1},
        ],
        "shard_count": 2,
        "freeze_quorum": "2/3",
    },
    "actions": [
        {
            "tick": 1,
            "actor": "alice",
            "action": "lock",
            "params": {"amount": 300, "duration": 60},
        },
        {
            "tick": 1,
            "actor": "bob",
            "action": "lock",
            "params": {"amount": 100, "duration": 20},
        },
        {
            "tick": 2,
            "actor": "nominator",
            "action": "nominate",
            "params": {"candidate": "v1", "amount": 200, "duration": 100},
        },
        {
            "tick": 2,
            "actor": "alice",
            "action": "transfer",
            "params": {"to": "bob", "amount": 50},
            "fee": 2,
        },
        {
            "tick": 3,
            "actor": "alice",
            "action": "submit-proposal",
            "params": {
                "proposal_id": "runtime-v2",
                "description": "coordinated runtime upgrade",
                "action": {
                    "type": "upgrade",
                    "new_version": 2,
                    "compatibility": "soft-fork",
                    "activation_height": 24,
                },
                "scheme": {
                    "kind": "carbonvote",
                    "lock_weight_factor": "1",
                    "lock_period_cap": 60,
                },
                "voting_period": 12,
            },
        },
        {
            "tick": 5,
            "actor": "alice",
            "action": "cast-vote",
            "params": {"proposal_id": "runtime-v2", "choice": "yes"},
        },
        {
            "tick": 5,
            "actor": "bob",
            "action": "cast-vote",
            "params": {"proposal_id": "runtime-v2", "choice": "no"},
        },
        {
            "tick": 6,
            "actor": "council",
            "action": "cast-vote",
            "params": {"proposal_id": "runtime-v2", "choice": "yes"},
        },
        {
            "tick": 6,
            "actor": "alice",
            "action": "transfer",
            "chain": "shard",
            "params": {"to": "bob", "amount": 5},
        },
        {
            "tick": 7,
            "actor": "council",
            "action": "override",
            "params": {"proposal_id": "runtime-v2", "action": "fast-track"},
        },
        {
            "tick": 9,
            "actor": "alice",
            "action": "transfer",
            "params": {"to": "bob", "amount": 10},
            "nonce": 0,
        },
        {
            "tick": 12,
            "actor": "v1",
            "action": "freeze-network",
            "params": {"shard": 1, "voters": ["v1", "v2", "v3"]},
        },
        {
            "tick": 16,
            "actor": "v1",
            "action": "unfreeze-network",
            "params": {"shard": 1, "voters": ["v1", "v2", "v3"]},
        },
        {
            "tick": 20,
            "actor": "v1",
            "action": "migrate",
            "params": {"target": "relay-archive"},
        },
    ],
}


_QUORUM: dict[str, Any] = {
    "spec_version": 1,
    "chain_id": "consortium",
    "profile": QUORUM_LIKE,
    "seed": 11,
    "horizon": 30,
    "mode": "permissioned",
    "patterns": [
        "network-freezer",
        "incentive-distributor",
        "protocol-upgrade",
        "participation-permission",
        "accountability-tracer",
        "benevolent-dictator",
        "transaction-filter",
        "validator-selection",
        "block-finality-decider",
        "log-extractor",
        "social-contract",
    ],
    "consensus": {"selection": "proof-of-authority", "finality": "immediate"},
    "incentive": {"enabled": False},
    "governance": {"fast_track_window": 3},
    "filters": [
        {"rule_id": "members-only", "kind": "permissioned-sender-check"},
        {
            "rule_id": "ops-transfers-only",
            "kind": "allowed-payload-types",
            "allowed_types": ["transfer", "governance"],
            "senders": ["ops"],
        },
    ],
    "actors": [
        {
            "name": "deployer",
            "balance": 1000,
            "roles": ["deployer", "benevolent-dictator"],
            "identity": "Consortium Operator Ltd",
        },
        {
            "name": "admin",
            "balance": 100,
            "roles": ["administrator"],
            "identity": "Network Administration Dept",
        },
        {"name": "v1", "balance": 100, "identity": "Member Bank A"},
        {"name": "v2", "balance": 100, "identity": "Member Bank B"},
        {"name": "v3", "balance": 100, "identity": "Member Bank C"},
        {"name": "ops", "balance": 100, "identity": "Operations Desk"},
        {"name": "newcomer", "balance": 100, "member": False},
    ],
    "network": {
        "nodes": [{"name": "v1"}, {"name": "v2"}, {"name": "v3"}],
        "freeze_admins": ["admin"],
    },
    "actions": [
        {
            "tick": 1,
            "actor": "newcomer",
            "action": "transfer",
            "params": {"to": "deployer", "amount": 1},
        },
        {
            "tick": 2,
            "actor": "deployer",
            "action": "issue-invite",
            "params": {"code": "welcome-newcomer"},
        },
        {
            "tick": 3,
            "actor": "deployer",
            "action": "social-contract-set",
            "params": {"maintainer_spec": "consortium charter v1"},
        },
        {
            "tick": 5,
            "actor": "newcomer",
            "action": "join",
            "params": {
                "invite_code": "welcome-newcomer",
                "identity": "Member Bank D",
            },
        },
        {
            "tick": 6,
            "actor": "ops",
            "action": "social-contract-set",
            "params": {"maintainer_spec": "ops charter"},
        },
        {
            "tick": 6,
            "actor": "ops",
            "action": "transfer",
            "params": {"to": "v1", "amount": 5},
        },
        {
            "tick": 7,
            "actor": "deployer",
            "action": "submit-proposal",
            "params": {
                "proposal_id": "client-v2",
                "description": "client release 2",
                "action": {
                    "type": "upgrade",
                    "new_version": 2,
                    "compatibility": "soft-fork",
                    "activation_height": 22,
                },
                "threshold": {"kind": "unanimous"},
                "voting_period": 12,
            },
        },
        *(
            {
                "tick": 9,
                "actor": member,
                "action": "cast-vote",
                "params": {"proposal_id": "client-v2", "choice": "yes"},
            }
            for member in (
                "deployer",
                "admin",
                "v1",
                "v2",
                "v3",
                "ops",
                "newcomer",
            )
        ),
        {
            "tick": 11,
            "actor": "deployer",
            "action": "override",
            "params": {"proposal_id": "client-v2", "action": "fast-track"},
        },
        {"tick": 24, "actor": "admin", "action": "freeze-network"},
        {"tick": 26, "actor": "admin", "action": "unfreeze-network"},
        {
            "tick": 28,
            "actor": "admin",
            "action": "extract-logs",
            "params": {"topic": "member.joined"},
        },
    ],
}

PRESETS: dict[str, dict[str, Any]] = {
    POLKADOT_LIKE: _POLKADOT,
    QUORUM_LIKE: _QUORUM,
}


def preset_document(name: str) -> dict[str, Any]:
    """The scenario document of a preset, safe to modify.

    Raises:
        ConfigurationError: unknown preset name.
    """
    if name not in PRESETS:
        available = ", ".join(sorted(PRESETS))
        msg = f"unknown preset '{name}'. Available: {available}"
        raise ConfigurationError(msg)
    return copy.deepcopy(PRESETS[name])


def preset(name: str) -> ScenarioConfig:
    return parse_scenario(preset_document(name))
