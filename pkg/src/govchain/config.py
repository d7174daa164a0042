"""Settings and scenario configuration.

Environment settings use simple string-friendly types; scenario files are
validated into the pydantic models below. Every rejected scenario names
the offending field and the violated constraint.
"""

from __future__ import annotations

import functools
import json
import pathlib
import re
from collections.abc import Callable
from enum import StrEnum
from fractions import Fraction
from typing import Any
from typing import Literal

import pydantic
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt
from pydantic import field_serializer
from pydantic import field_validator
from pydantic import model_validator
from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict

from govchain.crypto import KeyPair
from govchain.crypto import derive_keypair
from govchain.crypto import hash_object
from govchain.exceptions import ConfigurationError
from govchain.exceptions import ScenarioValidationError
from govchain.governance import invite_digest
from govchain.policy import DecentralisationMode
from govchain.policy import FinalityMode
from govchain.policy import SelectionMode
from govchain.proposals import SchemeKind
from govchain.transactions import FilterKind
from govchain.transactions import PayloadCategory
from govchain.transactions import RoleName
from govchain.transactions import TxPayload
from govchain.units import Ratio
from govchain.units import TokenAmount

SPEC_VERSION = 1
ADDRESS_PATTERN = re.compile(r"^[0-9a-f]{40}$")


class GovchainSettings(BaseSettings):
    """Environment-based configuration.

    Environment variables:
        GOVCHAIN_LOG_LEVEL: structlog level (default: INFO)
        GOVCHAIN_LOG_FORMAT: "console" or "json"
        GOVCHAIN_REPORTS_DIR: Where the CLI writes reports
        GOVCHAIN_DEFAULT_SEED: Seed of scenarios that name none
        GOVCHAIN_DEFAULT_HORIZON: Tick horizon of scenarios that name none
        GOVCHAIN_MAX_BLOCK_TXS: Transactions per block
        GOVCHAIN_FAST_TRACK_WINDOW: Default fast-track window in blocks
        GOVCHAIN_PROPOSAL_DEPOSIT: Default proposal deposit
    """

    model_config = SettingsConfigDict(env_prefix="GOVCHAIN_")

    log_level: str = "INFO"
    log_format: Literal["console", "json"] = "console"
    reports_dir: str = "./reports"
    default_seed: int = 0
    default_horizon: int = 40
    max_block_txs: int = 50
    fast_track_window: int = 10
    proposal_deposit: int = 10

    def parse_reports_dir(self) -> pathlib.Path:
        return pathlib.Path(self.reports_dir).expanduser()


def get_settings() -> GovchainSettings:
    """Lazy-load environment settings."""
    return GovchainSettings()


@functools.lru_cache(maxsize=4096)
def actor_key(seed: int, name: str) -> KeyPair:
    return derive_keypair(seed, name)


# -- patterns -------------------------------------------------------------


class Pattern(StrEnum):
    NETWORK_FREEZER = "network-freezer"
    SHARDED_CHAIN = "sharded-chain"
    INCENTIVE_DISTRIBUTOR = "incentive-distributor"
    PROTOCOL_UPGRADE = "protocol-upgrade"
    DATA_MIGRATOR = "data-migrator"
    PARTICIPATION_PERMISSION = "participation-permission"
    ACCOUNTABILITY_TRACER = "accountability-tracer"
    BENEVOLENT_DICTATOR = "benevolent-dictator"
    TRANSACTION_FILTER = "transaction-filter"
    VALIDATOR_SELECTION = "validator-selection"
    BLOCK_FINALITY_DECIDER = "block-finality-decider"
    LOG_EXTRACTOR = "log-extractor"
    CONTRACT_FREEZER = "contract-freezer"
    SOCIAL_CONTRACT = "social-contract"
    SCAM_LIST = "scam-list"
    TOKEN_LOCKER = "token-locker"
    CARBONVOTE = "carbonvote"
    QUADRATIC_VOTING = "quadratic-voting"
    CROSS_CHAIN_TOKEN_VOTING = "cross-chain-token-voting"
    LIQUID_DEMOCRACY = "liquid-democracy"


PERMISSIONLESS_ONLY = frozenset(
    {
        Pattern.SCAM_LIST,
        Pattern.TOKEN_LOCKER,
        Pattern.CARBONVOTE,
        Pattern.QUADRATIC_VOTING,
        Pattern.CROSS_CHAIN_TOKEN_VOTING,
        Pattern.LIQUID_DEMOCRACY,
    }
)
PERMISSIONED_ONLY = frozenset({Pattern.PARTICIPATION_PERMISSION})
MANDATORY_PATTERNS = frozenset(
    {
        Pattern.PROTOCOL_UPGRADE,
        Pattern.ACCOUNTABILITY_TRACER,
        Pattern.BENEVOLENT_DICTATOR,
        Pattern.VALIDATOR_SELECTION,
    }
)


def pattern_allowed(pattern: Pattern, mode: DecentralisationMode) -> bool:
    if mode is DecentralisationMode.PERMISSIONED:
        return pattern not in PERMISSIONLESS_ONLY
    return pattern not in PERMISSIONED_ONLY


def _split(value: Any) -> Any:
    """Accept a list or a comma-separated string."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


# -- scenario sections ----------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ActorConfig(_Section):
    name: str = Field(min_length=1)
    balance: TokenAmount = 0
    roles: list[RoleName] = Field(default_factory=list)
    member: bool = True
    identity: str | None = None
    stake: TokenAmount = 0

    split_roles = field_validator("roles", mode="before")(_split)


class ConsensusSection(_Section):
    selection: SelectionMode = SelectionMode.PROOF_OF_AUTHORITY
    pow_difficulty: PositiveInt = 1
    finality: FinalityMode = FinalityMode.K_DEEP
    k: NonNegativeInt = 6
    quorum_fraction: Ratio = Fraction(2, 3)


class IncentiveSection(_Section):
    enabled: bool = True
    block_reward: NonNegativeInt = 10
    validator_fee_share: Ratio = Fraction(1, 2)
    treasury: str | None = None


class GovernanceSection(_Section):
    require_deposit: bool = False
    proposal_deposit: NonNegativeInt = Field(
        default_factory=lambda: get_settings().proposal_deposit
    )
    fast_track_window: PositiveInt = Field(
        default_factory=lambda: get_settings().fast_track_window
    )
    freezer_eligible: list[str] = Field(default_factory=list)
    invite_codes: list[str] = Field(default_factory=list)

    split_lists = field_validator(
        "freezer_eligible", "invite_codes", mode="before"
    )(_split)


class FilterSection(_Section):
    rule_id: str = ""
    kind: FilterKind
    max_bytes: PositiveInt | None = None
    allowed_types: list[PayloadCategory] | None = None
    senders: list[str] | None = None


class NodeSpec(_Section):
    """One simulated node.

    Attributes:
        name: Node id; also the actor whose key it signs with unless
            ``actor`` says otherwise.
        chain: Auxiliary chain id; ``None`` runs the main (relay) chain.
        shard: Shard served on a sharded deployment.
    """

    name: str = Field(min_length=1)
    actor: str | None = None
    chain: str | None = None
    shard: NonNegativeInt | None = None
    validator: bool = True
    adopts_upgrades: bool = True

    @property
    def actor_name(self) -> str:
        return self.actor or self.name


class LinkDelay(_Section):
    origin: str
    recipient: str
    delay: NonNegativeInt


class PartitionWindow(_Section):
    start: NonNegativeInt
    end: PositiveInt
    groups: list[list[str]]


class AuxChainSection(_Section):
    chain_id: str = Field(min_length=1)
    selection: SelectionMode = SelectionMode.PROOF_OF_AUTHORITY
    finality: FinalityMode = FinalityMode.IMMEDIATE


class NetworkSection(_Section):
    nodes: list[NodeSpec] = Field(min_length=1)
    delay: NonNegativeInt = 0
    jitter: NonNegativeInt = 0
    delays: list[LinkDelay] = Field(default_factory=list)
    partitions: list[PartitionWindow] = Field(default_factory=list)
    shard_count: PositiveInt = 1
    freeze_admins: list[str] = Field(default_factory=list)
    freeze_quorum: Ratio = Fraction(2, 3)
    aux_chains: list[AuxChainSection] = Field(default_factory=list)

    split_admins = field_validator("freeze_admins", mode="before")(_split)


class ActionKind(StrEnum):
    TRANSFER = "transfer"
    LOCK = "lock"
    NOMINATE = "nominate"
    JOIN = "join"
    ISSUE_INVITE = "issue-invite"
    GRANT_ROLE = "grant-role"
    SUBMIT_PROPOSAL = "submit-proposal"
    CAST_VOTE = "cast-vote"
    DELEGATE = "delegate"
    REVOKE_DELEGATION = "revoke-delegation"
    OVERRIDE = "override"
    SCAM_LIST_ADD = "scam-list-add"
    SOCIAL_CONTRACT_SET = "social-contract-set"
    FREEZE_CONTRACT = "freeze-contract"
    UNFREEZE_CONTRACT = "unfreeze-contract"
    FREEZE_NETWORK = "freeze-network"
    UNFREEZE_NETWORK = "unfreeze-network"
    MIGRATE = "migrate"
    CROSS_CHAIN_VOTE = "cross-chain-vote"
    EXTRACT_LOGS = "extract-logs"


NETWORK_ACTIONS = frozenset(
    {
        ActionKind.FREEZE_NETWORK,
        ActionKind.UNFREEZE_NETWORK,
        ActionKind.MIGRATE,
        ActionKind.CROSS_CHAIN_VOTE,
        ActionKind.EXTRACT_LOGS,
    }
)

# Parameters holding an actor name (or raw address) per transaction kind.
ADDRESS_PARAMS: dict[ActionKind, tuple[str, ...]] = {
    ActionKind.TRANSFER: ("to",),
    ActionKind.NOMINATE: ("candidate",),
    ActionKind.GRANT_ROLE: ("address",),
    ActionKind.DELEGATE: ("target",),
    ActionKind.SCAM_LIST_ADD: ("address",),
}

ACTION_PATTERNS: dict[ActionKind, Pattern] = {
    ActionKind.LOCK: Pattern.TOKEN_LOCKER,
    ActionKind.NOMINATE: Pattern.TOKEN_LOCKER,
    ActionKind.ISSUE_INVITE: Pattern.PARTICIPATION_PERMISSION,
    ActionKind.DELEGATE: Pattern.LIQUID_DEMOCRACY,
    ActionKind.REVOKE_DELEGATION: Pattern.LIQUID_DEMOCRACY,
    ActionKind.OVERRIDE: Pattern.BENEVOLENT_DICTATOR,
    ActionKind.SCAM_LIST_ADD: Pattern.SCAM_LIST,
    ActionKind.SOCIAL_CONTRACT_SET: Pattern.SOCIAL_CONTRACT,
    ActionKind.FREEZE_CONTRACT: Pattern.CONTRACT_FREEZER,
    ActionKind.UNFREEZE_CONTRACT: Pattern.CONTRACT_FREEZER,
    ActionKind.FREEZE_NETWORK: Pattern.NETWORK_FREEZER,
    ActionKind.UNFREEZE_NETWORK: Pattern.NETWORK_FREEZER,
    ActionKind.MIGRATE: Pattern.DATA_MIGRATOR,
    ActionKind.CROSS_CHAIN_VOTE: Pattern.CROSS_CHAIN_TOKEN_VOTING,
    ActionKind.EXTRACT_LOGS: Pattern.LOG_EXTRACTOR,
}

SCHEME_PATTERNS: dict[SchemeKind, Pattern] = {
    SchemeKind.CARBONVOTE: Pattern.CARBONVOTE,
    SchemeKind.QUADRATIC: Pattern.QUADRATIC_VOTING,
    SchemeKind.LIQUID_DEMOCRACY: Pattern.LIQUID_DEMOCRACY,
    SchemeKind.CROSS_CHAIN_TOKEN: Pattern.CROSS_CHAIN_TOKEN_VOTING,
}

_PAYLOAD_ADAPTER: pydantic.TypeAdapter[Any] = pydantic.TypeAdapter(TxPayload)


class ScriptedAction(_Section):
    """What ``actor`` does at ``tick``.

    Transaction kinds take their payload fields in ``params``, with actor
    names standing in for addresses; ``issue-invite`` takes the plain
    ``code``. ``chain`` selects an auxiliary chain, or ``"shard"`` for
    the sender's shard; ``nonce`` overrides the automatic nonce.
    """

    tick: PositiveInt
    actor: str
    action: ActionKind
    params: dict[str, Any] = Field(default_factory=dict)
    chain: str | None = None
    node: str | None = None
    fee: NonNegativeInt = 0
    nonce: NonNegativeInt | None = None

    @property
    def is_transaction(self) -> bool:
        return self.action not in NETWORK_ACTIONS


def build_payload(
    action: ScriptedAction, resolve: Callable[[str], str]
) -> Any:
    """Transaction payload of a scripted action.

    ``resolve`` maps actor names to addresses.

    Raises:
        pydantic.ValidationError: the parameters do not fit the payload.
        KeyError: an address parameter names an undeclared actor.
    """
    params = dict(action.params)
    for name in ADDRESS_PARAMS.get(action.action, ()):
        if name in params:
            params[name] = resolve(params[name])
    if action.action is ActionKind.ISSUE_INVITE and "code" in params:
        params["code_digest"] = invite_digest(params.pop("code"))
    if action.action is ActionKind.SUBMIT_PROPOSAL:
        scheme = dict(params.get("scheme") or {})
        if scheme.get("cost_account"):
            scheme["cost_account"] = resolve(scheme["cost_account"])
        params["scheme"] = scheme
    return _PAYLOAD_ADAPTER.validate_python(
        {"kind": action.action.value, **params}
    )


# -- the scenario ---------------------------------------------------------


class ScenarioConfig(_Section):
    """A complete, validated scenario.

    ``seed`` and ``horizon`` fall back to :class:`GovchainSettings`.
    Mandatory patterns are always active.
    """

    spec_version: Literal[1] = SPEC_VERSION
    chain_id: str = Field(default="govchain", pattern=r"^[a-z0-9-]+$")
    profile: str | None = None
    seed: int = Field(default_factory=lambda: get_settings().default_seed)
    horizon: PositiveInt = Field(
        default_factory=lambda: get_settings().default_horizon
    )
    mode: DecentralisationMode = DecentralisationMode.PERMISSIONLESS
    patterns: frozenset[Pattern] = frozenset()
    consensus: ConsensusSection = Field(default_factory=ConsensusSection)
    incentive: IncentiveSection = Field(default_factory=IncentiveSection)
    governance: GovernanceSection = Field(default_factory=GovernanceSection)
    filters: list[FilterSection] = Field(default_factory=list)
    actors: list[ActorConfig] = Field(default_factory=list)
    network: NetworkSection
    actions: list[ScriptedAction] = Field(default_factory=list)

    @field_validator("patterns", mode="before")
    @classmethod
    def _parse_patterns(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("patterns")
    @classmethod
    def _add_mandatory(cls, value: frozenset[Pattern]) -> frozenset[Pattern]:
        return value | MANDATORY_PATTERNS

    @field_serializer("patterns")
    def _dump_patterns(self, value: frozenset[Pattern]) -> list[str]:
        return sorted(pattern.value for pattern in value)

    # -- lookups ----------------------------------------------------------

    @property
    def actor_names(self) -> list[str]:
        return [actor.name for actor in self.actors]

    def actor(self, name: str) -> ActorConfig:
        for actor in self.actors:
            if actor.name == name:
                return actor
        msg = f"undeclared actor '{name}'"
        raise KeyError(msg)

    def key_for(self, name: str) -> KeyPair:
        return actor_key(self.seed, name)

    def address_of(self, name: str) -> str:
        """Address of an actor; raw addresses pass through unchanged."""
        if name in self.actor_names:
            return self.key_for(name).address
        if ADDRESS_PATTERN.match(name):
            return name
        msg = f"undeclared actor '{name}'"
        raise KeyError(msg)

    @property
    def sharded(self) -> bool:
        return self.network.shard_count > 1

    @property
    def aux_chain_ids(self) -> list[str]:
        return [aux.chain_id for aux in self.network.aux_chains]

    def digest(self) -> str:
        return hash_object(self.model_dump(mode="json")).hex()

    # -- validation -------------------------------------------------------

    @model_validator(mode="after")
    def _validate_scenario(self) -> ScenarioConfig:
        self._check_patterns()
        self._check_actors()
        self._check_network()
        for index, action in enumerate(self.actions):
            self._check_action(index, action)
        return self

    def _require_pattern(self, field: str, pattern: Pattern) -> None:
        if pattern not in self.patterns:
            raise ScenarioValidationError(
                field, f"requires the {pattern.value} pattern"
            )

    def _check_patterns(self) -> None:
        for pattern in sorted(self.patterns):
            if not pattern_allowed(pattern, self.mode):
                level = (
                    "permissionless"
                    if pattern in PERMISSIONLESS_ONLY
                    else "permissioned"
                )
                raise ScenarioValidationError(
                    f"patterns.{pattern.value}",
                    f"decentralisation level is {level} only, scenario "
                    f"mode is {self.mode.value}",
                )
        if self.sharded:
            self._require_pattern(
                "network.shard_count", Pattern.SHARDED_CHAIN
            )
        if self.network.aux_chains:
            self._require_pattern(
                "network.aux_chains", Pattern.CROSS_CHAIN_TOKEN_VOTING
            )
        if self.filters:
            self._require_pattern("filters", Pattern.TRANSACTION_FILTER)

    def _check_actor_ref(self, field: str, name: str | None) -> None:
        if name is None:
            return
        try:
            self.address_of(name)
        except KeyError:
            raise ScenarioValidationError(
                field, f"undeclared actor '{name}'"
            ) from None

    def _check_actors(self) -> None:
        names = self.actor_names
        for name in names:
            if names.count(name) > 1:
                raise ScenarioValidationError(
                    "actors", f"duplicate actor '{name}'"
                )
        for actor in self.actors:
            if actor.stake > actor.balance:
                raise ScenarioValidationError(
                    f"actors.{actor.name}.stake",
                    "stake exceeds the actor's balance",
                )
        self._check_actor_ref("incentive.treasury", self.incentive.treasury)
        for name in self.governance.freezer_eligible:
            self._check_actor_ref("governance.freezer_eligible", name)
        for index, rule in enumerate(self.filters):
            for name in rule.senders or ():
                self._check_actor_ref(f"filters[{index}].senders", name)
        for name in self.network.freeze_admins:
            self._check_actor_ref("network.freeze_admins", name)

    def _check_network(self) -> None:
        network = self.network
        node_names = [node.name for node in network.nodes]
        aux_ids = self.aux_chain_ids
        for index, node in enumerate(network.nodes):
            field = f"network.nodes[{index}]"
            if node_names.count(node.name) > 1:
                raise ScenarioValidationError(
                    field, f"duplicate node '{node.name}'"
                )
            self._check_actor_ref(f"{field}.actor", node.actor_name)
            if node.chain is not None and node.chain not in aux_ids:
                raise ScenarioValidationError(
                    f"{field}.chain", f"unknown chain '{node.chain}'"
                )
            if node.shard is not None:
                if not self.sharded:
                    raise ScenarioValidationError(
                        f"{field}.shard", "network is not sharded"
                    )
                if node.shard >= network.shard_count:
                    raise ScenarioValidationError(
                        f"{field}.shard",
                        f"must be below shard_count {network.shard_count}",
                    )
        main = [
            n for n in network.nodes if n.chain is None and n.shard is None
        ]
        if not any(node.validator for node in main):
            raise ScenarioValidationError(
                "network.nodes", "the main chain needs a validator node"
            )
        for shard in range(network.shard_count if self.sharded else 0):
            if not any(
                n.validator and n.shard == shard for n in network.nodes
            ):
                raise ScenarioValidationError(
                    "network.nodes", f"shard {shard} needs a validator node"
                )
        for aux in aux_ids:
            if not any(n.validator and n.chain == aux for n in network.nodes):
                raise ScenarioValidationError(
                    "network.nodes", f"chain {aux} needs a validator node"
                )
        for index, link in enumerate(network.delays):
            for end in (link.origin, link.recipient):
                if end not in node_names:
                    raise ScenarioValidationError(
                        f"network.delays[{index}]", f"unknown node '{end}'"
                    )
        for index, window in enumerate(network.partitions):
            field = f"network.partitions[{index}]"
            if window.end <= window.start:
                raise ScenarioValidationError(field, "end must follow start")
            for group in window.groups:
                for name in group:
                    if name not in node_names:
                        raise ScenarioValidationError(
                            field, f"unknown node '{name}'"
                        )

    def _check_action(self, index: int, action: ScriptedAction) -> None:
        field = f"actions[{index}]"
        if action.tick > self.horizon:
            raise ScenarioValidationError(
                f"{field}.tick", f"beyond the horizon {self.horizon}"
            )
        self._check_actor_ref(f"{field}.actor", action.actor)
        pattern = ACTION_PATTERNS.get(action.action)
        if pattern is not None:
            self._require_pattern(f"{field}.action", pattern)
        if action.action is ActionKind.JOIN and action.params.get(
            "invite_code"
        ):
            self._require_pattern(
                f"{field}.params.invite_code",
                Pattern.PARTICIPATION_PERMISSION,
            )
        if action.node is not None and action.node not in {
            node.name for node in self.network.nodes
        }:
            raise ScenarioValidationError(
                f"{field}.node", f"unknown node '{action.node}'"
            )
        if action.chain not in (None, "shard", *self.aux_chain_ids):
            raise ScenarioValidationError(
                f"{field}.chain", f"unknown chain '{action.chain}'"
            )
        if action.chain == "shard" and not self.sharded:
            raise ScenarioValidationError(
                f"{field}.chain", "network is not sharded"
            )
        if action.action is ActionKind.FREEZE_NETWORK or (
            action.action is ActionKind.UNFREEZE_NETWORK
        ):
            for name in action.params.get("voters") or ():
                self._check_actor_ref(f"{field}.params.voters", name)
        if not action.is_transaction:
            return

        try:
            payload = build_payload(action, self.address_of)
        except KeyError as exc:
            raise ScenarioValidationError(
                f"{field}.params", str(exc.args[0])
            ) from None
        except pydantic.ValidationError as exc:
            error = exc.errors()[0]
            location = ".".join(str(part) for part in error["loc"][1:])
            raise ScenarioValidationError(
                f"{field}.params.{location}".rstrip("."), error["msg"]
            ) from None
        if action.action is ActionKind.SUBMIT_PROPOSAL:
            scheme = payload.scheme
            pattern = SCHEME_PATTERNS.get(scheme.kind)
            if pattern is not None:
                self._require_pattern(f"{field}.params.scheme.kind", pattern)
            if scheme.lock_weight_factor:
                self._require_pattern(
                    f"{field}.params.scheme.lock_weight_factor",
                    Pattern.TOKEN_LOCKER,
                )
            if (
                scheme.kind is SchemeKind.CROSS_CHAIN_TOKEN
                and scheme.aux_chain_id not in self.aux_chain_ids
            ):
                raise ScenarioValidationError(
                    f"{field}.params.scheme.aux_chain_id",
                    f"unknown chain '{scheme.aux_chain_id}'",
                )


def _error_field(error: Any) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def parse_scenario(data: dict[str, Any]) -> ScenarioConfig:
    """Validate a scenario document.

    Raises:
        ScenarioValidationError: naming the first offending field.
    """
    try:
        return ScenarioConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        error = exc.errors()[0]
        raise ScenarioValidationError(
            _error_field(error), error["msg"]
        ) from None


def load_scenario(path: str | pathlib.Path) -> ScenarioConfig:
    """Read and validate a JSON scenario file."""
    path = pathlib.Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        msg = f"scenario file not found: {path}"
        raise ConfigurationError(msg) from None
    except json.JSONDecodeError as exc:
        msg = f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})"
        raise ConfigurationError(msg) from None
    if not isinstance(data, dict):
        raise ScenarioValidationError("<root>", "must be a JSON object")
    return parse_scenario(data)
