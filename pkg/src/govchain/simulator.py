"""Scenario execution: builds the chains and runs the tick loop."""

from __future__ import annotations

from collections.abc import Sequence

import structlog

from govchain.blocks import RELAY_SHARD
from govchain.blocks import Block
from govchain.config import ActionKind
from govchain.config import AuxChainSection
from govchain.config import GovchainSettings
from govchain.config import NodeSpec
from govchain.config import Pattern
from govchain.config import ScenarioConfig
from govchain.config import ScriptedAction
from govchain.config import actor_key
from govchain.config import build_payload
from govchain.config import get_settings
from govchain.crosschain import CrossChainVote
from govchain.crosschain import issue_mirror_tokens
from govchain.crosschain import mirror_state
from govchain.crosschain import open_aux_vote
from govchain.crypto import KeyPair
from govchain.exceptions import CrossChainError
from govchain.exceptions import GovchainError
from govchain.exceptions import InvariantViolation
from govchain.exceptions import SimulationError
from govchain.exceptions import UnknownTransactionError
from govchain.governance import invite_digest
from govchain.ledger import GenesisAccount
from govchain.ledger import build_genesis
from govchain.ledger import seal_genesis
from govchain.ledger import trace_sender
from govchain.migration import MigrationRecord
from govchain.migration import migrate_chain
from govchain.network import SimNetwork
from govchain.node import NodeInstance
from govchain.policy import DecentralisationMode
from govchain.policy import FinalityPolicy
from govchain.policy import GovernancePolicy
from govchain.policy import IncentivePolicy
from govchain.policy import ValidatorSelectionPolicy
from govchain.proposals import ProtocolUpgrade
from govchain.report import EvidenceLog
from govchain.report import NodeSummary
from govchain.report import ProposalOutcome
from govchain.report import RunReport
from govchain.report import SupplySummary
from govchain.report import matrix_column
from govchain.report import registry_view
from govchain.sharding import ShardTopology
from govchain.sharding import shard_of
from govchain.state import ChainState
from govchain.transactions import FilterRule
from govchain.transactions import make_transaction

logger = structlog.get_logger()


def tally_key(seed: int, aux_chain_id: str) -> KeyPair:
    """Key signing the results of votes held on ``aux_chain_id``."""
    return actor_key(seed, f"tally:{aux_chain_id}")


class Simulation:
    """One scenario on its own network, advanced tick by tick.

    Every tick delivers due messages and lets validators produce, then
    performs the scripted actions of that tick, polls cross-chain votes
    and checks the safety invariants.

    Attributes:
        config: The validated scenario.
        network: The message fabric holding every node.
        topology: Shard layout of a sharded scenario.
        migrations: Completed data migrations.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        settings: GovchainSettings | None = None,
    ):
        self.config = config
        self.settings = settings or get_settings()
        network = config.network
        self.network = SimNetwork(
            seed=config.seed,
            default_delay=network.delay,
            jitter=network.jitter,
            freeze_admins={
                config.address_of(name) for name in network.freeze_admins
            },
            freeze_quorum=network.freeze_quorum,
        )
        self.topology: ShardTopology | None = None
        self.tally_keys = {
            aux: tally_key(config.seed, aux) for aux in config.aux_chain_ids
        }
        self.cross_votes: list[CrossChainVote] = []
        self.migrations: list[MigrationRecord] = []
        self._finalized: dict[str, str] = {}
        self._build()

    @property
    def chain_id(self) -> str:
        return self.config.chain_id

    def home(self, chain_id: str | None = None) -> NodeInstance:
        """Reference node of a chain (default: the main chain)."""
        chain_id = chain_id or self.chain_id
        node_id = self.network.home_nodes.get(chain_id)
        if node_id is None:
            msg = f"no node runs chain '{chain_id}'"
            raise SimulationError(msg)
        return self.network.nodes[node_id]

    # -- construction -----------------------------------------------------

    def _build(self) -> None:
        config = self.config
        specs = config.network.nodes
        main = [s for s in specs if s.chain is None and s.shard is None]
        if config.sharded:
            self.topology = ShardTopology(
                shard_count=config.network.shard_count,
                relay_chain_id=self.chain_id,
                chain_prefix=self.chain_id,
                validator_keys={
                    config.address_of(s.actor_name): config.key_for(
                        s.actor_name
                    ).public_hex
                    for s in specs
                    if s.shard is not None and s.validator
                },
            )
            self.network.relay_chain_id = self.chain_id
            self.network.shard_chain_ids = set(
                self.topology.shard_chain_ids
            )

        relay_shard = RELAY_SHARD if self.topology else 0
        for node in self._launch(self.chain_id, main, relay_shard):
            if self.topology is not None:
                node.shard_keys = dict(self.topology.validator_keys)
        if self.topology is not None:
            for shard in range(self.topology.shard_count):
                self._launch(
                    self.topology.chain_id(shard),
                    [s for s in specs if s.shard == shard],
                    shard,
                )
        for aux in config.network.aux_chains:
            self._launch(
                aux.chain_id,
                [s for s in specs if s.chain == aux.chain_id],
                0,
                aux=aux,
            )

        for link in config.network.delays:
            self.network.set_delay(link.origin, link.recipient, link.delay)
        for window in config.network.partitions:
            self.network.add_partition(
                window.start, window.end, window.groups
            )
        logger.info(
            "simulation built",
            chain_id=self.chain_id,
            chains=self.network.chain_ids,
            nodes=len(self.network.nodes),
        )

    def _policy(
        self, validators: list[str], aux: AuxChainSection | None
    ) -> GovernancePolicy:
        config = self.config
        consensus = config.consensus
        if aux is not None:
            return GovernancePolicy(
                seed=config.seed,
                selection=ValidatorSelectionPolicy(
                    mode=aux.selection, authorities=validators
                ),
                finality=FinalityPolicy(mode=aux.finality, k=consensus.k),
                incentive=IncentivePolicy(enabled=False, block_reward=0),
                token_locker=False,
                tally_public_key=self.tally_keys[aux.chain_id].public_hex,
            )

        patterns = config.patterns
        incentive = config.incentive
        governance = config.governance
        return GovernancePolicy(
            mode=config.mode,
            seed=config.seed,
            selection=ValidatorSelectionPolicy(
                mode=consensus.selection,
                authorities=validators,
                pow_difficulty=consensus.pow_difficulty,
            ),
            finality=FinalityPolicy(
                mode=consensus.finality,
                k=consensus.k,
                quorum_fraction=consensus.quorum_fraction,
            ),
            incentive=IncentivePolicy(
                enabled=incentive.enabled
                and Pattern.INCENTIVE_DISTRIBUTOR in patterns,
                block_reward=incentive.block_reward,
                validator_fee_share=incentive.validator_fee_share,
                treasury=(
                    config.address_of(incentive.treasury)
                    if incentive.treasury
                    else None
                ),
            ),
            filter_rules=[
                FilterRule(
                    rule_id=rule.rule_id,
                    kind=rule.kind,
                    max_bytes=rule.max_bytes,
                    allowed_types=(
                        tuple(rule.allowed_types)
                        if rule.allowed_types is not None
                        else None
                    ),
                    senders=(
                        tuple(config.address_of(n) for n in rule.senders)
                        if rule.senders is not None
                        else None
                    ),
                )
                for rule in config.filters
            ],
            require_deposit=governance.require_deposit,
            proposal_deposit=governance.proposal_deposit,
            fast_track_window=governance.fast_track_window,
            token_locker=Pattern.TOKEN_LOCKER in patterns,
            freezer_eligible=[
                config.address_of(name)
                for name in governance.freezer_eligible
            ],
            cross_chain_tally_keys={
                aux: key.public_hex for aux, key in self.tally_keys.items()
            },
        )

    def _accounts(
        self, validators: list[str], aux: bool
    ) -> list[GenesisAccount]:
        """Every actor on every chain; only the chain's validators stake."""
        accounts = []
        for actor in self.config.actors:
            key = self.config.key_for(actor.name)
            accounts.append(
                GenesisAccount(
                    address=key.address,
                    public_key=key.public_hex,
                    balance=actor.balance,
                    roles=tuple(actor.roles),
                    member=actor.member or aux,
                    identity=actor.identity,
                    stake=actor.stake if key.address in validators else 0,
                )
            )
        return accounts

    def _launch(
        self,
        chain_id: str,
        specs: Sequence[NodeSpec],
        shard_id: int,
        aux: AuxChainSection | None = None,
    ) -> list[NodeInstance]:
        config = self.config
        validators = list(
            dict.fromkeys(
                config.address_of(spec.actor_name)
                for spec in specs
                if spec.validator
            )
        )
        policy = self._policy(validators, aux)
        home = aux is None and chain_id == self.chain_id
        state = build_genesis(
            chain_id,
            policy,
            self._accounts(validators, aux is not None),
            (
                [invite_digest(c) for c in config.governance.invite_codes]
                if home
                else ()
            ),
            incentives_deployed=aux is None
            and Pattern.INCENTIVE_DISTRIBUTOR in config.patterns,
        )
        genesis, sealed = seal_genesis(state, shard_id)
        nodes = []
        for spec in specs:
            node = NodeInstance(
                spec.name,
                config.key_for(spec.actor_name),
                genesis,
                sealed,
                max_block_txs=self.settings.max_block_txs,
                adopts_upgrades=spec.adopts_upgrades,
                shard_id=shard_id,
            )
            nodes.append(self.network.add_node(node))
        return nodes

    # -- scripted actions -------------------------------------------------

    def _target_chain(self, action: ScriptedAction, sender: str) -> str:
        if action.chain == "shard":
            if self.topology is None:
                msg = "network is not sharded"
                raise SimulationError(msg)
            shard = shard_of(sender, self.topology.shard_count)
            return self.topology.chain_id(shard)
        return action.chain or self.chain_id

    def _node_for(
        self, action: ScriptedAction, chain_id: str
    ) -> NodeInstance:
        if action.node is None:
            return self.home(chain_id)
        node = self.network.nodes[action.node]
        if node.chain_id != chain_id:
            msg = f"node '{action.node}' does not run {chain_id}"
            raise SimulationError(msg)
        return node

    def perform(self, action: ScriptedAction) -> None:
        """Carry out one scripted action.

        Raises:
            GovchainError: the action was refused.
        """
        match action.action:
            case ActionKind.FREEZE_NETWORK:
                self._freeze(action, freeze=True)
            case ActionKind.UNFREEZE_NETWORK:
                self._freeze(action, freeze=False)
            case ActionKind.MIGRATE:
                self._migrate(action)
            case ActionKind.CROSS_CHAIN_VOTE:
                self._open_cross_vote(action)
            case ActionKind.EXTRACT_LOGS:
                self._extract_logs(action)
            case _:
                self._transact(action)

    def _transact(self, action: ScriptedAction) -> None:
        config = self.config
        key = config.key_for(action.actor)
        chain_id = self._target_chain(action, key.address)
        node = self._node_for(action, chain_id)
        payload = build_payload(action, config.address_of)
        nonce = action.nonce
        if nonce is None:
            nonce = node.next_nonce(key.address)
        tx = make_transaction(key, chain_id, payload, nonce, action.fee)
        verdict = self.network.submit(node.node_id, tx)
        self.network.record(
            "action.submitted",
            {
                "actor": action.actor,
                "action": action.action.value,
                "chain_id": chain_id,
                "tx_hash": tx.tx_hash,
                "accepted": verdict.accepted,
                "reason": verdict.reason,
            },
        )

    def _freeze_scope(self, action: ScriptedAction) -> str | None:
        """``None`` freezes every chain."""
        shard = action.params.get("shard")
        if shard is not None:
            if self.topology is None or not (
                0 <= int(shard) < self.topology.shard_count
            ):
                msg = f"no shard {shard}"
                raise SimulationError(msg)
            return self.topology.chain_id(int(shard))
        if action.chain is not None and action.chain != "shard":
            return action.chain
        if action.params.get("scope") == "chain":
            return self.chain_id
        return None

    def _freeze(self, action: ScriptedAction, *, freeze: bool) -> None:
        config = self.config
        chain_id = self._freeze_scope(action)
        voters = action.params.get("voters")
        operate = (
            self.network.freeze_network
            if freeze
            else self.network.unfreeze_network
        )
        if voters:
            operate(
                votes=[config.address_of(name) for name in voters],
                chain_id=chain_id,
            )
        else:
            operate(actor=config.address_of(action.actor), chain_id=chain_id)

    def _migrate(self, action: ScriptedAction) -> None:
        target = action.params.get("target")
        if not target:
            msg = "migrate needs a target chain id"
            raise SimulationError(msg)
        if target in self.network.chain_ids:
            msg = f"chain '{target}' already exists"
            raise SimulationError(msg)
        source = self._node_for(action, self.chain_id)

        def target_nodes(
            genesis: Block, state: ChainState
        ) -> list[NodeInstance]:
            return [
                NodeInstance(
                    f"{node.node_id}@{target}",
                    node.key,
                    genesis,
                    state,
                    max_block_txs=self.settings.max_block_txs,
                    adopts_upgrades=node.adopts_upgrades,
                )
                for node in self.network.nodes_of(source.chain_id)
            ]

        _, _, record = migrate_chain(
            self.network, source.node_id, target, target_nodes
        )
        self.migrations.append(record)

    def _open_cross_vote(self, action: ScriptedAction) -> None:
        proposal_id = action.params.get("proposal_id")
        home = self.home()
        proposal = home.canonical_state().proposals.get(str(proposal_id))
        if proposal is None:
            msg = f"unknown proposal '{proposal_id}' on {home.chain_id}"
            raise CrossChainError(msg)
        aux_chain_id = proposal.scheme.aux_chain_id
        if aux_chain_id not in self.tally_keys:
            msg = f"'{proposal.id}' names no auxiliary chain"
            raise CrossChainError(msg)
        aux = self._node_for(action, aux_chain_id)
        weights = issue_mirror_tokens(mirror_state(home, proposal))
        open_aux_vote(
            self.network,
            aux.node_id,
            self.config.key_for(action.actor),
            home.chain_id,
            proposal,
            weights,
        )
        self.cross_votes.append(
            CrossChainVote(
                home_chain_id=home.chain_id,
                proposal_id=proposal.id,
                aux_node_id=aux.node_id,
                tally_key=self.tally_keys[aux_chain_id],
            )
        )

    def _extract_logs(self, action: ScriptedAction) -> None:
        node = self._node_for(action, self.chain_id)
        params = action.params
        height_range = None
        if "from" in params or "to" in params:
            height_range = (
                int(params.get("from", 0)),
                int(params.get("to", node.tip_height())),
            )
        node.extract_logs(params.get("topic"), height_range)

    def _attempt(self, action: ScriptedAction) -> None:
        try:
            self.perform(action)
        except GovchainError as exc:
            self.network.record(
                "action.failed",
                {
                    "actor": action.actor,
                    "action": action.action.value,
                    "error": type(exc).__name__,
                    "detail": str(exc),
                },
            )
            logger.warning(
                "scripted action failed",
                tick=self.network.clock,
                action=action.action.value,
                error=str(exc),
            )

    # -- invariants -------------------------------------------------------

    def _check_finality(self) -> None:
        for node_id, node in self.network.nodes.items():
            previous = self._finalized.get(node_id)
            if previous is not None and not node.tree.is_ancestor(
                previous, node.head
            ):
                msg = f"finalized block {previous} reverted on {node_id}"
                raise InvariantViolation(msg)
            self._finalized[node_id] = node.finalized_hash

    def _check_supply(self) -> None:
        for node_id, node in self.network.nodes.items():
            if not node.canonical_state().supply_reconciles():
                msg = f"token supply does not reconcile on {node_id}"
                raise InvariantViolation(msg)

    # -- the loop ---------------------------------------------------------

    def step(self) -> None:
        """Advance one tick and perform the actions scheduled for it."""
        network = self.network
        globally_frozen = network.frozen_all
        frozen_tips = {
            node_id: node.tip_height()
            for node_id, node in network.nodes.items()
            if network.is_frozen(node.chain_id)
        }
        delivered = network.advance()
        if globally_frozen and delivered:
            msg = f"{delivered} messages delivered while frozen"
            raise InvariantViolation(msg)
        for node_id, height in frozen_tips.items():
            if network.nodes[node_id].tip_height() > height:
                msg = f"{node_id} extended its chain while frozen"
                raise InvariantViolation(msg)

        for action in self.config.actions:
            if action.tick == network.clock:
                self._attempt(action)
        for vote in self.cross_votes:
            try:
                vote.poll(network)
            except GovchainError as exc:
                network.record(
                    "crossvote.failed",
                    {"proposal_id": vote.proposal_id, "detail": str(exc)},
                )
        self._check_finality()
        self._check_supply()

    def audit(self) -> None:
        """Trace the sender of every finalized transaction on every chain.

        Raises:
            InvariantViolation: a finalized transaction cannot be traced.
        """
        for chain_id in self.network.chain_ids:
            node = self.home(chain_id)
            state = node.finalized_state()
            senders: set[str] = set()
            for tx_hash in sorted(state.tx_index):
                try:
                    trace = trace_sender(
                        state, tx_hash, node.finalized_height
                    )
                except UnknownTransactionError as exc:
                    raise InvariantViolation(str(exc)) from exc
                senders.add(trace.address)
            mechanism = (
                "identity"
                if state.policy.mode is DecentralisationMode.PERMISSIONED
                else "address"
            )
            self.network.record(
                "accountability.traced",
                {
                    "chain_id": chain_id,
                    "mechanism": mechanism,
                    "transactions": len(state.tx_index),
                    "senders": len(senders),
                },
            )

    def run(self) -> RunReport:
        """Run to the horizon, audit, and report."""
        for _ in range(self.config.horizon):
            self.step()
        self.audit()
        logger.info(
            "simulation finished",
            chain_id=self.chain_id,
            ticks=self.network.clock,
            tips=self.network.tips(),
        )
        return self.report()

    # -- reporting --------------------------------------------------------

    def report(self) -> RunReport:
        network = self.network
        references = {
            chain_id: self.home(chain_id) for chain_id in network.chain_ids
        }
        chain_events = {
            chain_id: list(node.canonical_state().events)
            for chain_id, node in references.items()
        }
        log = EvidenceLog(
            network.events,
            [event for events in chain_events.values() for event in events],
        )
        return RunReport(
            profile=self.config.profile or self.chain_id,
            config_digest=self.config.digest(),
            seed=self.config.seed,
            horizon=self.config.horizon,
            nodes=[_node_summary(node) for node in network.nodes.values()],
            finalized_heights={
                chain_id: node.finalized_height
                for chain_id, node in references.items()
            },
            proposals=[
                outcome
                for chain_id, node in references.items()
                for outcome in _proposal_outcomes(
                    chain_id, node.canonical_state()
                )
            ],
            supply=[
                _supply_summary(chain_id, node.canonical_state())
                for chain_id, node in references.items()
            ],
            matrix=matrix_column(log),
            stats=dict(sorted(network.stats.items())),
            events=list(network.events),
            chain_events=chain_events,
            registries={
                chain_id: registry_view(node.canonical_state())
                for chain_id, node in references.items()
            },
        )


def _node_summary(node: NodeInstance) -> NodeSummary:
    state = node.canonical_state()
    return NodeSummary(
        node_id=node.node_id,
        chain_id=node.chain_id,
        tip_height=node.tip_height(),
        head=node.head,
        finalized_height=node.finalized_height,
        state_hash=state.state_hash(),
        protocol_version=node.rules.version,
        rejected_blocks=len(node.rejected),
    )


def _proposal_outcomes(
    chain_id: str, state: ChainState
) -> list[ProposalOutcome]:
    outcomes = []
    for proposal_id in sorted(state.proposals):
        proposal = state.proposals[proposal_id]
        result = proposal.result
        action = proposal.action.type
        if isinstance(proposal.action, ProtocolUpgrade):
            action = f"upgrade:{proposal.action.compatibility.value}"
        outcomes.append(
            ProposalOutcome(
                chain_id=chain_id,
                proposal_id=proposal_id,
                status=proposal.status.value,
                action=action,
                scheme=proposal.scheme.kind.value,
                yes_weight=str(result.yes_weight) if result else None,
                no_weight=str(result.no_weight) if result else None,
                turnout=str(result.turnout_fraction) if result else None,
            )
        )
    return outcomes


def _supply_summary(chain_id: str, state: ChainState) -> SupplySummary:
    locked = sum(
        lock.amount
        for address in state.accounts
        for lock in state.active_locks(address)
    )
    return SupplySummary(
        chain_id=chain_id,
        genesis=state.supply.genesis,
        minted=state.supply.minted,
        slashed=state.supply.slashed,
        destroyed=state.supply.destroyed,
        total_balance=state.total_balance(),
        locked=locked,
        reconciles=state.supply_reconciles(),
    )


def run_simulation(
    config: ScenarioConfig, settings: GovchainSettings | None = None
) -> RunReport:
    return Simulation(config, settings).run()

