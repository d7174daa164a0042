"""Deterministic in-process message fabric and the network freezer."""

from __future__ import annotations

import dataclasses
import heapq
import itertools
import random
from collections import Counter
from collections.abc import Iterable
from collections.abc import Sequence
from fractions import Fraction
from typing import Any

import structlog

from govchain.consensus import validator_weights
from govchain.exceptions import AuthorizationError
from govchain.exceptions import NetworkError
from govchain.node import BlockMessage
from govchain.node import CrossChainMessage
from govchain.node import Message
from govchain.node import NodeInstance
from govchain.node import Outgoing
from govchain.node import ShardBlockMessage
from govchain.node import SimEvent
from govchain.node import TxMessage
from govchain.pool import TxVerdict
from govchain.transactions import Transaction

logger = structlog.get_logger()

SCOPE_ALL = "all"
VALIDATOR_VOTE = "validator-vote"


@dataclasses.dataclass(frozen=True)
class Partition:
    """Groups that cannot reach each other during ``[start, end)``.

    Nodes named in no group form one further group of their own.
    """

    start: int
    end: int
    groups: tuple[frozenset[str], ...]

    def active(self, tick: int) -> bool:
        return self.start <= tick < self.end

    def group_of(self, node_id: str) -> int:
        for index, group in enumerate(self.groups):
            if node_id in group:
                return index
        return len(self.groups)


@dataclasses.dataclass(frozen=True, order=True)
class Delivery:
    deliver_at: int
    seq: int
    origin: str = dataclasses.field(compare=False)
    recipient: str = dataclasses.field(compare=False)
    message: Message = dataclasses.field(compare=False)


class SimNetwork:
    """Full-mesh broadcast between node instances on a logical clock.

    Delivery order is ``(delivery tick, send sequence)``; the only
    randomness is the optional per-message jitter drawn from a
    generator seeded with ``seed``, consumed in send order.

    Attributes:
        clock: Current tick.
        frozen_all: Global freeze flag.
        frozen_chains: Chains whose traffic alone is suspended.
        relay_chain_id: Receives every shard block offered for inclusion.
        shard_chain_ids: Chains whose blocks are offered to the relay.
        home_nodes: Per chain, the node relaying cross-chain results.
    """

    def __init__(
        self,
        *,
        seed: int = 0,
        default_delay: int = 0,
        jitter: int = 0,
        freeze_admins: Iterable[str] = (),
        freeze_quorum: Fraction = Fraction(2, 3),
    ):
        if default_delay < 0 or jitter < 0:
            msg = "delays must be non-negative"
            raise NetworkError(msg)
        self.seed = seed
        self.default_delay = default_delay
        self.jitter = jitter
        self.freeze_admins = set(freeze_admins)
        self.freeze_quorum = freeze_quorum
        self.clock = 0
        self.nodes: dict[str, NodeInstance] = {}
        self.delays: dict[tuple[str, str], int] = {}
        self.partitions: list[Partition] = []
        self.frozen_all = False
        self.frozen_chains: set[str] = set()
        self.relay_chain_id: str | None = None
        self.shard_chain_ids: set[str] = set()
        self.home_nodes: dict[str, str] = {}
        self.events: list[SimEvent] = []
        self.stats: Counter[str] = Counter()
        self._queue: list[Delivery] = []
        self._seq = itertools.count()
        self._rng = random.Random(seed)

    # -- topology ---------------------------------------------------------

    def add_node(self, node: NodeInstance) -> NodeInstance:
        if node.node_id in self.nodes:
            msg = f"duplicate node id '{node.node_id}'"
            raise NetworkError(msg)
        node.sink = self.events.append
        node.clock = self.clock
        self.nodes[node.node_id] = node
        self.home_nodes.setdefault(node.chain_id, node.node_id)
        return node

    def nodes_of(self, chain_id: str) -> list[NodeInstance]:
        return [n for n in self.nodes.values() if n.chain_id == chain_id]

    @property
    def chain_ids(self) -> list[str]:
        return list(dict.fromkeys(n.chain_id for n in self.nodes.values()))

    def set_delay(self, origin: str, recipient: str, delay: int) -> None:
        if delay < 0:
            msg = f"negative delay on link {origin}->{recipient}"
            raise NetworkError(msg)
        self.delays[(origin, recipient)] = delay

    def add_partition(
        self, start: int, end: int, groups: Sequence[Iterable[str]]
    ) -> Partition:
        if end <= start:
            msg = f"partition window [{start}, {end}) is empty"
            raise NetworkError(msg)
        partition = Partition(
            start, end, tuple(frozenset(group) for group in groups)
        )
        self.partitions.append(partition)
        return partition

    def separated(self, origin: str, recipient: str) -> bool:
        return any(
            p.group_of(origin) != p.group_of(recipient)
            for p in self.partitions
            if p.active(self.clock)
        )

    def record(
        self, topic: str, payload: dict[str, Any] | None = None
    ) -> SimEvent:
        event = SimEvent(
            tick=self.clock,
            source="network",
            topic=topic,
            payload=payload or {},
        )
        self.events.append(event)
        return event

    # -- freezer ----------------------------------------------------------

    def is_frozen(self, chain_id: str | None = None) -> bool:
        if self.frozen_all:
            return True
        return chain_id is not None and chain_id in self.frozen_chains

    def _governing_chain(self, chain_id: str | None) -> str:
        """Chain whose validators vote on a freeze of ``chain_id``.

        Shards are governed by the relay chain.
        """
        if chain_id is not None and chain_id not in self.shard_chain_ids:
            return chain_id
        if self.relay_chain_id is not None:
            return self.relay_chain_id
        if not self.nodes:
            msg = "network has no nodes"
            raise NetworkError(msg)
        return next(iter(self.nodes.values())).chain_id

    def _authorize(
        self,
        verb: str,
        actor: str | None,
        votes: Iterable[str] | None,
        chain_id: str | None,
    ) -> tuple[bool, dict[str, Any]]:
        scope = chain_id or SCOPE_ALL
        if actor is not None:
            if actor not in self.freeze_admins:
                self.record(
                    f"{verb}.rejected",
                    {"actor": actor, "scope": scope},
                )
                msg = f"{actor} may not {verb} the network"
                raise AuthorizationError(msg)
            return True, {"scope": scope, "authority": actor}
        if votes is None:
            msg = f"{verb} needs an administrator or a validator vote"
            raise AuthorizationError(msg)

        governing = self._governing_chain(chain_id)
        members = self.nodes_of(governing)
        if not members:
            msg = f"unknown chain '{governing}'"
            raise NetworkError(msg)
        reference = members[0]
        weights = validator_weights(reference.canonical_state())
        total = sum(weights.values())
        voters = set(votes)
        yes = sum(weights.get(address, 0) for address in voters)
        share = Fraction(yes, total) if total else Fraction(0)
        details = {
            "scope": scope,
            "authority": VALIDATOR_VOTE,
            "chain_id": governing,
            "yes_weight": yes,
            "total_weight": total,
        }
        if share > self.freeze_quorum:
            return True, details
        self.record(f"{verb}.vote-failed", details)
        return False, details

    def freeze_network(
        self,
        actor: str | None = None,
        votes: Iterable[str] | None = None,
        chain_id: str | None = None,
    ) -> bool:
        """Suspend traffic globally or on one chain.

        Either ``actor`` is a freeze administrator, or the addresses in
        ``votes`` hold more than ``freeze_quorum`` of the validator
        weight. Returns whether the network (or chain) is now frozen.

        Raises:
            AuthorizationError: ``actor`` is not an administrator, or
                neither an actor nor a vote was given.
        """
        passed, details = self._authorize("freeze", actor, votes, chain_id)
        if not passed:
            return False
        if chain_id is None:
            self.frozen_all = True
        else:
            self.frozen_chains.add(chain_id)
        details["pending"] = len(self._queue)
        self.record("network.frozen", details)
        logger.info("network frozen", tick=self.clock, **details)
        return True

    def unfreeze_network(
        self,
        actor: str | None = None,
        votes: Iterable[str] | None = None,
        chain_id: str | None = None,
    ) -> bool:
        """Lift a freeze by operator action or a validator recovery vote.

        The retained queue resumes delivering from the next tick.
        """
        if not self.is_frozen(chain_id):
            msg = f"{chain_id or SCOPE_ALL} is not frozen"
            raise NetworkError(msg)
        passed, details = self._authorize(
            "unfreeze", actor, votes, chain_id
        )
        if not passed:
            return False
        if chain_id is None:
            self.frozen_all = False
        else:
            self.frozen_chains.discard(chain_id)
        details["pending"] = len(self._queue)
        self.record("network.unfrozen", details)
        logger.info("network unfrozen", tick=self.clock, **details)
        return True

    # -- sending ----------------------------------------------------------

    def _recipients(self, origin: NodeInstance, message: Message) -> list[str]:
        match message:
            case ShardBlockMessage():
                if self.relay_chain_id is None:
                    return []
                chain_id = self.relay_chain_id
            case CrossChainMessage(record=record):
                home = self.home_nodes.get(record.home_chain_id)
                return [home] if home is not None else []
            case _:
                chain_id = origin.chain_id
        return [
            node.node_id
            for node in self.nodes_of(chain_id)
            if node.node_id != origin.node_id
        ]

    def _delay(self, origin: str, recipient: str) -> int:
        delay = self.delays.get((origin, recipient), self.default_delay)
        if self.jitter:
            delay += self._rng.randint(0, self.jitter)
        return delay

    def _drop(self, origin: str, message: Message, reason: str) -> None:
        self.stats[f"dropped.{reason}"] += 1
        self.record(
            "message.dropped",
            {
                "from": origin,
                "kind": type(message).__name__,
                "reason": reason,
            },
        )

    def send(
        self, origin_id: str, recipient_id: str, message: Message
    ) -> tuple[int, str] | None:
        """Queue one message; returns its ``(tick, recipient)`` slot."""
        origin = self.nodes[origin_id]
        if recipient_id not in self.nodes:
            msg = f"unknown recipient '{recipient_id}'"
            raise NetworkError(msg)
        target = self.nodes[recipient_id]
        if self.is_frozen(origin.chain_id) or self.is_frozen(
            target.chain_id
        ):
            self._drop(origin_id, message, "frozen")
            return None
        if self.separated(origin_id, recipient_id):
            self.stats["dropped.partition"] += 1
            return None
        deliver_at = self.clock + 1 + self._delay(origin_id, recipient_id)
        heapq.heappush(
            self._queue,
            Delivery(
                deliver_at, next(self._seq), origin_id, recipient_id, message
            ),
        )
        self.stats["sent"] += 1
        return deliver_at, recipient_id

    def broadcast(
        self, origin_id: str, message: Message
    ) -> list[tuple[int, str]]:
        """Queue ``message`` to every peer; returns the delivery schedule.

        A frozen network drops the message and logs why.
        """
        origin = self.nodes[origin_id]
        if self.is_frozen(origin.chain_id):
            self._drop(origin_id, message, "frozen")
            return []
        schedule = []
        for recipient in self._recipients(origin, message):
            slot = self.send(origin_id, recipient, message)
            if slot is not None:
                schedule.append(slot)
        return schedule

    def route(self, origin_id: str, outgoing: Iterable[Outgoing]) -> None:
        for recipient, message in outgoing:
            if recipient is None:
                self.broadcast(origin_id, message)
            else:
                self.send(origin_id, recipient, message)

    def submit(self, node_id: str, tx: Transaction) -> TxVerdict:
        """Hand a client transaction to a node, which gossips it on."""
        node = self.nodes[node_id]
        verdict = node.submit_transaction(tx)
        if verdict.accepted:
            self.broadcast(node_id, TxMessage(tx))
        return verdict

    @property
    def pending(self) -> int:
        return len(self._queue)

    # -- the tick loop ----------------------------------------------------

    def deliver_due(self) -> int:
        """Deliver everything due by now; frozen traffic stays queued."""
        if self.frozen_all:
            return 0
        delivered = 0
        retained: list[Delivery] = []
        while self._queue and self._queue[0].deliver_at <= self.clock:
            item = heapq.heappop(self._queue)
            origin = self.nodes[item.origin]
            target = self.nodes[item.recipient]
            if self.is_frozen(origin.chain_id) or self.is_frozen(
                target.chain_id
            ):
                retained.append(item)
                continue
            if self.separated(item.origin, item.recipient):
                self.stats["dropped.partition"] += 1
                continue
            replies = target.handle(item.origin, item.message)
            self.stats["delivered"] += 1
            delivered += 1
            self.route(item.recipient, replies)
        for item in retained:
            heapq.heappush(self._queue, item)
        return delivered

    def _announce_partitions(self) -> None:
        for partition in self.partitions:
            groups = [sorted(group) for group in partition.groups]
            if partition.start == self.clock:
                self.record("network.partitioned", {"groups": groups})
            elif partition.end == self.clock:
                self.record("network.healed", {"groups": groups})

    def produce(self, node: NodeInstance) -> None:
        block = node.produce(self.clock)
        if block is None:
            return
        replies = node.receive_block(block)
        self.route(node.node_id, [(None, BlockMessage(block)), *replies])
        if node.chain_id in self.shard_chain_ids:
            self.broadcast(node.node_id, ShardBlockMessage(block))

    def advance(self) -> int:
        """Run one tick: deliveries first, then block production.

        Nodes on frozen chains neither receive nor produce.
        """
        self.clock += 1
        for node in self.nodes.values():
            node.clock = self.clock
        self._announce_partitions()
        delivered = self.deliver_due()
        for node in self.nodes.values():
            if not self.is_frozen(node.chain_id):
                self.produce(node)
        return delivered

    def run(self, ticks: int) -> None:
        for _ in range(ticks):
            self.advance()

    def tips(self) -> dict[str, int]:
        return {
            node_id: node.tip_height() for node_id, node in self.nodes.items()
        }
