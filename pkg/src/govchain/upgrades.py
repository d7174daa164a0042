"""Protocol versions and the soft/hard fork acceptance rules."""

from __future__ import annotations

from typing import TYPE_CHECKING

import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import NonNegativeInt
from pydantic import PositiveInt

from govchain.blocks import BlockHeader
from govchain.exceptions import UpgradeError
from govchain.proposals import Compatibility
from govchain.proposals import ProposalStatus
from govchain.proposals import ProtocolUpgrade
from govchain.state import ChainState

if TYPE_CHECKING:
    from govchain.node import NodeInstance

logger = structlog.get_logger()


class RuleSet(BaseModel):
    """Node-local validation rules.

    Attributes:
        version: Protocol version this node runs and produces blocks at.
        hard_floor: Lowest block version accepted from ``floor_height``
            on, raised by an enacted hard fork.
        floor_height: First height the floor applies to.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    version: PositiveInt = 1
    hard_floor: PositiveInt = 1
    floor_height: NonNegativeInt = 0


def soft_fork_versions(state: ChainState) -> set[int]:
    """Versions introduced by approved soft-fork upgrades."""
    return {
        proposal.action.new_version
        for proposal in state.proposals.values()
        if isinstance(proposal.action, ProtocolUpgrade)
        and proposal.action.compatibility is Compatibility.SOFT_FORK
        and proposal.status
        in (ProposalStatus.APPROVED, ProposalStatus.ENACTED)
    }


def accepts_version(
    rules: RuleSet, parent_state: ChainState, header: BlockHeader
) -> bool:
    """Whether a node running ``rules`` accepts a block's version.

    Newer versions are accepted only when a soft fork introduced them;
    after a hard fork the node refuses blocks below the new version.
    """
    block_version = header.protocol_version
    if header.height >= rules.floor_height and block_version < (
        rules.hard_floor
    ):
        return False
    if block_version <= rules.version:
        return True
    return block_version in soft_fork_versions(parent_state)


def pending_upgrades(state: ChainState, rules: RuleSet) -> list[str]:
    """Enacted upgrades above the node's version, in version order."""
    candidates = [
        proposal
        for proposal in state.proposals.values()
        if proposal.status is ProposalStatus.ENACTED
        and isinstance(proposal.action, ProtocolUpgrade)
        and proposal.action.new_version > rules.version
    ]
    candidates.sort(key=lambda p: (p.action.new_version, p.id))
    return [proposal.id for proposal in candidates]


def upgraded_rules(
    rules: RuleSet, state: ChainState, proposal_id: str
) -> RuleSet:
    """Rules after enacting ``proposal_id`` on top of ``state``.

    Raises:
        UpgradeError: the proposal is not an approved upgrade, its
            activation height is not reached, or it would not raise
            the version.
    """
    proposal = state.proposals.get(proposal_id)
    if proposal is None or not isinstance(proposal.action, ProtocolUpgrade):
        msg = f"'{proposal_id}' is not an upgrade proposal"
        raise UpgradeError(msg)
    if proposal.status not in (
        ProposalStatus.APPROVED,
        ProposalStatus.ENACTED,
    ):
        msg = f"upgrade '{proposal_id}' is {proposal.status.value}"
        raise UpgradeError(msg)
    upgrade = proposal.action
    if state.height < upgrade.activation_height:
        msg = (
            f"upgrade '{proposal_id}' activates at height "
            f"{upgrade.activation_height} (now {state.height})"
        )
        raise UpgradeError(msg)
    if upgrade.new_version <= rules.version:
        msg = f"already running version {rules.version}"
        raise UpgradeError(msg)

    if upgrade.compatibility is Compatibility.HARD_FORK:
        return RuleSet(
            version=upgrade.new_version,
            hard_floor=upgrade.new_version,
            floor_height=upgrade.activation_height + 1,
        )
    return rules.model_copy(update={"version": upgrade.new_version})


def enact_upgrade(node: NodeInstance, proposal_id: str) -> NodeInstance:
    """Switch ``node`` to the version of an approved upgrade."""
    state = node.canonical_state()
    node.rules = upgraded_rules(node.rules, state, proposal_id)
    node.record(
        "upgrade.adopted",
        {
            "proposal_id": proposal_id,
            "version": node.rules.version,
            "height": state.height,
        },
    )
    logger.info(
        "upgrade adopted",
        node=node.node_id,
        proposal_id=proposal_id,
        version=node.rules.version,
    )
    return node
