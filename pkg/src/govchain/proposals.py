"""Improvement proposals, voting schemes, ballots and upgrades."""

from __future__ import annotations

from enum import StrEnum
from fractions import Fraction
from typing import Annotated
from typing import Any
from typing import Literal

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt

from govchain.crypto import HexAddress
from govchain.crypto import HexKey
from govchain.crypto import HexSignature
from govchain.crypto import canonical_json
from govchain.units import Ratio


class ProposalStatus(StrEnum):
    OPEN = "open"
    APPROVED = "approved"
    REJECTED = "rejected"
    CANCELLED = "cancelled"
    ENACTED = "enacted"


STATUS_TRANSITIONS: dict[ProposalStatus, frozenset[ProposalStatus]] = {
    ProposalStatus.OPEN: frozenset(
        {
            ProposalStatus.APPROVED,
            ProposalStatus.REJECTED,
            ProposalStatus.CANCELLED,
        }
    ),
    ProposalStatus.APPROVED: frozenset({ProposalStatus.ENACTED}),
    ProposalStatus.REJECTED: frozenset(),
    ProposalStatus.CANCELLED: frozenset(),
    ProposalStatus.ENACTED: frozenset(),
}


class SchemeKind(StrEnum):
    ONE_ADDRESS_ONE_VOTE = "one-address-one-vote"
    CARBONVOTE = "carbonvote"
    QUADRATIC = "quadratic"
    LIQUID_DEMOCRACY = "liquid-democracy"
    CROSS_CHAIN_TOKEN = "cross-chain-token"


class Choice(StrEnum):
    YES = "yes"
    NO = "no"


class Compatibility(StrEnum):
    SOFT_FORK = "soft-fork"
    HARD_FORK = "hard-fork"


class ThresholdKind(StrEnum):
    FIXED = "fixed"
    ADAPTIVE_TURNOUT = "adaptive-turnout"
    UNANIMOUS = "unanimous"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class VotingScheme(_Frozen):
    """How ballots are weighted.

    Attributes:
        kind: The voting pattern.
        snapshot_height: Carbonvote balance snapshot; defaults to the
            submission height.
        lock_weight_factor: Staked-period weighting (0 disables it).
        lock_period_cap: Remaining lock length that earns full weighting.
        cost_account: Receiver of quadratic voting costs; defaults to
            the treasury.
        aux_chain_id: Chain that hosts a cross-chain token vote.
        issued_weights: Mirror-issued voting tokens on an auxiliary chain.
    """

    kind: SchemeKind = SchemeKind.ONE_ADDRESS_ONE_VOTE
    snapshot_height: NonNegativeInt | None = None
    lock_weight_factor: Ratio = Fraction(0)
    lock_period_cap: PositiveInt = 100
    cost_account: HexAddress | None = None
    aux_chain_id: str | None = None
    issued_weights: dict[HexAddress, NonNegativeInt] | None = None


class ThresholdPolicy(_Frozen):
    """Approval threshold on the yes share of cast weight.

    ``adaptive-turnout`` requires ``base - slope * turnout``; with the
    defaults (1, 1/2) low turnout demands a supermajority and full turnout
    a simple majority.
    """

    kind: ThresholdKind = ThresholdKind.FIXED
    fraction: Ratio = Fraction(1, 2)
    base: Ratio = Fraction(1)
    slope: Ratio = Fraction(1, 2)

    def required_share(self, turnout: Fraction) -> Fraction:
        if self.kind is ThresholdKind.ADAPTIVE_TURNOUT:
            return self.base - self.slope * turnout
        if self.kind is ThresholdKind.UNANIMOUS:
            return Fraction(1)
        return self.fraction


class ProtocolUpgrade(_Frozen):
    type: Literal["upgrade"] = "upgrade"
    new_version: PositiveInt
    compatibility: Compatibility
    activation_height: NonNegativeInt


class ParameterChange(_Frozen):
    type: Literal["parameter"] = "parameter"
    key: str
    value: Any


class FreezeAction(_Frozen):
    type: Literal["freeze"] = "freeze"
    target: str
    freeze: bool = True


class SignalAction(_Frozen):
    """Non-binding question, e.g. an auxiliary vote for ``reference``."""

    type: Literal["signal"] = "signal"
    reference: str


ProposalAction = Annotated[
    ProtocolUpgrade | ParameterChange | FreezeAction | SignalAction,
    Field(discriminator="type"),
]


class Ballot(_Frozen):
    voter: HexAddress
    proposal_id: str
    choice: Choice
    votes_cast: PositiveInt = 1
    cost_paid: NonNegativeInt = 0
    height: NonNegativeInt = 0


class TallyResult(_Frozen):
    yes_weight: Ratio
    no_weight: Ratio
    turnout_fraction: Ratio
    required_share: Ratio
    approved: bool

    @property
    def outcome(self) -> ProposalStatus:
        if self.approved:
            return ProposalStatus.APPROVED
        return ProposalStatus.REJECTED


class Proposal(BaseModel):
    """An improvement proposal as recorded in chain state."""

    model_config = ConfigDict(extra="forbid")

    id: str
    proposer: HexAddress
    description: str = ""
    action: ProposalAction
    scheme: VotingScheme = VotingScheme()
    threshold: ThresholdPolicy = ThresholdPolicy()
    deposit_lock_id: str | None = None
    submitted_height: NonNegativeInt
    voting_deadline: NonNegativeInt
    status: ProposalStatus = ProposalStatus.OPEN
    snapshot: dict[HexAddress, NonNegativeInt] | None = None
    lock_fractions: dict[HexAddress, Ratio] | None = None
    result: TallyResult | None = None


class CrossChainResult(_Frozen):
    """Tally of an auxiliary-chain vote, signed by its tally key."""

    home_chain_id: str
    proposal_id: str
    aux_chain_id: str
    yes_weight: Ratio
    no_weight: Ratio
    turnout_fraction: Ratio
    approved: bool
    tally_public_key: HexKey
    signature: HexSignature | None = None

    def signing_bytes(self) -> bytes:
        return canonical_json(
            self.model_dump(mode="json", exclude={"signature"})
        )
