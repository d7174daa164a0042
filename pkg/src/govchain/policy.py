"""GovernancePolicy: the pluggable pattern configuration of one chain."""

from __future__ import annotations

from enum import StrEnum
from fractions import Fraction

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt
from pydantic import field_validator

from govchain.crypto import HexAddress
from govchain.crypto import HexKey
from govchain.transactions import FilterRule
from govchain.transactions import RoleName
from govchain.units import Ratio


class DecentralisationMode(StrEnum):
    PERMISSIONLESS = "permissionless"
    PERMISSIONED = "permissioned"


class SelectionMode(StrEnum):
    PROOF_OF_STAKE = "proof-of-stake"
    PROOF_OF_AUTHORITY = "proof-of-authority"
    ROUND_ROBIN = "round-robin"
    PROOF_OF_WORK = "proof-of-work"


class FinalityMode(StrEnum):
    K_DEEP = "k-deep"
    IMMEDIATE = "immediate"
    SUPERMAJORITY_VOTE = "supermajority-vote"


class _Policy(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ValidatorSelectionPolicy(_Policy):
    """Who may append the block of a round.

    PoS draws from active candidacy (and nomination) stake; PoA and
    round-robin rotate through ``authorities``; proof-of-work is a
    round-robin stub that only produces every ``pow_difficulty`` slots.
    """

    mode: SelectionMode = SelectionMode.PROOF_OF_AUTHORITY
    authorities: list[HexAddress] = Field(default_factory=list)
    pow_difficulty: PositiveInt = 1


class FinalityPolicy(_Policy):
    mode: FinalityMode = FinalityMode.K_DEEP
    k: NonNegativeInt = 6
    quorum_fraction: Ratio = Fraction(2, 3)

    @field_validator("quorum_fraction")
    @classmethod
    def _check_quorum(cls, value: Fraction) -> Fraction:
        if not 0 <= value < 1:
            msg = "quorum_fraction must lie in [0, 1)"
            raise ValueError(msg)
        return value


class IncentivePolicy(_Policy):
    """Block rewards and the validator/treasury fee split.

    The treasury receives ``1 - validator_fee_share`` of fees. When
    disabled, consensus neither mints nor moves tokens and collected fees
    are destroyed.
    """

    enabled: bool = True
    block_reward: NonNegativeInt = 10
    validator_fee_share: Ratio = Fraction(1, 2)
    treasury: HexAddress | None = None

    @field_validator("validator_fee_share")
    @classmethod
    def _check_share(cls, value: Fraction) -> Fraction:
        if not 0 <= value <= 1:
            msg = "validator_fee_share must lie in [0, 1]"
            raise ValueError(msg)
        return value

    @property
    def treasury_fee_share(self) -> Fraction:
        return 1 - self.validator_fee_share


class GovernancePolicy(_Policy):
    """Which patterns are active on a chain and with what parameters."""

    mode: DecentralisationMode = DecentralisationMode.PERMISSIONLESS
    seed: int = 0
    selection: ValidatorSelectionPolicy = Field(
        default_factory=ValidatorSelectionPolicy
    )
    finality: FinalityPolicy = Field(default_factory=FinalityPolicy)
    incentive: IncentivePolicy = Field(default_factory=IncentivePolicy)
    filter_rules: list[FilterRule] = Field(default_factory=list)
    require_deposit: bool = False
    proposal_deposit: NonNegativeInt = 10
    fast_track_window: PositiveInt = 10
    token_locker: bool = True
    scam_list_editors: list[RoleName] = Field(
        default_factory=lambda: [
            RoleName.ADMINISTRATOR,
            RoleName.BENEVOLENT_DICTATOR,
            RoleName.COUNCIL_MEMBER,
        ]
    )
    override_roles: list[RoleName] = Field(
        default_factory=lambda: [
            RoleName.BENEVOLENT_DICTATOR,
            RoleName.COUNCIL_MEMBER,
        ]
    )
    social_contract_setters: list[RoleName] = Field(
        default_factory=lambda: [
            RoleName.DEPLOYER,
            RoleName.BENEVOLENT_DICTATOR,
        ]
    )
    invite_issuers: list[RoleName] = Field(
        default_factory=lambda: [RoleName.DEPLOYER, RoleName.ADMINISTRATOR]
    )
    freezer_eligible: list[HexAddress] = Field(default_factory=list)
    tally_public_key: HexKey | None = None
    cross_chain_tally_keys: dict[str, HexKey] = Field(default_factory=dict)

    @property
    def permissioned(self) -> bool:
        return self.mode is DecentralisationMode.PERMISSIONED
