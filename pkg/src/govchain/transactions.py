"""Signed transactions, their payloads and filter rule declarations."""

from __future__ import annotations

import functools
from enum import StrEnum
from typing import Annotated
from typing import ClassVar
from typing import Literal

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt

from govchain.crypto import HexAddress
from govchain.crypto import HexDigest
from govchain.crypto import HexKey
from govchain.crypto import HexSignature
from govchain.crypto import KeyPair
from govchain.crypto import canonical_json
from govchain.crypto import hash_object
from govchain.crypto import sign
from govchain.crypto import verify_hex
from govchain.proposals import Choice
from govchain.proposals import CrossChainResult
from govchain.proposals import ProposalAction
from govchain.proposals import ThresholdPolicy
from govchain.proposals import VotingScheme


class PayloadCategory(StrEnum):
    TRANSFER = "transfer"
    LOCK = "lock"
    GOVERNANCE = "governance"
    CONTRACT = "contract"


class LockPurpose(StrEnum):
    VALIDATOR_CANDIDACY = "validator-candidacy"
    PROPOSAL_DEPOSIT = "proposal-deposit"
    VOTE_WEIGHT = "vote-weight"
    NOMINATION = "nomination"


class RoleName(StrEnum):
    DEPLOYER = "deployer"
    ADMINISTRATOR = "administrator"
    BENEVOLENT_DICTATOR = "benevolent-dictator"
    COUNCIL_MEMBER = "council-member"
    ORDINARY = "ordinary"


class OverrideAction(StrEnum):
    CANCEL = "cancel"
    FAST_TRACK = "fast-track"


class _Payload(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    category: ClassVar[PayloadCategory]


class TransferPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.TRANSFER

    kind: Literal["transfer"] = "transfer"
    to: HexAddress
    amount: PositiveInt


class LockPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.LOCK

    kind: Literal["lock"] = "lock"
    amount: PositiveInt
    duration: PositiveInt
    purpose: LockPurpose = LockPurpose.VOTE_WEIGHT


class NominatePayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.LOCK

    kind: Literal["nominate"] = "nominate"
    candidate: HexAddress
    amount: PositiveInt
    duration: PositiveInt


class JoinPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["join"] = "join"
    invite_code: str | None = None
    identity: str | None = None


class IssueInvitePayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["issue-invite"] = "issue-invite"
    code_digest: HexDigest


class GrantRolePayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["grant-role"] = "grant-role"
    address: HexAddress
    role: RoleName


class SubmitProposalPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["submit-proposal"] = "submit-proposal"
    proposal_id: str
    description: str = ""
    action: ProposalAction
    scheme: VotingScheme = VotingScheme()
    threshold: ThresholdPolicy = ThresholdPolicy()
    voting_period: PositiveInt


class CastVotePayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["cast-vote"] = "cast-vote"
    proposal_id: str
    choice: Choice
    votes_cast: NonNegativeInt = 1


class DelegatePayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["delegate"] = "delegate"
    proposal_id: str
    target: HexAddress


class RevokeDelegationPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["revoke-delegation"] = "revoke-delegation"
    proposal_id: str


class OverridePayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["override"] = "override"
    proposal_id: str
    action: OverrideAction
    slash_deposit: bool = False


class CrossChainResultPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.GOVERNANCE

    kind: Literal["cross-chain-result"] = "cross-chain-result"
    record: CrossChainResult


class ScamListAddPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.CONTRACT

    kind: Literal["scam-list-add"] = "scam-list-add"
    address: HexAddress
    note: str = ""


class SocialContractSetPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.CONTRACT

    kind: Literal["social-contract-set"] = "social-contract-set"
    maintainer_spec: str


class FreezeContractPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.CONTRACT

    kind: Literal["freeze-contract"] = "freeze-contract"
    target: str


class UnfreezeContractPayload(_Payload):
    category: ClassVar[PayloadCategory] = PayloadCategory.CONTRACT

    kind: Literal["unfreeze-contract"] = "unfreeze-contract"
    target: str


TxPayload = Annotated[
    TransferPayload
    | LockPayload
    | NominatePayload
    | JoinPayload
    | IssueInvitePayload
    | GrantRolePayload
    | SubmitProposalPayload
    | CastVotePayload
    | DelegatePayload
    | RevokeDelegationPayload
    | OverridePayload
    | CrossChainResultPayload
    | ScamListAddPayload
    | SocialContractSetPayload
    | FreezeContractPayload
    | UnfreezeContractPayload,
    Field(discriminator="kind"),
]

# Payload kind -> built-in contract it mutates (freeze targets).
CONTRACT_TARGETS: dict[str, str] = {
    "scam-list-add": "scam-list",
    "social-contract-set": "social-contract",
    "submit-proposal": "governance",
    "cast-vote": "governance",
    "delegate": "governance",
    "revoke-delegation": "governance",
    "override": "governance",
    "cross-chain-result": "governance",
}


class Transaction(BaseModel):
    """A signed ledger entry.

    The signature covers the hash of every other field, so the
    transaction hash doubles as its identifier.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    chain_id: str
    sender: HexAddress
    public_key: HexKey
    payload: TxPayload
    nonce: NonNegativeInt
    fee: NonNegativeInt = 0
    signature: HexSignature

    def signing_body(self) -> dict[str, object]:
        return self.model_dump(mode="json", exclude={"signature"})

    @functools.cached_property
    def tx_hash(self) -> str:
        return hash_object(self.signing_body()).hex()

    @property
    def category(self) -> PayloadCategory:
        return self.payload.category

    @property
    def payload_size(self) -> int:
        return len(canonical_json(self.payload.model_dump(mode="json")))

    def signature_valid(self) -> bool:
        message = canonical_json(self.signing_body())
        return verify_hex(self.public_key, message, self.signature)


def make_transaction(
    key: KeyPair,
    chain_id: str,
    payload: TxPayload,
    nonce: int,
    fee: int = 0,
) -> Transaction:
    """Build and sign a transaction for ``key``'s address."""
    body = {
        "chain_id": chain_id,
        "sender": key.address,
        "public_key": key.public_hex,
        "payload": payload,
        "nonce": nonce,
        "fee": fee,
    }
    unsigned = Transaction.model_construct(**body, signature="")
    message = canonical_json(unsigned.signing_body())
    return Transaction(**body, signature=sign(key, message).hex())


class FilterKind(StrEnum):
    MAX_PAYLOAD_SIZE = "max-payload-size"
    ALLOWED_PAYLOAD_TYPES = "allowed-payload-types"
    SCAM_LIST_CHECK = "scam-list-check"
    PERMISSIONED_SENDER_CHECK = "permissioned-sender-check"


class FilterRule(BaseModel):
    """Declarative transaction filter.

    Attributes:
        rule_id: Stable identifier surfaced as ``filter.<rule_id>``;
            defaults to the kind.
        kind: Predicate to evaluate.
        max_bytes: Payload size limit (max-payload-size).
        allowed_types: Permitted payload categories (allowed-payload-types).
        senders: Restrict the rule to these senders; ``None`` means all.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    rule_id: str = ""
    kind: FilterKind
    max_bytes: PositiveInt | None = None
    allowed_types: tuple[PayloadCategory, ...] | None = None
    senders: tuple[HexAddress, ...] | None = None

    @property
    def identifier(self) -> str:
        return self.rule_id or self.kind.value

    def applies_to(self, sender: str) -> bool:
        return self.senders is None or sender in self.senders
