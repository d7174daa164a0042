"""Exception hierarchy for govchain."""

from __future__ import annotations


class GovchainError(Exception):
    """Base exception for govchain errors."""


class ConfigurationError(GovchainError):
    """Configuration-related errors."""


class ScenarioValidationError(ConfigurationError):
    """A scenario file violates a field or pattern constraint."""

    def __init__(self, field: str, constraint: str):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")


class CryptoError(GovchainError):
    """Malformed digests, keys or signatures."""


class MerkleError(GovchainError):
    """Merkle tree construction or proof errors."""


class LedgerError(GovchainError):
    """Chain state transition errors."""


class InsufficientBalanceError(LedgerError):
    """Spendable balance does not cover the requested amount."""

    def __init__(self, address: str, required: int, available: int):
        self.address = address
        self.required = required
        self.available = available
        self.shortfall = required - available
        super().__init__(
            f"{address} needs {required} spendable tokens but has "
            f"{available} (shortfall {self.shortfall})"
        )


class UnknownLockError(LedgerError):
    """Lock does not exist or is no longer active."""


class BlockRejectedError(LedgerError):
    """A block failed validation; the state was left unchanged."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        message = f"block rejected ({reason})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class SnapshotIntegrityError(LedgerError):
    """Snapshot content does not match its embedded digests."""


class LogQueryError(LedgerError):
    """Invalid event log query."""


class TransactionError(GovchainError):
    """Transaction construction or lookup errors."""


class UnknownTransactionError(TransactionError):
    """Transaction hash is not part of a (finalized) block."""


class ConsensusError(GovchainError):
    """Consensus engine errors."""


class NoEligibleValidatorError(ConsensusError):
    """No validator can be selected for the round."""


class GovernanceError(GovchainError):
    """Governance kernel errors."""


class MembershipError(GovernanceError):
    """Join or membership check failed."""


class AuthorizationError(GovernanceError):
    """Actor lacks the role required for an action."""


class ProposalError(GovernanceError):
    """Invalid proposal submission or lifecycle transition."""


class VoteRejectedError(GovernanceError):
    """Ballot or delegation was rejected."""


class UpgradeError(GovernanceError):
    """Protocol upgrade cannot be enacted."""


class CrossChainError(GovernanceError):
    """Cross-chain vote could not be run or imported."""


class RegistryError(GovchainError):
    """Built-in contract registry errors."""


class ContractFrozenError(RegistryError):
    """Mutation attempted on a frozen contract."""

    def __init__(self, target: str):
        self.target = target
        super().__init__(f"contract '{target}' is frozen")


class NetworkError(GovchainError):
    """Simulated network errors."""


class NetworkFrozenError(NetworkError):
    """Traffic is suspended by the network freezer."""


class SimulationError(GovchainError):
    """Scenario execution errors."""


class InvariantViolation(SimulationError):
    """A checked safety invariant failed during simulation."""
