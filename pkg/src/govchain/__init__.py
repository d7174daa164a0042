"""govchain: blockchain governance pattern simulator.

Deterministic multi-node chains with pluggable governance components,
scripted scenarios and an evidence-based conformance matrix.
"""

from __future__ import annotations

# Configuration
from govchain.config import GovchainSettings
from govchain.config import Pattern
from govchain.config import ScenarioConfig
from govchain.config import load_scenario
from govchain.config import parse_scenario

# Primitives
from govchain.crypto import hash_bytes

# Exceptions
from govchain.exceptions import ConfigurationError
from govchain.exceptions import GovchainError
from govchain.exceptions import GovernanceError
from govchain.exceptions import InvariantViolation
from govchain.exceptions import LedgerError
from govchain.exceptions import NetworkFrozenError
from govchain.exceptions import ScenarioValidationError

# Ledger
from govchain.ledger import apply_block
from govchain.ledger import extract_logs
from govchain.ledger import trace_sender
from govchain.merkle import merkle_proof
from govchain.merkle import merkle_root
from govchain.merkle import merkle_verify

# Scenarios and reports
from govchain.presets import preset
from govchain.report import ConformanceMatrix
from govchain.report import RunReport
from govchain.report import conformance_matrix
from govchain.report import load_report
from govchain.runner import run_batch
from govchain.runner import run_scenario
from govchain.simulator import Simulation
from govchain.snapshot import export_snapshot
from govchain.snapshot import import_snapshot

__all__ = [
    "ConfigurationError",
    "ConformanceMatrix",
    "GovchainError",
    "GovchainSettings",
    "GovernanceError",
    "InvariantViolation",
    "LedgerError",
    "NetworkFrozenError",
    "Pattern",
    "RunReport",
    "ScenarioConfig",
    "ScenarioValidationError",
    "Simulation",
    "apply_block",
    "conformance_matrix",
    "export_snapshot",
    "extract_logs",
    "hash_bytes",
    "import_snapshot",
    "load_report",
    "load_scenario",
    "merkle_proof",
    "merkle_root",
    "merkle_verify",
    "parse_scenario",
    "preset",
    "run_batch",
    "run_scenario",
    "trace_sender",
]

try:
    from importlib.metadata import version

    __version__ = version("govchain")
except Exception:
    __version__ = "0.0.0.dev0"
