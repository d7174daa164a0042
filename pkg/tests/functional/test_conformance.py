"""The reference profiles reproduce the expected conformance matrix."""

from __future__ import annotations

import json

import pytest

from govchain import cli
from govchain.config import GovchainSettings
from govchain.config import Pattern
from govchain.config import load_scenario
from govchain.presets import POLKADOT_LIKE
from govchain.presets import QUORUM_LIKE
from govchain.presets import preset
from govchain.presets import preset_document
from govchain.report import TABLE_ROWS
from govchain.report import CellState
from govchain.report import conformance_matrix
from govchain.runner import run_scenario

from .chains import SCENARIOS_DIR

ABSENT = {
    POLKADOT_LIKE: {
        Pattern.PARTICIPATION_PERMISSION,
        Pattern.LOG_EXTRACTOR,
    },
    QUORUM_LIKE: {
        Pattern.SHARDED_CHAIN,
        Pattern.DATA_MIGRATOR,
        Pattern.TOKEN_LOCKER,
        Pattern.CARBONVOTE,
    },
}


@pytest.fixture(scope="module")
def matrix():
    reports = [run_scenario(preset(name)) for name in ABSENT]
    return conformance_matrix(reports)


class TestReferenceMatrix:
    """Presence of each component under both reference profiles."""

    def test_presence(self, matrix):
        """Test every table row against the expected presence."""
        expected = {
            pattern.value: {
                profile: pattern not in absent
                for profile, absent in ABSENT.items()
            }
            for pattern in TABLE_ROWS
        }
        assert matrix.presence() == expected

    def test_consortium_incentives_disabled(self, matrix):
        """Test the consortium profile has incentives switched off."""
        cell = matrix.rows[Pattern.INCENTIVE_DISTRIBUTOR][QUORUM_LIKE]
        assert cell.state is CellState.DISABLED

    def test_present_cells_name_a_mechanism(self, matrix):
        """Test every present cell says how the component showed up."""
        for pattern in TABLE_ROWS:
            for cell in matrix.rows[pattern].values():
                if cell.state.present:
                    assert cell.mechanism


class TestShippedScenarios:
    """The example scenarios replay and reconcile."""

    @pytest.mark.parametrize("name", [POLKADOT_LIKE, QUORUM_LIKE])
    def test_presets_match_examples(self, name):
        """Test the shipped profile documents equal the presets."""
        path = SCENARIOS_DIR / f"{name}.json"
        assert json.loads(path.read_text()) == preset_document(name)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "path",
        sorted(SCENARIOS_DIR.glob("*.json")),
        ids=lambda path: path.stem,
    )
    def test_replay_is_bytewise(self, path, tmp_path):
        """Test a stored report replays byte for byte."""
        settings = GovchainSettings(reports_dir=str(tmp_path))
        report_path = tmp_path / f"{path.stem}-report.json"
        report = run_scenario(load_scenario(path), report_path, settings)
        assert all(supply.reconciles for supply in report.supply)
        output = cli.cmd_replay(str(path), str(report_path), settings)
        assert output == f"replay matches {report_path}"
