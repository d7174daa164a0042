"""Tests for govchain.cli module."""

from __future__ import annotations

import json

import pytest
from rich.console import Console

from govchain import cli
from govchain.config import GovchainSettings
from govchain.presets import QUORUM_LIKE
from govchain.presets import preset_document

SCENARIO = {
    "chain_id": "cli",
    "profile": "cli-demo",
    "seed": 2,
    "horizon": 6,
    "consensus": {"finality": "immediate"},
    "incentive": {"enabled": False},
    "actors": [
        {"name": "v1", "balance": 10},
        {"name": "alice", "balance": 50},
    ],
    "network": {"nodes": [{"name": "v1"}]},
    "actions": [
        {
            "tick": 1,
            "actor": "alice",
            "action": "transfer",
            "params": {"to": "v1", "amount": 5},
        }
    ],
}


@pytest.fixture
def settings(temp_dir):
    return GovchainSettings(reports_dir=str(temp_dir / "reports"))


@pytest.fixture
def scenario_file(temp_dir):
    path = temp_dir / "demo.json"
    path.write_text(json.dumps(SCENARIO))
    return path


@pytest.fixture
def report_file(temp_dir, scenario_file, settings):
    path = temp_dir / "demo-report.json"
    cli.cmd_run(str(scenario_file), str(path), settings)
    return path


class TestRun:
    """Test the run command."""

    def test_default_output_path(self, scenario_file, settings):
        """Test the report lands in the reports directory."""
        output = cli.cmd_run(str(scenario_file), None, settings)
        path = settings.parse_reports_dir() / "demo.json"
        assert path.exists()
        assert f"report: {path}" in output
        assert "profile: cli-demo" in output
        assert "v1 [cli]" in output

    def test_missing_scenario(self, temp_dir, settings):
        """Test a missing file is reported as an error string."""
        output = cli.cmd_run(str(temp_dir / "absent.json"), None, settings)
        assert output.startswith("Error:")
        assert "not found" in output

    def test_invalid_scenario(self, temp_dir, settings):
        """Test validation errors name the offending field."""
        path = temp_dir / "bad.json"
        path.write_text(json.dumps({**SCENARIO, "horizon": 0}))
        output = cli.cmd_run(str(path), None, settings)
        assert output.startswith("Error: horizon")


class TestPreset:
    """Test the preset command."""

    def test_document(self):
        """Test the document form prints the scenario."""
        output = cli.cmd_preset(
            QUORUM_LIKE, None, GovchainSettings(), document=True
        )
        assert json.loads(output) == preset_document(QUORUM_LIKE)

    def test_document_to_file(self, temp_dir):
        """Test the document can be written to a file."""
        path = temp_dir / "quorum.json"
        output = cli.cmd_preset(
            QUORUM_LIKE, str(path), GovchainSettings(), document=True
        )
        assert output == f"scenario written: {path}"
        assert json.loads(path.read_text())["profile"] == QUORUM_LIKE

    def test_unknown_preset(self):
        """Test an unknown preset is reported as an error string."""
        output = cli.cmd_preset("bitcoin-like", None, GovchainSettings())
        assert output.startswith("Error: unknown preset")


class TestMatrix:
    """Test the matrix command."""

    def test_plain(self, report_file):
        """Test the plain table has one column per report."""
        output = cli.cmd_matrix([str(report_file)])
        assert output.splitlines()[0].split() == ["component", "cli-demo"]
        assert "validator-selection" in output

    def test_json(self, report_file):
        """Test the JSON form lists profiles and rows."""
        data = json.loads(cli.cmd_matrix([str(report_file)], output="json"))
        assert data["profiles"] == ["cli-demo"]
        cell = data["rows"]["validator-selection"]["cli-demo"]
        assert cell["state"] == "active"

    def test_rich(self, report_file):
        """Test the rich table is printed to the console."""
        console = Console(record=True, width=200)
        output = cli.cmd_matrix(
            [str(report_file)], output="rich", console=console
        )
        assert output == ""
        assert "Conformance matrix" in console.export_text()

    def test_missing_report(self, temp_dir):
        """Test a missing report is reported as an error string."""
        output = cli.cmd_matrix([str(temp_dir / "absent.json")])
        assert output.startswith("Error:")


class TestLogs:
    """Test the logs command."""

    def test_topic_filter(self, report_file):
        """Test only events of the topic are printed."""
        output = cli.cmd_logs(str(report_file), topic="transfer")
        records = [json.loads(line) for line in output.splitlines()]
        assert len(records) == 1
        assert records[0]["chain_id"] == "cli"
        assert records[0]["payload"]["amount"] == 5

    def test_height_range(self, report_file):
        """Test the height window bounds the events."""
        output = cli.cmd_logs(str(report_file), height_from=3, height_to=4)
        heights = {json.loads(line)["height"] for line in output.splitlines()}
        assert heights <= {3, 4}

    def test_inverted_range(self, report_file):
        """Test an inverted window is an error."""
        output = cli.cmd_logs(str(report_file), height_from=4, height_to=1)
        assert output.startswith("Error: inverted height range")

    def test_unknown_chain(self, report_file):
        """Test unknown chains list the available ones."""
        output = cli.cmd_logs(str(report_file), chain_id="other")
        assert output == (
            "Error: Chain 'other' not in report. Available chains: cli"
        )


class TestReplay:
    """Test the replay command."""

    def test_matches(self, scenario_file, report_file, settings):
        """Test an untouched report replays byte for byte."""
        output = cli.cmd_replay(
            str(scenario_file), str(report_file), settings
        )
        assert output == f"replay matches {report_file}"

    def test_mismatch(self, scenario_file, report_file, settings):
        """Test a changed report yields a diff excerpt."""
        report_file.write_text(
            report_file.read_text().replace(
                '\n  "seed": 2,', '\n  "seed": 3,'
            )
        )
        output = cli.cmd_replay(
            str(scenario_file), str(report_file), settings
        )
        assert output.startswith("Error: Replay differs")
        assert '-  "seed": 3,' in output

    def test_unreadable_expectation(self, scenario_file, temp_dir, settings):
        """Test a missing expected report is an error."""
        output = cli.cmd_replay(
            str(scenario_file), str(temp_dir / "absent.json"), settings
        )
        assert output.startswith("Error: Cannot read expected report")


class TestRegistry:
    """Test the registry command."""

    def test_members(self, report_file):
        """Test members are listed for the reference chain."""
        output = cli.cmd_registry(str(report_file), "members")
        assert output.splitlines()[0] == "members [cli]"
        assert len(output.splitlines()) == 3

    def test_empty_registry(self, report_file):
        """Test an empty registry says so."""
        output = cli.cmd_registry(str(report_file), "scam-list")
        assert output == "scam-list [cli]: empty"

    def test_unknown_chain(self, report_file):
        """Test an unknown chain is an error."""
        output = cli.cmd_registry(str(report_file), "roles", "other")
        assert output.startswith("Error: Chain 'other' not in report")


class TestMain:
    """Test the entry point."""

    def test_success(self, scenario_file, temp_dir, capsys):
        """Test success prints to stdout and exits with 0."""
        out = temp_dir / "main.json"
        code = cli.main(["run", str(scenario_file), "--out", str(out)])
        assert code == 0
        assert "profile: cli-demo" in capsys.readouterr().out

    def test_failure(self, temp_dir, capsys):
        """Test errors go to stderr with a nonzero status."""
        code = cli.main(["run", str(temp_dir / "absent.json")])
        captured = capsys.readouterr()
        assert code == 1
        assert captured.err.startswith("Error:")
        assert captured.out == ""

    def test_command_required(self):
        """Test argparse rejects a missing subcommand."""
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args([])
