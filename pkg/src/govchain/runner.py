"""Scenario runs, one at a time or as a concurrent batch."""

from __future__ import annotations

import asyncio
import pathlib
from collections.abc import Sequence

import structlog

from govchain.config import GovchainSettings
from govchain.config import ScenarioConfig
from govchain.config import get_settings
from govchain.crypto import hash_object
from govchain.report import RunReport
from govchain.simulator import Simulation

logger = structlog.get_logger()

# Module-level cache: (config, settings) digest -> report
_report_cache: dict[str, RunReport] = {}
_cache_lock = asyncio.Lock()


def run_scenario(
    config: ScenarioConfig,
    out: str | pathlib.Path | None = None,
    settings: GovchainSettings | None = None,
) -> RunReport:
    """Execute ``config`` to its horizon; write the report to ``out``.

    Raises:
        InvariantViolation: a safety invariant failed during the run.
    """
    report = Simulation(config, settings).run()
    if out is not None:
        path = report.write(out)
        logger.info("report written", path=str(path))
    return report


def _cache_key(config: ScenarioConfig, settings: GovchainSettings) -> str:
    return hash_object(
        {
            "config": config.digest(),
            "settings": settings.model_dump(mode="json"),
        }
    ).hex()


async def _run_cached(
    config: ScenarioConfig, settings: GovchainSettings | None
) -> RunReport:
    settings = settings or get_settings()
    key = _cache_key(config, settings)
    if key in _report_cache:
        return _report_cache[key]

    report = await asyncio.to_thread(run_scenario, config, None, settings)
    async with _cache_lock:
        # Another task may have finished the same scenario first
        return _report_cache.setdefault(key, report)


async def run_batch(
    configs: Sequence[ScenarioConfig],
    settings: GovchainSettings | None = None,
) -> list[RunReport]:
    """Run independent scenarios on worker threads.

    Chains of different scenarios share nothing, so the reports equal
    those of sequential runs; they come back in input order.
    """
    return list(
        await asyncio.gather(
            *(_run_cached(config, settings) for config in configs)
        )
    )


async def clear_cache() -> None:
    """Forget cached reports (tests and long-lived processes)."""
    async with _cache_lock:
        _report_cache.clear()
