"""Shared fixtures for the client tests.

The engine package (datamix) appears here and in tests only, as the oracle
and artifact producer; batchfeed package code never imports it.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from batchfeed import Batch, WeightRefresh

GOLDEN = Path(__file__).parent / "data" / "plan_golden"


@pytest.fixture()
def golden_copy(tmp_path) -> Path:
    """Mutable copy of the golden fixture for corruption tests."""
    dst = tmp_path / "golden"
    shutil.copytree(GOLDEN, dst)
    return dst


def replay(iterator) -> list[dict]:
    """Drain a BatchIterator, acknowledging refreshes; normalized event list."""
    events = []
    for event in iterator:
        if isinstance(event, WeightRefresh):
            events.append({"type": "refresh", "step": event.step})
            event.acknowledge()
        else:
            assert isinstance(event, Batch)
            events.append(
                {"type": "batch", "step": event.step, "ids": list(event.ids)}
            )
    return events
