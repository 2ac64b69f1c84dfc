"""Fixtures and reporting hooks shared by the whole test suite."""

from __future__ import annotations

import pytest

import acceptance_log
from helpers import StubService


def pytest_terminal_summary(terminalreporter, exitstatus, config):  # noqa: ARG001
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def stub_service():
    """Factory for scriptable in-process inpaint services, closed at teardown."""
    started: list[StubService] = []

    def factory(**kwargs) -> StubService:
        service = StubService(**kwargs)
        started.append(service)
        return service

    yield factory
    for service in started:
        service.close()
