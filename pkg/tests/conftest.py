import functools

import pytest
from hypothesis import HealthCheck, settings

from sapoa.world import exemplar_maps, generate_suite

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@functools.lru_cache(maxsize=None)
def _suite(seed):
    return tuple(generate_suite(seed))


@pytest.fixture(scope="session")
def suite():
    return list(_suite(0))


@pytest.fixture(scope="session")
def exemplars():
    return exemplar_maps()


def grid_text(*rows):
    return "".join(r + "\n" for r in rows)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
