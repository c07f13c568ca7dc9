import functools

import pytest

from halobif.cr3bp_model import MU_EARTH_MOON, MU_SUN_BARYCENTER, ProblemSpec
from halobif.normal_form import center_manifold_reduce, compute_normal_form

MU_CASES = {"bS": MU_SUN_BARYCENTER, "EM": MU_EARTH_MOON, "half": 0.5}


@functools.lru_cache(maxsize=None)
def cached_normal_form(point: str, mu: float, order: int):
    return compute_normal_form(ProblemSpec(mu, point), order)


@functools.lru_cache(maxsize=None)
def cached_cm(point: str, mu: float, order: int):
    return center_manifold_reduce(cached_normal_form(point, mu, order))


@pytest.fixture(scope="session")
def normal_form():
    return cached_normal_form


@pytest.fixture(scope="session")
def cm():
    return cached_cm


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical continuation")


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
