"""Shared fixtures, hypothesis profile and the acceptance summary."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hydroprim.diagnostics import random_state_ensemble
from hydroprim.spectral_basis import GridSpec

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

# Anisotropic small grid used by most unit tests.
SMALL = GridSpec(lx=2 * math.pi, ly=3.0, h=0.7, nx=16, ny=12, nz=6)
DESK = GridSpec()

# criterion number -> list of (sub-check, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(number: int, name: str, ok: bool, detail: str) -> bool:
    """Register one acceptance sub-check for the terminal summary."""
    ACCEPTANCE.setdefault(number, []).append((name, bool(ok), detail))
    return bool(ok)


@pytest.fixture
def small():
    return SMALL


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_states():
    return random_state_ensemble(SMALL, 8, seed=7)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        subs = ACCEPTANCE[number]
        ok = all(passed for _, passed, _ in subs)
        parts = "; ".join(f"{name} {'ok' if passed else 'FAILED'} ({detail})" for name, passed, detail in subs)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {parts}")
