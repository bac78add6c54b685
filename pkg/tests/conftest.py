"""
Common pytest fixtures and configuration for blowup-lab tests.

Ground states are the expensive shared input of almost every module, so
they are solved once per session and per (d, grid).
"""

import os
import sys
from typing import Any, Callable, Dict, Tuple

import pytest

# Add project root to path so imports work consistently
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from internal.python.blowup_lab.linop.operators import OperatorContext, make_context  # noqa: E402
from internal.python.blowup_lab.numerics.grid import make_grid  # noqa: E402
from internal.python.blowup_lab.profile.ground_state import ProfilePack, solve_Q  # noqa: E402


# Environment configuration
@pytest.fixture(scope="session")
def env_config() -> Dict[str, Any]:
    """Provide environment configuration for tests."""
    return {
        "TEST_ENV": os.environ.get("TEST_ENV", "test"),
        "RESOURCE_CONSTRAINED": os.environ.get("RESOURCE_CONSTRAINED", "false").lower() == "true",
    }


@pytest.fixture(scope="session")
def pack_factory() -> Callable[..., ProfilePack]:
    """Solve Q once per (d, y_min, y_max, n)."""
    cache: Dict[Tuple[int, float, float, int], ProfilePack] = {}

    def _pack(d: int, y_min: float = 1e-3, y_max: float = 1e3, n: int = 2048) -> ProfilePack:
        key = (d, y_min, y_max, n)
        if key not in cache:
            cache[key] = solve_Q(make_grid(d, y_min, y_max, n))
        return cache[key]

    return _pack


@pytest.fixture(scope="session")
def context_factory(pack_factory) -> Callable[..., OperatorContext]:
    cache: Dict[Tuple, OperatorContext] = {}

    def _ctx(d: int, y_min: float = 1e-3, y_max: float = 1e3, n: int = 2048) -> OperatorContext:
        key = (d, y_min, y_max, n)
        if key not in cache:
            cache[key] = make_context(pack_factory(d, y_min, y_max, n))
        return cache[key]

    return _ctx


@pytest.fixture(scope="session")
def pack_d8(pack_factory) -> ProfilePack:
    return pack_factory(8)


@pytest.fixture(scope="session")
def ctx_d8(context_factory) -> OperatorContext:
    return context_factory(8)


# Skip markers based on environment
def pytest_collection_modifyitems(config, items):
    """Skip tests based on markers and environment conditions."""
    resource_constrained = os.environ.get("RESOURCE_CONSTRAINED", "false").lower() == "true"

    skip_resource_intensive = pytest.mark.skip(reason="Resource intensive test skipped in constrained environment")

    for item in items:
        if resource_constrained and "resource_intensive" in item.keywords:
            item.add_marker(skip_resource_intensive)
