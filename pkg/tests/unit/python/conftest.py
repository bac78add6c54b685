"""
Unit test fixtures shared by the operator and approximate-profile tests.
"""

import pytest

from internal.python.blowup_lab.linop.kernel import TkFamily, generate_Tk
from internal.python.blowup_lab.modes.system import ModeSystem, make_mode_system


@pytest.fixture(scope="session")
def tks_d8(ctx_d8) -> TkFamily:
    """T_0..T_3 on the shared d = 8 grid."""
    return generate_Tk(ctx_d8, 3)


@pytest.fixture(scope="session")
def system_d8() -> ModeSystem:
    """Stable regime with one extra parameter (ell = 1, L = 2)."""
    return make_mode_system(8, 1, 2)
