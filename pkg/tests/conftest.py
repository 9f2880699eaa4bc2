import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kamact import (
    TAYLOR,
    ScaledSeries,
    build_germ_instance,
    germ_spec,
    identity_germ_spec,
)


@pytest.fixture(scope="session")
def germ_id32():
    """The a = id germ action at order 32, constants measured once."""
    return build_germ_instance(identity_germ_spec(32), seed=11)


@pytest.fixture(scope="session")
def germ_quad32():
    """A curved base point a = z + 0.3 z^2 at order 32."""
    return build_germ_instance(germ_spec([0.0, 1.0, 0.3], 32), seed=11)


@pytest.fixture(scope="session")
def germ_id8():
    """Small fast instance for plumbing tests."""
    return build_germ_instance(identity_germ_spec(8), seed=11,
                               n_group=80, n_ac=60)


def taylor(coeffs, order=None):
    arr = np.asarray(list(coeffs), dtype=np.complex128)
    if order is not None:
        out = np.zeros(order + 1, dtype=np.complex128)
        out[: arr.size] = arr
        arr = out
    return ScaledSeries(TAYLOR, arr)
