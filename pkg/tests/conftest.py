import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# reference computations that take tens of minutes run only when asked for
FULL = os.environ.get("FRACDIFF_FULL", "") not in ("", "0")



@pytest.fixture(scope="session")
def grid05():
    from fracdiff.kernel import Grid

    return Grid.from_step(1.0, 0.05)
