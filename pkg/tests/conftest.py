import numpy as np
import pytest

from sislab import models
from sislab.config import preset_config

_RUN_CACHE: dict[str, models.Trajectory] = {}


@pytest.fixture(scope="session")
def preset_run():
    """Run a preset once per session and share the trajectory."""

    def runner(name: str) -> models.Trajectory:
        if name not in _RUN_CACHE:
            cfg = preset_config(name)
            spec, grid, S0, I0 = cfg.build()
            _RUN_CACHE[name] = models.run(spec, S0, I0, **cfg.run_kwargs())
        return _RUN_CACHE[name]

    return runner


@pytest.fixture(scope="session")
def preset_setup():
    """Build (spec, grid, S0, I0) for a preset without running it."""

    def builder(name: str):
        return preset_config(name).build()

    return builder


def max_abs(a) -> float:
    return float(np.abs(np.asarray(a)).max())
