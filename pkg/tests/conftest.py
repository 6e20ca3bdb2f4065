"""Shared fixtures: branches are expensive, so they are computed once per
session and memoized by parameter set."""

import numpy as np
import pytest

from flexwave.core import INFINITE_DEPTH, IceModel, PhysicalParams
from flexwave.solver import SolverConfig, continue_branch


@pytest.fixture(scope="session")
def branch_cache():
    cache = {}

    def get(d, model, a1_max, h=INFINITE_DEPTH, g=1.0, n_modes=16, step=2e-3):
        key = (d, model, a1_max, h, g, n_modes, step)
        if key not in cache:
            params = PhysicalParams(g=g, h=h, D=d)
            config = SolverConfig(n_modes=n_modes, amplitude_step=step)
            cache[key] = continue_branch(params, model, a1_max, config)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def small_wave_d001(branch_cache):
    """Converged small-amplitude wave at D=0.01, deep water, linear model."""
    branch = branch_cache(0.01, IceModel.LINEAR_BIHARMONIC, 0.01)
    return branch.points[-1]
