import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from control import PulseTrain, aligned_grid  # noqa: E402
from models import solve_coefficients  # noqa: E402
from noise import CorrelationSpec, sample_path  # noqa: E402

RECIPES = os.path.join(ROOT, "recipes")


def make_coeffs(model, corr=None, train=None, t_end=2.0, dt=1e-3):
    """Coefficients on a pulse-aligned grid"""
    corr = corr or CorrelationSpec(1.0, 0.5)
    train = train or PulseTrain.disabled()
    grid = aligned_grid(train, t_end, dt)
    return solve_coefficients(model, corr, train, grid)


def make_path(coeffs, seed=7):
    return sample_path(coeffs.corr, coeffs.fine_grid, seed)


@pytest.fixture
def pulses():
    return PulseTrain(tau=0.08, delta=0.04, psi=1.5, enabled=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def log_dir(tmp_path, monkeypatch):
    import logger
    directory = tmp_path / "logs"
    monkeypatch.setattr(logger, "LOG_DIRECTORY", str(directory))
    return directory
