"""Shared fixtures.

Training a frame classifier takes a few seconds, so the trained model is
session-scoped and shared by every test that needs realistic predictions.
"""

from __future__ import annotations

import numpy as np
import pytest

from baisim import harness


@pytest.fixture(scope="session")
def engine_bundle():
    return harness.build_engine()


@pytest.fixture(scope="session")
def trained_cnn():
    model, report = harness.run_training_session()
    return model, report


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
