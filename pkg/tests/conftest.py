import numpy as np
import pandas as pd
import pytest

from eblr import PanelDataset, SynthConfig, fit_eblr, generate_synthetic


def make_panel(rows, covariates, series_col=None, has_target=True):
    """Build a PanelDataset from (timestamp, target, cov...) tuples."""
    names = [c.name for c in covariates]
    frame = pd.DataFrame(rows, columns=["timestamp", "target"] + names)
    frame["series_id"] = series_col if series_col is not None else "s1"
    return PanelDataset(frame, covariates, require_target=has_target)


@pytest.fixture(scope="session")
def synth_small():
    """Short synthetic series for fast fitting tests."""
    return generate_synthetic(SynthConfig(length=420, rng_seed=3))


@pytest.fixture(scope="session")
def synth_full():
    """Full-length series used by the reproduction tests."""
    return generate_synthetic(SynthConfig(length=2048, rng_seed=12))


@pytest.fixture(scope="session")
def fitted_small(synth_small):
    return fit_eblr(synth_small, f_max=5)


@pytest.fixture(scope="session")
def fitted_full(synth_full):
    return fit_eblr(synth_full, f_max=5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
