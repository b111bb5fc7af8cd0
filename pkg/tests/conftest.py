import os

import numpy as np
import pytest

from hdprior import hd_model, model_file

MODELS_DIR = os.path.join(os.path.dirname(__file__), "..", "models")

GOLDEN_NAMES = ("random_intercept", "latin_square", "kenya")


def model_path(name: str) -> str:
    return os.path.join(MODELS_DIR, f"{name}.json")


@pytest.fixture(scope="session")
def golden_models():
    """The three shipped golden models, assembled once per session."""
    out = {}
    for name in GOLDEN_NAMES:
        out[name] = hd_model.assemble(model_file.parse_model(model_path(name)))
    return out


@pytest.fixture(scope="session")
def models_dir():
    return MODELS_DIR


def random_psd(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Random PSD matrix, optionally rank-deficient."""
    cols = dim if rank is None else rank
    g = rng.standard_normal((dim, cols))
    return g @ g.T
