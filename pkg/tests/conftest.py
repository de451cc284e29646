from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from qtabu.model import AtspInstance, make_instance

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
TSPLIB_NAMES = ("br17", "ftv33", "ftv35", "ftv38", "p43", "ry48p")


def fixture_path(name: str) -> Path:
    return DATA_DIR / f"{name}.atsp"


def require_fixture(name: str) -> Path:
    path = fixture_path(name)
    if not path.exists():
        pytest.skip(f"TSPLIB fixture {name}.atsp not present (see data/README.md)")
    return path


def random_instance(n: int, seed: int, high: int = 100, name: str | None = None) -> AtspInstance:
    """Dense random asymmetric instance with integer costs in [1, high)."""
    rng = np.random.default_rng(seed)
    costs = rng.integers(1, high, size=(n, n))
    np.fill_diagonal(costs, 0)
    return make_instance(name or f"rand{n}-{seed}", costs)


@pytest.fixture
def br17() -> AtspInstance:
    from qtabu.tsplib import load_instance

    return load_instance(require_fixture("br17"))
