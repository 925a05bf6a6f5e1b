from pathlib import Path

import numpy as np
import pytest

from enscontrol import DltiSystem, RngStream, load_matrix, load_vector

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "data" / "power10"


@pytest.fixture(scope="session")
def power10():
    """The committed 10-state / 5-input fixture system and initial state."""
    system = DltiSystem(
        load_matrix(FIXTURE_DIR / "a.csv"), load_matrix(FIXTURE_DIR / "b.csv")
    )
    x0 = load_vector(FIXTURE_DIR / "x0.csv")
    return system, x0


@pytest.fixture()
def rng():
    return RngStream(20240811)


def draw_singleton_columns(target, count, rng):
    """Sample-set of a vector as a dense (dim, count) column matrix."""
    from enscontrol import draw_ensemble

    samples = draw_ensemble(np.asarray(target, float), count, rng)
    return samples, np.stack([s.to_array() for s in samples], axis=1)
