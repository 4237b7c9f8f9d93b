import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def exam():
    from pcarank import load_exam_scores
    return load_exam_scores()
