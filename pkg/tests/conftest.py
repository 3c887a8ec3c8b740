import numpy as np
import pytest

from rilseq import bundled_sequence
from rilseq.exchange import isometry
from rilseq.objective import QaReversal, fit_reversal


@pytest.fixture(scope="session")
def no_flag():
    return bundled_sequence("no_flag")


@pytest.fixture(scope="session")
def best_flag():
    return bundled_sequence("best_flag")


@pytest.fixture(scope="session")
def worst_flag():
    return bundled_sequence("worst_flag")


@pytest.fixture(scope="session")
def no_flag_rev(no_flag):
    """Fitted QA output angles of the unflaggable reference sequence."""
    return fit_reversal(isometry(no_flag))


@pytest.fixture(scope="session")
def zero_rev():
    return QaReversal(0.0, 0.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
