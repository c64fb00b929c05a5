import numpy as np
import pytest
from hypothesis import settings

from CM_QOperator import Logs

# numerical properties: no per-example deadline
settings.register_profile("numeric", deadline=None, max_examples=60)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def isolated_cwd(tmp_path, monkeypatch):
    '''Empty working directory, so no experiment.json is auto-discovered.'''
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture(autouse=True)
def quiet_logs():
    Logs.show_logs(False)
    yield
    Logs.show_logs(False)
