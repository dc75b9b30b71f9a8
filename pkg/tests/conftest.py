import numpy as np
import pytest

from noisewarp import _backend

BACKENDS = ["python"] + (["compiled"] if _backend.COMPILED_AVAILABLE else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _backend.use(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
