import json

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sscf import chebmat
from sscf.chebmat import Interval
from sscf.dae import ScfPair
from sscf.models import BlockSignature, Variant
from sscf.settings import DEFAULT_TOLERANCES
from sscf.structure import jordan_matrix

settings.register_profile("sscf", deadline=None, max_examples=20,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("corpus", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("sscf")

JORDAN_ORDERS = (5, 5, 4, 4, 3, 2, 2, 1)
COL_ELLS = (8, 7, 5, 4, 2)
ROW_ELLS = (2, 4, 5, 7, 8)


@pytest.fixture
def interval():
    return Interval(-1.0, 1.0)


@pytest.fixture
def tolerances():
    return DEFAULT_TOLERANCES


@pytest.fixture
def worked_n():
    """N(t) = [[0, 2 + t], [0, 0]] on [-1, 1]."""
    return chebmat.from_polynomials([[[0], [2, 1]], [[0], [0]]])


@pytest.fixture
def worked_pair(worked_n):
    return ScfPair(0, None, worked_n, BlockSignature((1, 1)), Variant.COLUMNS)


@pytest.fixture
def mixed_jordan():
    return jordan_matrix(JORDAN_ORDERS)


@pytest.fixture
def col_sig():
    return BlockSignature(COL_ELLS)


def write_json(path, data):
    path.write_text(json.dumps(data))
    return path


def grid_error(A, B, grid=65):
    ts = chebmat.verification_grid(A.interval, grid)
    return float(np.abs(A.values(ts) - B.values(ts)).max())
