import numpy as np
import pytest

from mvimpulse import dividend
from mvimpulse.errors import BadBarrier, BadCount
from mvimpulse.hitting import hitting_mc
from mvimpulse.model import ModelParams, no_jumps

P = ModelParams(0.02, 0.4, 0.0, 0.3, 0.0, 1.0, no_jumps())


def test_start_at_barrier():
    est = hitting_mc(2.0, 2.0, P, 1e-3, 5)
    assert est.mean == 1.0 and est.stderr == 0.0 and np.all(est.values_half == 1.0)


def test_errors():
    with pytest.raises(BadBarrier):
        hitting_mc(3.0, 2.0, P, 1e-3, 5)
    with pytest.raises(BadCount):
        hitting_mc(1.0, 2.0, P, 1e-3, 1)


def test_finer_monitoring_hits_no_later():
    est = hitting_mc(1.0, 1.5, P, 1e-2, 200, seed=1, horizon=30.0, coarse_steps=50)
    assert np.all(est.values_half >= est.values)
    assert est.mean_half >= est.mean


def test_agrees_with_laplace_transform():
    sol = dividend.solve(P)
    b = 1.5
    oracle = dividend.hitting_laplace_oracle(1.0, b, sol)
    est = hitting_mc(1.0, b, P, 1e-3, 400, seed=2, horizon=40.0, coarse_steps=100)
    # discrete monitoring biases downward by O(sqrt(dt))
    assert oracle - 4 * est.stderr - 0.02 <= est.mean <= oracle + 4 * est.stderr


def test_reproducible_and_offset():
    a = hitting_mc(1.0, 1.5, P, 1e-2, 10, seed=5, horizon=20.0, coarse_steps=50)
    b = hitting_mc(1.0, 1.5, P, 1e-2, 10, seed=5, horizon=20.0, coarse_steps=50)
    c = hitting_mc(1.0, 1.5, P, 1e-2, 5, seed=5, horizon=20.0, coarse_steps=50, path_offset=5)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values[5:], c.values)
