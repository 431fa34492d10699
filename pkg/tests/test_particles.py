import csv
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvimpulse import _kernels_py, kernels
from mvimpulse.errors import BadCount, NonFinite
from mvimpulse.model import ModelParams, constant_jumps, no_jumps, uniform_jumps
from mvimpulse.particles import (
    NormalLaw,
    ParticleEnsemble,
    conditional_mean_oracle,
    conditional_moment,
    init_ensemble,
    mean_path,
    shift_measure,
    simulate_path,
    step,
    write_path_csv,
)
from mvimpulse.rng import NoiseStream

S = NoiseStream(0, 0)


def test_ensemble_validation():
    with pytest.raises(BadCount):
        ParticleEnsemble(np.array([]))
    with pytest.raises(NonFinite):
        ParticleEnsemble(np.array([1.0, np.nan]))


def test_init_point_mass():
    e = init_ensemble(4, 1.0, S)
    assert list(e.positions) == [1, 1, 1, 1] and e.mean == 1 and e.t == 0
    assert init_ensemble(10_000, 1.0, S).mean == 1.0
    with pytest.raises(BadCount):
        init_ensemble(0, 1.0, S)


def test_init_normal_clt():
    e = init_ensemble(10_000, NormalLaw(1.0, 0.1), S)
    assert abs(e.mean - 1.0) <= 4 * 0.1 / 100
    e2 = init_ensemble(10, lambda rng, n: rng.uniform(2, 3, n), S)
    assert 2 <= e2.positions.min() and e2.positions.max() <= 3


def test_conditional_moment():
    assert conditional_moment(ParticleEnsemble(np.array([1.0, 3.0]))) == 2
    assert conditional_moment(ParticleEnsemble(np.array([2.0, 2.0])), lambda x: x ** 2) == 4


def test_shift_measure_examples():
    e = ParticleEnsemble(np.array([5.0, 7.0]))
    s = shift_measure(e, lambda x: x - 1 - 2)
    assert list(s.positions) == [2, 4] and e.mean - s.mean == 3
    assert np.array_equal(shift_measure(e, lambda x: x).positions, e.positions)
    e = ParticleEnsemble(np.array([1.0, 2.0]))
    lhs = conditional_moment(shift_measure(e, lambda x: x + 1), lambda x: x ** 2)
    assert lhs == conditional_moment(e, lambda x: (x + 1) ** 2) == 6.5
    m = e.mean
    assert conditional_moment(shift_measure(e, lambda x: x + 0.3 * m)) == conditional_moment(
        e, lambda x: x + 0.3 * m)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(-3, 3), st.floats(-2, 2))
def test_change_of_variables(xs, a, b):
    e = ParticleEnsemble(np.array(xs))
    gam = lambda x: a * x + b  # noqa: E731
    g = lambda x: np.sin(x) + x ** 2  # noqa: E731
    assert conditional_moment(shift_measure(e, gam), g) == conditional_moment(e, lambda x: g(gam(x)))


def test_step_examples():
    zero = ModelParams(0.0, 0.0, 0.0, 0.05, 0.0, 1.0, no_jumps())
    e = ParticleEnsemble(np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(step(e, 0.01, 0.3, zero, S).positions, e.positions)
    p = ModelParams(0.02, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())
    e1 = step(ParticleEnsemble(np.array([1.0])), 0.01, 0.05, p, S)
    assert e1.positions[0] == pytest.approx(1.0102, abs=1e-15)
    assert e1.t == 0.01 and e1.step_index == 1
    with pytest.raises(ValueError):
        step(e, 0.0, 0.0, p, S)


def test_step_nonfinite():
    p = ModelParams(0.02, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())
    with pytest.raises(NonFinite):
        step(ParticleEnsemble(np.array([1e308])), 1.0, 1e10, p, S)


def test_common_noise_degeneracy():
    p = ModelParams(0.02, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())
    for e in simulate_path(p, 50, 1.3, 1e-2, 200, S):
        assert np.all(e.positions == e.positions[0])


@pytest.mark.parametrize("params", [
    ModelParams(0.02, 0.2, 0.1, 0.05, 0.0, 1.0, no_jumps()),
    ModelParams(0.02, 0.2, 0.1, 0.05, 0.0, 1.0, uniform_jumps(3.0, -0.4, 0.2)),
])
@pytest.mark.parametrize("n", [1, 3, 1000, 5000])
def test_step_matches_driver(params, n):
    """Stepping one at a time and running the block driver give identical ensembles."""
    dt, k = 1e-2, 12
    dB1 = S.common_increments(dt, k)
    e = init_ensemble(n, 1.0, S)
    for i in range(k):
        e = step(e, dt, dB1[i], params, S)
    last = list(simulate_path(params, n, 1.0, dt, k, S))[-1]
    assert np.array_equal(e.positions, last.positions)


def test_single_particle_is_euler_gbm():
    p = ModelParams(0.02, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())
    dt, k = 1e-3, 5000
    dB1 = S.common_increments(dt, k)
    m = np.empty(k + 1)
    m[0] = 1.0
    for i in range(k):
        m[i + 1] = m[i] + m[i] * (p.alpha0 * dt + p.sigma1 * dB1[i])
    assert np.array_equal(mean_path(p, 1, 1.0, dt, k, S), m)


def test_mean_path_stops_at_bankruptcy():
    p = ModelParams(0.0, 5.0, 0.0, 0.05, 0.0, 1.0, no_jumps())
    for i in range(20):
        out = mean_path(p, 1, 1.0, 0.5, 200, NoiseStream(0, i))
        hit = np.flatnonzero(~(out > 0))
        if hit.size and out[hit[0]] <= 0:
            assert np.all(np.isnan(out[hit[0] + 1:]))
            return
    pytest.fail("no bankrupt path found")


def test_backend_independent_paths(monkeypatch):
    p = ModelParams(0.02, 0.2, 0.1, 0.05, 0.0, 1.0, constant_jumps(2.0, -0.2))
    ref = mean_path(p, 37, 1.0, 1e-2, 300, S)
    monkeypatch.setattr(kernels, "advance", _kernels_py.advance)
    monkeypatch.setattr(kernels, "mean", _kernels_py.mean)
    assert np.array_equal(mean_path(p, 37, 1.0, 1e-2, 300, S), ref)


def test_thread_count_irrelevant():
    p = ModelParams(0.02, 0.2, 0.1, 0.05, 0.0, 1.0, no_jumps())

    def one(i):
        return mean_path(p, 20, 1.0, 1e-2, 100, NoiseStream(5, i)).tobytes()

    seq = [one(i) for i in range(8)]
    with ThreadPoolExecutor(3) as pool:
        assert list(pool.map(one, range(8))) == seq


def test_martingale_mean():
    p = ModelParams(0.0, 0.2, 0.1, 0.05, 0.0, 1.0, uniform_jumps(1.0, -0.5, 0.5))
    ends = np.array([mean_path(p, 50, 1.0, 1e-2, 100, NoiseStream(1, i))[-1] for i in range(400)])
    se = ends.std(ddof=1) / math.sqrt(ends.size)
    assert abs(ends.mean() - 1.0) <= 3 * se


def test_oracle_examples():
    p = ModelParams(0.03, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())
    zeros = np.zeros(10)
    m = conditional_mean_oracle(2.0, p.replace(sigma1=1e-300), zeros, 0.1)
    assert np.allclose(m, 2.0 * np.exp(0.03 * 0.1 * np.arange(11)), rtol=1e-15)
    q = p.replace(alpha0=0.02)
    assert np.allclose(conditional_mean_oracle(1.5, q, zeros, 0.1), 1.5, rtol=1e-15)
    with pytest.raises(ValueError):
        conditional_mean_oracle(0.0, p, zeros, 0.1)


def test_oracle_close_to_euler():
    p = ModelParams(0.02, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())
    dt, k = 1e-4, 10_000
    m_hat = mean_path(p, 1, 1.0, dt, k, S)
    m_or = conditional_mean_oracle(1.0, p, S.common_increments(dt, k), dt)
    assert np.max(np.abs(m_hat - m_or)) < 5e-3


def test_write_path_csv(tmp_path):
    f = tmp_path / "p.csv"
    write_path_csv(f, [(0.0, 1.0, 1.0, 10, 0), (0.1, 1.0000000000001, 0.99, 10, 0)])
    rows = list(csv.reader(f.open()))
    assert rows[0] == ["t", "m_hat", "m_oracle", "n_particles", "path_index"]
    assert rows[2] == ["0.1", "1", "0.99", "10", "0"]
