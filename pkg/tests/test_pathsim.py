import math
from fractions import Fraction as F

import numpy as np
import pytest

from dunkl import intertwine, pathsim, rootsys

RANK1 = rootsys.build("rank1", 1, (1,))
B2 = rootsys.build("B2", None, (1, F(1, 2)))


def sim(rs, x0, n=400, dt=0.01, seed=1, **kw):
    return pathsim.simulate(rs, x0, 1.0, dt, seed, n, **kw)


def test_zero_multiplicity_is_brownian_motion():
    rs = rootsys.build("product_of_rank1", 2, (0, 0))
    p = sim(rs, [0.5, -0.2], n=50)
    assert len(p.jump_path) == 0
    assert not p.rejected.any()
    np.testing.assert_allclose(p.states[:, 1:], np.array([0.5, -0.2]) + np.cumsum(p.dB, axis=1), atol=1e-12)
    dec = pathsim.extract_martingales(rs, p)
    assert not dec.M.any()
    assert np.max(np.abs(dec.residual)) < 1e-12


def test_results_do_not_depend_on_workers_or_batches():
    a = sim(B2, [1.0, 0.5], n=300, workers=1)
    b = sim(B2, [1.0, 0.5], n=300, workers=3, batch_size=70)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.jump_time, b.jump_time)
    np.testing.assert_array_equal(a.jump_root, b.jump_root)
    np.testing.assert_array_equal(a.inv_sq, b.inv_sq)


def test_path_streams_are_prefix_stable():
    full = sim(RANK1, [1.0], n=6, seed=9)
    tail = pathsim.simulate(RANK1, [1.0], 1.0, 0.01, 9, 2, first_path=4)
    np.testing.assert_array_equal(full.states[4:], tail.states)
    one = pathsim.simulate(RANK1, [1.0], 1.0, 0.01, 9, 1)
    np.testing.assert_array_equal(full.states[:1], one.states)


def test_jumps_are_reflections_and_preserve_the_norm():
    p = sim(B2, [1.0, 0.5], n=200)
    assert len(p.jump_path) > 0
    for pre, post, r in zip(p.jump_pre[:50], p.jump_post()[:50], p.jump_root[:50]):
        np.testing.assert_allclose(post, rootsys.reflection_matrix(B2, r) @ pre, atol=1e-12)
        assert np.linalg.norm(post) == pytest.approx(np.linalg.norm(pre))
    assert np.all(np.diff(p.jump_time[p.jump_path == p.jump_path[0]]) >= 0)


def test_jump_count_minus_compensator_is_centred():
    p = sim(RANK1, [1.0], n=4000, dt=5e-3, seed=3, record_every=None)
    f = pathsim.estimate_jump_functionals(RANK1, p)
    m, se = f["roots"][0]["count_minus_compensator"]
    assert abs(m) < 4 * se
    assert f["rejected"] == 0


def test_martingale_decomposition_is_consistent():
    p = sim(B2, [1.0, 0.5], n=300)
    dec = pathsim.extract_martingales(B2, p)
    # X = x + B + eta up to the scheme's discretisation, and jumps of M are k^(-1/2)-scaled
    assert np.sqrt(np.mean(dec.residual[:, -1] ** 2)) < 0.05
    assert not dec.cross_bracket.any()
    jumps_per_root = p.jump_counts().sum(axis=0)
    assert np.all(jumps_per_root[np.array(B2.k_array) > 0] > 0)


def test_skew_product_checks_and_moments():
    with pytest.raises(pathsim.SimulationError):
        pathsim.simulate_skew_rank1(F(0), 1.0, 1.0, 0.01, 1, 10)
    p = pathsim.simulate_skew_rank1(F(1), 1.0, 1.0, 0.01, 1, 4000, record_every=None)
    r2 = p.final[:, 0] ** 2
    # E |X_1|^2 = |x|^2 + (1 + 2k)
    assert abs(r2.mean() - 4.0) < 4 * r2.std() / math.sqrt(len(r2))


def test_bad_inputs():
    with pytest.raises(pathsim.SimulationError):
        sim(RANK1, [0.0])
    with pytest.raises(pathsim.SimulationError):
        sim(RANK1, [1.0], on_collapse="ignore")
    with pytest.raises(pathsim.SimulationError):
        pathsim.simulate(RANK1, [1.0], 1.0, 0.3, 1, 1)


def test_ito_residual_of_hermite_martingale():
    tb = intertwine.build_intertwine(RANK1, 3)
    p = sim(RANK1, [1.0], n=200, dt=2e-3)
    res = pathsim.ito_residual_check(RANK1, tb, p, (2,))
    assert np.sqrt(np.mean(res**2)) < 0.05


def test_path_csv(tmp_path):
    p = sim(RANK1, [1.0], n=3, record_every=10)
    f = tmp_path / "p.csv"
    pathsim.write_path_csv(p, 0, f)
    lines = f.read_text().splitlines()
    assert lines[0] == "t,x1,jump_flag,jump_root"
    assert len(lines) == len(p.times) + 1
    total = sum(int(line.split(",")[2]) for line in lines[1:])
    assert total == int(np.sum(p.jump_path == 0))
