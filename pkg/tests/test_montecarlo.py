import numpy as np
import pytest

from ergokit import ctmc
from ergokit.ctmc_paths import mc_ctmc_hitting, mc_ctmc_lyapunov, mc_skeleton_hitting_sum
from ergokit.montecarlo import MCEstimate, batch_means, path_blocks, summarize

Q3 = ctmc.RateMatrix.from_rates([[0, 1.0, 0.5], [0.7, 0, 1.2], [0.3, 0.9, 0]])
F3 = np.array([1.0, 2.5, 4.0])


def test_path_blocks_depend_only_on_seed_and_index():
    a = [g[0].random(3) for _, _, g in path_blocks(5, 10, block_size=4)]
    b = [g[0].random(3) for _, _, g in path_blocks(5, 10, block_size=4)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    spans = [(s, e) for s, e, _ in path_blocks(5, 10, block_size=4)]
    assert spans == [(0, 4), (4, 8), (8, 10)]


def test_summarize_and_z_score():
    est = summarize([1.0, 3.0])
    assert est.estimate == 2.0 and est.std_error == pytest.approx(1.0)
    assert est.z_score(4.0) == pytest.approx(2.0)
    assert MCEstimate(1.0, 0.0, 5).z_score(1.0) == 0.0
    with pytest.raises(ValueError):
        summarize([1.0])


def test_batch_means_iid_matches_naive_error():
    x = np.random.default_rng(0).normal(size=40_000)
    est = batch_means(x)
    assert est.n_paths == 200
    assert est.std_error == pytest.approx(1 / np.sqrt(x.size), rel=0.2)


def test_batch_means_inflates_error_for_correlated_series():
    rng = np.random.default_rng(1)
    x = np.empty(40_000)
    x[0] = 0.0
    for i in range(1, x.size):
        x[i] = 0.95 * x[i - 1] + rng.normal()
    naive = summarize(x).std_error
    assert batch_means(x).std_error > 3 * naive
    with pytest.raises(ValueError):
        batch_means(np.ones(3))


@pytest.mark.parametrize("r", [0.0, 0.7])
def test_ctmc_hitting_matches_linear_algebra(r):
    exact = ctmc.hitting_functional(Q3, F3, [0], r)
    for x in range(3):
        est = mc_ctmc_hitting(Q3, F3, [0], r, x, 20_000, seed=11 + x)
        assert est.z_score(exact[x]) < 3, (x, est, exact[x])


def test_ctmc_lyapunov_clock_matches_resolvent():
    V = ctmc.lyapunov_from_resolvent(Q3, F3, [0, 2]).V
    for x in range(3):
        est = mc_ctmc_lyapunov(Q3, F3, [0, 2], x, 20_000, seed=3 + x)
        assert est.z_score(V[x]) < 3, (x, est, V[x])


@pytest.mark.parametrize("first_index", [0, 1])
def test_skeleton_sum_simulation(first_index):
    w = ctmc.f_delta(Q3, F3, 1.0)
    exact = ctmc.skeleton_hitting_sum(Q3, 1.0, w, [1], first_index)
    est = mc_skeleton_hitting_sum(Q3, 1.0, w, [1], 0, 20_000, seed=2, first_index=first_index)
    assert est.z_score(exact[0]) < 3


def test_ctmc_simulation_is_reproducible():
    a = mc_ctmc_hitting(Q3, F3, [0], 0.5, 2, 5000, seed=9)
    b = mc_ctmc_hitting(Q3, F3, [0], 0.5, 2, 5000, seed=9)
    assert a == b
