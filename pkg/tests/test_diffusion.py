import numpy as np
import pytest

from ergokit import dsl
from ergokit.certificates import DriftCertificate
from ergokit.diffusion import (
    DiffusionModel,
    ScalarField,
    double_well,
    drift_condition_check,
    ergodic_average,
    generator_apply,
    mc_hitting_functional,
    mc_lyapunov,
    mc_lyapunov_integral,
    mc_semigroup,
    ornstein_uhlenbeck,
    simulate_path,
)
from ergokit.errors import CensoredError, DimensionError, ExplosionError
from ergokit.measures import RegionSet

SQRT3 = np.sqrt(3.0)


def ou_certificate():
    return DriftCertificate(
        ScalarField.from_expr("x1^2", 1), ScalarField.from_expr("x1^2 + 1", 1),
        RegionSet.box([[-SQRT3, SQRT3]]), 3.0,
    )


def test_model_shapes_and_sigma():
    m = DiffusionModel.from_expressions(["-x1", "x1 - x2"], [["1", "0"], ["x1", "2"]])
    X = np.array([[1.0, 2.0]])
    assert np.array_equal(m.u(X), [[-1.0, -1.0]])
    assert np.array_equal(m.sigma(X)[0], [[1.0, 1.0], [1.0, 5.0]])
    with pytest.raises(DimensionError):
        DiffusionModel.from_expressions(["x1"], [["1"], ["1"]])


def test_generator_closed_form_vs_fd():
    ou = ornstein_uhlenbeck()
    xs = np.linspace(-3, 3, 13)[:, None]
    exact = 2 - 2 * xs[:, 0] ** 2
    V = ScalarField.from_expr("x1^2", 1)
    assert np.allclose(generator_apply(ou, V, xs), exact, atol=1e-6)
    closed = ScalarField(lambda X: X[:, 0] ** 2, 1, grad=lambda X: 2 * X,
                         hess=lambda X: np.full((len(X), 1, 1), 2.0))
    assert np.allclose(generator_apply(ou, closed, xs), exact, atol=1e-12)
    assert generator_apply(ou, V, [1.0]) == pytest.approx(0.0, abs=1e-6)


def test_generator_mixed_partials():
    m = DiffusionModel.from_expressions(["0", "0"], [["1", "0"], ["1", "1"]])
    h = ScalarField.from_expr("x1*x2", 2)
    # Sigma = [[1, 1], [1, 2]], so Dh = Sigma_12 = 1
    assert generator_apply(m, h, [0.3, -0.4]) == pytest.approx(1.0, abs=1e-6)


def test_fd_generator_richardson_ratio():
    ou = ornstein_uhlenbeck()
    h = ScalarField.from_expr("x1^4", 1)
    x = 1.3
    exact = -4 * x**4 + 12 * x**2
    errs = [abs(generator_apply(ou, h, [x], fd_step=s) - exact) for s in (0.1, 0.05, 0.025)]
    assert errs[0] / errs[1] == pytest.approx(4, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4, abs=0.5)


def test_ou_certificate_on_grid():
    grid = np.round(np.arange(-1000, 1001) * 0.01, 10)[:, None]
    rep = drift_condition_check(ornstein_uhlenbeck(), ou_certificate(), grid)
    assert rep.valid
    assert rep.max_margin <= 1e-6


def test_drift_check_rejects_wrong_b():
    cert = DriftCertificate(ou_certificate().V, ou_certificate().f, RegionSet.box([[-1, 1]]), 3.0)
    rep = drift_condition_check(ornstein_uhlenbeck(), cert, np.linspace(-3, 3, 61)[:, None])
    assert not rep.valid
    assert 1 < abs(rep.worst_point[0]) < SQRT3


def test_certificate_scaling_preserves_validity():
    grid = np.linspace(-5, 5, 101)[:, None]
    rep = drift_condition_check(ornstein_uhlenbeck(), ou_certificate().scaled(2.5), grid)
    assert rep.valid


def test_simulate_path_reproducible_and_occupation():
    ou = ornstein_uhlenbeck()
    a = simulate_path(ou, [0.5], 0.01, 1.0, seed=4, C=RegionSet.box([[-1, 1]]))
    b = simulate_path(ou, [0.5], 0.01, 1.0, seed=4)
    assert np.array_equal(a.states, b.states)
    assert a.states.shape == (101, 1) and a.times[-1] == pytest.approx(1.0)
    assert 0 <= a.occupation_C[-1] <= 1.0 + 1e-12


def test_expression_model_matches_builtin():
    m = DiffusionModel.from_expressions(["-x1"], [["sqrt(2)"]])
    a = simulate_path(m, [1.0], 0.01, 2.0, seed=3)
    b = simulate_path(ornstein_uhlenbeck(), [1.0], 0.01, 2.0, seed=3)
    assert np.allclose(a.states, b.states, atol=1e-14)


def test_explosion_is_reported():
    m = DiffusionModel.from_expressions(["x1^3"], [["0"]])
    with pytest.raises(ExplosionError):
        simulate_path(m, [10.0], 0.1, 5.0, seed=0)


def test_semigroup_mean_matches_euler_recurrence():
    dt, n = 0.01, 100
    got = mc_semigroup(ornstein_uhlenbeck(), ScalarField.from_expr("x1", 1), [2.0], [0.0, n * dt],
                       20_000, dt, seed=5)
    assert got[0] == 2.0
    # each step multiplies the mean by (1 - dt); the stationary variance is 1
    assert got[1] == pytest.approx(2.0 * (1 - dt) ** n, abs=4 / np.sqrt(20_000))


def test_brownian_exit_time():
    bm = DiffusionModel.from_expressions(["0"], [["1"]])
    outside = RegionSet.sublevel(dsl.parse("-x1^2", 1), -1.0, [[-2, 2]])
    est = mc_hitting_functional(bm, ScalarField.constant(1, 1), outside, 0.0, [0.0], 4000, 1e-3, seed=8)
    # E tau = 1 - x^2 for exit from (-1, 1); discrete monitoring biases it upward by O(sqrt(dt))
    assert est.estimate == pytest.approx(1.0, abs=0.06)
    assert est.n_censored == 0


def test_hitting_is_zero_when_starting_in_target():
    C = RegionSet.box([[-1, 1]])
    est = mc_hitting_functional(ornstein_uhlenbeck(), ScalarField.constant(1, 1), C, 0.0, [0.0], 10, 0.01, 0)
    assert est.estimate == 0.0


def test_censoring():
    drift_away = DiffusionModel.from_expressions(["1"], [["0"]])
    with pytest.raises(CensoredError):
        mc_hitting_functional(drift_away, ScalarField.constant(1, 1), RegionSet.box([[-2, -1]]), 0.0,
                              [0.0], 4, 0.1, 0, T_cap=1.0)


def test_lyapunov_estimators_agree():
    ou, f, C = ornstein_uhlenbeck(), ScalarField.from_expr("x1^2 + 1", 1), RegionSet.box([[-SQRT3, SQRT3]])
    a = mc_lyapunov(ou, f, C, [2.0], 4000, 0.01, seed=1)
    b = mc_lyapunov_integral(ou, f, C, [2.0], 4000, 0.01, seed=2)
    assert abs(a.estimate - b.estimate) < 3 * np.hypot(a.std_error, b.std_error)


def test_ergodic_average_double_well_symmetry():
    est = ergodic_average(double_well(), ScalarField.from_expr("x1", 1), [1.0], 2000.0, 0.01, 10.0, seed=6)
    assert est.z_score(0.0) < 3
