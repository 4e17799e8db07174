import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergokit.errors import DimensionError, InvalidModelError
from ergokit.measures import (
    FiniteSet,
    FiniteSignedMeasure,
    FiniteStateSpace,
    RegionSet,
    WeightFunction,
    as_weight,
    f_norm_of_function,
    f_norm_of_measure,
    jordan_decompose,
)

finite = st.floats(-10, 10, allow_nan=False)
weights = st.floats(1, 10, allow_nan=False)


def brute_force_norm(mass, f):
    """sup over the sign patterns g = +-f, which attains sup_{|g|<=f} |mu(g)|."""
    return max(abs(sum(s * fi * m for s, fi, m in zip(signs, f, mass)))
               for signs in itertools.product((-1, 1), repeat=len(mass)))


def test_state_space_labels():
    space = FiniteStateSpace(3, ["a", "b", "c"])
    assert space.label(1) == "b"
    with pytest.raises(InvalidModelError):
        FiniteStateSpace(2, ["a", "a"])
    with pytest.raises(InvalidModelError):
        FiniteStateSpace(0)


def test_weight_rejects_values_below_one():
    with pytest.raises(InvalidModelError, match="index 1"):
        WeightFunction([1.0, 0.5])
    w = WeightFunction(lambda p: 1 + p[:, 0] ** 2)
    assert w(np.array([[2.0]]))[0] == 5.0
    with pytest.raises(InvalidModelError):
        WeightFunction(lambda p: p[:, 0])(np.array([[0.0]]))


def test_as_weight_scalar_and_mismatch():
    assert np.array_equal(as_weight(2.0, 3).table, [2, 2, 2])
    with pytest.raises(DimensionError):
        as_weight([1, 2], 3)


def test_function_norm_examples():
    f = np.array([1.5, 2.0])
    assert f_norm_of_function(f, f) == 1.0
    assert f_norm_of_function([0, 0], f) == 0.0
    assert f_norm_of_function([3, -4], f) == 2.0
    with pytest.raises(DimensionError):
        f_norm_of_function([1, 2, 3], f)


def test_function_norm_on_sample_is_lower_bound():
    g = lambda p: p[:, 0] ** 2  # noqa: E731
    f = lambda p: 1 + p[:, 0] ** 2  # noqa: E731
    sample = np.linspace(-3, 3, 61)[:, None]
    value = f_norm_of_function(g, f, sample)
    assert value == pytest.approx(9 / 10)
    assert value < 1.0
    with pytest.raises(DimensionError):
        f_norm_of_function(g, f, np.empty((0, 1)))


def test_measure_norm_examples():
    assert f_norm_of_measure([0.0, 0.0], [1, 1]) == 0.0
    assert f_norm_of_measure([0.2, -0.2], [1.5, 3]) == pytest.approx(0.9)
    assert f_norm_of_measure([1 / 3, -1 / 3], [1, 1]) == pytest.approx(2 / 3)
    with pytest.raises(DimensionError):
        f_norm_of_measure([0.1, 0.2, 0.3], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                                                      st.lists(weights, min_size=n, max_size=n))))
def test_measure_norm_matches_sign_enumeration(data):
    mass, f = data
    assert f_norm_of_measure(mass, f) == pytest.approx(brute_force_norm(mass, f), rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=1, max_size=8))
def test_jordan_parts_are_disjoint_and_reconstruct(mass):
    plus, minus = jordan_decompose(mass)
    assert np.all(plus.mass >= 0) and np.all(minus.mass >= 0)
    assert not np.any((plus.mass > 0) & (minus.mass > 0))
    assert np.array_equal((plus - minus).mass, np.asarray(mass))
    f = np.ones(len(mass))
    assert f_norm_of_measure(mass, f) == pytest.approx(plus.total_mass + minus.total_mass)


def test_signed_measure_apply_and_integrate():
    mu = FiniteSignedMeasure([0.5, -0.5])
    K = np.array([[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(mu.apply(K).mass, [0.35, -0.35])
    assert mu.integrate([2.0, 4.0]) == -1.0
    assert mu.total_mass == 0.0


def test_finite_set():
    C = FiniteSet([2, 0, 2], 4)
    assert C.indices == (0, 2)
    assert list(C.indicator) == [1, 0, 1, 0]
    assert list(C.complement) == [False, True, False, True]
    assert 2 in C and 1 not in C and C.closed
    with pytest.raises(DimensionError):
        FiniteSet([4], 4)


def test_region_sets():
    box = RegionSet.box([[-1, 1], [0, 2]])
    assert list(box.contains([[0, 0], [1, 2], [1.01, 1]])) == [True, True, False]
    ball = RegionSet.ball([0, 0], 1)
    assert list(ball.indicator([[0.6, 0.8], [0.8, 0.8]])) == [1.0, 0.0]
    sub = RegionSet.sublevel(lambda p: p[:, 0] ** 2, 3.0, [[-2, 2]])
    assert list(sub.contains([[1.7], [1.8]])) == [True, False]
    assert box.closed and ball.closed and sub.closed
    with pytest.raises(DimensionError):
        box.contains([[0.0]])
    with pytest.raises(DimensionError):
        RegionSet(lambda p: p, [[1, 0]])
