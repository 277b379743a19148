import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthant_reflect.errors import (
    ConfigParse,
    DensityMismatch,
    DimensionMismatch,
    NonpositiveHorizon,
    ZeroDensity,
)
from orthant_reflect.paths import (
    GridPath,
    delay_one_step,
    discretize,
    modulus_of_continuity,
    read_path_csv,
    refine,
    sup_distance,
    write_path_csv,
)
from orthant_reflect.skorokhod import fast_scheme, fixed_point_map


def brute_modulus(y: GridPath, delta: float, t: float) -> float:
    """All grid pairs, no windowing tricks."""
    times = y.times
    best = 0.0
    idx = [i for i in range(len(times)) if times[i] <= t + 1e-12]
    for i, j in itertools.combinations(idx, 2):
        if times[j] - times[i] <= delta + 1e-12:
            best = max(best, float(np.max(np.abs(y.values[j] - y.values[i]))))
    return best


def test_discretize_jump(jump_step):
    y = discretize(jump_step, 4, 2.0)
    assert y.steps == 8
    np.testing.assert_array_equal(y.values[:4], 0.0)
    np.testing.assert_array_equal(y.values[4:], -1.0)


def test_discretize_constant_and_linear():
    c = discretize(lambda t: [1.5, -2.0], 7, 3.0)
    assert np.all(c.values == [1.5, -2.0])
    lin = discretize(lambda t: t, 2, 1.0)
    np.testing.assert_array_equal(lin.values[:, 0], [0.0, 0.5, 1.0])


def test_discretize_rejects_bad_grid():
    with pytest.raises(ZeroDensity):
        discretize(lambda t: 0.0, 0, 1.0)
    with pytest.raises(NonpositiveHorizon):
        discretize(lambda t: 0.0, 3, 0.0)


def test_evaluation_is_cadlag():
    y = GridPath(2, 1.0, [[0.0], [1.0], [2.0]])
    assert y.at(0.49)[0] == 0.0
    assert y.at(0.5)[0] == 1.0
    assert y.at(0.99)[0] == 1.0
    assert y.at(5.0)[0] == 2.0


def test_step_function_right_continuous(jump_step):
    assert jump_step(0.999)[0] == 0.0
    assert jump_step(1.0)[0] == -1.0


def test_delay_one_step():
    u = GridPath(1, 2.0, [[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(delay_one_step(u).values[:, 0], [1.0, 1.0, 2.0])
    c = GridPath(3, 1.0, np.full((4, 2), 0.7))
    np.testing.assert_array_equal(delay_one_step(c).values, c.values)


@pytest.mark.parametrize("n", [4, 16, 64])
def test_delayed_regulator_regenerates_scheme(example_q, jump_step, n):
    # applying F^n to the one-step-delayed regulator gives the regulator back
    y = discretize(jump_step, n, 2.0)
    k = fast_scheme(example_q, y).k
    regenerated = fixed_point_map(example_q, delay_one_step(k).values, y.values)
    np.testing.assert_array_equal(regenerated, k.values)


def test_modulus_simple_cases(jump_step):
    assert modulus_of_continuity(GridPath(5, 1.0, np.ones((6, 2))), 0.2, 1.0) == 0.0
    n = 50
    lin = discretize(lambda t: t, n, 1.0)
    assert modulus_of_continuity(lin, 1 / n, 1.0) == pytest.approx(1 / n, rel=1e-12)
    y = discretize(jump_step, 16, 2.0)
    assert modulus_of_continuity(y, 1 / 16, 2.0) == brute_modulus(y, 1 / 16, 2.0) == 1.0


def test_modulus_matches_brute_force(rng):
    for _ in range(30):
        n = int(rng.integers(1, 20))
        horizon = float(rng.uniform(0.2, 3.0))
        steps = int(np.floor(n * horizon + 1e-9))
        y = GridPath(n, horizon, rng.normal(size=(steps + 1, int(rng.integers(1, 4)))))
        delta = float(rng.uniform(0.01, 1.5))
        t = float(rng.uniform(0.05, horizon))
        assert modulus_of_continuity(y, delta, t) == pytest.approx(brute_modulus(y, delta, t), abs=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_modulus_monotone(seed, d1, d2):
    rng = np.random.default_rng(seed)
    y = GridPath(10, 2.0, np.cumsum(rng.normal(size=(21, 2)), axis=0))
    lo, hi = sorted((d1, d2))
    assert modulus_of_continuity(y, lo, 2.0) <= modulus_of_continuity(y, hi, 2.0)
    assert modulus_of_continuity(y, lo, 1.0) <= modulus_of_continuity(y, lo, 2.0)


def test_sup_distance_basic():
    a = GridPath(4, 1.0, np.arange(10.0).reshape(5, 2))
    assert sup_distance(a, a) == 0.0
    b = GridPath(4, 1.0, a.values + np.array([0.3, -0.7]))
    assert sup_distance(a, b) == pytest.approx(0.7)
    with pytest.raises(DensityMismatch):
        sup_distance(a, GridPath(2, 2.0, np.zeros((5, 2))))
    with pytest.raises(DimensionMismatch):
        sup_distance(a, GridPath(4, 1.0, np.zeros((5, 3))))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_sup_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (GridPath(5, 1.0, rng.normal(size=(6, 2))) for _ in range(3))
    assert sup_distance(a, b) == sup_distance(b, a)
    assert sup_distance(a, c) <= (sup_distance(a, b) + sup_distance(b, c)) * (1 + 1e-15) + 1e-15


def test_delay_commutes_with_restriction(jump_step):
    long = delay_one_step(discretize(jump_step, 8, 2.0))
    short = delay_one_step(discretize(jump_step, 8, 1.5))
    np.testing.assert_array_equal(long.values[: short.steps + 1], short.values)


def test_refine_keeps_step_values():
    u = GridPath(2, 1.0, [[0.0], [1.0], [2.0]])
    np.testing.assert_array_equal(refine(u, 3).values[:, 0], [0, 0, 0, 1, 1, 1, 2])


def test_csv_round_trip(tmp_path, rng):
    y = GridPath(7, 2.0, rng.normal(size=(15, 3)))
    path = tmp_path / "y.csv"
    write_path_csv(y, path)
    back = read_path_csv(path)
    assert (back.n, back.steps, back.d) == (7, 14, 3)
    np.testing.assert_array_equal(back.values, y.values)
    assert path.read_text().splitlines()[0] == "t,x1,x2,x3"


def test_csv_rejects_non_uniform(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x1\n0,1\n0.5,1\n1.2,1\n")
    with pytest.raises(ConfigParse, match="non-uniform"):
        read_path_csv(path)
