import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesqart.metrics import auc, error_rate, mwad
from bayesqart.simdata import (
    CIRCLE_R2_D10,
    HETERO_BETA,
    HETERO_GAMMA,
    calibrate_circle_radius_sq,
    friedman_mean,
    friedman_noise,
    gen_circle,
    gen_friedman,
    gen_hetero,
    simulate,
)


def test_generators_are_pure_functions_of_seed():
    for design in ("friedman", "hetero", "circle"):
        a, b = simulate(design, 50, 9), simulate(design, 50, 9)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
        assert not np.array_equal(a.y, simulate(design, 50, 10).y)
    with pytest.raises(ValueError):
        simulate("spiral", 10, 0)
    with pytest.raises(ValueError):
        simulate("friedman", 0, 0)


def test_shapes():
    assert gen_friedman(40, 0).X.shape == (40, 10)
    assert gen_hetero(40, 0).X.shape == (40, 30)
    d = gen_circle(40, 0)
    assert d.X.shape == (40, 10) and set(np.unique(d.y)) <= {0.0, 1.0}
    assert d.X.min() >= -1 and d.X.max() <= 1


def test_friedman_mean_known_points():
    x = np.zeros((1, 10))
    assert friedman_mean(x)[0] == pytest.approx(5.0)
    x = np.full((1, 10), 0.5)
    assert friedman_mean(x)[0] == pytest.approx(10 * np.sin(np.pi / 4) + 0 + 5 + 2.5)


def test_friedman_noise_moments():
    e = friedman_noise(400_000, np.random.default_rng(0))
    # mixture 0.8 N(0, 1) + 0.2 N(1, 4)
    assert e.mean() == pytest.approx(0.2, abs=0.01)
    assert e.var() == pytest.approx(0.8 + 0.2 * 5 - 0.04, abs=0.02)


def test_hetero_structure():
    d = gen_hetero(20_000, 1)
    resid = d.y - d.X @ HETERO_BETA
    scale = d.X @ HETERO_GAMMA
    z = resid / scale
    assert abs(z.mean()) < 0.03 and z.std() == pytest.approx(1.0, abs=0.03)
    assert HETERO_BETA.sum() == 20 and HETERO_GAMMA.sum() == 5


def test_circle_classes_balanced():
    assert calibrate_circle_radius_sq(10, 200_000, seed=3) == pytest.approx(CIRCLE_R2_D10, abs=0.01)
    y = gen_circle(100_000, 2).y
    assert y.mean() == pytest.approx(0.5, abs=0.01)


def test_mwad_identities():
    pred = np.array([1.0, 2.0, 3.0])
    act = np.array([2.0, 2.0, 0.0])
    assert mwad(pred, act, 0.5) == pytest.approx(np.mean(np.abs(pred - act)) / 2)
    # pred - actual = (-1, 0, 3): losses 0.75, 0, 0.75
    assert mwad(pred, act, 0.25) == pytest.approx(0.5)
    assert mwad(pred, act, 0.25, flip=True) == pytest.approx(mwad(pred, act, 0.75))
    assert mwad(act, act, 0.3) == 0.0
    with pytest.raises(ValueError):
        mwad(pred, act[:2], 0.5)
    with pytest.raises(ValueError):
        mwad(pred, act, 1.0)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=30), st.floats(0.05, 0.95))
@settings(max_examples=80, deadline=None)
def test_mwad_convex_and_nonnegative(vals, tau):
    a = np.array(vals)
    p1, p2 = a + 1.0, a - 2.0
    mid = mwad(0.5 * (p1 + p2), a, tau)
    assert mwad(p1, a, tau) >= 0
    assert mid <= 0.5 * (mwad(p1, a, tau) + mwad(p2, a, tau)) + 1e-9


def test_error_rate():
    assert error_rate([1, 0, 1, 1], [1, 1, 1, 0]) == 0.5


def brute_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p, n in itertools.product(pos, neg))
    return wins / (pos.size * neg.size)


@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
@settings(max_examples=80, deadline=None)
def test_auc_matches_pairwise_count(pairs):
    s = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if y.min() == y.max():
        with pytest.raises(ValueError):
            auc(s, y)
        return
    assert auc(s, y) == pytest.approx(brute_auc(s, y))
    # invariant under a strictly increasing map of the scores
    assert auc(np.exp(s) * 3 + 1, y) == pytest.approx(auc(s, y))
