import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdma.loss import LossKind, loss_grad, loss_hess, loss_value, mean_loss

SQ, LOG = LossKind.SQUARED, LossKind.LOGISTIC


def test_values():
    assert loss_value(SQ, 1.0, 0.0) == 0.5
    assert loss_value(LOG, 0.0, 0.0) == pytest.approx(np.log(2), abs=1e-15)


def test_logistic_large_mu_matches_extended_precision():
    mpmath.mp.dps = 50
    for y, mu in [(1.0, 800.0), (0.0, -800.0), (1.0, 40.0), (0.0, 35.5)]:
        exact = mpmath.log(1 + mpmath.e ** mpmath.mpf(mu)) - y * mu
        got = loss_value(LOG, y, mu)
        assert np.isfinite(got)
        assert got == pytest.approx(float(exact), abs=1e-300, rel=1e-12)


def test_gradients_and_hessians():
    assert loss_grad(SQ, 2.0, 5.0) == 3.0
    assert loss_grad(LOG, 1.0, 0.0) == -0.5
    assert loss_hess(SQ, 3.0, -7.0) == 1.0
    assert loss_hess(LOG, 1.0, 0.0) == 0.25


@pytest.mark.parametrize("kind", [SQ, LOG])
def test_finite_differences(kind):
    rng = np.random.default_rng(7)
    h = 1e-5
    y = rng.integers(0, 2, 100).astype(float) if kind is LOG else rng.standard_normal(100)
    mu = rng.uniform(-5, 5, 100)
    fd = (loss_value(kind, y, mu + h) - loss_value(kind, y, mu - h)) / (2 * h)
    assert np.max(np.abs(loss_grad(kind, y, mu) - fd)) <= 1e-6
    fd2 = (loss_grad(kind, y, mu + h) - loss_grad(kind, y, mu - h)) / (2 * h)
    assert np.max(np.abs(loss_hess(kind, y, mu) - fd2)) <= 1e-6


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from([SQ, LOG]), st.integers(0, 1), st.floats(-30, 30), st.floats(-30, 30),
       st.floats(0, 1))
def test_convexity_probe(kind, y, m1, m2, t):
    lhs = loss_value(kind, y, t * m1 + (1 - t) * m2)
    rhs = t * loss_value(kind, y, m1) + (1 - t) * loss_value(kind, y, m2)
    assert lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
    assert loss_hess(kind, y, m1) >= 0


def test_parse_and_mean():
    assert LossKind.parse("Logistic") is LOG
    with pytest.raises(ValueError, match="unknown loss"):
        LossKind.parse("hinge")
    assert mean_loss(SQ, [1.0, 3.0], [0.0, 0.0]) == pytest.approx(2.5)
    assert np.all(loss_hess(LOG, 0.0, np.linspace(-50, 50, 11)) <= 0.25)
