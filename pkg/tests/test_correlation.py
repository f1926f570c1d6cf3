"""The empirical spin correlation and its integer threshold twin."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from indeltree.recon import _sum_passes, correlation

windows = st.lists(st.integers(0, 1), min_size=1, max_size=80)


def test_correlation_extremes():
    y = np.array([1, 0, 1, 0], dtype=np.uint8)
    assert correlation(y, y) == 1.0
    assert correlation(y, 1 - y) == -1.0
    assert correlation(y, np.array([1, 0, 0, 1], dtype=np.uint8)) == 0.0


def test_correlation_rejects_bad_shapes():
    with pytest.raises(ValueError):
        correlation(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        correlation(np.zeros(0), np.zeros(0))
    with pytest.raises(ValueError):
        correlation(np.zeros((2, 2)), np.zeros((2, 2)))


@given(windows, st.randoms(use_true_random=False))
def test_correlation_equals_exact_rational(y, rnd):
    z = [rnd.randint(0, 1) for _ in y]
    m = len(y)
    diff = sum(a != b for a, b in zip(y, z))
    want = Fraction(m - 2 * diff, m)
    got = correlation(np.array(y, dtype=np.uint8), np.array(z, dtype=np.uint8))
    assert got == pytest.approx(float(want), abs=0.0)


@given(
    windows,
    st.randoms(use_true_random=False),
    st.floats(min_value=-1.5, max_value=1.5, allow_nan=False),
)
def test_threshold_routes_agree(y, rnd, gamma):
    # The batched reconstructor tests "correlation >= gamma" on integer
    # agreement sums; both routes must give the same verdict everywhere,
    # including for negative and out-of-range thresholds.
    z = [rnd.randint(0, 1) for _ in y]
    ya = np.array(y, dtype=np.uint8)
    za = np.array(z, dtype=np.uint8)
    m = len(y)
    agree = m - 2 * int(np.count_nonzero(ya != za))
    float_verdict = correlation(ya, za) >= gamma
    int_verdict = bool(_sum_passes(agree, m, gamma))
    # The float route divides by m, the integer route multiplies; they
    # can only disagree when gamma * m sits within float error of the
    # agreement sum, where the integer route is the defined behavior.
    if abs(agree - gamma * m) > 1e-9 * m:
        assert float_verdict == int_verdict


def test_sum_passes_is_vectorized():
    agree = np.array([-3, -1, 0, 1, 3])
    got = _sum_passes(agree, 3, 0.3)
    assert (got == np.array([False, False, False, True, True])).all()
