"""Tests for numeric helpers."""
import math

import numpy as np
import pytest

from utils.helpers import clean_for_json, format_float, gamma_ratio, round_sig


def test_gamma_ratio_small_arguments():
    assert gamma_ratio(5.0, 3.0) == pytest.approx(12.0)
    np.testing.assert_allclose(gamma_ratio(np.array([2.0, 3.0]), 1.0), [1.0, 2.0])


def test_gamma_ratio_large_arguments():
    # Gamma(x + 1/2) / Gamma(x) ~ sqrt(x)
    assert gamma_ratio(1e6 + 0.5, 1e6) == pytest.approx(1e3, rel=1e-6)


def test_gamma_ratio_sign():
    # Gamma(-0.5) = -2 sqrt(pi)
    assert gamma_ratio(-0.5, 1.0) == pytest.approx(-2 * math.sqrt(math.pi))


@pytest.mark.parametrize(
    "x, digits, expected",
    [(5.2437e-6, 3, 5.24e-6), (123456.0, 2, 120000.0), (-0.0012345, 3, -0.00123), (0.0, 3, 0.0)],
)
def test_round_sig(x, digits, expected):
    assert round_sig(x, digits) == pytest.approx(expected, rel=1e-12)


def test_format_float_round_trips():
    value = 0.1 + 0.2
    assert float(format_float(value)) == value


def test_clean_for_json_nested():
    cleaned = clean_for_json({"a": (np.float32(0.5), np.bool_(True)), 3: [math.nan]})
    assert cleaned == {"a": [0.5, True], "3": [None]}
