"""Trigonometric test functions: norms, calculus, library lookup."""

import numpy as np
import pytest
from scipy.integrate import quad

from kpzlat.testfunctions import (
    MAX_LIBRARY_FREQUENCY,
    TrigPolynomial,
    by_name,
    cosine,
    indicator_fejer,
    sine,
    standard_library,
)


def test_sine_cosine_values():
    x = np.linspace(0.0, 1.0, 11)
    assert np.allclose(sine(2)(x), np.sin(4 * np.pi * x), atol=1e-14)
    assert np.allclose(cosine(3)(x), np.cos(6 * np.pi * x), atol=1e-14)


def test_frequency_range_is_enforced():
    with pytest.raises(ValueError):
        sine(0)
    with pytest.raises(ValueError):
        cosine(MAX_LIBRARY_FREQUENCY + 1)


def test_parseval_l2_norm():
    for phi in standard_library():
        num, _ = quad(lambda x: phi(np.array(x)) ** 2, 0.0, 1.0, limit=200)
        assert phi.l2_norm_sq == pytest.approx(num, abs=1e-12)


def test_parseval_h1_seminorm():
    for phi in standard_library():
        dphi = phi.derivative()
        num, _ = quad(lambda x: dphi(np.array(x)) ** 2, 0.0, 1.0, limit=200)
        assert phi.h1_seminorm_sq == pytest.approx(num, abs=1e-9)


def test_derivative_matches_finite_difference():
    phi = by_name("mixed3")
    d = phi.derivative()
    x = np.linspace(0.0, 1.0, 37)
    h = 1e-6
    fd = (phi(x + h) - phi(x - h)) / (2 * h)
    assert np.allclose(d(x), fd, atol=1e-6)


def test_periodicity():
    phi = by_name("mixed3")
    x = np.linspace(0.0, 1.0, 17)
    assert np.allclose(phi(x), phi(x + 1.0), atol=1e-13)
    assert np.allclose(phi(x), phi(x - 3.0), atol=1e-13)


def test_fourier_coefficients_reconstruct():
    phi = by_name("mixed3")
    coeffs = phi.fourier_coefficients()
    x = np.linspace(0.0, 1.0, 23)
    freq = np.arange(len(coeffs))
    basis = np.exp(2j * np.pi * np.outer(x, freq))
    rec = np.real(basis[:, 0] * coeffs[0] + 2.0 * np.real(basis[:, 1:] * coeffs[1:]).sum(axis=1))
    assert np.allclose(rec, phi(x), atol=1e-12)


def test_by_name_lookup():
    assert by_name("sin1").name == "sin1"
    assert by_name("cos4").name == "cos4"
    assert by_name("mixed3").name == "mixed3"
    with pytest.raises(ValueError):
        by_name("tanh1")


def test_constant_function_norms():
    const = TrigPolynomial(2.0, (), (), name="const")
    assert const.l2_norm_sq == pytest.approx(4.0)
    assert const.h1_seminorm_sq == 0.0
    assert np.allclose(const.derivative()(np.linspace(0, 1, 5)), 0.0)


def test_indicator_fejer_approximates_block():
    phi = indicator_fejer(0.5, 0.25)
    x = np.linspace(0.0, 1.0, 4001)
    num = np.trapezoid(phi(x), x)
    # mass of the indicator of [0.5, 0.75) scaled by 1/eps is 1
    assert num == pytest.approx(1.0, abs=5e-2)
    inside = phi(np.array([0.55, 0.65]))
    outside = phi(np.array([0.1, 0.3, 0.9]))
    assert np.all(inside > 2.0)
    assert np.all(np.abs(outside) < 0.8)
