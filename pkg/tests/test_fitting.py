import math

import numpy as np
import pytest

from resolab.core.fitting import fit_exponential_law, fit_power_law, ols_line


def test_exact_line():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    fit = ols_line(x, 2.5 * x - 1.0)
    assert fit.slope == pytest.approx(2.5)
    assert fit.intercept == pytest.approx(-1.0)
    assert fit.rsquared == pytest.approx(1.0)
    assert fit.points == 4


def test_nan_rows_are_dropped():
    fit = ols_line([0.0, 1.0, np.nan, 3.0], [1.0, 3.0, 100.0, 7.0])
    assert fit.points == 3
    assert fit.slope == pytest.approx(2.0)


def test_too_few_points():
    fit = ols_line([1.0, np.nan], [2.0, 3.0])
    assert math.isnan(fit.slope) and math.isnan(fit.intercept)
    assert fit.points == 1


def test_exponential_law_uses_the_smallest_h():
    h = np.array([0.05, 0.1, 0.2, 0.4, 0.8])
    norms = np.exp(3.0 / h + 0.5)
    # corrupt the largest h; it lies outside the fitted half
    norms[-1] = 1.0
    fit = fit_exponential_law(h, norms)
    assert fit.points == 3
    assert fit.slope == pytest.approx(3.0, rel=1e-9)
    assert fit.intercept == pytest.approx(0.5, abs=1e-7)


def test_power_law():
    h = np.geomspace(0.01, 0.5, 6)
    fit = fit_power_law(h, 4.0 / h)
    assert fit.slope == pytest.approx(1.0, rel=1e-10)
    assert fit.intercept == pytest.approx(math.log(4.0), rel=1e-9)
