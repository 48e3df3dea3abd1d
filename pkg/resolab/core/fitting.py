# resolab/core/fitting.py
from dataclasses import dataclass

import numpy as np
import pandas as pd
from statsmodels.regression.linear_model import OLS


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    rsquared: float
    points: int


def ols_line(x, y) -> FitResult:
    """OLS fit for y ~ slope*x + c"""
    df = pd.concat([pd.Series(x, dtype=float), pd.Series(y, dtype=float)], axis=1).dropna()
    if len(df) < 2:
        return FitResult(np.nan, np.nan, np.nan, len(df))
    X = df.iloc[:, 0].values
    Y = df.iloc[:, 1].values
    Xmat = np.vstack([X, np.ones(len(X))]).T
    model = OLS(Y, Xmat).fit()
    # a perfect or single-abscissa fit leaves rsquared undefined
    r2 = float(model.rsquared) if np.isfinite(model.rsquared) else 1.0
    return FitResult(float(model.params[0]), float(model.params[1]), r2, len(df))


def fit_exponential_law(h, norms) -> FitResult:
    """log norm = C3 / h + c on the smallest half of the h values."""
    h = np.asarray(h, dtype=float)
    norms = np.asarray(norms, dtype=float)
    order = np.argsort(h)
    keep = order[: max(2, (len(h) + 1) // 2)]
    return ols_line(1.0 / h[keep], np.log(norms[keep]))


def fit_power_law(h, norms) -> FitResult:
    """log norm = p log(1/h) + c."""
    h = np.asarray(h, dtype=float)
    return ols_line(np.log(1.0 / h), np.log(np.asarray(norms, dtype=float)))
