# resolab/core/angular.py
"""Spectral bookkeeping for the sphere operator Lambda = -Delta_S + (n-1)(n-3)/4."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Union

from resolab.errors import ParameterError, PoleAtTError

Real = Union[int, float, Fraction]

DEFAULT_JMAX = 64


class Pole(NamedTuple):
    j: int
    t_minus: Real
    t_plus: Real


@dataclass(frozen=True)
class AngularContext:
    n: int
    jmax: int = DEFAULT_JMAX

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if self.jmax < 0:
            raise ParameterError(f"jmax must be >= 0, got {self.jmax}")

    def eigenvalues(self) -> list[Real]:
        return [lambda_(self.n, j) for j in range(self.jmax + 1)]

    def poles(self) -> list[Pole]:
        return pole_set(self.n, self.jmax)


def lambda_(n: int, j: int) -> Real:
    """lambda_j = j^2 + (n-2) j + (n-1)(n-3)/4."""
    if n < 2 or j < 0:
        raise ParameterError(f"need n >= 2 and j >= 0, got n={n}, j={j}")
    return j * j + (n - 2) * j + (n - 1) * (n - 3) / 4


def pole_set(n: int, jmax: int = DEFAULT_JMAX) -> list[Pole]:
    """Imaginary parts t_{-,j}, t_{+,j} of the poles of (sigma^2 - i sigma + lambda_j)^{-1}."""
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    out = []
    for j in range(jmax + 1):
        k = (n - 2) + 2 * j
        out.append(Pole(j, (1 - k) / 2, (1 + k) / 2))
    return out


def pole_mode(n: int, t: Real) -> int | None:
    """The mode j with t in {t_{-,j}, t_{+,j}}, or None.

    t belongs to T exactly when |2t - 1| - (n - 2) is a non-negative even
    integer; the test is done in exact rational arithmetic.
    """
    k = abs(2 * Fraction(t) - 1) - (n - 2)
    if k < 0 or k.denominator != 1 or k.numerator % 2:
        return None
    return int(k.numerator // 2)


def is_in_T(n: int, t: Real) -> bool:
    return pole_mode(n, t) is not None


def upsilon(n: int, t: Real) -> Real:
    """1 / dist(t^2 - t, {lambda_j}); raises PoleAtTError for t in T."""
    j_hit = pole_mode(n, t)
    if j_hit is not None:
        raise PoleAtTError(t, j_hit)
    exact = isinstance(t, Fraction)
    target = t * t - t
    best = None
    j = 0
    while True:
        lam = Fraction(4 * j * j + 4 * (n - 2) * j + (n - 1) * (n - 3), 4) if exact else lambda_(n, j)
        d = abs(target - lam)
        if best is None or d < best:
            best = d
        # lambda_j increases in j; once past target + best nothing closer remains
        if lam > target + best:
            break
        j += 1
    if best == 0:
        raise PoleAtTError(t, j)
    return 1 / best


def resolvent_factor(sigma: complex, n: int, j: int) -> float:
    """|(sigma^2 - i sigma + lambda_j)^{-1}|."""
    return 1.0 / abs(sigma * sigma - 1j * sigma + lambda_(n, j))
