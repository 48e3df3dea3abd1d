# resolab/core/potentials.py
"""
Radial potential families and the structural checks they must pass.

A PotentialSpec bundles V, V' and the declared envelopes (c1, delta near the
origin; y, c0, m away from it). Families are built by `make_potential`; every
shipped family passes `validate` on a 10^4-point log grid over (1e-6, 1e3).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate, optimize

from resolab.core.grids import log_sample_radii
from resolab.errors import DomainError, OneSidedDerivativeError, ParameterError
from resolab.schemas import InvariantCheck, ValidationReport

logger = logging.getLogger(__name__)

RadialFn = Callable[[np.ndarray], np.ndarray]

DELTA_MAX = 4.0 * (math.sqrt(2.0) - 1.0)
FAMILIES = ("zero", "singular-power", "coulomb-like", "barrier-bump", "long-range")
# relative slack on validation margins, for bounds that hold with equality
MARGIN_RTOL = 1e-12


@dataclass(frozen=True)
class PotentialSpec:
    """A radial potential with its declared singularity/decay envelopes."""

    family: str
    n: int
    E: float
    delta: float
    c1: float
    c0: float
    y: RadialFn
    m: RadialFn
    V: RadialFn
    Vprime: RadialFn
    breakpoints: tuple[float, ...] = ()
    p: Optional[float] = None
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"dimension n must be >= 2, got {self.n}")
        if not self.E > 0:
            raise ParameterError(f"energy E must be positive, got {self.E}")
        if not (0.0 <= self.delta < DELTA_MAX):
            raise ParameterError(f"delta must lie in [0, 4(sqrt2-1)), got {self.delta}")
        if self.c0 < 0 or self.c1 < 0:
            raise ParameterError("c0 and c1 must be non-negative")
        if self.p is not None and not (self.p >= 2 and self.p > self.n / 2):
            raise ParameterError(f"p must satisfy p >= 2 and p > n/2, got {self.p}")

    # -----------------------------------------------------------------
    # Evaluators
    # -----------------------------------------------------------------
    def eval(self, r):
        """V(r) for r > 0 (scalar or array)."""
        arr = _positive_radii(r)
        out = np.asarray(self.V(arr), dtype=float)
        return float(out) if out.ndim == 0 else out

    def eval_radial_derivative(self, r):
        """V'(r) for r > 0; raises at a declared jump of V'."""
        arr = _positive_radii(r)
        for bp in self.breakpoints:
            hit = np.isclose(arr, bp, rtol=1e-12, atol=0.0)
            if np.any(hit):
                left, right = self.one_sided_derivatives(bp)
                raise OneSidedDerivativeError(bp, left, right)
        out = np.asarray(self.Vprime(arr), dtype=float)
        return float(out) if out.ndim == 0 else out

    def one_sided_derivatives(self, r: float) -> tuple[float, float]:
        eps = 1e-10 * r
        return float(self.Vprime(np.asarray(r - eps))), float(self.Vprime(np.asarray(r + eps)))


def _positive_radii(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("potential evaluators require r > 0")
    return arr


# ---------------------------------------------------------------------
# m-function kinds
# ---------------------------------------------------------------------
def m_power(rho: float) -> RadialFn:
    """m(r) = (1+r)^(-rho)."""
    return lambda r: (1.0 + np.asarray(r, dtype=float)) ** (-rho)


def m_log(rho: float) -> RadialFn:
    """m(r) = log^(-1-rho)(e+r)."""
    return lambda r: np.log(math.e + np.asarray(r, dtype=float)) ** (-1.0 - rho)


def make_m(kind: str, rho: float) -> RadialFn:
    if rho <= 0:
        raise ParameterError(f"rho must be positive, got {rho}")
    if kind == "power":
        return m_power(rho)
    if kind == "log":
        return m_log(rho)
    raise ParameterError(f"unknown m kind {kind!r}")


def _zeros(r):
    return np.zeros_like(np.asarray(r, dtype=float))


def _sup(fn: RadialFn, lo: float, hi: float, count: int = 4000, open_end: bool = False) -> float:
    """Sup of fn on [lo, hi]: log-grid scan refined by a bounded search.

    With `open_end`, hi stands in for infinity and a ratio still rising there
    is rejected.
    """
    rr = np.geomspace(lo, hi, count)
    vals = np.asarray(fn(rr), dtype=float)
    k = int(np.argmax(vals))
    best = float(vals[k])
    a, b = rr[max(k - 1, 0)], rr[min(k + 1, count - 1)]
    if b > a:
        res = optimize.minimize_scalar(
            lambda s: -float(fn(np.asarray(s))), bounds=(a, b), method="bounded",
            options={"xatol": 1e-12 * b},
        )
        best = max(best, -float(res.fun))
    if open_end and k == count - 1 and vals[-1] > vals[-2]:
        raise ParameterError("envelope ratio grows without bound; choose another m kind or rho")
    return best


def _inflate(value: float) -> float:
    return value * (1.0 + 1e-3) if value > 0 else 0.0


def _far_constant(Vprime: RadialFn, m: RadialFn) -> float:
    """Smallest c0 with |V'| <= c0 m / r on (1, inf), inflated slightly."""
    return _inflate(_sup(lambda r: np.abs(r * Vprime(r)) / m(r), 1.0, 1e8, open_end=True))


def _near_constant(V: RadialFn, Vprime: RadialFn, delta: float) -> float:
    """Smallest c1 covering both near-origin bounds on (0, 1), inflated slightly."""
    return _inflate(max(
        _sup(lambda r: np.abs(V(r)) * r ** delta, 1e-8, 1.0),
        _sup(lambda r: np.abs(Vprime(r)) * r ** (1.0 + delta), 1e-8, 1.0),
    ))


# ---------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------
def make_potential(
    family: str,
    n: int,
    E: float,
    *,
    c0: Optional[float] = None,
    c1: Optional[float] = None,
    delta: Optional[float] = None,
    amplitude: Optional[float] = None,
    center: float = 1.0,
    width: Optional[float] = None,
    decay: float = 0.5,
    m_kind: Optional[str] = None,
    rho: float = 1.0,
    p: Optional[float] = None,
) -> PotentialSpec:
    """Build a shipped family; undeclared c0/c1 are computed from V."""
    if family not in FAMILIES:
        raise ParameterError(f"unknown potential family {family!r}; expected one of {FAMILIES}")
    params = {k: v for k, v in dict(
        c0=c0, c1=c1, delta=delta, amplitude=amplitude, center=center,
        width=width, decay=decay, rho=rho,
    ).items() if v is not None}

    if family == "zero":
        return PotentialSpec(
            family, n, E, delta=0.0, c1=c1 or 0.0, c0=c0 or 0.0,
            y=_zeros, m=_zeros, V=_zeros, Vprime=_zeros, p=p, params=params,
        )

    if family == "singular-power":
        amp = 1.0 if amplitude is None else amplitude
        d = 1.0 if delta is None else delta
        tail = 1.0 if width is None else width

        def V(r):
            r = np.asarray(r, dtype=float)
            core = amp * r ** (-d)
            return np.where(r <= 1.0, core, core * np.exp(-(r - 1.0) / tail))

        def Vprime(r):
            r = np.asarray(r, dtype=float)
            inner = -d * amp * r ** (-d - 1.0)
            outer = -V(r) * (d / r + 1.0 / tail)
            return np.where(r <= 1.0, inner, outer)

        m = make_m(m_kind or "power", rho)
        return PotentialSpec(
            family, n, E, delta=d,
            c1=abs(amp) * max(1.0, d) if c1 is None else c1,
            c0=_far_constant(Vprime, m) if c0 is None else c0,
            y=lambda r: np.abs(V(r)), m=m, V=V, Vprime=Vprime,
            breakpoints=(1.0,), p=p, params=params,
        )

    if family == "coulomb-like":
        Z = 1.0 if amplitude is None else amplitude

        def V(r):
            return Z / np.asarray(r, dtype=float)

        def Vprime(r):
            return -Z / np.asarray(r, dtype=float) ** 2

        m = make_m(m_kind or "power", rho)
        return PotentialSpec(
            family, n, E, delta=1.0,
            c1=abs(Z) if c1 is None else c1,
            c0=_far_constant(Vprime, m) if c0 is None else c0,
            y=lambda r: abs(Z) / np.asarray(r, dtype=float), m=m, V=V, Vprime=Vprime,
            p=p, params=params,
        )

    if family == "barrier-bump":
        A = 2.0 * E if amplitude is None else amplitude
        wd = 1.0 / math.sqrt(8.0) if width is None else width

        def V(r):
            x = (np.asarray(r, dtype=float) - center) / wd
            return A * np.exp(-x * x)

        def Vprime(r):
            x = (np.asarray(r, dtype=float) - center) / wd
            return -2.0 * x / wd * A * np.exp(-x * x)

        def y(r):
            r = np.asarray(r, dtype=float)
            return np.where(r <= center, abs(A), np.abs(V(r)))

        m = make_m(m_kind or "power", rho)
        return PotentialSpec(
            family, n, E, delta=0.0,
            c1=_near_constant(V, Vprime, 0.0) if c1 is None else c1,
            c0=_far_constant(Vprime, m) if c0 is None else c0,
            y=y, m=m, V=V, Vprime=Vprime, p=p, params=params,
        )

    # long-range: V = A r^(-decay), smooth on (0, inf)
    A = E if amplitude is None else amplitude
    kappa = decay

    def V(r):
        return A * np.asarray(r, dtype=float) ** (-kappa)

    def Vprime(r):
        return -kappa * A * np.asarray(r, dtype=float) ** (-kappa - 1.0)

    m = make_m(m_kind or "log", rho)
    return PotentialSpec(
        family, n, E, delta=kappa,
        c1=abs(A) * max(1.0, kappa) if c1 is None else c1,
        c0=_far_constant(Vprime, m) if c0 is None else c0,
        y=lambda r: np.abs(V(r)), m=m, V=V, Vprime=Vprime, p=p, params=params,
    )


# ---------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------
def default_validation_grid(r_inf: float = 1e3, count: int = 10_000) -> np.ndarray:
    return log_sample_radii(1e-6, r_inf, count)


def _worst(name: str, bound: np.ndarray, value: np.ndarray, radii: np.ndarray) -> InvariantCheck:
    """Smallest margin bound - |value|; a point passes within rounding of its bound."""
    if radii.size == 0:
        return InvariantCheck(name=name, margin=math.inf, radius=None, passed=True)
    margin = bound - np.abs(value)
    k = int(np.argmin(margin))
    ok = margin >= -MARGIN_RTOL * np.abs(bound)
    return InvariantCheck(
        name=name, margin=float(margin[k]), radius=float(radii[k]), passed=bool(ok.all()),
    )


def _m_integrals(m: RadialFn, r_inf: float) -> list[float]:
    out = []
    for R in (r_inf, 10.0 * r_inf, 100.0 * r_inf):
        val, _ = integrate.quad(
            lambda r: float(m(np.asarray(r))) / (r + 1.0), 0.0, R, limit=400,
            points=[p for p in (1.0, 10.0, 100.0) if p < R] or None,
        )
        out.append(val)
    return out


def validate(pot: PotentialSpec, grid: Optional[np.ndarray] = None) -> ValidationReport:
    """Worst-case margins of the five structural invariants on `grid`."""
    rr = np.sort(np.asarray(default_validation_grid() if grid is None else grid, dtype=float))
    near, far = rr[rr < 1.0], rr[rr >= 1.0]
    far_open = rr[rr > 1.0]
    V = np.asarray(pot.V(rr), dtype=float)
    dV = np.asarray(pot.Vprime(rr), dtype=float)

    checks = [
        _worst("near_origin_value", pot.c1 * near ** (-pot.delta), V[rr < 1.0], near),
        _worst("far_value", np.asarray(pot.y(far), dtype=float), V[rr >= 1.0], far),
        _worst("near_origin_derivative", pot.c1 * near ** (-1.0 - pot.delta), dV[rr < 1.0], near),
        _worst("far_derivative", pot.c0 * np.asarray(pot.m(far_open)) / far_open, dV[rr > 1.0], far_open),
    ]

    m_vals = np.asarray(pot.m(rr), dtype=float)
    range_margin = np.minimum(m_vals, 1.0 - m_vals)
    k = int(np.argmin(range_margin))
    integrals = _m_integrals(pot.m, float(rr[-1]))
    steps = np.diff(integrals)
    converging = bool(steps[1] <= steps[0] * (1.0 + 1e-9) + 1e-14)
    checks.append(InvariantCheck(
        name="m_range_and_integrability", margin=float(range_margin[k]), radius=float(rr[k]),
        passed=bool(range_margin[k] >= 0 and converging),
        detail={"integrals": integrals, "converging": converging},
    ))

    passed = all(c.passed for c in checks)
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, "validate %s: %s", pot.family, "pass" if passed else "FAIL")
    return ValidationReport(family=pot.family, grid_points=int(rr.size), checks=checks, passed=passed)


# ---------------------------------------------------------------------
# b := sup{r > 1 : V + r V'/2 >= E/4 and V >= E/4}
# ---------------------------------------------------------------------
def _b_indicator(pot: PotentialSpec, r: np.ndarray) -> np.ndarray:
    V = np.asarray(pot.V(r), dtype=float)
    dV = np.asarray(pot.Vprime(r), dtype=float)
    return np.minimum(V + 0.5 * r * dV, V) - 0.25 * pot.E


def compute_b(pot: PotentialSpec, r_hi: float = 1e6, count: int = 20_000) -> float:
    """The radius b, or 1.0 when the defining set is empty."""
    while True:
        rr = np.geomspace(1.0, r_hi, count)[1:]
        g = _b_indicator(pot, rr)
        inside = np.flatnonzero(g >= 0)
        if inside.size == 0:
            return 1.0
        k = int(inside[-1])
        if k < rr.size - 1:
            break
        if r_hi >= 1e12:
            raise ParameterError("V does not fall below E/4; b is not finite")
        r_hi *= 100.0

    # refine inside the coarse bracket before the root solve
    lo, hi = rr[k], rr[k + 1]
    fine = np.linspace(lo, hi, 201)
    gf = _b_indicator(pot, fine)
    kf = int(np.flatnonzero(gf >= 0)[-1])
    if kf == fine.size - 1:
        return float(hi)
    a, c = fine[kf], fine[kf + 1]
    if gf[kf] == 0.0:
        return float(a)
    b = optimize.brentq(
        lambda s: float(_b_indicator(pot, np.asarray(s))), a, c, xtol=1e-14, rtol=1e-10,
    )
    logger.debug("b for %s located at %.12g", pot.family, b)
    return float(b)
