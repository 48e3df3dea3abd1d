# resolab/core/mellin.py
"""
Mellin transform on log-uniform grids.

In x = log r the transform is a Fourier integral,

    M[u](tau + i t) = int e^{i (tau + i t) x} u(e^x) dx,

so the forward and inverse maps are trapezoid sums evaluated on a uniform
frequency grid with a chirp-z transform. A chunked direct sum is kept as an
oracle. r^2 d_r^2 = d_x^2 - d_x, hence v = r^2 Q u satisfies
M[v] = (sigma^2 - i sigma + lambda_j) M[u].
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import pandas as pd
from scipy.signal import czt

from resolab.core.angular import lambda_, pole_mode, resolvent_factor, upsilon
from resolab.core.grids import LogGrid, diff1, diff2
from resolab.errors import ContourError, PoleAtTError

logger = logging.getLogger(__name__)

Method = Literal["czt", "direct"]

DEFAULT_SIGMA_MAX = 40.0
DEFAULT_COUNT = 4096
_DIRECT_CHUNK = 256


@dataclass(frozen=True)
class MellinSpectrum:
    """Samples of M[u](tau + i t) on tau in [-sigma_max, sigma_max]."""

    t: float
    sigma_max: float
    count: int
    values: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(-self.sigma_max, self.sigma_max, self.count)

    @property
    def dtau(self) -> float:
        return 2.0 * self.sigma_max / (self.count - 1)

    @property
    def sigma(self) -> np.ndarray:
        return self.tau + 1j * self.t

    def scaled(self, factor: complex) -> "MellinSpectrum":
        return MellinSpectrum(self.t, self.sigma_max, self.count, factor * self.values, self.warnings)

    def l2_norm(self) -> float:
        w = np.full(self.count, self.dtau)
        w[0] = w[-1] = 0.5 * self.dtau
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau": self.tau, "re": self.values.real, "im": self.values.imag})


@dataclass(frozen=True)
class Decomposition:
    """u = E part + Pi part, each sampled on the grid."""

    E_part: np.ndarray
    poles: list[tuple[complex, complex]] = field(default_factory=list)
    Pi_sum: Optional[np.ndarray] = None
    reconstruction_residual: float = 0.0
    warnings: tuple[str, ...] = ()


# ---------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------
def _tail_warning(values: np.ndarray, rel: float, what: str) -> tuple[str, ...]:
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return ()
    worst = max(abs(values[0]), abs(values[-1]))
    if worst > rel * peak:
        msg = f"{what} not decayed at the ends ({worst / peak:.2e} of peak)"
        logger.warning(msg)
        return (msg,)
    return ()


def _direct_forward(g: np.ndarray, x: np.ndarray, tau: np.ndarray) -> np.ndarray:
    out = np.empty(tau.size, dtype=complex)
    for start in range(0, tau.size, _DIRECT_CHUNK):
        block = tau[start:start + _DIRECT_CHUNK]
        out[start:start + _DIRECT_CHUNK] = np.exp(1j * np.outer(block, x)) @ g
    return out


def forward(
    u: np.ndarray,
    grid: LogGrid,
    t: float = 0.0,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    count: int = DEFAULT_COUNT,
    method: Method = "czt",
) -> MellinSpectrum:
    """Trapezoid rule in x for M[u] along Im sigma = t."""
    u = np.asarray(u)
    if u.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} samples, got {u.shape}")
    warnings = _tail_warning(u, 1e-10, "input")
    x = grid.x
    g = grid.trapezoid_weights * np.exp(-t * x) * u
    tau = np.linspace(-sigma_max, sigma_max, count)
    if not np.any(g):
        values = np.zeros(count, dtype=complex)
    elif method == "direct":
        values = _direct_forward(g, x, tau)
    else:
        dtau = tau[1] - tau[0]
        a = np.exp(1j * sigma_max * grid.delta)
        w = np.exp(1j * dtau * grid.delta)
        values = czt(g.astype(complex), m=count, w=w, a=a) * np.exp(1j * tau * x[0])
    return MellinSpectrum(t, sigma_max, count, values, warnings)


def inverse(spec: MellinSpectrum, grid: LogGrid, method: Method = "czt") -> np.ndarray:
    """(1/2pi) int_{Im sigma = t} r^{-i sigma} v(sigma) d sigma, sampled on `grid`."""
    _tail_warning(spec.values, 1e-8, "spectrum")
    tau, dtau = spec.tau, spec.dtau
    c = np.full(spec.count, dtau)
    c[0] = c[-1] = 0.5 * dtau
    g = c * spec.values
    x = grid.x
    if not np.any(g):
        return np.zeros(grid.N, dtype=complex)
    if method == "direct":
        out = np.empty(grid.N, dtype=complex)
        for start in range(0, grid.N, _DIRECT_CHUNK):
            block = x[start:start + _DIRECT_CHUNK]
            out[start:start + _DIRECT_CHUNK] = np.exp(-1j * np.outer(block, tau)) @ g
    else:
        shifted = g * np.exp(-1j * np.arange(spec.count) * dtau * x[0])
        w = np.exp(-1j * dtau * grid.delta)
        out = czt(shifted, m=grid.N, w=w, a=1.0) * np.exp(1j * spec.sigma_max * x)
    return np.exp(spec.t * x) * out / (2.0 * math.pi)


def transform_at(u: np.ndarray, grid: LogGrid, sigma) -> np.ndarray:
    """M[u] at arbitrary complex sigma by direct trapezoid sums."""
    sigma = np.atleast_1d(np.asarray(sigma, dtype=complex))
    g = grid.trapezoid_weights * np.asarray(u)
    return np.exp(1j * np.outer(sigma, grid.x)) @ g


def weighted_l2(u: np.ndarray, grid: LogGrid, t: float) -> float:
    """||r^{-t-1/2} u||_{L^2(dr)}, computed in x as ||e^{-t x} u||_{L^2(dx)}."""
    return float(np.sqrt(np.sum(grid.trapezoid_weights * np.exp(-2.0 * t * grid.x) * np.abs(u) ** 2)))


# ---------------------------------------------------------------------
# Identities
# ---------------------------------------------------------------------
def gamma_ratio(sigma: complex, nderiv: int) -> complex:
    """(-1)^n Gamma(i sigma + n) / Gamma(i sigma) as the product prod_k (i sigma + k)."""
    if nderiv < 1:
        raise ValueError("nderiv must be >= 1")
    z = 1j * np.asarray(sigma, dtype=complex)
    prod = np.ones_like(z)
    for k in range(nderiv):
        prod = prod * (z + k)
    out = (-1) ** nderiv * prod
    return complex(out) if out.ndim == 0 else out


def r_power_derivative(u: np.ndarray, grid: LogGrid, nderiv: int) -> np.ndarray:
    """r^n d_r^n u for n in {1, 2}, via d_x in the log variable."""
    ux = diff1(u, grid.delta)
    if nderiv == 1:
        return ux
    if nderiv == 2:
        return diff2(u, grid.delta) - ux
    raise ValueError("nderiv must be 1 or 2")


def derivative_identity_check(
    u: np.ndarray,
    grid: LogGrid,
    nderiv: int,
    t: float = 0.0,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    count: int = DEFAULT_COUNT,
    method: Method = "czt",
) -> float:
    """Worst relative gap between M[r^n d^n u] and gamma_ratio * M[u]."""
    u = np.asarray(u)
    if not np.any(u):
        return 0.0
    base = forward(u, grid, t, sigma_max, count, method)
    lhs = forward(r_power_derivative(u, grid, nderiv), grid, t, sigma_max, count, method).values
    rhs = gamma_ratio(base.sigma, nderiv) * base.values
    mag = np.abs(base.values)
    keep = mag >= 1e-6 * mag.max()
    denom = np.maximum(np.abs(rhs[keep]), 1e-6 * np.abs(rhs[keep]).max())
    return float(np.max(np.abs(lhs[keep] - rhs[keep]) / denom))


def plancherel_check(
    u: np.ndarray,
    grid: LogGrid,
    t: float,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    count: int = DEFAULT_COUNT,
    method: Method = "czt",
) -> tuple[float, float]:
    """Relative errors of both Plancherel directions.

    forward:  ||M u||          vs (2 pi)^{1/2}  ||r^{-t-1/2} u||
    inverse:  ||r^{-t-1/2} M_t^{-1} v|| vs (2 pi)^{-1/2} ||v||, with v = M u
    """
    spec = forward(u, grid, t, sigma_max, count, method)
    rhs = math.sqrt(2.0 * math.pi) * weighted_l2(u, grid, t)
    if rhs == 0.0:
        return 0.0, 0.0
    fwd = abs(spec.l2_norm() - rhs) / rhs
    back = inverse(spec, grid, method)
    target = spec.l2_norm() / math.sqrt(2.0 * math.pi)
    inv = abs(weighted_l2(back, grid, t) - target) / target
    return fwd, inv


def roundtrip_error(
    u: np.ndarray,
    grid: LogGrid,
    t: float,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    count: int = DEFAULT_COUNT,
    method: Method = "czt",
) -> float:
    """Relative weighted L^2 error of inverse(forward(u))."""
    back = inverse(forward(u, grid, t, sigma_max, count, method), grid, method)
    ref = weighted_l2(u, grid, t)
    return 0.0 if ref == 0.0 else weighted_l2(back - u, grid, t) / ref


def contour_bound_holds(n: int, j: int, t0: float, tau: np.ndarray) -> bool:
    """|(sigma^2 - i sigma + lambda_j)^{-1}| <= Upsilon(t0) along Im sigma = t0."""
    bound = float(upsilon(n, t0))
    vals = np.array([resolvent_factor(complex(x, t0), n, j) for x in tau])
    return bool(np.all(vals <= bound * (1.0 + 1e-12)))


# ---------------------------------------------------------------------
# Decomposition u = E_{t0}(r^2 Q u) + Pi_{t0}(r^2 Q u)
# ---------------------------------------------------------------------
def apply_r2Q(u: np.ndarray, grid: LogGrid, n: int, j: int) -> np.ndarray:
    """v = r^2 Q u = -(u_xx - u_x) + lambda_j u for a single mode."""
    return -(diff2(u, grid.delta) - diff1(u, grid.delta)) + lambda_(n, j) * np.asarray(u)


def _mode_poles(n: int, j: int) -> tuple[float, float]:
    k = (n - 2) + 2 * j
    return (1 - k) / 2, (1 + k) / 2


def pole_residues(
    v: np.ndarray, grid: LogGrid, n: int, j: int, t0: float, N: float
) -> list[tuple[complex, complex, float]]:
    """(sigma_p, M[v](sigma_p), t_p - t_q) for poles of mode j with -N-1 < t_p < t0.

    i Res_{sigma = i t_p} r^{-i sigma} (sigma^2 - i sigma + lambda_j)^{-1} M[v]
    equals r^{t_p} M[v](i t_p) / (t_p - t_q).
    """
    t_minus, t_plus = _mode_poles(n, j)
    inside = [tp for tp in sorted({t_minus, t_plus}) if -N - 1 < tp < t0]
    if t_minus == t_plus and inside:
        raise ContourError(f"double pole at sigma = {t_minus}i lies in the residue strip")
    out = []
    for tp in inside:
        tq = t_plus if tp == t_minus else t_minus
        mv = complex(transform_at(v, grid, 1j * tp)[0])
        out.append((1j * tp, mv, tp - tq))
    return out


def contour_residue(fn, center: complex, radius: float = 1e-3, points: int = 256) -> complex:
    """Residue of `fn` at `center` by the trapezoid rule on a small circle."""
    theta = 2.0 * math.pi * np.arange(points) / points
    z = center + radius * np.exp(1j * theta)
    vals = np.array([fn(zz) for zz in z])
    return complex(np.mean(vals * radius * np.exp(1j * theta)))


def _check_contours(n: int, t0: float, N: float) -> None:
    for level, name in ((t0, "t0"), (-N - 1, "-N-1")):
        j = pole_mode(n, level)
        if j is not None:
            raise ContourError(f"{name}={level} lies in T (pole of mode {j})")


def decompose(
    u: np.ndarray,
    grid: LogGrid,
    n: int,
    j: int,
    t0: float,
    N: float = 0,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    count: int = DEFAULT_COUNT,
    method: Method = "czt",
) -> Decomposition:
    """Split a single-mode u into the contour part at level t0 and the pole sum."""
    _check_contours(n, t0, N)
    t_minus, t_plus = _mode_poles(n, j)
    gap = min(abs(t0 - t_minus), abs(t0 - t_plus))
    if gap < 1e-6:
        raise ContourError(f"contour Im sigma = {t0} passes within {gap:.1e} of a pole")

    u = np.asarray(u)
    if not np.any(u):
        return Decomposition(E_part=np.zeros(grid.N, dtype=complex), Pi_sum=np.zeros(grid.N, dtype=complex))

    v = apply_r2Q(u, grid, n, j)
    spec = forward(v, grid, t0, sigma_max, count, method)
    sig = spec.sigma
    symbol = sig * sig - 1j * sig + lambda_(n, j)
    E_part = inverse(MellinSpectrum(t0, sigma_max, count, spec.values / symbol), grid, method)

    poles = []
    Pi_sum = np.zeros(grid.N, dtype=complex)
    r = grid.nodes
    for sigma_p, mv, split in pole_residues(v, grid, n, j, t0, N):
        theta = mv / split
        poles.append((sigma_p, theta))
        Pi_sum += r ** sigma_p.imag * theta

    ref = weighted_l2(u, grid, t0)
    residual = weighted_l2(u - E_part - Pi_sum, grid, t0) / ref
    logger.debug("decompose n=%d j=%d t0=%g: %d poles, residual %.2e", n, j, t0, len(poles), residual)
    return Decomposition(
        E_part=E_part, poles=poles, Pi_sum=Pi_sum,
        reconstruction_residual=float(residual), warnings=spec.warnings,
    )


# ---------------------------------------------------------------------
# Near-origin scales
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class NearOriginScales:
    alpha0: float
    alpha: float
    alpha1: float
    a: float
    support: tuple[float, float]
    upsilon: float
    t0_admissible: bool


def near_origin_scales(
    h: float, t0: float, n: int, c1: float, delta: float, C: float = 1.0, alpha0_fraction: float = 0.5,
) -> NearOriginScales:
    """alpha = alpha0 h, alpha1 = max(alpha, 1/2), a and the cutoff support [0, 2 alpha1].

    C is the unquantified constant of the decomposition estimate; the
    values are diagnostic and scale with it.
    """
    try:
        ups = float(upsilon(n, t0))
    except PoleAtTError as exc:
        raise ContourError(str(exc)) from exc
    admissible = -0.5 < t0 < min(0.0, 1.5 - delta)
    if not admissible:
        logger.warning("t0=%g outside (-1/2, min(0, 3/2 - delta)) for delta=%g", t0, delta)
    alpha0 = alpha0_fraction * (2.0 * C * ups) ** -0.5
    alpha = alpha0 * h
    if c1 > 0:
        a = min(alpha, (h * h / (2.0 * C * c1 * ups)) ** (1.0 / (2.0 - delta)))
    else:
        a = alpha
    alpha1 = max(alpha, 0.5)
    return NearOriginScales(alpha0, alpha, alpha1, a, (0.0, 2.0 * alpha1), ups, admissible)


# ---------------------------------------------------------------------
# Test profiles in the log variable
# ---------------------------------------------------------------------
def log_gaussian(grid: LogGrid, center: float = 1.0, width: float = 1.0) -> np.ndarray:
    """exp(-(log r - log center)^2 / width^2)."""
    return np.exp(-((grid.x - math.log(center)) / width) ** 2)


def windowed_bump(grid: LogGrid, r_lo: float, r_hi: float, width: float = 0.07) -> np.ndarray:
    """C_c^infty((r_lo, r_hi)) profile: a standard bump times a narrow Gaussian in log r."""
    lo, hi = math.log(r_lo), math.log(r_hi)
    y = (2.0 * grid.x - (lo + hi)) / (hi - lo)
    inside = np.abs(y) < 1.0
    bump = np.zeros(grid.N)
    bump[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    gauss = np.exp(-((grid.x - 0.5 * (lo + hi)) ** 2) / (2.0 * width * width))
    return bump * gauss


def support_exponent(n: int, preferred: Optional[float] = None) -> float:
    """`preferred`, or the first of 0, 1/2 with -N-1 outside the pole set."""
    if preferred is not None:
        return preferred
    for N in (0.0, 0.5):
        if pole_mode(n, -N - 1) is None:
            return N
    raise ContourError(f"no default support exponent for n={n}")
