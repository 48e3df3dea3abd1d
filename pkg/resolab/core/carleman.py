# resolab/core/carleman.py
"""
Phase and weight construction for the Carleman energy argument.

The phase derivative is piecewise:

    phi'(r) = K r^(-delta/2)                   0 <= r <= 1
              2K / (1 + r)                      1 <= r <= M/2
              8K (M - r)^2 / (M^2 (1 + M/2))    M/2 <= r < M
              0                                 r >= M

and the weight is w = K1 r^2 below M, continued above M by
w = K1 M^2 exp(int_M^r 1/W) with W = min(E r^3 / (4(c0 r^2 m + 1)), <r>^(2s)).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np
from scipy import integrate, optimize

from resolab.core.grids import avoiding, log_sample_radii
from resolab.core.potentials import PotentialSpec, compute_b
from resolab.errors import ParameterError
from resolab.schemas import ConstantsReport, MarginReport, PieceMargin

logger = logging.getLogger(__name__)

PIECE_LABELS = ("0<r<=1", "1<r<=M/2", "M/2<r<M", "r>=M")


class PhaseWeight(Protocol):
    """Anything that can evaluate (phi, phi', phi'') and (w, w', W, q)."""

    def phase(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]: ...

    def weight(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class FlatPhaseWeight:
    """phi = 0 and w = 1: the unconjugated, unweighted setting."""

    def phase(self, r):
        z = np.zeros_like(np.asarray(r, dtype=float))
        return z, z.copy(), z.copy()

    def weight(self, r):
        r = np.asarray(r, dtype=float)
        one = np.ones_like(r)
        with np.errstate(divide="ignore"):
            return one, np.zeros_like(r), np.full_like(r, np.inf), 2.0 / r


def eta_upper(delta: float) -> float:
    """Upper end of the admissible eta interval (inf when delta = 0)."""
    if delta == 0:
        return math.inf
    return (16.0 - 8.0 * delta - delta * delta) / (delta * delta)


def default_eta(delta: float) -> float:
    return min(1.0, 0.5 * eta_upper(delta))


@dataclass(frozen=True)
class CarlemanParams:
    """Derived constants plus the piecewise phase/weight evaluators."""

    pot: PotentialSpec
    s: float
    eta: float
    K: float
    K_first: float
    K_sup: float
    b: float
    M: float
    h0: float
    K1: float = 1.0

    @property
    def n(self) -> int:
        return self.pot.n

    @property
    def E(self) -> float:
        return self.pot.E

    @property
    def delta(self) -> float:
        return self.pot.delta

    @property
    def breakpoints(self) -> tuple[float, float, float]:
        return 1.0, 0.5 * self.M, self.M

    @property
    def _quartic(self) -> float:
        M = self.M
        return 8.0 * self.K / (M * M * (1.0 + 0.5 * M))

    # -----------------------------------------------------------------
    # Phase
    # -----------------------------------------------------------------
    def piece_index(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.select(
            [r <= 1.0, r <= 0.5 * self.M, r < self.M], [0, 1, 2], default=3,
        )

    def dphi_piece(self, piece: int, r) -> np.ndarray:
        """phi' from the formula of one piece, evaluated anywhere."""
        r = np.asarray(r, dtype=float)
        K, d = self.K, self.delta
        if piece == 0:
            with np.errstate(divide="ignore"):
                return K * r ** (-0.5 * d)
        if piece == 1:
            return 2.0 * K / (1.0 + r)
        if piece == 2:
            return self._quartic * (self.M - r) ** 2
        return np.zeros_like(r)

    def breakpoint_jumps(self) -> dict[float, float]:
        """|left - right| of phi' at r = 1, M/2, M."""
        return {
            bp: float(abs(self.dphi_piece(k, bp) - self.dphi_piece(k + 1, bp)))
            for k, bp in enumerate(self.breakpoints)
        }

    def phase(self, r):
        """(phi, phi', phi'') with phi(0) = 0, integrated in closed form piece by piece."""
        r = np.asarray(r, dtype=float)
        K, d, M, c = self.K, self.delta, self.M, self._quartic
        piece = self.piece_index(r)
        expo = 1.0 - 0.5 * d
        phi_1 = K / expo
        phi_half = phi_1 + 2.0 * K * math.log((1.0 + 0.5 * M) / 2.0)
        phi_M = phi_half + c * (0.5 * M) ** 3 / 3.0

        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.choose(piece, [
                K * r ** expo / expo,
                phi_1 + 2.0 * K * np.log((1.0 + r) / 2.0),
                phi_half + c * ((0.5 * M) ** 3 - (M - r) ** 3) / 3.0,
                np.full_like(r, phi_M),
            ])
            dphi = np.choose(piece, [self.dphi_piece(k, r) for k in range(4)])
            d2phi = np.choose(piece, [
                -0.5 * d * K * r ** (-0.5 * d - 1.0) if d > 0 else np.zeros_like(r),
                -2.0 * K / (1.0 + r) ** 2,
                -2.0 * c * (M - r),
                np.zeros_like(r),
            ])
        return phi, dphi, d2phi

    # -----------------------------------------------------------------
    # Weight
    # -----------------------------------------------------------------
    def script_w(self, r) -> np.ndarray:
        """W = w / w'."""
        r = np.asarray(r, dtype=float)
        outer = np.minimum(
            self.E * r ** 3 / (4.0 * (self.pot.c0 * r * r * np.asarray(self.pot.m(r)) + 1.0)),
            (1.0 + r * r) ** self.s,
        )
        return np.where(r < self.M, 0.5 * r, outer)

    def log_weight_excess(self, r) -> np.ndarray:
        """int_M^r 1/W for r >= M (zero below M), by adaptive quadrature."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        above = r > self.M
        if not np.any(above):
            return out
        knots, inverse = np.unique(r[above], return_inverse=True)
        edges = np.concatenate([[self.M], knots])

        def integrand(x):
            return 1.0 / float(self.script_w(np.asarray(x)))

        pieces = [
            integrate.quad(integrand, a, b, epsrel=1e-10, epsabs=0.0, limit=200)[0]
            for a, b in zip(edges[:-1], edges[1:])
        ]
        out[above] = np.cumsum(pieces)[inverse]
        return out

    def weight(self, r):
        """(w, w', W, q) with q = 2/r - w'/w."""
        r = np.asarray(r, dtype=float)
        W = self.script_w(r)
        inner = r < self.M
        w = np.where(
            inner, self.K1 * r * r,
            self.K1 * self.M ** 2 * np.exp(self.log_weight_excess(r)),
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            dw = np.where(inner, 2.0 * self.K1 * r, w / W)
            q = 2.0 / r - 1.0 / W
        return w, dw, W, q


# ---------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------
def _k_sup(pot: PotentialSpec, b: float) -> float:
    """sup over [1, b] of (1+r)^(3/2) sqrt(1 + y + c0 m) / 2."""

    def g(r):
        r = np.asarray(r, dtype=float)
        return 0.5 * (1.0 + r) ** 1.5 * np.sqrt(1.0 + pot.y(r) + pot.c0 * pot.m(r))

    if b <= 1.0:
        return float(g(1.0))
    rr = np.linspace(1.0, b, 10_000)
    vals = g(rr)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < rr.size - 1:
        res = optimize.minimize_scalar(
            lambda x: -float(g(x)), bracket=(rr[k - 1], rr[k], rr[k + 1]),
            method="golden", tol=1e-10,
        )
        if rr[0] <= res.x <= rr[-1]:
            best = max(best, -float(res.fun))
    return best


def derive_constants(pot: PotentialSpec, eta: Optional[float] = None, s: float = 0.75) -> CarlemanParams:
    """K, b, M, h0 for `pot`; eta defaults to min(1, half the admissible upper end)."""
    d = pot.delta
    eta = default_eta(d) if eta is None else eta
    if not (0.0 < eta < eta_upper(d)):
        raise ParameterError(f"eta={eta} outside (0, {eta_upper(d)}) for delta={d}")
    if not (0.5 < s < 1.0):
        raise ParameterError(f"s must lie in (1/2, 1), got {s}")

    b = compute_b(pot)
    K_first = math.sqrt(24.0 * pot.c1 / (16.0 - 8.0 * d - (1.0 + eta) * d * d))
    K_sup = _k_sup(pot, b)
    K = max(K_first, K_sup)
    M = 2.0 * max(b, 6.0 * math.sqrt(3.0), 8.0 * K / math.sqrt(pot.E))
    h0 = min(1.0, 0.9 * 27.0 * pot.E / (4.0 * (1.0 + eta) * K))
    logger.info("constants for %s: K=%.6g b=%.6g M=%.6g h0=%.6g", pot.family, K, b, M, h0)
    return CarlemanParams(pot=pot, s=s, eta=eta, K=K, K_first=K_first, K_sup=K_sup, b=b, M=M, h0=h0)


def constants_report(params: CarlemanParams) -> ConstantsReport:
    return ConstantsReport(
        family=params.pot.family, n=params.n, E=params.E, delta=params.delta, s=params.s,
        eta=params.eta, K=params.K, K_first=params.K_first, K_sup=params.K_sup,
        K1=params.K1, b=params.b, M=params.M, h0=params.h0,
    )


def phase(params: CarlemanParams, r):
    return params.phase(r)


def weight(params: CarlemanParams, r):
    return params.weight(r)


# ---------------------------------------------------------------------
# Lower bound A - (1+eta) B >= (E/2) w'
# ---------------------------------------------------------------------
def _terms(params: CarlemanParams, h: float, r: np.ndarray):
    pot = params.pot
    _, dphi, d2phi = params.phase(r)
    w, dw, W, q = params.weight(r)
    V = np.asarray(pot.V(r), dtype=float)
    dV = np.asarray(pot.Vprime(r), dtype=float)
    return dphi, d2phi, w, dw, W, q, V, dV


def at_breakpoint(params: CarlemanParams, r, rel: float = 1e-12) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.any([np.isclose(r, bp, rtol=rel, atol=0.0) for bp in params.breakpoints], axis=0)


def lower_bound_margin(params: CarlemanParams, h: float, r):
    """A - (1+eta) B - (E/2) w', with (w(E + phi'^2 - V))' expanded analytically.

    Returns (margin, flags); flags mark radii on a phi' breakpoint, where the
    piece to the left is used.
    """
    r = np.asarray(r, dtype=float)
    dphi, d2phi, w, dw, W, q, V, dV = _terms(params, h, r)
    E = params.E
    A = dw * (E + dphi ** 2 - V) + w * (2.0 * dphi * d2phi - dV) - h * h * w * q / (4.0 * r * r)
    B = (w * d2phi) ** 2 / (dw + 4.0 * dphi * w / h)
    return A - (1.0 + params.eta) * B - 0.5 * E * dw, at_breakpoint(params, r)


def adapted_bound(params: CarlemanParams, h: float, r) -> np.ndarray:
    """w'[E + phi'^2(1 + 2 W Phi - (1+eta) W Phi^2 min(W, h/(4 phi'))) - V - W(V' + h^2 q/(4r^2))]."""
    r = np.asarray(r, dtype=float)
    dphi, d2phi, w, dw, W, q, V, dV = _terms(params, h, r)
    with np.errstate(divide="ignore"):
        cap = np.minimum(W, h / (4.0 * dphi))
    # phi'^2 Phi = phi' phi'' and phi'^2 Phi^2 = phi''^2, so phi' = 0 needs no special case
    conj = dphi ** 2 + 2.0 * W * dphi * d2phi - (1.0 + params.eta) * W * d2phi ** 2 * cap
    return dw * (params.E + conj - V - W * (dV + h * h * q / (4.0 * r * r)))


def margin_grid(params: CarlemanParams, count: int = 10_000) -> np.ndarray:
    """Log-uniform grid on [1e-6, 10 M] with the phi' breakpoints removed."""
    return avoiding(log_sample_radii(1e-6, 10.0 * params.M, count), params.breakpoints)


def verify_lower_bound(params: CarlemanParams, h: float, grid: Optional[np.ndarray] = None) -> MarginReport:
    """Minimum of the lower-bound margin over `grid`, overall and per phi' piece."""
    rr = margin_grid(params) if grid is None else np.asarray(grid, dtype=float)
    margin, flags = lower_bound_margin(params, h, rr)
    _, dw, _, _ = params.weight(rr)
    tol = 1e-9 * float(np.max(dw))
    total = margin + 0.5 * params.E * dw
    adapted = adapted_bound(params, h, rr)
    adapted_ok = bool(np.all(total >= adapted - tol))

    per_piece = []
    pieces = params.piece_index(rr)
    for k, label in enumerate(PIECE_LABELS):
        sel = pieces == k
        if not np.any(sel):
            per_piece.append(PieceMargin(piece=k, label=label, points=0))
            continue
        idx = np.flatnonzero(sel)
        j = idx[int(np.argmin(margin[sel]))]
        per_piece.append(PieceMargin(
            piece=k, label=label, points=int(sel.sum()),
            min_margin=float(margin[j]), argmin_r=float(rr[j]),
        ))

    k = int(np.argmin(margin))
    breach = h > params.h0
    if breach:
        logger.warning("h=%g exceeds h0=%g; the lower bound is not guaranteed", h, params.h0)
    report = MarginReport(
        min_margin=float(margin[k]), argmin_r=float(rr[k]), per_piece=per_piece,
        passed=bool(margin[k] >= -tol), tolerance=tol, h=h, h0=params.h0,
        precondition_breach=breach, breakpoint_hits=int(flags.sum()), adapted_bound_ok=adapted_ok,
    )
    logger.info("lower bound on %s at h=%g: min margin %.3e (%s)", params.pot.family, h,
                report.min_margin, "pass" if report.passed else "FAIL")
    return report
