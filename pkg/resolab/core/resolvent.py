# resolab/core/resolvent.py
"""
Per-mode radial resolvents and their weighted norms.

After the r^{(n-1)/2} conjugation each angular mode is the half-line operator
-h^2 d_r^2 + h^2 lambda_j r^-2 + V - E +- i eps, discretized by the
three-point scheme with Dirichlet ends, optionally behind a complex absorbing
layer past r_max. Weighted norms are the largest singular value of D R D,
D = diag(<r>^-s [window]), found by power iteration on (DRD)^H (DRD) with
two sparse-LU solves per step.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

from resolab.core import fitting
from resolab.core.angular import lambda_
from resolab.core.grids import RadialGrid
from resolab.core.potentials import PotentialSpec
from resolab.errors import ConfigurationError, NearSingularError

logger = logging.getLogger(__name__)

Sign = Union[int, str]
DENSE_LIMIT = 500


def _sign(sign: Sign) -> int:
    if sign in (1, "+"):
        return 1
    if sign in (-1, "-"):
        return -1
    raise ValueError(f"sign must be +1/-1 or '+'/'-', got {sign!r}")


@dataclass(frozen=True)
class Window:
    """Weight support: everything up to `outer`, or only r >= radius for the exterior."""

    kind: Literal["full", "exterior"] = "full"
    radius: float = 0.0
    outer: float = math.inf

    @classmethod
    def full(cls, outer: float = math.inf) -> "Window":
        return cls("full", 0.0, outer)

    @classmethod
    def exterior(cls, radius: float, outer: float = math.inf) -> "Window":
        return cls("exterior", radius, outer)


@dataclass(frozen=True)
class Absorber:
    """Quadratic complex absorbing layer sigma0 ((r - start)/width)^2 on [start, start + width]."""

    start: float
    width: float
    strength: float

    def profile(self, r) -> np.ndarray:
        x = np.clip((np.asarray(r, dtype=float) - self.start) / self.width, 0.0, None)
        return self.strength * x * x


@dataclass(frozen=True)
class ModeOperator:
    """Tridiagonal operator on the interior nodes of `grid`."""

    n: int
    j: int
    h: float
    eps: float
    sign: int
    grid: RadialGrid
    diagonal: np.ndarray
    off_diagonal: float
    absorber: Optional[Absorber] = None

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes[1:-1]

    @property
    def size(self) -> int:
        return self.diagonal.size

    def matrix(self) -> sparse.csc_matrix:
        off = np.full(self.size - 1, self.off_diagonal)
        return sparse.diags([off, self.diagonal, off], [-1, 0, 1], format="csc", dtype=complex)

    @cached_property
    def lu(self):
        try:
            return splu(self.matrix())
        except RuntimeError as exc:
            raise NearSingularError(self.spectral_distance(), str(exc)) from exc

    def solve(self, y: np.ndarray) -> np.ndarray:
        return self.lu.solve(np.asarray(y, dtype=complex))

    def solve_adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.lu.solve(np.asarray(y, dtype=complex), trans="H")

    def spectral_distance(self) -> float:
        """Smallest singular value of the operator, from the Hermitian part's spectrum.

        Exact for H - E +- i eps with H real symmetric (a normal matrix); with
        an absorbing layer it only estimates the distance.
        """
        off = np.full(self.size - 1, self.off_diagonal)
        mu = linalg.eigvalsh_tridiagonal(self.diagonal.real, off)
        return float(np.min(np.abs(mu + 1j * self.sign * self.eps)))

    def weights(self, s: float, window: Window) -> np.ndarray:
        d = (1.0 + self.r ** 2) ** (-0.5 * s)
        d = np.where(self.r <= window.outer, d, 0.0)
        if window.kind == "exterior":
            d = np.where(self.r >= window.radius, d, 0.0)
        return d


def discretize(
    pot: PotentialSpec, n: int, j: int, h: float, eps: float, sign: Sign, grid: RadialGrid,
    absorber: Optional[Absorber] = None,
) -> ModeOperator:
    """Second-order centered scheme with Dirichlet conditions at both grid ends.

    An absorber adds sign * i * sigma(r) on its layer, the same sign as eps, so
    waves heading out are damped before they reach the outer Dirichlet end.
    """
    if grid.N < 256:
        raise ConfigurationError(f"grid needs N >= 256, got {grid.N}")
    limit = h / (10.0 * math.sqrt(pot.E))
    if grid.dr > limit * (1.0 + 1e-12):
        raise ConfigurationError(
            f"grid spacing {grid.dr:.3e} does not resolve oscillations at h={h:g} (need <= {limit:.3e})"
        )
    sgn = _sign(sign)
    r = grid.nodes[1:-1]
    lam = lambda_(n, j)
    inv = h * h / grid.dr ** 2
    angular = h * h * lam / (r * r) if lam != 0 else 0.0
    diag = 2.0 * inv + angular + np.asarray(pot.V(r), dtype=float) - pot.E + sgn * 1j * eps
    if absorber is not None:
        diag = diag + sgn * 1j * absorber.profile(r)
    return ModeOperator(n, j, h, eps, sgn, grid, diag.astype(complex), -inv, absorber)


def weighted_resolvent_norm(
    op: ModeOperator,
    s: float,
    window: Window = Window.full(),
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> float:
    """||D R D|| by power iteration on (DRD)^H (DRD), deterministic all-ones start."""
    if op.eps == 0.0 and op.absorber is None:
        dist = op.spectral_distance()
        if dist <= 1e-13 * max(1.0, float(np.max(np.abs(op.diagonal)))):
            raise NearSingularError(dist)
    d = op.weights(s, window)
    if not np.any(d):
        return 0.0
    x = np.ones(op.size, dtype=complex) / math.sqrt(op.size)
    est = 0.0
    for it in range(max_iter):
        y = d * op.solve(d * x)
        z = d * op.solve_adjoint(d * y)
        new = float(np.linalg.norm(y))
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return new
        x = z / nz
        if abs(new - est) <= tol * new:
            logger.debug("power iteration j=%d converged in %d steps: %.10e", op.j, it + 1, new)
            return new
        est = new
    logger.warning("power iteration j=%d did not converge in %d steps (last %.6e)", op.j, max_iter, est)
    return est


def dense_norm(op: ModeOperator, s: float, window: Window = Window.full()) -> float:
    """Dense-SVD oracle for small operators."""
    if op.size > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} unknowns, got {op.size}")
    R = np.linalg.inv(op.matrix().toarray())
    d = op.weights(s, window)
    return float(linalg.svdvals(d[:, None] * R * d[None, :])[0])


# ---------------------------------------------------------------------
# Sup over angular modes
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class JmaxPolicy:
    decreasing_run: int = 3
    fraction: float = 0.01
    jmax: int = 512


@dataclass
class _Scan:
    policy: JmaxPolicy
    best: float = 0.0
    best_j: int = 0
    last: Optional[float] = None
    run: int = 0

    def push(self, j: int, value: float) -> None:
        if value > self.best:
            self.best, self.best_j = value, j
        self.run = self.run + 1 if self.last is not None and value < self.last else 0
        self.last = value

    @property
    def done(self) -> bool:
        return self.run >= self.policy.decreasing_run and self.last < self.policy.fraction * self.best


@dataclass(frozen=True)
class ModeSup:
    full: float
    j_full: int
    exterior: float
    j_exterior: int
    modes: int
    cutoff: bool


def mode_sup(
    pot: PotentialSpec, n: int, h: float, eps: float, sign: Sign, s: float,
    grid: RadialGrid, exterior_radius: Optional[float] = None, policy: JmaxPolicy = JmaxPolicy(),
    absorber: Optional[Absorber] = None, outer: float = math.inf,
) -> ModeSup:
    """Full and (optionally) exterior sups over j, sharing one factorization per mode."""
    full, ext = _Scan(policy), _Scan(policy)
    full_window = Window.full(outer)
    ext_window = None if exterior_radius is None else Window.exterior(exterior_radius, outer)
    j = 0
    while True:
        op = discretize(pot, n, j, h, eps, sign, grid, absorber)
        full.push(j, weighted_resolvent_norm(op, s, full_window))
        if ext_window is not None:
            ext.push(j, weighted_resolvent_norm(op, s, ext_window))
        if full.done and (ext_window is None or ext.done):
            return ModeSup(full.best, full.best_j, ext.best, ext.best_j, j + 1, False)
        if j >= policy.jmax:
            logger.warning("mode scan at h=%g hit jmax=%d; returning partial sup", h, policy.jmax)
            return ModeSup(full.best, full.best_j, ext.best, ext.best_j, j + 1, True)
        j += 1


def full_norm(
    pot: PotentialSpec, n: int, h: float, eps: float, sign: Sign, s: float,
    window: Window, grid: RadialGrid, policy: JmaxPolicy = JmaxPolicy(),
    absorber: Optional[Absorber] = None,
) -> tuple[float, int]:
    """sup_j of the per-mode weighted norm and the attaining mode."""
    scan = _Scan(policy)
    j = 0
    while True:
        op = discretize(pot, n, j, h, eps, sign, grid, absorber)
        scan.push(j, weighted_resolvent_norm(op, s, window))
        if scan.done:
            break
        if j >= policy.jmax:
            logger.warning("mode scan at h=%g hit jmax=%d; returning partial sup", h, policy.jmax)
            break
        j += 1
    return scan.best, scan.best_j


# ---------------------------------------------------------------------
# h-sweep
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class SweepPlan:
    """Everything a sweep needs beyond the potential, resolved to numbers.

    `absorber_wavelengths` sizes the absorbing layer past r_max in local
    wavelengths 2 pi h / sqrt(E); 0 keeps the bare Dirichlet box.
    `gate_scope="exterior"` gates only the exterior column.
    """

    n: int
    s: float
    h_values: tuple[float, ...]
    window_radius: float
    r_min: float
    r_max: float
    N: int
    eps_kind: Literal["fixed", "proportional", "plateau"] = "proportional"
    eps_value: float = 1e-3
    max_halvings: int = 8
    sign: Sign = "+"
    jmax: int = 512
    gates: bool = True
    gate_scope: Literal["all", "exterior"] = "all"
    absorber_wavelengths: float = 0.0
    absorber_strength: float = 1.0
    threads: int = 1


@dataclass
class SweepResult:
    table: pd.DataFrame
    window_radius: float
    fit_full: Optional[fitting.FitResult] = None
    fit_ext: Optional[fitting.FitResult] = None
    warnings: list[str] = field(default_factory=list)

    @property
    def gates_passed(self) -> Optional[bool]:
        cols = [c for c in self.table.columns if c.startswith("gate_")]
        if not cols:
            return None
        vals = self.table[cols].to_numpy().ravel()
        vals = [v for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))]
        return bool(all(vals))


def layer_width(plan: SweepPlan, h: float, E: float) -> float:
    return plan.absorber_wavelengths * 2.0 * math.pi * h / math.sqrt(E)


def grid_for(
    plan: SweepPlan, h: float, E: float, r_min: Optional[float] = None, r_max: Optional[float] = None,
) -> RadialGrid:
    """Uniform grid on [r_min, r_max + absorbing layer] fine enough for h."""
    lo = plan.r_min if r_min is None else r_min
    hi = (plan.r_max if r_max is None else r_max) + layer_width(plan, h, E)
    needed = int(math.ceil((hi - lo) * 10.0 * math.sqrt(E) / h)) + 1
    return RadialGrid(lo, hi, max(plan.N, needed))


def absorber_for(plan: SweepPlan, h: float, E: float, r_max: Optional[float] = None) -> Optional[Absorber]:
    width = layer_width(plan, h, E)
    if width <= 0.0:
        return None
    start = plan.r_max if r_max is None else r_max
    return Absorber(start, width, plan.absorber_strength * E)


def _eps_for(plan: SweepPlan, h: float) -> float:
    return plan.eps_value if plan.eps_kind == "fixed" else plan.eps_value * h


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _mode_norm(
    pot, plan: SweepPlan, j: int, h: float, eps: float,
    grid: RadialGrid, absorber: Optional[Absorber], window: Window,
) -> float:
    op = discretize(pot, plan.n, j, h, eps, plan.sign, grid, absorber)
    return weighted_resolvent_norm(op, plan.s, window)


def _plateau(
    pot, plan: SweepPlan, h: float, j: int, grid: RadialGrid, absorber: Optional[Absorber], window: Window,
) -> tuple[float, bool]:
    """Halve eps from value*h until the attaining-mode norm moves by <= 2%."""
    eps = plan.eps_value * h
    prev = _mode_norm(pot, plan, j, h, eps, grid, absorber, window)
    for _ in range(plan.max_halvings):
        cur = _mode_norm(pot, plan, j, h, 0.5 * eps, grid, absorber, window)
        eps *= 0.5
        if _relative_gap(prev, cur) <= 0.02:
            return eps, True
        prev = cur
    logger.warning("eps plateau not reached at h=%g after %d halvings", h, plan.max_halvings)
    return eps, False


def _gates(pot, plan: SweepPlan, h: float, eps: float, j: int, base: float, window: Window, prefix: str) -> dict:
    """N-doubling (1%), R_inf -> 1.5 R_inf (2%), eps-halving (2%) and, for n = 2, j = 0, r_min-halving (2%).

    The window keeps its outer cut at the configured r_max, so the stretched
    domain tests the boundary treatment, not the weight tail.
    """
    E = pot.E
    grid, absorber = grid_for(plan, h, E), absorber_for(plan, h, E)
    wide = 1.5 * plan.r_max
    out = {
        f"{prefix}_N": _relative_gap(base, _mode_norm(pot, plan, j, h, eps, grid.refined(), absorber, window)) <= 0.01,
        f"{prefix}_R": _relative_gap(base, _mode_norm(
            pot, plan, j, h, eps, grid_for(plan, h, E, r_max=wide), absorber_for(plan, h, E, r_max=wide), window,
        )) <= 0.02,
        f"{prefix}_eps": _relative_gap(base, _mode_norm(pot, plan, j, h, 0.5 * eps, grid, absorber, window)) <= 0.02,
        f"{prefix}_rmin": None,
    }
    if plan.n == 2 and j == 0:
        half = grid_for(plan, h, E, r_min=0.5 * plan.r_min)
        out[f"{prefix}_rmin"] = _relative_gap(base, _mode_norm(pot, plan, j, h, eps, half, absorber, window)) <= 0.02
    failed = [k for k, v in out.items() if v is False]
    if failed:
        logger.warning("h=%g j=%d: robustness gates failed: %s", h, j, ", ".join(failed))
    return out


def sweep_row(pot: PotentialSpec, plan: SweepPlan, h: float) -> dict:
    row = {"h": h, "eps": math.nan, "j": -1, "norm_full": math.nan, "j_ext": -1,
           "norm_ext": math.nan, "flagged": False, "cutoff": False}
    try:
        grid, absorber = grid_for(plan, h, pot.E), absorber_for(plan, h, pot.E)
        full_window = Window.full(plan.r_max)
        ext_window = Window.exterior(plan.window_radius, plan.r_max)
        eps = _eps_for(plan, h)
        policy = JmaxPolicy(jmax=plan.jmax)
        if plan.eps_kind == "plateau":
            _, j_star = full_norm(pot, plan.n, h, eps, plan.sign, plan.s, full_window, grid, policy, absorber)
            eps, reached = _plateau(pot, plan, h, j_star, grid, absorber, full_window)
            row["flagged"] = not reached
        sup = mode_sup(
            pot, plan.n, h, eps, plan.sign, plan.s, grid, plan.window_radius, policy,
            absorber=absorber, outer=plan.r_max,
        )
        row.update(eps=eps, j=sup.j_full, norm_full=sup.full, j_ext=sup.j_exterior,
                   norm_ext=sup.exterior, cutoff=sup.cutoff)
        if plan.gates:
            if plan.gate_scope == "all":
                row.update(_gates(pot, plan, h, eps, sup.j_full, sup.full, full_window, "gate"))
            row.update(_gates(pot, plan, h, eps, sup.j_exterior, sup.exterior, ext_window, "gate_ext"))
    except (NearSingularError, ConfigurationError) as exc:
        logger.warning("sweep row h=%g flagged: %s", h, exc)
        row["flagged"] = True
    return row


def sweep(pot: PotentialSpec, plan: SweepPlan) -> SweepResult:
    """Fill the (h, eps, j, norm_full, norm_ext) table and fit both scaling laws."""
    if plan.r_max < 4.0 * plan.window_radius:
        raise ConfigurationError(f"R_inf={plan.r_max:g} must be >= 4 M = {4.0 * plan.window_radius:g}")
    if plan.r_min > 1e-3:
        raise ConfigurationError(f"r_min={plan.r_min:g} must be <= 1e-3")
    if len(plan.h_values) < 2:
        raise ConfigurationError("sweep needs at least two h values")

    logger.info("sweep %s: %d h values, M=%.4g, R_inf=%.4g, absorber=%g wavelengths, threads=%d",
                pot.family, len(plan.h_values), plan.window_radius, plan.r_max,
                plan.absorber_wavelengths, plan.threads)
    with ThreadPoolExecutor(max_workers=max(1, plan.threads)) as pool:
        rows = list(pool.map(lambda h: sweep_row(pot, plan, h), plan.h_values))

    table = pd.DataFrame(rows).sort_values("h", ignore_index=True)
    if not plan.gates:
        table = table.drop(columns=[c for c in table.columns if c.startswith("gate_")])
    good = table[~table["flagged"] & table["norm_full"].notna()]
    result = SweepResult(table=table, window_radius=plan.window_radius)
    if len(good) >= 2:
        result.fit_full = fitting.fit_exponential_law(good["h"].to_numpy(), good["norm_full"].to_numpy())
        ext = good[good["norm_ext"] > 0]
        if len(ext) >= 2:
            result.fit_ext = fitting.fit_power_law(ext["h"].to_numpy(), ext["norm_ext"].to_numpy())
    else:
        result.warnings.append("fewer than two usable rows; no fits")
    flagged = int(table["flagged"].sum())
    if flagged:
        result.warnings.append(f"{flagged} row(s) flagged")
    cutoff = int(table["cutoff"].sum())
    if cutoff:
        result.warnings.append(f"{cutoff} row(s) hit jmax={plan.jmax}; their sups are partial")
    return result
