# resolab/core/grids.py
"""Discretization carriers: uniform radial grids, log-uniform grids, sample radii."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from resolab.errors import ConfigurationError


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid r_k = r_min + k*dr, k = 0..N-1, endpoints included."""

    r_min: float
    r_max: float
    N: int

    def __post_init__(self):
        if not (0 <= self.r_min < self.r_max):
            raise ConfigurationError(f"bad radial interval [{self.r_min}, {self.r_max}]")
        if self.N < 5:
            raise ConfigurationError("radial grid needs at least 5 nodes")

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.N)

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.N - 1)

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same interval with the spacing divided by `factor`."""
        return RadialGrid(self.r_min, self.r_max, factor * (self.N - 1) + 1)


@dataclass(frozen=True)
class LogGrid:
    """Log-uniform grid r_k = r_min * exp(k * delta)."""

    r_min: float
    r_max: float
    N: int

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise ConfigurationError(f"bad log interval [{self.r_min}, {self.r_max}]")
        if self.N < 3:
            raise ConfigurationError("log grid needs at least 3 nodes")

    @property
    def delta(self) -> float:
        return float(np.log(self.r_max / self.r_min) / (self.N - 1))

    @cached_property
    def x(self) -> np.ndarray:
        """Nodes in the log variable x = log r."""
        return np.log(self.r_min) + self.delta * np.arange(self.N)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.exp(self.x)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.N, self.delta)
        w[0] = w[-1] = 0.5 * self.delta
        return w


def log_sample_radii(r_lo: float, r_hi: float, count: int) -> np.ndarray:
    """`count` log-uniform radii on [r_lo, r_hi]."""
    return np.geomspace(r_lo, r_hi, count)


def avoiding(radii: np.ndarray, breakpoints: Iterable[float], rel: float = 1e-9) -> np.ndarray:
    """Nudge radii that coincide with a breakpoint slightly to the left."""
    out = np.array(radii, dtype=float, copy=True)
    for bp in breakpoints:
        hit = np.abs(out - bp) <= rel * max(abs(bp), 1.0)
        out[hit] = bp * (1.0 - 1e3 * rel)
    return out


# ---------------------------------------------------------------------
# Fourth-order finite differences on a uniform grid
# ---------------------------------------------------------------------
_D1_EDGE = (
    np.array([-25.0, 48.0, -36.0, 16.0, -3.0]),
    np.array([-3.0, -10.0, 18.0, -6.0, 1.0]),
)
_D2_EDGE = (
    np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]),
    np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]),
)


def diff1(f: np.ndarray, step: float) -> np.ndarray:
    """First derivative, central inside and one-sided five-point at the ends."""
    f = np.asarray(f)
    if f.size < 6:
        raise ConfigurationError("fourth-order differences need at least 6 samples")
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / 12.0
    out[0] = _D1_EDGE[0] @ f[:5] / 12.0
    out[1] = _D1_EDGE[1] @ f[:5] / 12.0
    out[-1] = -(_D1_EDGE[0] @ f[::-1][:5]) / 12.0
    out[-2] = -(_D1_EDGE[1] @ f[::-1][:5]) / 12.0
    return out / step


def diff2(f: np.ndarray, step: float) -> np.ndarray:
    """Second derivative with the same stencil layout as `diff1`."""
    f = np.asarray(f)
    if f.size < 6:
        raise ConfigurationError("fourth-order differences need at least 6 samples")
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / 12.0
    out[0] = _D2_EDGE[0] @ f[:6] / 12.0
    out[1] = _D2_EDGE[1] @ f[:6] / 12.0
    out[-1] = _D2_EDGE[0] @ f[::-1][:6] / 12.0
    out[-2] = _D2_EDGE[1] @ f[::-1][:6] / 12.0
    return out / (step * step)
