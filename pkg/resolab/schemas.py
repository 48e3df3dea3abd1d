# resolab/schemas.py
import hashlib
import json
import math
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

FAMILY = Literal["zero", "singular-power", "coulomb-like", "barrier-bump", "long-range"]
DELTA_MAX = 4.0 * (math.sqrt(2.0) - 1.0)


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --------------------------
# Experiment config blocks
# --------------------------
class PotentialConfig(_Block):
    family: FAMILY = "zero"
    amplitude: Optional[float] = None
    center: float = 1.0
    width: Optional[float] = None
    decay: float = 0.5
    c0: Optional[float] = None
    c1: Optional[float] = None
    delta: Optional[float] = None
    m_kind: Optional[Literal["power", "log"]] = None
    rho: float = Field(1.0, gt=0)
    p: Optional[float] = None


class GridConfig(_Block):
    r_min: float = Field(1e-4, gt=0)
    # None: 4 M from the derived constants
    r_max: Optional[float] = None
    N: int = 2048
    # complex absorbing layer past r_max, in local wavelengths 2 pi h / sqrt(E); 0 disables it
    absorber_wavelengths: float = Field(8.0, ge=0)
    # peak absorption in units of E
    absorber_strength: float = Field(1.0, gt=0)

    @field_validator("N")
    @classmethod
    def _enough_nodes(cls, v):
        if v < 256:
            raise ValueError("grid needs N >= 256")
        return v


class EpsConfig(_Block):
    kind: Literal["fixed", "proportional", "plateau"] = "proportional"
    value: float = Field(1e-3, gt=0)
    max_halvings: int = Field(8, ge=1)


class SweepConfig(_Block):
    h_values: Optional[list[float]] = None
    h_count: int = Field(8, ge=2)
    h_min_fraction: float = Field(1.0 / 50.0, gt=0, lt=1)
    # None: h0 from the derived constants
    h_max: Optional[float] = None
    eps: EpsConfig = EpsConfig()
    sign: Literal["+", "-"] = "+"
    window_radius: Optional[float] = None
    window_constant: Optional[float] = None
    support_radius: Optional[float] = Field(None, gt=0)
    jmax: int = Field(512, ge=0)
    gates: bool = True
    # "exterior": gate only the exterior column (trapping potentials)
    gate_scope: Literal["all", "exterior"] = "all"

    @field_validator("h_values")
    @classmethod
    def _h_lattice(cls, v):
        if v is not None and any(not (0 < h <= 1) for h in v):
            raise ValueError("h values must lie in (0, 1]")
        return v

    @model_validator(mode="after")
    def _window_source(self):
        if self.window_constant is not None and self.support_radius is None:
            raise ValueError("window_constant applies only to compactly supported V (set support_radius)")
        if self.h_max is not None and not (0 < self.h_max <= 1):
            raise ValueError("h_max must lie in (0, 1]")
        return self


class MellinConfig(_Block):
    r_min: float = Field(1e-4, gt=0)
    r_max: float = 1e4
    N: int = 8192
    sigma_max: float = Field(40.0, gt=0)
    count: int = Field(4096, ge=16)
    t_levels: list[float] = [-0.4, -0.1, 0.0, 0.3]
    t0: float = -0.25
    # None: the smallest of 0, 1/2 with -N-1 off the pole set
    N_support: Optional[float] = Field(None, ge=0)
    C: float = Field(1.0, gt=0)
    method: Literal["czt", "direct"] = "czt"


class EnergyConfig(_Block):
    random_functions: int = Field(20, ge=1)
    seed: int = 0
    eps: float = Field(0.0, ge=0)


class OutputConfig(_Block):
    directory: str = "results"
    formats: list[Literal["json", "csv", "gp"]] = ["json", "csv", "gp"]


class ExperimentConfig(_Block):
    potential: PotentialConfig = PotentialConfig()
    n: int = 3
    E: float = 1.0
    s: float = 0.75
    eta: Optional[float] = None
    grid: GridConfig = GridConfig()
    sweep: SweepConfig = SweepConfig()
    mellin: MellinConfig = MellinConfig()
    energy: EnergyConfig = EnergyConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.E > 0:
            raise ValueError("E must be positive")
        if not (0.5 < self.s < 1.0):
            raise ValueError("s must lie in (1/2, 1)")
        delta = self.potential.delta
        if delta is not None and not (0 <= delta < DELTA_MAX):
            raise ValueError("delta must lie in [0, 4(sqrt2-1))")
        if self.eta is not None:
            d = delta or 0.0
            upper = math.inf if d == 0 else (16 - 8 * d - d * d) / (d * d)
            if not (0 < self.eta < upper):
                raise ValueError(f"eta must lie in (0, {upper})")
        sweep = self.sweep
        if sweep.window_constant is not None and sweep.window_constant / math.sqrt(self.E) <= sweep.support_radius:
            raise ValueError("window_constant / sqrt(E) must lie outside support_radius")
        return self

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------
# Reports
# --------------------------
class InvariantCheck(BaseModel):
    name: str
    margin: float
    radius: Optional[float] = None
    passed: bool
    detail: dict[str, Any] = {}


class ValidationReport(BaseModel):
    family: str
    grid_points: int
    checks: list[InvariantCheck]
    passed: bool


class ConstantsReport(BaseModel):
    family: str
    n: int
    E: float
    delta: float
    s: float
    eta: float
    K: float
    K_first: float
    K_sup: float
    K1: float
    b: float
    M: float
    h0: float


class PieceMargin(BaseModel):
    piece: int
    label: str
    points: int
    min_margin: Optional[float] = None
    argmin_r: Optional[float] = None


class MarginReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    min_margin: float
    argmin_r: float
    per_piece: list[PieceMargin]
    passed: bool = Field(alias="pass")
    tolerance: float
    h: float
    h0: float
    precondition_breach: bool = False
    breakpoint_hits: int = 0
    adapted_bound_ok: bool = True


class ResidualReport(BaseModel):
    family: str
    functions: int
    max_residual: float
    ratios: list[float]
    ratio_min: float
    ratio_max: float
    flagged: int = 0
    passed: bool


class MellinCheckReport(BaseModel):
    plancherel_error: dict[str, float]
    inverse_plancherel_error: dict[str, float]
    roundtrip_error: dict[str, float]
    derivative_error: dict[str, float]
    decomposition_residual: dict[str, float]
    pole_coefficient: dict[str, float] = {}
    warnings: list[str] = []
    passed: bool


class SweepSummary(BaseModel):
    C3_slope: Optional[float] = None
    ext_exponent: Optional[float] = None
    R2_full: Optional[float] = None
    R2_ext: Optional[float] = None
    rows: int = 0
    flagged_rows: int = 0
    cutoff_rows: int = 0
    window_radius: float
    gates_passed: Optional[bool] = None
    passed: bool


class RunReport(BaseModel):
    command: str
    config_hash: str
    versions: dict[str, str]
    passed: bool
    payload: dict[str, Any] = {}
