# resolab/pipelines.py
"""One function per CLI command; each returns the run report plus the artifacts to persist."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from resolab import reports
from resolab.core import carleman, energy, mellin, potentials, resolvent
from resolab.core.grids import LogGrid, RadialGrid
from resolab.errors import GateFailure
from resolab.schemas import (
    ExperimentConfig,
    MellinCheckReport,
    ResidualReport,
    RunReport,
    SweepSummary,
)

logger = logging.getLogger(__name__)

EXT_EXPONENT_MIN = 0.5
EXT_EXPONENT_MAX = 1.15
EXT_R2_MIN = 0.95


@dataclass
class CommandResult:
    report: RunReport
    json_files: dict[str, Any] = field(default_factory=dict)
    csv_files: dict[str, Any] = field(default_factory=dict)
    plot: bool = False


def build_potential(cfg: ExperimentConfig) -> potentials.PotentialSpec:
    pc = cfg.potential
    return potentials.make_potential(
        pc.family, cfg.n, cfg.E, c0=pc.c0, c1=pc.c1, delta=pc.delta, amplitude=pc.amplitude,
        center=pc.center, width=pc.width, decay=pc.decay, m_kind=pc.m_kind, rho=pc.rho, p=pc.p,
    )


def build_params(cfg: ExperimentConfig, pot: potentials.PotentialSpec) -> carleman.CarlemanParams:
    return carleman.derive_constants(pot, eta=cfg.eta, s=cfg.s)


# ---------------------------------------------------------------------
# validate / constants / carleman-verify
# ---------------------------------------------------------------------
def run_validate(cfg: ExperimentConfig, threads: int = 1) -> CommandResult:
    report = potentials.validate(build_potential(cfg))
    payload = reports.dump_model(report)
    return CommandResult(reports.run_report("validate", cfg, report.passed, payload))


def run_constants(cfg: ExperimentConfig, threads: int = 1) -> CommandResult:
    pot = build_potential(cfg)
    params = build_params(cfg, pot)
    payload = reports.dump_model(carleman.constants_report(params))
    payload["phase_jumps"] = {f"{k:.12g}": v for k, v in params.breakpoint_jumps().items()}
    passed = max(params.breakpoint_jumps().values()) <= 1e-12 * params.K
    return CommandResult(reports.run_report("constants", cfg, passed, payload))


def run_carleman_verify(cfg: ExperimentConfig, threads: int = 1) -> CommandResult:
    pot = build_potential(cfg)
    params = build_params(cfg, pot)
    grid = carleman.margin_grid(params)
    margins = [carleman.verify_lower_bound(params, h, grid) for h in (params.h0, params.h0 / 2, params.h0 / 10)]
    passed = all(m.passed and m.adapted_bound_ok for m in margins)
    payload = {
        "constants": reports.dump_model(carleman.constants_report(params)),
        "margins": [reports.dump_model(m) for m in margins],
    }
    report = reports.run_report("carleman-verify", cfg, passed, payload)
    return CommandResult(report, json_files={"margins.json": reports.stamped(report, {"margins": margins})})


# ---------------------------------------------------------------------
# mellin-check
# ---------------------------------------------------------------------
def run_mellin_check(cfg: ExperimentConfig, threads: int = 1) -> CommandResult:
    mc = cfg.mellin
    grid = LogGrid(mc.r_min, mc.r_max, mc.N)
    u = mellin.log_gaussian(grid)
    kw = dict(sigma_max=mc.sigma_max, count=mc.count, method=mc.method)

    fwd, inv, trip = {}, {}, {}
    for t in mc.t_levels:
        fwd[str(t)], inv[str(t)] = mellin.plancherel_check(u, grid, t, **kw)
        trip[str(t)] = mellin.roundtrip_error(u, grid, t, **kw)
    deriv = {str(k): mellin.derivative_identity_check(u, grid, k, 0.0, **kw) for k in (1, 2)}

    bump = mellin.windowed_bump(grid, 1.0, 2.0)
    N = mellin.support_exponent(cfg.n, mc.N_support)
    residual, coefficient, warnings = {}, {}, []
    for j in (0, 1):
        dec = mellin.decompose(bump, grid, cfg.n, j, mc.t0, N, sigma_max=200.0, count=16384, method=mc.method)
        residual[f"j={j}"] = dec.reconstruction_residual
        warnings.extend(dec.warnings)
        v = mellin.apply_r2Q(bump, grid, cfg.n, j)
        vnorm = mellin.weighted_l2(v, grid, -0.5)
        for sigma_p, mv, _ in mellin.pole_residues(v, grid, cfg.n, j, mc.t0, N):
            coefficient[f"j={j},t={sigma_p.imag:g}"] = abs(mv) / vnorm

    pot = build_potential(cfg)
    params = build_params(cfg, pot)
    scales = mellin.near_origin_scales(params.h0, mc.t0, cfg.n, pot.c1, pot.delta, mc.C)

    report = MellinCheckReport(
        plancherel_error=fwd, inverse_plancherel_error=inv, roundtrip_error=trip,
        derivative_error=deriv, decomposition_residual=residual, pole_coefficient=coefficient,
        warnings=warnings,
        passed=(
            max(fwd.values()) <= 1e-6 and max(inv.values()) <= 1e-6 and max(trip.values()) <= 1e-6
            and deriv["1"] <= 1e-6 and deriv["2"] <= 1e-5
            and max(residual.values()) <= 1e-4 and all(c <= 1e-6 for c in coefficient.values())
        ),
    )
    payload = reports.dump_model(report)
    payload["near_origin"] = {
        "alpha0": scales.alpha0, "alpha": scales.alpha, "alpha1": scales.alpha1, "a": scales.a,
        "support": list(scales.support), "upsilon": scales.upsilon, "t0_admissible": scales.t0_admissible,
    }
    spectrum = mellin.forward(u, grid, 0.0, **kw)
    return CommandResult(
        reports.run_report("mellin-check", cfg, report.passed, payload),
        csv_files={"spectrum.csv": spectrum.to_frame()},
    )


# ---------------------------------------------------------------------
# energy-check
# ---------------------------------------------------------------------
def run_energy_check(cfg: ExperimentConfig, threads: int = 1) -> CommandResult:
    pot = build_potential(cfg)
    params = build_params(cfg, pot)
    lo, hi = 1.2, min(3.0, 0.45 * params.M)
    grid = RadialGrid(lo, hi, 401)
    rng = np.random.default_rng(cfg.energy.seed)
    ratios, worst, flagged = [], 0.0, 0
    for k, (f, df, d2f) in enumerate(energy.random_test_functions(rng, cfg.energy.random_functions, lo, hi)):
        u = energy.ModeFunction.from_profile(k % 3, grid, f, df, d2f)
        sign = 1 if k % 2 == 0 else -1
        res, ratio, skipped = energy.wF_derivative_residual(params, pot, params.h0, cfg.energy.eps, sign, u)
        worst = max(worst, res)
        ratios.append(ratio)
        flagged += bool(skipped)
    if flagged:
        logger.warning("energy-check: %d test function(s) straddle a breakpoint", flagged)
    finite = [r for r in ratios if math.isfinite(r)]
    report = ResidualReport(
        family=pot.family, functions=len(ratios), max_residual=worst, ratios=ratios,
        ratio_min=min(finite, default=math.nan), ratio_max=max(finite, default=math.nan), flagged=flagged,
        passed=bool(finite) and all(3.0 <= r <= 5.0 for r in finite),
    )
    return CommandResult(reports.run_report("energy-check", cfg, report.passed, reports.dump_model(report)))


# ---------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------
def window_radius(cfg: ExperimentConfig, params: carleman.CarlemanParams) -> float:
    sc = cfg.sweep
    if sc.window_radius is not None:
        return sc.window_radius
    if sc.window_constant is not None:
        return sc.window_constant / math.sqrt(cfg.E)
    return params.M


def sweep_plan(cfg: ExperimentConfig, params: carleman.CarlemanParams, threads: int = 1) -> resolvent.SweepPlan:
    sc, gc = cfg.sweep, cfg.grid
    M = window_radius(cfg, params)
    if sc.h_values is not None:
        h_values = tuple(sorted(sc.h_values))
    else:
        h_max = sc.h_max if sc.h_max is not None else params.h0
        h_values = tuple(np.geomspace(h_max * sc.h_min_fraction, h_max, sc.h_count))
    return resolvent.SweepPlan(
        n=cfg.n, s=cfg.s, h_values=h_values, window_radius=M,
        r_min=gc.r_min, r_max=gc.r_max if gc.r_max is not None else 4.0 * M,
        N=gc.N, eps_kind=sc.eps.kind, eps_value=sc.eps.value, max_halvings=sc.eps.max_halvings,
        sign=sc.sign, jmax=sc.jmax, gates=sc.gates, gate_scope=sc.gate_scope,
        absorber_wavelengths=gc.absorber_wavelengths, absorber_strength=gc.absorber_strength,
        threads=threads,
    )


def summarize(result: resolvent.SweepResult) -> SweepSummary:
    """Pass iff every row is usable and contracted, the gates hold, and the exterior fit is a clean power law."""
    table = result.table
    usable = table[~table["flagged"]]
    contracts = bool((usable["norm_ext"] <= usable["norm_full"] * (1.0 + 1e-6)).all())
    ff, fe = result.fit_full, result.fit_ext
    gates = result.gates_passed
    ext_ok = (
        fe is not None
        and EXT_EXPONENT_MIN <= fe.slope <= EXT_EXPONENT_MAX
        and fe.rsquared >= EXT_R2_MIN
    )
    return SweepSummary(
        C3_slope=None if ff is None else ff.slope, ext_exponent=None if fe is None else fe.slope,
        R2_full=None if ff is None else ff.rsquared, R2_ext=None if fe is None else fe.rsquared,
        rows=len(table), flagged_rows=int(table["flagged"].sum()), cutoff_rows=int(table["cutoff"].sum()),
        window_radius=result.window_radius, gates_passed=gates,
        passed=contracts and ext_ok and gates is not False and not table["flagged"].any(),
    )


SWEEP_COLUMNS = ["h", "eps", "j", "norm_full", "norm_ext"]


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> CommandResult:
    pot = build_potential(cfg)
    params = build_params(cfg, pot)
    result = resolvent.sweep(pot, sweep_plan(cfg, params, threads))
    summary = summarize(result)
    for warning in result.warnings:
        logger.warning("sweep: %s", warning)
    extra = [c for c in result.table.columns if c not in SWEEP_COLUMNS]
    payload = reports.dump_model(summary)
    payload["warnings"] = result.warnings
    report = reports.run_report("sweep", cfg, summary.passed, payload)
    return CommandResult(
        report,
        json_files={"sweep_summary.json": reports.stamped(report, reports.dump_model(summary))},
        csv_files={"sweep.csv": result.table[SWEEP_COLUMNS + extra]},
        plot=True,
    )


COMMANDS: dict[str, Callable[[ExperimentConfig, int], CommandResult]] = {
    "validate": run_validate,
    "constants": run_constants,
    "carleman-verify": run_carleman_verify,
    "mellin-check": run_mellin_check,
    "energy-check": run_energy_check,
    "sweep": run_sweep,
}


def ensure_passed(result: CommandResult) -> None:
    if not result.report.passed:
        raise GateFailure(f"{result.report.command}: checks did not pass")
