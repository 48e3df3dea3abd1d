import math

import numpy as np
import pandas as pd
import pytest
from scipy import linalg

from resolab.core import potentials, resolvent
from resolab.core.grids import RadialGrid
from resolab.core.resolvent import (
    Absorber,
    JmaxPolicy,
    SweepPlan,
    Window,
    dense_norm,
    discretize,
    full_norm,
    sweep,
    weighted_resolvent_norm,
)
from resolab.errors import ConfigurationError, NearSingularError


def _dirichlet_eigenvalues(grid: RadialGrid, h: float) -> np.ndarray:
    k = np.arange(1, grid.N - 1)
    return 4.0 * h * h / grid.dr ** 2 * np.sin(k * math.pi / (2.0 * (grid.N - 1))) ** 2


def test_free_resolvent_matches_closed_form():
    h = 0.1
    grid = RadialGrid(0.0, 10.0, 4096)
    mu = _dirichlet_eigenvalues(grid, h)
    E = mu[30] + 0.3 * (mu[31] - mu[30])
    pot = potentials.make_potential("zero", 3, E)
    op = discretize(pot, 3, 0, h, 0.0, "+", grid)
    expected = 1.0 / np.min(np.abs(mu - E))
    assert weighted_resolvent_norm(op, 0.0) == pytest.approx(expected, rel=1e-6)
    assert op.spectral_distance() == pytest.approx(1.0 / expected, rel=1e-8)


def test_power_iteration_matches_dense_oracle():
    rng = np.random.default_rng(7)
    families = ["zero", "coulomb-like", "barrier-bump"]
    for _ in range(20):
        E = rng.uniform(0.5, 1.5)
        h = rng.uniform(0.05, 0.5)
        r_min = rng.uniform(0.5, 2.0)
        pot = potentials.make_potential(families[rng.integers(3)], 3, E)
        grid = RadialGrid(r_min, r_min + 30.0 * h, 402)
        op = discretize(pot, 3, int(rng.integers(4)), h, rng.uniform(0.05, 0.5), int(rng.choice([-1, 1])), grid)
        assert op.size == 400
        s = rng.uniform(0.5, 1.5)
        window = Window.exterior(r_min + 15.0 * h) if rng.uniform() < 0.5 else Window.full()
        power = weighted_resolvent_norm(op, s, window, tol=1e-12)
        assert power == pytest.approx(dense_norm(op, s, window), rel=1e-6)


def test_dense_oracle_size_limit(zero_pot):
    op = discretize(zero_pot, 3, 0, 0.5, 0.1, 1, RadialGrid(0.0, 10.0, 1001))
    with pytest.raises(ValueError):
        dense_norm(op, 0.0)


def test_sign_symmetry(family_pots):
    pot = family_pots["coulomb-like"]
    grid = RadialGrid(1e-3, 12.0, 1201)
    plus = weighted_resolvent_norm(discretize(pot, 3, 1, 0.3, 0.05, "+", grid), 0.75, tol=1e-12)
    minus = weighted_resolvent_norm(discretize(pot, 3, 1, 0.3, 0.05, "-", grid), 0.75, tol=1e-12)
    assert plus == pytest.approx(minus, rel=1e-10)


def test_norm_decreases_in_eps_and_stays_below_inverse_eps(zero_pot):
    grid = RadialGrid(0.0, 10.0, 1001)
    norms = []
    for eps in (0.05, 0.1, 0.2, 0.4):
        value = weighted_resolvent_norm(discretize(zero_pot, 3, 0, 0.2, eps, 1, grid), 0.0)
        assert value <= (1.0 + 1e-9) / eps
        norms.append(value)
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_operator_is_complex_symmetric(zero_pot):
    op = discretize(zero_pot, 3, 2, 0.5, 0.25, -1, RadialGrid(0.0, 10.0, 301))
    A = op.matrix().toarray()
    np.testing.assert_array_equal(A, A.T)
    np.testing.assert_allclose(A - A.conj().T, -0.5j * np.eye(op.size), atol=1e-15)


def test_mode_sup_of_block_diagonal(family_pots):
    pot = family_pots["barrier-bump"]
    grid = RadialGrid(0.5, 6.5, 302)
    ops = [discretize(pot, 3, j, 0.2, 0.1, 1, grid) for j in (0, 1)]
    blocks = []
    for op in ops:
        d = op.weights(1.0, Window.full())
        blocks.append(d[:, None] * np.linalg.inv(op.matrix().toarray()) * d[None, :])
    joint = linalg.svdvals(linalg.block_diag(*blocks))[0]
    assert joint == pytest.approx(max(dense_norm(op, 1.0) for op in ops), rel=1e-12)


def test_exterior_window_zeroes_the_interior(zero_pot):
    op = discretize(zero_pot, 3, 0, 0.5, 0.1, 1, RadialGrid(0.0, 10.0, 301))
    d = op.weights(1.0, Window.exterior(2.0))
    assert not d[op.r < 2.0].any()
    np.testing.assert_allclose(d[op.r >= 2.0], (1.0 + op.r[op.r >= 2.0] ** 2) ** -0.5)
    assert weighted_resolvent_norm(op, 1.0, Window.exterior(20.0)) == 0.0


def test_discretize_rejects_unresolved_grids(zero_pot):
    with pytest.raises(ConfigurationError):
        discretize(zero_pot, 3, 0, 0.5, 0.1, 1, RadialGrid(0.0, 10.0, 255))
    with pytest.raises(ConfigurationError):
        discretize(zero_pot, 3, 0, 0.01, 0.1, 1, RadialGrid(0.0, 10.0, 1001))
    with pytest.raises(ValueError):
        discretize(zero_pot, 3, 0, 0.5, 0.1, 0, RadialGrid(0.0, 10.0, 1001))


def test_real_energy_on_an_eigenvalue_is_near_singular():
    h = 0.5
    grid = RadialGrid(0.0, 10.0, 301)
    E = _dirichlet_eigenvalues(grid, h)[4]
    pot = potentials.make_potential("zero", 3, E)
    with pytest.raises(NearSingularError):
        weighted_resolvent_norm(discretize(pot, 3, 0, h, 0.0, 1, grid), 0.0)


def test_absorber_only_adds_absorption(zero_pot):
    grid = RadialGrid(0.0, 20.0, 2001)
    op = discretize(zero_pot, 3, 1, 0.5, 0.1, 1, grid, Absorber(10.0, 10.0, 2.0))
    bare = discretize(zero_pot, 3, 1, 0.5, 0.1, 1, grid)
    np.testing.assert_array_equal(op.diagonal.real, bare.diagonal.real)
    extra = op.diagonal.imag - bare.diagonal.imag
    assert np.all(extra >= 0.0)
    assert np.all(extra[op.r <= 10.0] == 0.0)
    assert extra[-1] == pytest.approx(2.0 * ((op.r[-1] - 10.0) / 10.0) ** 2)
    assert weighted_resolvent_norm(op, 0.0) <= 1.0 / 0.1 * (1.0 + 1e-9)


def test_absorber_reproduces_outgoing_green_function(zero_pot):
    # -h^2 G'' - E G = delta(r - r'), G(0) = 0, outgoing: G = sin(k r<) e^{i k r>} / (h^2 k)
    h, k = 0.5, 2.0
    grid = RadialGrid(0.0, 35.0, 3501)
    op = discretize(zero_pot, 3, 0, h, 0.0, -1, grid, Absorber(10.0, 25.0, 1.0))
    r = op.r
    m = int(np.argmin(np.abs(r - 2.0)))
    source = np.zeros(op.size)
    source[m] = 1.0 / grid.dr
    u = op.solve(source)

    lo, hi = np.minimum(r, r[m]), np.maximum(r, r[m])
    exact = np.sin(k * lo) * np.exp(1j * k * hi) / (h * h * k)
    inside = (r >= 0.1) & (r <= 10.0)
    assert np.max(np.abs(u[inside] - exact[inside])) <= 5e-3 * np.max(np.abs(exact))


def test_full_norm_with_large_eps(zero_pot):
    grid = RadialGrid(0.0, 10.0, 1025)
    best, j = full_norm(zero_pot, 3, 0.1, 10.0, 1, 0.0, Window.full(), grid, JmaxPolicy(jmax=3))
    assert best <= 0.1 * (1.0 + 1e-12)
    assert best == pytest.approx(0.1, rel=5e-3)
    assert 0 <= j <= 3


def test_scan_stops_after_three_small_decreases():
    scan = resolvent._Scan(JmaxPolicy())
    for j, value in enumerate([1.0, 2.0, 1.5, 0.01]):
        scan.push(j, value)
        assert not scan.done
    scan.push(4, 0.005)
    assert scan.done
    assert (scan.best, scan.best_j) == (2.0, 1)


def test_scan_resets_on_increase():
    scan = resolvent._Scan(JmaxPolicy())
    for j, value in enumerate([5.0, 0.01, 0.005, 0.02, 0.01]):
        scan.push(j, value)
    assert scan.run == 1
    assert not scan.done


def _small_plan(**overrides) -> SweepPlan:
    base = dict(
        n=3, s=0.75, h_values=(0.5, 0.4), window_radius=2.0, r_min=1e-3, r_max=8.0, N=256,
        eps_kind="fixed", eps_value=0.1, jmax=4,
    )
    base.update(overrides)
    return SweepPlan(**base)


def test_grid_for_resolves_each_h():
    plan = _small_plan()
    assert resolvent.grid_for(plan, 0.5, 1.0).N == 256
    fine = resolvent.grid_for(plan, 0.01, 1.0)
    assert fine.dr <= 0.001 * (1.0 + 1e-12)
    assert (fine.r_min, fine.r_max) == (plan.r_min, plan.r_max)


def test_eps_schedules():
    assert resolvent._eps_for(_small_plan(), 0.4) == 0.1
    assert resolvent._eps_for(_small_plan(eps_kind="proportional", eps_value=1e-3), 0.4) == pytest.approx(4e-4)


def test_small_sweep(zero_pot):
    result = sweep(zero_pot, _small_plan())
    table = result.table
    assert table["h"].tolist() == [0.4, 0.5]
    assert {"h", "eps", "j", "norm_full", "j_ext", "norm_ext", "flagged", "cutoff",
            "gate_N", "gate_R", "gate_eps", "gate_rmin",
            "gate_ext_N", "gate_ext_R", "gate_ext_eps", "gate_ext_rmin"} <= set(table.columns)
    assert (table["eps"] == 0.1).all()
    assert not table["flagged"].any()
    assert (table["norm_ext"] <= table["norm_full"] * (1.0 + 1e-3)).all()
    assert (table["norm_full"] <= 1.0 / 0.1 * (1.0 + 1e-9)).all()
    assert table["gate_rmin"].isna().all()
    assert result.fit_full is not None and result.fit_full.points == 2
    assert result.window_radius == 2.0


def test_sweep_is_independent_of_thread_count(zero_pot):
    one = sweep(zero_pot, _small_plan(threads=1, gates=False))
    two = sweep(zero_pot, _small_plan(threads=2, gates=False))
    pd.testing.assert_frame_equal(one.table, two.table)
    assert not any(c.startswith("gate_") for c in one.table.columns)
    assert one.gates_passed is None


def test_plateau_schedule_records_eps(zero_pot):
    result = sweep(zero_pot, _small_plan(eps_kind="plateau", eps_value=0.5, max_halvings=3, gates=False))
    for h, eps in zip(result.table["h"], result.table["eps"]):
        assert eps in {0.5 * h / 2 ** k for k in range(1, 4)}


@pytest.mark.parametrize(
    "overrides",
    [dict(r_max=7.0), dict(r_min=1e-2), dict(h_values=(0.5,))],
)
def test_sweep_rejects_bad_plans(zero_pot, overrides):
    with pytest.raises(ConfigurationError):
        sweep(zero_pot, _small_plan(**overrides))


def test_absorbing_layer_extends_the_grid():
    plan = _small_plan(absorber_wavelengths=8.0)
    grid = resolvent.grid_for(plan, 0.5, 1.0)
    layer = resolvent.absorber_for(plan, 0.5, 1.0)
    assert layer.start == plan.r_max
    assert layer.width == pytest.approx(8.0 * 2.0 * math.pi * 0.5)
    assert grid.r_max == pytest.approx(plan.r_max + layer.width)
    assert resolvent.absorber_for(_small_plan(), 0.5, 1.0) is None


@pytest.mark.parametrize("absorber_wavelengths", [0.0, 8.0])
def test_gate_domains_stay_resolved(zero_pot, absorber_wavelengths):
    plan = _small_plan(absorber_wavelengths=absorber_wavelengths)
    for h in np.geomspace(0.02, 0.5, 25):
        for grid in (
            resolvent.grid_for(plan, h, 1.0, r_max=1.5 * plan.r_max),
            resolvent.grid_for(plan, h, 1.0, r_min=0.5 * plan.r_min),
        ):
            discretize(zero_pot, 2, 0, h, 1e-3, 1, grid)


def test_absorbing_sweep_passes_its_gates(zero_pot):
    plan = _small_plan(N=2048, eps_kind="proportional", eps_value=1e-4, absorber_wavelengths=8.0)
    result = sweep(zero_pot, plan)
    table = result.table
    assert not table["flagged"].any()
    assert (table["norm_ext"] <= table["norm_full"] * (1.0 + 1e-6)).all()
    gate_cols = [c for c in table.columns if c.startswith("gate_") and not c.endswith("rmin")]
    assert len(gate_cols) == 6
    assert table[gate_cols].all().all()
    assert result.gates_passed is True


def test_exterior_only_gate_scope(zero_pot):
    table = sweep(zero_pot, _small_plan(gate_scope="exterior")).table
    assert "gate_ext_N" in table.columns
    assert "gate_N" not in table.columns
