import math

import numpy as np
import pytest
from scipy import integrate

from resolab.core import carleman, potentials
from resolab.core.carleman import (
    adapted_bound,
    derive_constants,
    margin_grid,
    lower_bound_margin,
    verify_lower_bound,
)
from resolab.errors import ParameterError
from resolab.reports import dump_model


def test_zero_potential_constants(zero_params):
    p = zero_params
    assert p.b == 1.0
    assert p.K == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert p.K_first == 0.0
    assert p.M == pytest.approx(16.0 * math.sqrt(2.0), rel=1e-12)
    assert p.h0 == 1.0
    assert p.K1 == 1.0


def test_first_K_bound():
    pot = potentials.make_potential("singular-power", 3, 1.0, amplitude=1.0, delta=1.0)
    p = derive_constants(pot, eta=1.0)
    assert p.K_first == pytest.approx(2.0, rel=1e-12)
    assert p.K >= p.K_first
    assert p.K >= p.K_sup


def test_eta_interval(zero_pot):
    assert derive_constants(zero_pot, eta=7.0).eta == 7.0
    pot = potentials.make_potential("singular-power", 3, 1.0, amplitude=1.0, delta=1.0)
    assert carleman.eta_upper(1.0) == 7.0
    for eta in (0.0, 7.0, 9.0):
        with pytest.raises(ParameterError):
            derive_constants(pot, eta=eta)
    with pytest.raises(ParameterError):
        derive_constants(pot, eta=1.0, s=0.5)


def test_default_eta():
    assert carleman.default_eta(0.0) == 1.0
    assert carleman.default_eta(1.5) == pytest.approx(0.5 * (16 - 12 - 2.25) / 2.25)


def test_constants_satisfy_their_definitions(family_params):
    for p in family_params.values():
        assert p.M == pytest.approx(2.0 * max(p.b, 6.0 * math.sqrt(3.0), 8.0 * p.K / math.sqrt(p.E)))
        assert p.h0 < 27.0 * p.E / (4.0 * (1.0 + p.eta) * p.K) or p.h0 == 1.0
        assert p.h0 <= 1.0


def test_phase_continuity_random_draws():
    rng = np.random.default_rng(3)
    for _ in range(100):
        E = rng.uniform(0.5, 4.0)
        delta = rng.uniform(0.0, 1.5)
        pot = potentials.make_potential(
            "singular-power", 3, E, delta=delta, amplitude=rng.uniform(0.1, 3.0), c0=rng.uniform(0.0, 3.0),
        )
        eta = rng.uniform(0.05, 0.95) * min(carleman.eta_upper(delta), 10.0)
        p = derive_constants(pot, eta=eta)
        for jump in p.breakpoint_jumps().values():
            assert jump <= 1e-12 * p.K


def test_phase_examples(family_params):
    p = family_params["coulomb-like"]
    phi, dphi, _ = p.phase(np.array([p.M, 2.0 * p.M, 10.0 * p.M]))
    assert np.all(dphi == 0.0)
    assert phi[0] == phi[1] == phi[2]
    _, d_at, _ = p.phase(np.array([1.0, 0.5 * p.M]))
    assert d_at[0] == pytest.approx(p.K)
    assert d_at[1] == pytest.approx(2.0 * p.K / (1.0 + 0.5 * p.M))


def test_phase_starts_at_zero_and_is_monotone(zero_params):
    p = zero_params
    rr = np.linspace(0.0, 2.0 * p.M, 5001)
    phi, dphi, _ = p.phase(rr)
    assert phi[0] == 0.0
    assert np.all(dphi >= 0.0)
    assert np.all(np.diff(phi) >= 0.0)


@pytest.mark.parametrize("family", ["zero", "coulomb-like", "long-range"])
def test_closed_form_phase_matches_quadrature(family_params, family):
    p = family_params[family]
    a, b = 0.5, 1.2 * p.M
    phi, _, _ = p.phase(np.array([a, b]))
    ref, _ = integrate.quad(
        lambda r: float(p.phase(np.asarray(r))[1]), a, b,
        points=[1.0, 0.5 * p.M, p.M], limit=200, epsabs=0.0, epsrel=1e-12,
    )
    assert phi[1] - phi[0] == pytest.approx(ref, rel=1e-9)


def test_phase_second_derivative_matches_differences(family_params):
    p = family_params["long-range"]
    d = 1e-5
    for r in (0.4, 3.0, 0.75 * p.M):
        _, dp_plus, _ = p.phase(np.asarray(r + d))
        _, dp_minus, _ = p.phase(np.asarray(r - d))
        _, _, d2 = p.phase(np.asarray(r))
        assert (dp_plus - dp_minus) / (2 * d) == pytest.approx(float(d2), rel=1e-6, abs=1e-9)


def test_q_vanishes_inside_M(family_params):
    for p in family_params.values():
        rr = np.geomspace(1e-6, 0.999 * p.M, 2000)
        _, _, _, q = p.weight(rr)
        assert np.all(q == 0.0)


def test_zero_potential_outer_weight(zero_params):
    p = zero_params
    rr = np.geomspace(1.01 * p.M, 50.0 * p.M, 40)
    w, dw, W, q = p.weight(rr)
    expected_W = np.minimum(rr ** 3 / 4.0, (1.0 + rr * rr) ** p.s)
    np.testing.assert_allclose(W, expected_W, rtol=1e-14)
    np.testing.assert_allclose(q, 2.0 / rr - 1.0 / expected_W, rtol=1e-12)
    assert np.all(q >= 0.0)
    np.testing.assert_allclose(dw, w / W, rtol=1e-14)


def test_weight_positive_continuous_and_bounded(family_params):
    for p in family_params.values():
        w0, _, _, _ = p.weight(np.array([0.0]))
        assert w0[0] == 0.0
        left, _, _, _ = p.weight(np.array([p.M * (1 - 1e-12)]))
        at, _, _, _ = p.weight(np.array([p.M]))
        assert left[0] == pytest.approx(p.M ** 2, rel=1e-10)
        assert at[0] == p.M ** 2

        rr = np.geomspace(1e-3, 1e6 * p.M, 300)
        w, dw, _, _ = p.weight(rr)
        assert np.all(w > 0.0) and np.all(dw > 0.0)
        assert np.all(np.diff(w) > 0.0)
        assert np.all(w <= w[-1] * (1 + 1e-6))


def test_margin_near_origin_zero_potential(zero_params):
    p = zero_params
    rr = np.linspace(0.05, 0.95, 19)
    margin, flags = lower_bound_margin(p, 0.5, rr)
    np.testing.assert_allclose(margin, 2.0 * rr * (0.5 * p.E + p.K ** 2), rtol=1e-12)
    assert not flags.any()


def test_margin_beyond_M(family_params):
    p = family_params["coulomb-like"]
    pot = p.pot
    h = p.h0
    rr = np.geomspace(1.01 * p.M, 10.0 * p.M, 50)
    margin, _ = lower_bound_margin(p, h, rr)
    _, dw, W, q = p.weight(rr)
    V, dV = pot.V(rr), pot.Vprime(rr)
    expected = dw * (p.E - V - W * dV - W * h * h * q / (4 * rr * rr)) - 0.5 * p.E * dw
    np.testing.assert_allclose(margin, expected, rtol=1e-10)
    assert np.all(margin >= 0.0)


def test_breakpoints_flagged(zero_params):
    p = zero_params
    _, flags = lower_bound_margin(p, 0.5, np.array([1.0, 2.0, 0.5 * p.M, p.M]))
    assert flags.tolist() == [True, False, True, True]


def test_margin_grid_avoids_breakpoints(zero_params):
    grid = margin_grid(zero_params)
    assert grid.size == 10_000
    assert not carleman.at_breakpoint(zero_params, grid).any()
    assert grid[0] == pytest.approx(1e-6) and grid[-1] == pytest.approx(10 * zero_params.M)


def test_analytic_A_matches_differences(family_params):
    p = family_params["coulomb-like"]
    pot = p.pot

    def G(r):
        r = np.asarray(r, dtype=float)
        _, dphi, _ = p.phase(r)
        w, _, _, _ = p.weight(r)
        return w * (p.E + dphi ** 2 - pot.V(r))

    r0 = 3.0
    _, dphi, d2phi = p.phase(np.asarray(r0))
    w, dw, _, _ = p.weight(np.asarray(r0))
    exact = dw * (p.E + dphi ** 2 - pot.V(r0)) + w * (2 * dphi * d2phi - pot.Vprime(r0))
    errs = [abs((G(r0 + d) - G(r0 - d)) / (2 * d) - exact) for d in (1e-2, 5e-3)]
    assert errs[0] < 1e-3 * abs(exact)
    assert 3.0 < errs[0] / errs[1] < 5.0


@pytest.mark.parametrize("family", potentials.FAMILIES)
@pytest.mark.parametrize("fraction", [1.0, 0.5, 0.1])
def test_lower_bound_holds_for_shipped_families(family_params, family, fraction):
    p = family_params[family]
    report = verify_lower_bound(p, fraction * p.h0)
    assert report.passed
    assert report.adapted_bound_ok
    assert not report.precondition_breach
    assert report.breakpoint_hits == 0
    assert [pm.piece for pm in report.per_piece] == [0, 1, 2, 3]
    assert all(pm.points > 0 for pm in report.per_piece)


def test_zero_potential_minimum_strictly_positive(zero_params):
    report = verify_lower_bound(zero_params, zero_params.h0)
    assert report.min_margin > 0.0


def test_precondition_breach_flagged(zero_params):
    report = verify_lower_bound(zero_params, 10.0 * zero_params.h0)
    assert report.precondition_breach
    assert report.h == 10.0 * zero_params.h0


def test_margin_report_serializes_pass_key(zero_params):
    payload = dump_model(verify_lower_bound(zero_params, zero_params.h0))
    assert payload["pass"] is True
    assert {"min_margin", "argmin_r", "per_piece"} <= payload.keys()


def test_adapted_bound_is_below_the_full_lower_bound(family_params):
    p = family_params["barrier-bump"]
    rr = margin_grid(p, count=2000)
    margin, _ = lower_bound_margin(p, p.h0, rr)
    _, dw, _, _ = p.weight(rr)
    total = margin + 0.5 * p.E * dw
    assert np.all(total >= adapted_bound(p, p.h0, rr) - 1e-9 * dw.max())


def test_flat_phase_weight():
    flat = carleman.FlatPhaseWeight()
    phi, dphi, d2phi = flat.phase(np.array([0.5, 2.0]))
    w, dw, W, q = flat.weight(np.array([0.5, 2.0]))
    assert not phi.any() and not dphi.any() and not d2phi.any()
    np.testing.assert_array_equal(w, 1.0)
    np.testing.assert_allclose(q, [4.0, 1.0])
