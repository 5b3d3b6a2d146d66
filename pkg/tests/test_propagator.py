import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specwave import (
    DampingParams,
    Regime,
    TorusSpec,
    build_torus,
    classify_decay,
    energy,
    mode_solution,
    solve_linear,
)
from specwave.errors import AssumptionError, DomainError, ShapeError
from specwave.oracle import relative_hnorm_discrepancy, rk4_modes
from specwave.propagator import (
    TRAJECTORY_COLUMNS,
    ModeKernel,
    fitted_constant,
    mode_kernels,
    mode_kernels_complex,
    regime_of,
    trajectory_rows,
    write_trajectory_csv,
)
from specwave.spectral import sobolev_norm


@pytest.mark.parametrize("lam,b", [(5.0, 1.0), (1.0, 2.0), (1.0, 4.0), (0.0, 3.0)])
def test_initial_conditions(lam, b):
    u, ut = mode_solution(lam, DampingParams(b, 0.0), 0.7, -1.3, 0.0)
    assert u == 0.7 and ut == pytest.approx(-1.3, abs=1e-15)


@pytest.mark.parametrize("shifted,b", [(5.0, 1.0), (1.0, 2.0), (1.0, 4.0), (2.0, 3.0)])
def test_kernel_initial_values(shifted, b):
    r0, r1, dr0, dr1 = mode_kernels(shifted, b, 0.0)
    assert (r0, r1, dr1) == (1.0, 0.0, 1.0)
    assert dr0 == 0.0


@pytest.mark.parametrize("shifted,b", [(5.0, 1.0), (1.0, 2.0), (1.0, 4.0)])
def test_kernel_derivatives_by_finite_differences(shifted, b):
    t = np.linspace(0.5, 8, 16)
    h = 1e-5
    r0p, r1p, _, _ = mode_kernels(shifted, b, t + h)
    r0m, r1m, _, _ = mode_kernels(shifted, b, t - h)
    _, _, dr0, dr1 = mode_kernels(shifted, b, t)
    assert np.allclose((r0p - r0m) / (2 * h), dr0, atol=1e-9)
    assert np.allclose((r1p - r1m) / (2 * h), dr1, atol=1e-9)


def test_critical_example():
    u, _ = mode_solution(1.0, DampingParams(2.0, 0.0), 1.0, 0.0, 1.0)
    assert u == pytest.approx(2 * math.exp(-1), rel=1e-15)
    t = np.linspace(0, 10, 101)
    u, _ = mode_solution(1.0, DampingParams(2.0, 0.0), 1.0, 0.0, t)
    assert np.allclose(u, (1 + t) * np.exp(-t), rtol=1e-14, atol=0)


def test_oscillatory_example():
    u, _ = mode_solution(1.0, DampingParams(1.0, 0.0), 1.0, 0.0, 1.0)
    ref, _ = rk4_modes(np.array([1.0]), 1.0, 0.0, [1.0], [0.0], [0.0, 1.0], 1e-4)
    assert u == pytest.approx(ref[-1, 0], abs=1e-12)
    assert round(float(u), 4) == 0.6597


def test_monotone_asymptotics():
    b = 4.0
    t = np.array([20.0, 40.0, 80.0])
    u, _ = mode_solution(1.0, DampingParams(b, 0.0), 0.0, 1.0, t)
    predicted = np.exp((-2 + math.sqrt(3)) * t) / (2 * math.sqrt(3))
    assert np.allclose(u / predicted, 1.0, rtol=1e-12)


def test_monotone_no_overflow_long_time():
    u, ut = mode_solution(np.array([1.0, 1e-6]), DampingParams(50.0, 0.0), 1.0, 1.0, 2000.0)
    assert np.all(np.isfinite(u)) and np.all(np.isfinite(ut))


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        mode_solution(1.0, DampingParams(1.0), 1.0, 0.0, -0.5)


def test_complex_form_cross_check():
    t = np.linspace(0, 10, 201)
    for shifted, b in [(5.0, 1.0), (1.0, 4.0), (0.3, 1.0)]:
        r0, r1, _, _ = mode_kernels(shifted, b, t)
        c0, c1 = mode_kernels_complex(shifted, b, t)
        assert np.allclose(r0, c0, atol=1e-12) and np.allclose(r1, c1, atol=1e-12)


@pytest.mark.parametrize("b", [0.5, 2.0, 4.0, 10.0])
def test_regime_boundary_continuity(b):
    t = np.linspace(0, 10, 1001)
    crit = b * b / 4
    e = np.exp(-b / 2 * t)
    r0c, r1c = (1 + b / 2 * t) * e, t * e
    for off in (1e-6, -1e-6):
        assert regime_of(crit + off, b) is not Regime.CRITICAL
        r0, r1, _, _ = mode_kernels(crit + off, b, t)
        assert np.max(np.abs(r0 - r0c)) <= 1e-4 and np.max(np.abs(r1 - r1c)) <= 1e-4


def test_critical_band_routes_near_double_root():
    assert regime_of(1.0 + 1e-12, 2.0) is Regime.CRITICAL
    assert regime_of(1.0 + 1e-6, 2.0) is Regime.OSCILLATORY
    assert regime_of(1.0 - 1e-6, 2.0) is Regime.MONOTONE


def _per_mode_bound(shifted, b, u0, u1, t):
    d = shifted - b * b / 4
    lead = abs(u0) + abs(b / 2 * u0 + u1) / (math.sqrt(abs(d)) if regime_of(shifted, b) is not Regime.CRITICAL else 1)
    if regime_of(shifted, b) is Regime.OSCILLATORY:
        return lead * np.exp(-b / 2 * t)
    if regime_of(shifted, b) is Regime.CRITICAL:
        return lead * (1 + t) * np.exp(-b / 2 * t)
    return lead * np.exp(-(b / 2 - math.sqrt(-d)) * t)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 30), st.floats(0.1, 8), st.floats(-2, 2), st.floats(-2, 2))
def test_per_mode_envelope(shifted, b, u0, u1):
    t = np.linspace(0, 30, 601)
    u, _ = mode_solution(shifted, DampingParams(b, 0.0), u0, u1, t)
    assert np.all(np.abs(u) <= _per_mode_bound(shifted, b, u0, u1, t) * (1 + 1e-9) + 1e-300)


def test_mode_kernel_object(hermite16):
    k = ModeKernel.for_mode(hermite16, DampingParams(2.0, 0.0), 0)
    assert k.regime is Regime.CRITICAL
    assert k.r1_at(1.0) == pytest.approx(math.exp(-1))
    assert ModeKernel.for_mode(hermite16, DampingParams(2.0, 0.0), 3).regime is Regime.OSCILLATORY
    assert ModeKernel.for_mode(hermite16, DampingParams(4.0, 0.0), 0).regime is Regime.MONOTONE


def test_single_mode_trajectory(hermite16):
    p = DampingParams(1.0, 0.25)
    u0 = np.zeros(16)
    u0[4] = 2.0
    t = np.linspace(0, 5, 51)
    traj = solve_linear(hermite16, p, u0, np.zeros(16), t)
    ref, _ = mode_solution(hermite16.eigenvalues[4], p, 2.0, 0.0, t)
    assert np.array_equal(traj.u_hat[:, 4], ref)
    assert np.all(np.delete(traj.u_hat, 4, axis=1) == 0)
    assert len(traj) == 51 and traj[10].t == pytest.approx(1.0)


def test_solve_linear_matches_rk4(hermite32, rng):
    p = DampingParams(1.0, 0.0)
    lam = hermite32.eigenvalues
    u0 = rng.standard_normal(32) / (1 + lam)
    u1 = rng.standard_normal(32) / (1 + lam)
    t = np.linspace(0, 10, 201)
    traj = solve_linear(hermite32, p, u0, u1, t)
    ref, _ = rk4_modes(lam, p.b, p.m, u0, u1, t, 2.5e-3)
    assert relative_hnorm_discrepancy(traj.u_hat, ref) <= 1e-6


def test_assumption_violation_torus(torus1d):
    with pytest.raises(AssumptionError) as info:
        solve_linear(torus1d, DampingParams(1.0, 0.0), np.zeros(torus1d.size), np.zeros(torus1d.size), [0, 1])
    assert info.value.assumption == "λ₀+m>0"
    assert "torus basis has λ₀=0, given m=0" in str(info.value)


def test_negative_mass_allowed(hermite16):
    # lambda_0 + m = 0.5 > 0 even though m < 0
    traj = solve_linear(hermite16, DampingParams(1.0, -0.5), np.ones(16) / 16, np.zeros(16), np.linspace(0, 5, 11))
    assert np.all(np.isfinite(traj.u_hat))
    with pytest.raises(AssumptionError):
        solve_linear(hermite16, DampingParams(1.0, -1.0), np.ones(16), np.zeros(16), [0.0])


def test_b_must_be_positive():
    with pytest.raises(AssumptionError):
        DampingParams(0.0, 1.0)


def test_solve_linear_shape_errors(hermite16):
    with pytest.raises(ShapeError):
        solve_linear(hermite16, DampingParams(1.0), np.zeros(15), np.zeros(16), [0.0])


def test_classify_examples():
    e = classify_decay(DampingParams(1.0, 0.0), 1.0)
    assert (e.gamma, e.q, e.regime) == (0.5, 0.0, Regime.OSCILLATORY)
    e = classify_decay(DampingParams(2.0, 0.0), 1.0, nonlinear=True)
    assert (e.gamma, e.q, e.regime) == (1.0, 1.5, Regime.CRITICAL)
    e = classify_decay(DampingParams(2.0, 0.0), 1.0)
    assert (e.gamma, e.q) == (1.0, 1.0)
    e = classify_decay(DampingParams(4.0, 0.0), 1.0)
    assert e.gamma == pytest.approx(2 - math.sqrt(3), rel=1e-15) and e.q == 0.0
    assert round(e.gamma, 6) == 0.267949
    assert classify_decay(DampingParams(4.0, 0.0), 1.0, nonlinear=True).q == 0.5
    assert classify_decay(DampingParams(1.0, 0.0), 1.0, nonlinear=True).q == 0.5
    with pytest.raises(AssumptionError):
        classify_decay(DampingParams(1.0, 0.0), 0.0)


def test_energy_zero_state(hermite16):
    traj = solve_linear(hermite16, DampingParams(1.0), np.zeros(16), np.zeros(16), [0.0, 1.0])
    assert np.all(energy(hermite16, traj.params, traj) == 0)
    assert energy(hermite16, traj.params, traj[0]) == 0


def test_energy_conserved_in_undamped_limit(hermite16, rng):
    p = DampingParams(1e-8, 0.0)
    lam = hermite16.eigenvalues
    u0, u1 = rng.standard_normal(16), rng.standard_normal(16)
    t = np.linspace(0, 1, 101)
    U, V = rk4_modes(lam, p.b, p.m, u0, u1, t, 1e-4)
    E_oracle = 0.5 * (np.sum(V**2, axis=1) + np.sum(lam * U**2, axis=1))
    E = energy(hermite16, p, solve_linear(hermite16, p, u0, u1, t))
    assert np.max(np.abs(E / E[0] - 1)) <= 1e-6
    assert np.max(np.abs(E_oracle / E_oracle[0] - 1)) <= 1e-6


def test_energy_nonincreasing(hermite32, rng):
    for m in (0.0, 0.5, 3.0):
        p = DampingParams(float(rng.uniform(0.2, 5)), m)
        traj = solve_linear(hermite32, p, rng.standard_normal(32), rng.standard_normal(32), np.linspace(0, 10, 501))
        E = energy(hermite32, p, traj)
        assert np.all(np.diff(E) <= 1e-12 * E[0])


def test_critical_h1_bound_constant(hermite32, rng):
    # b = 2 sqrt(lambda_0 + m): ||u(t)|| <= C (1+t) e^{-bt/2} (||u0||_{H^1} + ||u1||)
    p = DampingParams(2.0, 0.0)
    u0, u1 = rng.standard_normal(32) / hermite32.eigenvalues, rng.standard_normal(32) / hermite32.eigenvalues
    t = np.linspace(0, 40, 801)
    traj = solve_linear(hermite32, p, u0, u1, t)
    env = classify_decay(p, hermite32.bottom)
    data = sobolev_norm(hermite32, u0, 1) + sobolev_norm(hermite32, u1, 0)
    C = fitted_constant(traj.h_norms() / data, env, t)
    assert 0 < C < 10
    assert np.all(traj.h_norms() <= C * data * env.shape(t) * (1 + 1e-12))


def test_trajectory_csv(hermite16, rng):
    p = DampingParams(1.0)
    traj = solve_linear(hermite16, p, rng.standard_normal(16), rng.standard_normal(16), np.linspace(0, 2, 21))
    env = classify_decay(p, hermite16.bottom)
    rows = trajectory_rows(traj, env)
    text = write_trajectory_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == TRAJECTORY_COLUMNS
    vals = np.array(parsed[1:], dtype=float)
    assert vals.shape == (21, 5) and np.all(np.isfinite(vals))
    # exact round trip of the printed values
    assert np.array_equal(vals, np.array(rows))
    # fitted bound dominates the norm column
    assert np.all(vals[:, 1] <= vals[:, 4] * (1 + 1e-15))


def test_torus_with_mass(rng):
    b = build_torus(TorusSpec(max_frequency=4))
    p = DampingParams(1.0, 0.5)
    traj = solve_linear(b, p, rng.standard_normal(b.size), rng.standard_normal(b.size), np.linspace(0, 10, 101))
    U, _ = rk4_modes(b.eigenvalues, 1.0, 0.5, traj.u_hat[0], traj.ut_hat[0], traj.times, 1e-3)
    assert relative_hnorm_discrepancy(traj.u_hat, U) <= 1e-6
