import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad
from scipy.special import erfc

from lmdiff.flow import PowerLawDrive
from lmdiff.pde import (
    DensityField,
    GridSpec,
    NumericalGuardError,
    StabilityError,
    TestFunction,
    absorbed_mass,
    blowup_probe,
    closed_form_density,
    default_moment_exponent,
    lp_norm,
    point_source,
    read_fields_csv,
    smooth_initial,
    solve_pde,
    weak_form_residual,
    write_run,
    z_function,
)

from oracles import z_by_quadrature
from test_oracles import ALIVE_GAMMA0_T1, Z_GAMMA0_AT_ZERO

TRAP = PowerLawDrive(-1, 0.0)


def small_grid(sigma=-1, nx=41, na=20, x_max=4.0, t_end=0.2):
    return GridSpec.for_point_source(1.0, nx, na, x_max, t_end, sigma=sigma)


def test_z_examples():
    assert z_function(TRAP, 1.0, 0.0, 1.0) == 0.0
    assert z_function(TRAP, 1.0, 0.0, 0.0) == pytest.approx(Z_GAMMA0_AT_ZERO, rel=1e-14)
    assert z_function(TRAP, 1.0, 2.0, 1.0) == 2.0


@pytest.mark.parametrize("sigma, gamma, a", [(-1, 0.5, 0.3), (-1, 1.5, 0.4), (1, 1.0, 2.5), (1, 2.5, 1.7)])
def test_z_matches_quadrature(sigma, gamma, a):
    d = PowerLawDrive(sigma, gamma)
    assert z_function(d, 1.0, 0.7, a) == pytest.approx(z_by_quadrature(gamma, sigma, 1.0, 0.7, a), rel=1e-10)


def test_z_rejects_wrong_side():
    with pytest.raises(ValueError):
        z_function(TRAP, 1.0, 0.0, 1.5)
    with pytest.raises(ValueError):
        z_function(PowerLawDrive(1, 0.0), 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        z_function(TRAP, 1.0, 0.3, 0.0)


def test_closed_form_support_and_symmetry():
    assert closed_form_density(TRAP, 1.0, 1.0, 0.2, 1.3) == 0.0
    pos = np.linspace(0.1, 3, 30)
    x = np.concatenate([-pos[::-1], [0.0], pos])
    a = np.linspace(0.05, 1.0, 20)[:, None]
    n = closed_form_density(TRAP, 1.0, 1.0, x, a)
    assert np.array_equal(n, n[:, ::-1])
    assert np.all(n >= 0)
    with pytest.raises(ValueError):
        closed_form_density(TRAP, 1.0, 1.0, 0.0, 0.0)


def test_closed_form_mass_is_survival():
    inner = lambda x, a: closed_form_density(TRAP, 1.0, 1.0, x, a)
    half, _ = dblquad(inner, 0.0, 1.0, 0.0, 12.0, epsabs=1e-10)
    assert 2 * half == pytest.approx(ALIVE_GAMMA0_T1, abs=1e-6)


def test_absorbed_mass_examples():
    assert absorbed_mass(TRAP, 1.0, 1.0) == pytest.approx(erfc(2 / 3), rel=1e-14)
    assert absorbed_mass(TRAP, 1.0, 1.0) == pytest.approx(1 - ALIVE_GAMMA0_T1, rel=1e-12)
    assert absorbed_mass(TRAP, 1.0, 1e-6) == pytest.approx(0.0, abs=1e-12)
    assert absorbed_mass(TRAP, 1.0, 0.0) == 0.0
    for t in (0.1, 1.0, 100.0):
        assert absorbed_mass(PowerLawDrive(1, 0.0), 1.0, t) == 0.0
    assert absorbed_mass(PowerLawDrive(-1, 1.75), 1.0, 5.0) == 0.0


def test_time_integrated_form_exceeds_one():
    assert absorbed_mass(TRAP, 1.0, 10.0, time_integrated=True) > 1.0
    assert absorbed_mass(TRAP, 1.0, 10.0) < 1.0


def test_grid_rejects_unstable_step():
    with pytest.raises(StabilityError, match="stability bound"):
        GridSpec(1.0, 21, 0.1, 1.0, 10, 1.0, 1.0)
    with pytest.raises(ValueError):
        GridSpec(1.0, 20, 0.1, 1.0, 10, 1e-6, 1.0)


def test_guard_on_nonfinite_drive():
    g = small_grid()
    with pytest.raises(NumericalGuardError):
        solve_pde(lambda a: math.nan, point_source(g, 1.0), g)


def heat_oracle(n0, r, steps):
    # Half-width end cells carry the no-flux condition.
    n = n0.copy()
    for _ in range(steps):
        lap = np.empty_like(n)
        lap[:, 1:-1] = n[:, 2:] - 2 * n[:, 1:-1] + n[:, :-2]
        lap[:, 0] = 2 * (n[:, 1] - n[:, 0])
        lap[:, -1] = 2 * (n[:, -2] - n[:, -1])
        n = n + r * lap
    return n


def test_zero_drive_is_uncoupled_heat():
    g = small_grid(t_end=0.3)
    n0 = smooth_initial(g, 0.3, 0.2, 0.9)
    run = solve_pde(lambda a: 0.0, n0, g)
    expected = heat_oracle(n0, g.a[:, None] * run.dt / g.dx**2, run.steps)
    assert np.max(np.abs(run.final.n - expected)) <= 1e-10 * np.max(expected)
    assert run.final.p == 0.0 and run.final.q == 0.0


def test_zero_drive_matches_heat_kernel():
    g = GridSpec.for_point_source(1.0, 401, 4, 8.0, 1.0)
    run = solve_pde(lambda a: 0.0, point_source(g, 1.0), g)
    exact = np.exp(-g.x**2 / 4) / math.sqrt(4 * math.pi)
    col = run.final.n[-1] * g.da
    assert np.max(np.abs(col - exact)) < 1e-3


drives = st.tuples(st.sampled_from([-1, 1]), st.sampled_from([0.0, 0.5, 1.0, 1.6, 2.0]))


@settings(max_examples=12, deadline=None)
@given(drives, st.integers(0, 2**32))
def test_solver_invariants(drive_args, seed):
    sigma, gamma = drive_args
    drive = PowerLawDrive(sigma, gamma)
    g = small_grid(sigma=sigma)
    gen = np.random.default_rng(seed)
    half = gen.random((g.na, g.centre + 1))
    n0 = np.concatenate([half, half[:, -2::-1]], axis=1)
    mass = np.sum(n0 * g.x_weights) * g.da
    run = solve_pde(drive, n0 / mass, g, output_times=[0.05, 0.1])
    for fld in run.fields:
        assert abs(fld.total_mass - 1) <= 1e-3
        assert fld.n.min() >= 0
        assert np.max(np.abs(fld.n - fld.n[:, ::-1])) <= 1e-12
        assert (fld.q == 0.0) if sigma < 0 else (fld.p == 0.0)
    assert run.min_value >= 0
    assert np.all(np.abs(run.curve_mass - 1) <= 1e-3)


def test_support_preserved_for_trapping_drive():
    g = GridSpec(4.0, 41, 0.05, 2.0, 40, 1e-3, 0.3)
    n0 = smooth_initial(g, 0.3, 0.1, 1.0)
    run = solve_pde(PowerLawDrive(-1, 0.5), n0, g, output_times=[0.1, 0.2])
    above = g.a > 1.0
    for fld in run.fields:
        assert np.sum(fld.n[above] * g.x_weights) * g.da <= 1e-12


def test_trapping_fills_lower_atom():
    g = small_grid(t_end=1.0)
    run = solve_pde(TRAP, point_source(g, 1.0), g)
    assert run.final.p > 0.1 and run.final.q == 0.0
    assert np.all(np.diff(run.curve_p) >= 0)


def unit_field(value=1.0):
    g = GridSpec(0.5, 11, 0.1, 1.0, 10, 1e-3, 1.0)
    return DensityField(np.full((g.na, g.nx), value), 0.0, 0.0, 0.0, g)


def test_lp_norm_examples():
    assert lp_norm(unit_field(0.0)) == 0.0
    assert lp_norm(unit_field(1.0), 2) == pytest.approx(1.0, rel=1e-14)
    assert lp_norm(unit_field(3.0), math.inf) == 3.0
    g = small_grid()
    fld = DensityField(smooth_initial(g, 0.4, 0.2, 0.8), 0.1, 0.0, 0.0, g)
    assert lp_norm(fld, 1) == pytest.approx(fld.continuous_mass, rel=1e-14)
    with pytest.raises(ValueError):
        lp_norm(fld, 0.5)


def test_probe_on_zero_series():
    series = [DensityField(unit_field(0.0).n, 0.0, 0.0, t, unit_field().grid) for t in (0.0, 0.5, 1.0)]
    probe = blowup_probe(series, gamma=1.0)
    assert np.all(probe.y_curve == 0)
    assert probe.verdict == "global symptom"
    assert "cannot certify" in probe.note


def test_moment_exponent_defaults():
    m, eta = default_moment_exponent(1.0)
    assert m == 0.25 and eta == pytest.approx(0.125)
    m, eta = default_moment_exponent(0.0)
    assert m == 0.499 and eta == pytest.approx(0.2495)
    assert default_moment_exponent(1.6)[1] is None


def test_probe_flags_constraint_violation():
    series = [DensityField(unit_field(1.0).n, 0.0, 0.0, t, unit_field().grid) for t in (0.0, 1.0)]
    probe = blowup_probe(series, gamma=0.0, M=0.3)
    assert not probe.constraint_ok and probe.y_growth_exponent is None


def bump3(u):
    return np.clip(1 - u * u, 0, None) ** 3


def dbump3(u):
    return 3 * np.clip(1 - u * u, 0, None) ** 2 * (-2 * u)


def a_window(lo, hi):
    c, h = (lo + hi) / 2, (hi - lo) / 2
    return (lambda a: bump3((a - c) / h)), (lambda a: dbump3((a - c) / h) / h)


def test_residual_for_a_only_test_function():
    g = small_grid(t_end=0.3)
    run = solve_pde(lambda a: 0.0, smooth_initial(g, 0.3, 0.2, 0.9), g, output_times=[0.1, 0.2])
    w, dw = a_window(0.2, 0.9)
    tf = TestFunction(lambda x, a: w(a) + 0 * x, lambda x, a: 0 * x * a, lambda x, a: dw(a) + 0 * x)
    assert weak_form_residual(run, [tf], lambda a: 0.0) < 1e-12


def test_residual_away_from_origin_is_small():
    g = GridSpec.for_point_source(1.0, 161, 20, 8.0, 0.5)
    run = solve_pde(lambda a: 0.0, smooth_initial(g, 0.5, 0.2, 0.9), g, output_times=np.linspace(0, 0.5, 51))
    tf = TestFunction(
        lambda x, a: bump3(x - 3.0) + 0 * a,
        lambda x, a: dbump3(x - 3.0) + 0 * a,
        lambda x, a: 0 * x * a,
    )
    assert weak_form_residual(run, [tf], lambda a: 0.0) < 1e-3


def test_residual_of_closed_form_shrinks():
    w, dw = a_window(0.2, 0.95)
    tf = TestFunction(
        lambda x, a: bump3(x / 2) * w(a),
        lambda x, a: dbump3(x / 2) / 2 * w(a),
        lambda x, a: bump3(x / 2) * dw(a),
    )
    res = []
    for k in (1, 2, 4):
        g = GridSpec.for_point_source(1.0, 80 * k + 1, 40 * k, 6.0, 1.0)
        xx, aa = np.meshgrid(g.x, g.a)
        series = [
            DensityField(closed_form_density(TRAP, 1.0, t, xx, aa), 0.0, 0.0, t, g)
            for t in np.linspace(0.25, 1.0, 30 * k + 1)
        ]
        res.append(weak_form_residual(series, [tf], TRAP))
    assert res[0] / res[1] > 1.6 and res[1] / res[2] > 1.6


def test_csv_round_trip(tmp_path):
    g = small_grid()
    run = solve_pde(TRAP, point_source(g, 1.0), g, output_times=[0.1])
    csv_path, json_path = write_run(tmp_path, run)
    back = read_fields_csv(csv_path, g)
    assert len(back) == len(run.fields)
    for arr, fld in zip(back, run.fields):
        assert np.array_equal(arr, fld.n)
    meta = json.loads(json_path.read_text())
    assert meta["scheme"] and meta["grid"]["nx"] == g.nx
    assert meta["snapshots"][-1]["p"] == run.final.p
    assert csv_path.read_text().splitlines()[0] == "t,x,a,n"
