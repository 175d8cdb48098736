"""Acceptance criteria, each run at its stated tolerance.

Every test appends one ``CRITERION n PASS/FAIL: ...`` line that is printed in
the terminal summary, then asserts.  Criteria that fail for structural
reasons stay failing; see the notes in the assertion messages.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import erf, erfc

import conftest
from lmdiff.brownian import occupation_identity_check, sample_joint_wl, walk_endpoints
from lmdiff.flow import PowerLawDrive
from lmdiff.limits import (
    GeneratorProbe,
    bump,
    generator_check,
    growth_exponent,
    ks_two_sample,
    limit_law_sample,
    rescaled_empirical,
)
from lmdiff.pde import (
    GridSpec,
    absorbed_mass,
    blowup_probe,
    closed_form_density,
    point_source,
    smooth_initial,
    solve_pde,
)
from lmdiff.process import trapped_fraction
from lmdiff.rng import RngStream

pytestmark = pytest.mark.slow


def record(label, ok, detail):
    line = f"CRITERION {label} {'PASS' if ok else 'FAIL'}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_local_time_law():
    start = time.perf_counter()
    n = 100_000
    l = sample_joint_wl(1.0, RngStream(1, 0), n).l
    ref = np.abs(RngStream(1, 1).generator().standard_normal(n))
    rep = ks_two_sample(l, ref)
    elapsed = time.perf_counter() - start
    ok = not rep.rejects() and elapsed < 5
    assert record(1, ok, f"KS={rep.d_statistic:.5f} < crit5%={rep.critical_5pct:.5f}, {elapsed:.2f}s < 5s")


def test_criterion_2_walk_convergence():
    start = time.perf_counter()
    n, m, t = 10_000, 10_000, 1.0
    y, lam = walk_endpoints(n, m, RngStream(2, 0))
    exact = sample_joint_wl(t, RngStream(2, 1), m)
    scale = math.sqrt(t / n)
    ks_w = ks_two_sample(scale * y, exact.w)
    ks_l = ks_two_sample(scale * lam, exact.l)
    elapsed = time.perf_counter() - start
    crit = ks_w.critical(0.01)
    ok = not ks_w.rejects(0.01) and not ks_l.rejects(0.01) and elapsed < 60
    detail = f"KS_w={ks_w.d_statistic:.4f}, KS_l={ks_l.d_statistic:.4f} vs crit1%={crit:.4f}, {elapsed:.1f}s < 60s"
    assert record(2, ok, detail)


def test_criterion_3_occupation_identity():
    grid = np.linspace(-5.0, 5.0, 101)
    value = occupation_identity_check(100_000, grid, RngStream(3))
    assert record(3, abs(value - 1) <= 0.02, f"integral of E^w[L_1] dw = {value:.5f}, target 1 +- 0.02")


def test_criterion_4_survival_transition():
    drive = PowerLawDrive(-1, 0.0)
    m = 100_000
    parts, ok = [], True
    for k, t in enumerate((1.0, 4.0, 100.0)):
        frac, _ = trapped_fraction(drive, 1.0, t, m, RngStream(4, k))
        p = erfc(1 / (1.5 * math.sqrt(t)))
        se = math.sqrt(p * (1 - p) / m)
        ok &= abs(frac - p) <= 3 * se
        parts.append(f"t={t:g}: {frac:.5f} vs {p:.5f} ({abs(frac - p) / se:.2f} se)")
    exact = erf(1 / (1.5 * math.sqrt(1e4)))
    asym = 2 / (1.5 * math.sqrt(math.pi * 1e4))
    rel = abs(exact - asym) / exact
    ok &= rel <= 0.005
    parts.append(f"t=1e4 erf vs asymptotic rel gap {rel:.2e} <= 5e-3")
    assert record(4, ok, "; ".join(parts))


@pytest.fixture(scope="module")
def decel_rescaled():
    drive = PowerLawDrive(-1, 1.75)
    return drive, rescaled_empirical(drive, 1e4, 100_000, RngStream(5, 0))


def test_criterion_5a_derived_limit_law_accepted(decel_rescaled):
    drive, emp = decel_rescaled
    rep = ks_two_sample(emp, limit_law_sample(drive, 100_000, RngStream(5, 1)))
    ok = not rep.rejects()
    detail = (
        f"derived law KS={rep.d_statistic:.4f} vs crit5%={rep.critical_5pct:.4f} at t=1e4"
        + ("" if ok else "; finite-t bias of the rescaled law, see ledger")
    )
    assert record("5a", ok, detail)


def test_criterion_5b_alternative_variants_rejected(decel_rescaled):
    drive, emp = decel_rescaled
    reps = {v: ks_two_sample(emp, limit_law_sample(drive, 100_000, RngStream(5, 2), v)) for v in ("alternative", "alternative-swapped")}
    ok = all(r.rejects() for r in reps.values())
    detail = ", ".join(f"{v} KS={r.d_statistic:.4f}" for v, r in reps.items())
    assert record("5b", ok, f"{detail}; both above crit5%={reps['alternative'].critical_5pct:.4f} (rejected)")


def test_criterion_6_acceleration_growth():
    slope, medians = growth_exponent(PowerLawDrive(1, 0.0), [1e2, 1e3, 1e4], 100_000, RngStream(6))
    ok = abs(slope - 2 / 3) <= 0.03
    assert record(6, ok, f"slope={slope:.4f}, target 2/3 +- 0.03; medians={np.round(medians, 3).tolist()}")


def test_criterion_7_generator_checks():
    drive = PowerLawDrive(1, 1.0)
    zero = lambda x, a: np.zeros_like(np.asarray(x, dtype=float))
    one = lambda x, a: np.ones_like(np.asarray(x, dtype=float))
    probes = {
        "constant": GeneratorProbe(one, zero, zero, bump),
        "x^2": GeneratorProbe(lambda x, a: np.asarray(x) ** 2, lambda x, a: 2 * one(x, a), zero, bump),
        "a": GeneratorProbe(lambda x, a: a * one(x, a), zero, one, bump),
    }
    parts, ok = [], True
    for k, (name, probe) in enumerate(probes.items()):
        res = generator_check(probe, drive, 1.0, RngStream(7, k))
        good = res.lhs == res.rhs if res.rhs == 0 else res.relative_gap <= 0.05
        ok &= good
        parts.append(f"{name}: lhs={res.lhs:.4f} rhs={res.rhs:.4f}")
    assert record(7, ok, "; ".join(parts) + " (5% tolerance, t=1e-3, 1e6 samples)")


TRAP0 = PowerLawDrive(-1, 0.0)


def point_run(drive, nx, na):
    grid = GridSpec.for_point_source(1.0, nx, na, 6.0, 1.0)
    start = time.perf_counter()
    run = solve_pde(drive, point_source(grid, 1.0), grid)
    return run, time.perf_counter() - start


def relative_l1(run, drive):
    g = run.grid
    exact = closed_form_density(drive, 1.0, g.t_end, g.x[None, :], g.a[:, None])
    w = g.x_weights[None, :] * g.da
    return float(np.sum(np.abs(run.final.n - exact) * w) / np.sum(exact * w))


@pytest.fixture(scope="module")
def closed_form_runs():
    return [point_run(TRAP0, 401, 200), point_run(TRAP0, 801, 400)]


def test_criterion_8_pde_vs_closed_form(closed_form_runs):
    (coarse, t_coarse), (fine, t_fine) = closed_form_runs
    e1, e2 = relative_l1(coarse, TRAP0), relative_l1(fine, TRAP0)
    ratio = e1 / e2
    ok = e1 <= 0.05 and 1.6 <= ratio <= 2.4 and t_coarse < 120
    detail = f"L1 401x200={e1:.4f} ({t_coarse:.1f}s), 801x400={e2:.4f} ({t_fine:.1f}s), ratio={ratio:.3f} in [1.6, 2.4]"
    assert record(8, ok, detail)


@pytest.fixture(scope="module")
def dichotomy_runs():
    runs = {}
    for gamma, nx, na, x_max, t_end in ((1.0, 401, 200, 6.0, 1.0), (1.6, 401, 1000, 10.0, 5.0)):
        grid = GridSpec.for_point_source(1.0, nx, na, x_max, t_end)
        times = np.linspace(0, t_end, 51)[1:]
        run = solve_pde(PowerLawDrive(-1, gamma), smooth_initial(grid, 0.2, 0.1, 1.0), grid, output_times=times)
        runs[gamma] = run
    return runs


def test_criterion_9_conservation_and_shape(closed_form_runs, dichotomy_runs):
    runs = [r for r, _ in closed_form_runs] + list(dichotomy_runs.values())
    # One run with room above a0, so the support bound is not enforced by the grid.
    grid = GridSpec(4.0, 81, 0.02, 2.0, 100, 1e-3, 0.5)
    support_run = solve_pde(PowerLawDrive(-1, 0.5), smooth_initial(grid, 0.3, 0.1, 1.0), grid, output_times=[0.25])
    runs.append(support_run)
    mass = max(np.max(np.abs(r.curve_mass - 1)) for r in runs)
    low = min(r.min_value for r in runs)
    sym = max(np.max(np.abs(f.n - f.n[:, ::-1])) for r in runs for f in r.fields)
    above = support_run.grid.a > 1.0
    spill = max(np.sum(f.n[above] * grid.x_weights) * grid.da for f in support_run.fields)
    ok = mass <= 1e-3 and low >= 0 and sym <= 1e-12 and spill <= 1e-12
    detail = f"max|mass-1|={mass:.2e}, min n={low:.2e}, symmetry={sym:.2e}, mass above a0={spill:.2e} over {len(runs)} runs"
    assert record(9, ok, detail)


def test_criterion_10a_blowup_side(dichotomy_runs):
    probe = blowup_probe(dichotomy_runs[1.0], 1.0)
    p_ok = probe.p_curve[-1] > 1e-2
    ok = p_ok and probe.y_superlinear
    detail = (
        f"gamma=1: p(1)={probe.p_curve[-1]:.4f} > 1e-2 {'ok' if p_ok else 'no'}; "
        f"Y super-linear: {probe.y_superlinear} (Y(0)={probe.y_curve[0]:.4f}, Y(1)={probe.y_curve[-1]:.4f}); "
        f"verdict '{probe.verdict}'; {probe.note}"
    )
    assert record("10a", ok, detail)


def test_criterion_10b_global_side(dichotomy_runs):
    probe = blowup_probe(dichotomy_runs[1.6], 1.6)
    l2_ratio = float(probe.l2_curve.max() / probe.l2_curve[0])
    ok = probe.p_curve.max() < 1e-6 and l2_ratio <= 2
    detail = (
        f"gamma=1.6: max p={probe.p_curve.max():.2e} < 1e-6, sup L2/L2(0)={l2_ratio:.4f} <= 2; "
        f"verdict '{probe.verdict}'; {probe.note}"
    )
    assert record("10b", ok, detail)


def test_criterion_11_absorbed_mass_reconciliation():
    parts, ok = [], True
    for k, gamma in enumerate((0.0, 0.5, 1.0)):
        drive = PowerLawDrive(-1, gamma)
        run, _ = point_run(drive, 1001, 500)
        p_pde = run.final.p
        p_mc, _ = trapped_fraction(drive, 1.0, 1.0, 10_000_000, RngStream(11, k))
        p_exact = absorbed_mass(drive, 1.0, 1.0)
        values = (p_pde, p_mc, p_exact)
        gap = max(abs(u - v) / max(u, v) for u in values for v in values)
        ok &= gap <= 0.03
        parts.append(f"gamma={gamma:g}: pde={p_pde:.4f} mc={p_mc:.4f} erfc={p_exact:.4f} (max gap {gap:.2%})")
    literal = absorbed_mass(TRAP0, 1.0, 10.0, time_integrated=True)
    ok &= literal > 1
    parts.append(f"time-integrated form at t=10: {literal:.3f} > 1")
    assert record(11, ok, "; ".join(parts))
