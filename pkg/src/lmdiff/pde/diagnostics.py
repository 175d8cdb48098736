"""Norms, blow-up symptoms and weak-form residuals of solver output."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .solver import DensityField, PdeRun, _drive_function

#: Atom mass above which a run shows the absorption symptom.
P_THRESHOLD = 1e-6


def lp_norm(field: DensityField, p: float = 2.0) -> float:
    """``(sum |n|^p dx da)^(1/p)`` over the grid, atoms excluded."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    g = field.grid
    w = g.x_weights[None, :] * g.da
    if math.isinf(p):
        return float(np.max(np.abs(field.n)))
    return float(np.sum(np.abs(field.n) ** p * w) ** (1.0 / p))


def default_moment_exponent(gamma: float) -> tuple[float, float | None]:
    """Default ``(M, eta)`` for the moment ``Y(t) = int a^M n(t, 0, a) da``.

    ``M = max(0.56 - gamma, 0.25)`` clipped into ``(0, 1/2)`` and
    ``eta = min(3/2 - gamma, M/2)``; ``eta`` is ``None`` when it is not positive.
    """
    m = min(max(0.56 - gamma, 0.25), 0.499)
    eta = min(1.5 - gamma, m / 2)
    return m, (eta if eta > 0 else None)


@dataclass
class BlowupProbe:
    """Raw curves and the resulting desk-scale verdict.

    The verdict is a symptom check on a finite grid, not a proof of blow-up
    or of global existence for the continuum equation.
    """

    M: float
    eta: float | None
    constraint_ok: bool
    t: np.ndarray
    y_curve: np.ndarray
    l1_curve: np.ndarray
    l2_curve: np.ndarray
    p_curve: np.ndarray
    y_growth_exponent: float | None
    y_superlinear: bool
    verdict: str
    note: str = "finite-grid symptom check; it cannot certify continuum blow-up or global existence"


def moment_curve(fields: Sequence[DensityField], M: float) -> np.ndarray:
    """``Y(t) = sum_j a_j^M n(t, 0, a_j) da`` for each snapshot."""
    return np.array([float(np.sum(f.grid.a**M * f.centre_column) * f.grid.da) for f in fields])


def _growth_exponent(t: np.ndarray, y: np.ndarray) -> float | None:
    """Log-log slope of ``Y(t) - Y(0)`` over the snapshots where it is positive."""
    rise = y - y[0]
    keep = (t > 0) & (rise > 0)
    if keep.sum() < 3:
        return None
    return float(np.polyfit(np.log(t[keep]), np.log(rise[keep]), 1)[0])


def blowup_probe(series: Sequence[DensityField] | PdeRun, gamma: float, M: float | None = None) -> BlowupProbe:
    """Track ``Y(t)``, ``L^1``, ``L^2`` and ``p(t)`` and classify the run.

    Blow-up symptom: ``p`` exceeds ``1e-6`` or ``Y`` grows super-linearly.
    Global symptom: ``p`` stays below ``1e-6`` and ``sup L^2 <= 2 L^2(0)``.
    If ``M - 1/2 + gamma <= 0`` the moment is still reported but flagged,
    and only the ``p`` and ``L^2`` symptoms are used.
    """
    fields = list(series.fields if isinstance(series, PdeRun) else series)
    if not fields:
        raise ValueError("empty series")
    m_default, eta = default_moment_exponent(gamma)
    M = m_default if M is None else float(M)
    if not 0 < M < 0.5:
        raise ValueError("M must lie in (0, 1/2)")
    constraint_ok = M - 0.5 + gamma > 0
    t = np.array([f.t for f in fields])
    y = moment_curve(fields, M)
    l1 = np.array([lp_norm(f, 1) for f in fields])
    l2 = np.array([lp_norm(f, 2) for f in fields])
    p = np.array([f.p for f in fields])
    slope = _growth_exponent(t, y) if constraint_ok else None
    superlinear = bool(slope is not None and slope > 1 and y[-1] > y[0])
    if p.max() > P_THRESHOLD or superlinear:
        verdict = "blow-up symptom"
    elif l2.max() <= 2 * l2[0]:
        verdict = "global symptom"
    else:
        verdict = "inconclusive"
    return BlowupProbe(M, eta, constraint_ok, t, y, l1, l2, p, slope, superlinear, verdict)


@dataclass(frozen=True)
class TestFunction:
    """Smooth ``phi(x, a)`` with partial derivatives, vectorised over arrays.

    It should vanish near ``|x| = x_max`` and near ``a = a_min``.
    """

    phi: Callable
    phi_x: Callable
    phi_a: Callable

    __test__ = False  # not a pytest class


def _trapezoid(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid, starting at 0."""
    out = np.zeros_like(values)
    out[1:] = np.cumsum((values[1:] + values[:-1]) / 2 * np.diff(t))
    return out


def weak_form_residuals(series: Sequence[DensityField] | PdeRun, tests: Sequence[TestFunction], f) -> np.ndarray:
    """Residuals of the weak formulation, shape ``(len(tests), len(series))``.

    For snapshot ``u(t)`` and test function ``phi`` the residual is

        <u(t), phi> - <u(0), phi> + int_0^t <a u_x, phi_x> ds
            - int_0^t int f(a) u(s, 0, a) phi_a(0, a) da ds,

    with grid quadrature in ``(x, a)`` and the trapezoid rule over the
    snapshot times.  The first snapshot is taken as ``u(0)``.
    """
    fields = list(series.fields if isinstance(series, PdeRun) else series)
    if len(fields) < 2:
        raise ValueError("need at least two snapshots")
    g = fields[0].grid
    fa = _drive_function(f)
    x, a = g.x[None, :], g.a[:, None]
    w = g.x_weights[None, :] * g.da
    t = np.array([fld.t for fld in fields])
    f_a = np.array([float(fa(v)) for v in g.a])
    out = np.empty((len(tests), len(fields)))
    for k, test in enumerate(tests):
        phi = np.broadcast_to(test.phi(x, a), (g.na, g.nx))
        phi_x = np.broadcast_to(test.phi_x(x, a), (g.na, g.nx))
        phi_a0 = np.broadcast_to(test.phi_a(np.zeros_like(g.a), g.a), (g.na,))
        pairing = np.array([np.sum(fld.n * phi * w) for fld in fields])
        diffusion = np.array([np.sum(g.a[:, None] * np.gradient(fld.n, g.dx, axis=1) * phi_x * w) for fld in fields])
        transport = np.array([np.sum(f_a * fld.centre_column * phi_a0) * g.da for fld in fields])
        out[k] = pairing - pairing[0] + _trapezoid(diffusion, t) - _trapezoid(transport, t)
    return out


def weak_form_residual(series: Sequence[DensityField] | PdeRun, tests: Sequence[TestFunction], f) -> float:
    """Maximum absolute weak-form residual over test functions and times."""
    return float(np.max(np.abs(weak_form_residuals(series, tests, f))))
