"""Finite-volume solver for the density of ``(X_t, A_t)``.

Away from ``x = 0`` every ``a``-slice follows the heat equation
``n_t = a n_xx``.  On the column ``x = 0`` the flux jump
``a (n_x(0+) - n_x(0-)) = d/da (f(a) n(0, a))`` moves mass along ``a``.

Time stepping is explicit: one heat step per slice (homogeneous Neumann at
``|x| = x_max``), then first-order upwind transport in ``a`` on the centre
column, split into substeps so that no cell loses more than its content.
Mass leaving through the bottom face goes to the atom ``p`` at ``(0, 0)``,
mass leaving through the top face to the atom ``q`` at ``(0, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from ..flow import PowerLawDrive

SCHEME_VERSION = "fv-explicit-upwind/1"

#: Ratio ``dt a_max / dx^2`` allowed by the explicit heat step.
STABILITY_RATIO = 0.4


class StabilityError(ValueError):
    """The time step violates the explicit heat-step bound."""


class NumericalGuardError(ArithmeticError):
    """The solution became non-finite or lost positivity of mass."""


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid: ``nx`` nodes on ``[-x_max, x_max]``, ``na`` on ``[a_min, a_max]``.

    ``nx`` is odd so that ``x = 0`` is a node.  ``dt`` is an upper bound on
    the time step; the solver shrinks it so that ``t_end`` is hit exactly.
    """

    x_max: float
    nx: int
    a_min: float
    a_max: float
    na: int
    dt: float
    t_end: float

    def __post_init__(self):
        if not self.x_max > 0:
            raise ValueError("x_max must be > 0")
        if self.nx < 3 or self.nx % 2 == 0:
            raise ValueError(f"nx must be an odd count >= 3, got {self.nx}")
        if not 0 < self.a_min < self.a_max:
            raise ValueError("need 0 < a_min < a_max")
        if self.na < 2:
            raise ValueError("na must be >= 2")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be > 0")
        if self.dt > self.dt_max:
            raise StabilityError(
                f"dt={self.dt:.6g} exceeds the stability bound 0.4*dx^2/a_max={self.dt_max:.6g}"
            )

    @property
    def dx(self) -> float:
        return 2 * self.x_max / (self.nx - 1)

    @property
    def da(self) -> float:
        return (self.a_max - self.a_min) / (self.na - 1)

    @property
    def dt_max(self) -> float:
        return STABILITY_RATIO * self.dx**2 / self.a_max

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.nx)

    @property
    def a(self) -> np.ndarray:
        return np.linspace(self.a_min, self.a_max, self.na)

    @property
    def x_weights(self) -> np.ndarray:
        w = np.full(self.nx, self.dx)
        w[0] = w[-1] = self.dx / 2
        return w

    @property
    def centre(self) -> int:
        return self.nx // 2

    @classmethod
    def for_point_source(
        cls, a0: float, nx: int, na: int, x_max: float, t_end: float, sigma: int = -1, a_span: float = 4.0
    ) -> "GridSpec":
        """Grid with ``a0`` on a node and the largest stable ``dt``.

        For ``sigma = -1`` the nodes are ``a0 j / na``, ``j = 1..na``.  For
        ``sigma = +1`` they run from ``a0`` to ``a_span * a0``.
        """
        if sigma < 0:
            a_min, a_max = a0 / na, a0
        else:
            a_min, a_max = a0, a_span * a0
        dx = 2 * x_max / (nx - 1)
        return cls(x_max, nx, a_min, a_max, na, STABILITY_RATIO * dx * dx / a_max, t_end)

    def metadata(self) -> dict:
        return {
            "x_max": self.x_max,
            "nx": self.nx,
            "a_min": self.a_min,
            "a_max": self.a_max,
            "na": self.na,
            "dt": self.dt,
            "t_end": self.t_end,
        }


@dataclass
class DensityField:
    """Snapshot of the law: density ``n[j, i]`` at ``(x_i, a_j)`` plus the atoms."""

    n: np.ndarray
    p: float
    q: float
    t: float
    grid: GridSpec

    @property
    def continuous_mass(self) -> float:
        return float(np.sum(self.n * self.grid.x_weights[None, :]) * self.grid.da)

    @property
    def total_mass(self) -> float:
        return self.continuous_mass + self.p + self.q

    @property
    def centre_column(self) -> np.ndarray:
        return self.n[:, self.grid.centre]


@dataclass
class PdeRun:
    """Output of :func:`solve_pde`.

    ``fields`` holds snapshots at the requested output times (the first is
    always the initial datum).  The ``curve_*`` arrays are sampled at
    ``curve_t``.
    """

    grid: GridSpec
    fields: list[DensityField]
    curve_t: np.ndarray
    curve_p: np.ndarray
    curve_q: np.ndarray
    curve_mass: np.ndarray
    curve_l2: np.ndarray
    dt: float
    steps: int
    substeps: int
    min_value: float
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> DensityField:
        return self.fields[-1]


@numba.njit(cache=True)
def _advance(n, out, r, coef, nsub, i0, nsteps):
    """``nsteps`` full steps in place; returns mass sent through (bottom, top)."""
    na, nx = n.shape
    lost_low = 0.0
    lost_high = 0.0
    flux = np.empty(na + 1)
    for _ in range(nsteps):
        for j in range(na):
            rj = r[j]
            out[j, 0] = n[j, 0] + rj * 2.0 * (n[j, 1] - n[j, 0])
            for i in range(1, nx - 1):
                # Symmetric grouping keeps x-symmetric data bit-exactly symmetric.
                out[j, i] = n[j, i] + rj * ((n[j, i + 1] + n[j, i - 1]) - 2.0 * n[j, i])
            out[j, nx - 1] = n[j, nx - 1] + rj * 2.0 * (n[j, nx - 2] - n[j, nx - 1])
        for j in range(na):
            for i in range(nx):
                n[j, i] = out[j, i]
        for _ in range(nsub):
            # Face k sits below cell k; coef[k] is f(face) * dt_sub / (dx da).
            for k in range(na + 1):
                c = coef[k]
                if c > 0.0:
                    flux[k] = c * n[k - 1, i0] if k > 0 else 0.0
                elif c < 0.0:
                    flux[k] = c * n[k, i0] if k < na else 0.0
                else:
                    flux[k] = 0.0
            for j in range(na):
                n[j, i0] += flux[j] - flux[j + 1]
            lost_low -= flux[0]
            lost_high += flux[na]
    return lost_low, lost_high


def _drive_function(f) -> Callable:
    return f.f if isinstance(f, PowerLawDrive) else f


def point_source(grid: GridSpec, a0: float) -> np.ndarray:
    """Unit mass in the single cell at ``(0, a0)``; ``a0`` must be a node."""
    a = grid.a
    j = int(np.argmin(np.abs(a - a0)))
    if not math.isclose(a[j], a0, rel_tol=1e-9):
        raise ValueError(f"a0={a0} is not an a-node of the grid")
    n = np.zeros((grid.na, grid.nx))
    n[j, grid.centre] = 1.0 / (grid.dx * grid.da)
    return n


def smooth_initial(grid: GridSpec, x_width: float, a_lo: float, a_hi: float) -> np.ndarray:
    """Unit-mass ``exp(-x^2/(2 w^2)) * sin^2`` bump supported in ``a_lo < a < a_hi``."""
    x, a = grid.x, grid.a
    gx = np.exp(-0.5 * (x / x_width) ** 2)
    ga = np.where((a > a_lo) & (a < a_hi), np.sin(np.pi * (a - a_lo) / (a_hi - a_lo)) ** 2, 0.0)
    n = np.outer(ga, gx)
    mass = np.sum(n * grid.x_weights[None, :]) * grid.da
    if mass <= 0:
        raise ValueError("the bump has no mass on this grid")
    return n / mass


def solve_pde(
    f,
    initial: np.ndarray,
    grid: GridSpec,
    output_times: Sequence[float] | None = None,
    n_curve: int = 100,
) -> PdeRun:
    """Evolve ``initial`` (shape ``(na, nx)``) up to ``grid.t_end``.

    Parameters
    ----------
    f : PowerLawDrive or callable
        The drive ``f(a)``.
    initial : ndarray
        Nonnegative density on the grid, indexed ``[a, x]``.
    grid : GridSpec
    output_times : sequence of float, optional
        Times at which full snapshots are kept, rounded to the step grid.
        The initial datum and ``t_end`` are always included.
    n_curve : int
        Number of equally spaced samples of the atom, mass and L2 curves.

    Raises
    ------
    NumericalGuardError
        If the density becomes non-finite or the total mass drifts.
    """
    fa = _drive_function(f)
    n = np.array(initial, dtype=float, copy=True)
    if n.shape != (grid.na, grid.nx):
        raise ValueError(f"initial field must have shape {(grid.na, grid.nx)}, got {n.shape}")
    if np.any(n < 0) or not np.all(np.isfinite(n)):
        raise ValueError("initial field must be finite and nonnegative")
    dx, da = grid.dx, grid.da
    steps = int(math.ceil(grid.t_end / grid.dt - 1e-9))
    dt = grid.t_end / steps
    a = grid.a
    faces = np.concatenate([[a[0] - da / 2], a + da / 2])
    faces[0] = max(faces[0], 1e-300)
    f_faces = np.array([float(fa(v)) for v in faces])
    if not np.all(np.isfinite(f_faces)):
        raise NumericalGuardError("drive is not finite on the a-grid faces")
    # Outflow rate of each cell: down through its lower face, up through its upper face.
    out_rate = (np.maximum(-f_faces[:-1], 0.0) + np.maximum(f_faces[1:], 0.0)) / (dx * da)
    nsub = max(1, int(math.ceil(np.max(out_rate) * dt)))
    coef = f_faces * (dt / nsub) / (dx * da)
    r = a * dt / dx**2

    wx = grid.x_weights
    targets = sorted({0} | {int(round(t / dt)) for t in ([] if output_times is None else output_times)} | {steps})
    if targets[-1] > steps:
        raise ValueError("output times must not exceed t_end")
    curve_steps = np.unique(np.round(np.linspace(0, steps, n_curve + 1)).astype(int))
    stops = sorted(set(targets) | set(curve_steps.tolist()))

    p = q = 0.0
    initial_mass = float(np.sum(n * wx[None, :]) * da)
    fields: list[DensityField] = []
    curve = {"t": [], "p": [], "q": [], "mass": [], "l2": []}
    min_value = float(n.min())
    out = np.empty_like(n)
    done = 0
    for stop in stops:
        if stop > done:
            low, high = _advance(n, out, r, coef, nsub, grid.centre, stop - done)
            p += low * dx * da
            q += high * dx * da
            done = stop
            cmass = float(np.sum(n * wx[None, :]) * da)
            if not math.isfinite(cmass) or abs(cmass + p + q - initial_mass) > 1e-6 * max(1.0, initial_mass):
                raise NumericalGuardError(
                    f"mass drift at t={done * dt:.6g}: {cmass + p + q!r} vs {initial_mass!r}"
                )
            min_value = min(min_value, float(n.min()))
        t = done * dt
        if done in targets:
            fields.append(DensityField(n.copy(), p, q, t, grid))
        if done in curve_steps:
            curve["t"].append(t)
            curve["p"].append(p)
            curve["q"].append(q)
            curve["mass"].append(float(np.sum(n * wx[None, :]) * da) + p + q)
            curve["l2"].append(float(np.sqrt(np.sum(n * n * wx[None, :]) * da)))
    return PdeRun(
        grid=grid,
        fields=fields,
        curve_t=np.array(curve["t"]),
        curve_p=np.array(curve["p"]),
        curve_q=np.array(curve["q"]),
        curve_mass=np.array(curve["mass"]),
        curve_l2=np.array(curve["l2"]),
        dt=dt,
        steps=steps,
        substeps=nsub,
        min_value=min_value,
        meta={"scheme": SCHEME_VERSION, **grid.metadata()},
    )
