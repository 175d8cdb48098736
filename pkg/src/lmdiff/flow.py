"""Deterministic flows driven by local time.

The diffusivity of the particle is ``A_t = Phi_{A_0}(L_t)`` where ``L`` is the
Brownian local time at the origin and ``Phi`` is the flow of

    y' = f(y) / sqrt(2 y)                         (canonical, ``mode="sde"``)

For ``f(a) = sigma * a**gamma`` the flow is explicit.  The variant
``y' = f(y)`` (``mode="literal"``) is kept for reproducing the discrete
scheme exactly as it is usually written down.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

#: Relative guards defining a numerically exhausted flow.
GUARD_LOW = 1e-12
GUARD_HIGH = 1e12
#: Relative level below which a collapsed integration step counts as a low exit.
STALL_LOW = 1e-6

SQRT2 = math.sqrt(2.0)


class FlowError(ArithmeticError):
    """Raised when the drive returns a non-finite value."""


class FlowStatus(enum.Enum):
    ALIVE = "alive"
    EXHAUSTED_LOW = "exhausted-low"
    EXHAUSTED_HIGH = "exhausted-high"


@dataclass(frozen=True)
class PowerLawDrive:
    """``f(a) = sigma * a**gamma``.

    ``sigma = 0`` is accepted as the degenerate drive ``f = 0`` (the
    diffusivity never changes).
    """

    sigma: int
    gamma: float

    def __post_init__(self):
        if self.sigma not in (-1, 0, 1):
            raise ValueError(f"sigma must be -1, 0 or +1, got {self.sigma!r}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a finite number >= 0, got {self.gamma!r}")

    def f(self, a):
        """Evaluate the drive; works on scalars and arrays."""
        if self.sigma == 0:
            return np.zeros_like(np.asarray(a, dtype=float))[()]
        return self.sigma * np.power(a, self.gamma)

    __call__ = f

    @property
    def exponent(self) -> float:
        """``3/2 - gamma``, the exponent of the explicit flow."""
        return 1.5 - self.gamma

    @property
    def finite_tau(self) -> bool:
        """True when the flow leaves ``(0, inf)`` at finite local time."""
        return self.sigma * self.exponent < 0

    def sde_rate(self, a):
        """Right-hand side of the canonical flow, ``f(a)/sqrt(2a)``."""
        return self.f(a) / np.sqrt(2.0 * np.asarray(a, dtype=float))

    def blowup_threshold(self, a0: float = 1.0) -> float:
        return blowup_threshold(self, a0)


@dataclass(frozen=True)
class FlowResult:
    value: float
    status: FlowStatus = FlowStatus.ALIVE
    #: Local time (or Euler step index) at which the flow left ``(0, inf)``.
    exit_at: float | None = None

    @property
    def alive(self) -> bool:
        return self.status is FlowStatus.ALIVE


def _check_a0(a0):
    if not a0 > 0:
        raise ValueError(f"initial diffusivity must be > 0, got {a0!r}")


def blowup_threshold(drive: PowerLawDrive, a0: float = 1.0) -> float:
    """Local time ``l*`` at which the explicit flow leaves ``(0, inf)``.

    Returns ``inf`` when ``sigma*(3/2 - gamma) >= 0``.
    """
    _check_a0(a0)
    if drive.sigma == 0 or not drive.finite_tau:
        return math.inf
    s = drive.exponent
    return SQRT2 * a0**s / (drive.sigma * (drive.gamma - 1.5))


def power_flow(drive: PowerLawDrive, a0: float, l) -> np.ndarray:
    """Vectorised explicit flow ``Phi_{a0}(l)``.

    Exits are encoded in the returned values: ``0.0`` once the flow is
    exhausted at 0 and ``inf`` once it has diverged.
    """
    _check_a0(a0)
    l = np.asarray(l, dtype=float)
    if np.any(l < 0):
        raise ValueError("local time must be nonnegative")
    if drive.sigma == 0:
        return np.full(l.shape, float(a0))[()]
    s = drive.exponent
    if s == 0.0:
        return (a0 * np.exp(drive.sigma * l / SQRT2))[()]
    base = a0**s + drive.sigma * s * l / SQRT2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(base > 0, np.power(np.where(base > 0, base, 1.0), 1.0 / s), 0.0)
    if drive.finite_tau:
        exit_value = 0.0 if drive.sigma < 0 else math.inf
        out = np.where(l >= blowup_threshold(drive, a0), exit_value, out)
    return out[()]


def phi_power(drive: PowerLawDrive, a0: float, l: float) -> FlowResult:
    """Explicit flow for a power-law drive at a single local time ``l``.

    Examples
    --------
    >>> round(phi_power(PowerLawDrive(1, 1.5), 1.0, math.sqrt(2)).value, 7)
    2.7182818
    """
    _check_a0(a0)
    if l < 0:
        raise ValueError("local time must be nonnegative")
    l_star = blowup_threshold(drive, a0)
    if l >= l_star:
        if drive.sigma < 0:
            return FlowResult(0.0, FlowStatus.EXHAUSTED_LOW, l_star)
        return FlowResult(math.inf, FlowStatus.EXHAUSTED_HIGH, l_star)
    return FlowResult(float(power_flow(drive, a0, l)))


def _rhs_factory(f: Callable[[float], float], mode: str, floor: float):
    if mode not in ("sde", "literal"):
        raise ValueError(f"mode must be 'sde' or 'literal', got {mode!r}")

    def rhs(_l, y):
        # RK stages may probe past the lower guard; the event stops us before that matters.
        a = max(float(y[0]), floor)
        fa = float(f(a))
        if not math.isfinite(fa):
            raise FlowError(f"drive returned {fa!r} at a={a!r}")
        return [fa / math.sqrt(2.0 * a) if mode == "sde" else fa]

    return rhs


def flow_general(
    f: Callable[[float], float],
    a0: float,
    l: float,
    tol: float = 1e-10,
    mode: str = "sde",
) -> FlowResult:
    """Integrate the flow of an arbitrary drive over local time ``[0, l]``.

    Uses an adaptive 8th-order Dormand-Prince integrator with relative
    tolerance ``tol``.  The flow counts as exhausted once it drops below
    ``1e-12 * a0`` or exceeds ``1e12 * a0``.
    """
    _check_a0(a0)
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if l < 0:
        raise ValueError("local time must be nonnegative")
    if l == 0:
        return FlowResult(float(a0))
    lo, hi = GUARD_LOW * a0, GUARD_HIGH * a0
    rhs = _rhs_factory(f, mode, 0.5 * lo)

    def hit_low(_l, y):
        return y[0] - lo

    def hit_high(_l, y):
        return y[0] - hi

    hit_low.terminal = hit_high.terminal = True
    sol = solve_ivp(
        rhs,
        (0.0, float(l)),
        [float(a0)],
        method="DOP853",
        rtol=tol,
        atol=tol * lo,
        events=(hit_low, hit_high),
    )
    if sol.status == -1:
        # A drive that stays finite at 0 makes the sde rate singular there; the
        # step size then collapses just above the guard.  Count that as an exit.
        y_end = float(sol.y[0, -1])
        if y_end < STALL_LOW * a0:
            return FlowResult(0.0, FlowStatus.EXHAUSTED_LOW, float(sol.t[-1]))
        if y_end > STALL_LOW * hi:
            return FlowResult(math.inf, FlowStatus.EXHAUSTED_HIGH, float(sol.t[-1]))
        raise FlowError(f"integration failed: {sol.message}")
    if sol.t_events[0].size:
        return FlowResult(0.0, FlowStatus.EXHAUSTED_LOW, float(sol.t_events[0][0]))
    if sol.t_events[1].size:
        return FlowResult(math.inf, FlowStatus.EXHAUSTED_HIGH, float(sol.t_events[1][0]))
    return FlowResult(float(sol.y[0, -1]))


def euler_path(
    f: Callable[[float], float],
    delta: float,
    n_steps: int,
    y0: float,
) -> tuple[np.ndarray, FlowStatus]:
    """Euler iterates ``y_{k+1} = y_k + delta * f(y_k)`` up to an exit.

    Returns the alive iterates ``y_0 .. y_K`` and the status after them;
    when the status is not alive, step ``K + 1`` is the one that left the
    guard band ``(1e-12 y0, 1e12 y0)``.
    """
    _check_a0(y0)
    if not delta > 0:
        raise ValueError("delta must be > 0")
    lo, hi = GUARD_LOW * y0, GUARD_HIGH * y0
    ys = [float(y0)]
    y = float(y0)
    for _ in range(int(n_steps)):
        y = y + delta * float(f(y))
        if not y > lo:
            return np.asarray(ys), FlowStatus.EXHAUSTED_LOW
        if not y < hi:
            return np.asarray(ys), FlowStatus.EXHAUSTED_HIGH
        ys.append(y)
    return np.asarray(ys), FlowStatus.ALIVE


def euler_flow(f: Callable[[float], float], delta: float, n_steps: int, y0: float) -> FlowResult:
    """Final Euler iterate, or the exit side and step if the band was left."""
    ys, status = euler_path(f, delta, n_steps, y0)
    if status is FlowStatus.ALIVE:
        return FlowResult(float(ys[-1]))
    value = 0.0 if status is FlowStatus.EXHAUSTED_LOW else math.inf
    return FlowResult(value, status, float(len(ys)))
