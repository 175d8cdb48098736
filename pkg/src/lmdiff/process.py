"""Samplers for the coupled process ``(X_t, A_t)``.

Started from ``X_0 = 0`` the process factorises as ``X_t = sqrt(2 A_t) W_t``
with ``A_t = Phi_{a0}(L_t)``, so one exact draw of ``(W_t, L_t)`` gives an
exact draw of the pair.  The particle is absorbed at ``(0, 0)`` (trapped) or
``(0, inf)`` (exploded) as soon as ``L_t`` reaches the flow's exit time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .brownian import (
    discrete_local_time,
    joint_wl_from,
    sample_joint_wl,
    sample_walk,
    walk_endpoints,
    walk_from_increments,
)
from .flow import FlowStatus, PowerLawDrive, blowup_threshold, euler_path, power_flow
from .rng import RngLike, as_generator

Drive = Union[PowerLawDrive, Callable[[float], float]]


class Status(enum.IntEnum):
    ALIVE = 0
    TRAPPED = 1
    EXPLODED = 2


@dataclass(frozen=True)
class ProcessPoint:
    x: float
    a: float
    status: Status
    t: float

    def __post_init__(self):
        if self.status is Status.TRAPPED and (self.x, self.a) != (0.0, 0.0):
            raise ValueError("a trapped point sits at (0, 0)")
        if self.status is Status.EXPLODED and not (self.x == 0.0 and self.a == math.inf):
            raise ValueError("an exploded point sits at (0, inf)")
        if self.status is Status.ALIVE and not 0 < self.a < math.inf:
            raise ValueError("an alive point has a in (0, inf)")


@dataclass(frozen=True)
class ProcessEnsemble:
    """Many independent draws at the same time ``t``.

    ``status`` holds :class:`Status` codes.  ``acceptance_rate`` is set by
    samplers that use rejection.
    """

    x: np.ndarray
    a: np.ndarray
    status: np.ndarray
    t: float
    acceptance_rate: float | None = None

    def __len__(self):
        return int(self.x.size)

    def __getitem__(self, i) -> ProcessPoint:
        return ProcessPoint(float(self.x[i]), float(self.a[i]), Status(int(self.status[i])), self.t)

    @property
    def trapped_fraction(self) -> float:
        return float(np.mean(self.status == Status.TRAPPED)) if len(self) else math.nan

    @property
    def alive(self) -> np.ndarray:
        return self.status == Status.ALIVE


def _absorb(drive: PowerLawDrive) -> Status:
    return Status.TRAPPED if drive.sigma < 0 else Status.EXPLODED


def _from_wl(drive: PowerLawDrive, a0: float, w, l):
    """Map draws of ``(W, L)`` to ``(X, A, status)``."""
    w = np.asarray(w, dtype=float)
    a = np.asarray(power_flow(drive, a0, l), dtype=float)
    dead = np.asarray(l) >= blowup_threshold(drive, a0)
    status = np.where(dead, int(_absorb(drive)), int(Status.ALIVE)).astype(np.int8)
    x = np.where(dead, 0.0, np.sqrt(2.0 * np.where(dead, 1.0, a)) * w)
    return x, a, status


def sample_exact(drive: PowerLawDrive, a0: float, t: float, rng: RngLike, size: int | None = None):
    """Exact draw of ``(X_t, A_t)`` from ``(0, a0)``.

    Parameters
    ----------
    drive : PowerLawDrive
    a0 : float
        Initial diffusivity.
    t : float
        Horizon.
    rng : RngLike
    size : int, optional
        Ensemble size; ``None`` returns a single :class:`ProcessPoint`.
    """
    if not a0 > 0:
        raise ValueError("a0 must be > 0")
    joint = sample_joint_wl(t, rng, size)
    x, a, status = _from_wl(drive, a0, joint.w, joint.l)
    if size is None:
        return ProcessPoint(float(x), float(a), Status(int(status)), float(t))
    return ProcessEnsemble(x, a, status, float(t))


def trapped_fraction(
    drive: PowerLawDrive, a0: float, t: float, m: int, rng: RngLike, chunk: int = 1_000_000
) -> tuple[float, float]:
    """Monte Carlo fraction of absorbed paths at ``t`` and its binomial error."""
    gen = as_generator(rng)
    l_star = blowup_threshold(drive, a0)
    hits = 0
    done = 0
    while done < m:
        k = min(chunk, m - done)
        hits += int(np.count_nonzero(sample_joint_wl(t, gen, k).l >= l_star))
        done += k
    frac = hits / m
    return frac, math.sqrt(frac * (1 - frac) / m)


def _rate(drive: Drive, mode: str) -> Callable[[float], float]:
    f = drive.f if isinstance(drive, PowerLawDrive) else drive
    if mode == "sde":
        return lambda a: float(f(a)) / math.sqrt(2.0 * a)
    if mode == "literal":
        return lambda a: float(f(a))
    raise ValueError(f"mode must be 'sde' or 'literal', got {mode!r}")


@dataclass(frozen=True)
class DiscreteTrajectory:
    """One path of the discrete scheme on the grid ``k t / n``.

    ``xs[k] = sqrt(2 as_[k] t / n) * ys[k]`` while alive.  After absorption
    ``xs`` is 0, ``as_`` is 0 or ``inf`` and ``status`` records the side.
    """

    xs: np.ndarray
    as_: np.ndarray
    ys: np.ndarray
    status: np.ndarray
    t: float
    n: int
    mode: str

    @property
    def final(self) -> ProcessPoint:
        return ProcessPoint(float(self.xs[-1]), float(self.as_[-1]), Status(int(self.status[-1])), self.t)


def _euler_levels(drive: Drive, a0: float, t: float, n: int, mode: str, max_zeros: int):
    """Diffusivity after ``j`` zeros, ``j = 0..K``, plus the exit status after ``K``."""
    levels, status = euler_path(_rate(drive, mode), math.sqrt(t / n), max_zeros, a0)
    return levels, status


def simulate_discrete(
    drive: Drive,
    a0: float,
    t: float,
    n: int,
    rng: RngLike,
    mode: str = "sde",
    increments=None,
) -> DiscreteTrajectory:
    """Run the random-walk scheme for one path.

    The walk ``Y`` moves ``+-1`` each step; at every return to 0 the
    diffusivity takes one Euler step of length ``sqrt(t/n)``, with rate
    ``f(a)/sqrt(2a)`` in ``mode="sde"`` and ``f(a)`` in ``mode="literal"``.

    Parameters
    ----------
    increments : sequence of +-1, optional
        Use these steps instead of drawing from ``rng``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (a0 > 0 and t > 0):
        raise ValueError("a0 and t must be > 0")
    path = sample_walk(n, rng) if increments is None else walk_from_increments(increments)
    if path.n_steps != n:
        raise ValueError("increments must have length n")
    lam = discrete_local_time(path).lambda_
    levels, exit_status = _euler_levels(drive, a0, t, n, mode, int(lam[-1]))
    alive = lam < levels.size
    as_ = np.empty(n + 1)
    as_[alive] = levels[lam[alive]]
    status = np.zeros(n + 1, dtype=np.int8)
    if not alive.all():
        trapped = exit_status is FlowStatus.EXHAUSTED_LOW
        as_[~alive] = 0.0 if trapped else math.inf
        status[~alive] = int(Status.TRAPPED if trapped else Status.EXPLODED)
    xs = np.where(alive, np.sqrt(2.0 * np.where(alive, as_, 0.0) * t / n) * path.positions, 0.0)
    return DiscreteTrajectory(xs, as_, path.positions, status, float(t), int(n), mode)


def simulate_discrete_terminal(
    drive: Drive, a0: float, t: float, n: int, m: int, rng: RngLike, mode: str = "sde"
) -> ProcessEnsemble:
    """Terminal states of ``m`` independent discrete-scheme paths.

    The diffusivity after ``n`` steps depends on the path only through the
    number of zeros, so only ``(Y_n, Lambda_n)`` is simulated.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    y, lam = walk_endpoints(n, m, rng)
    top = int(lam.max()) if m else 0
    levels, exit_status = _euler_levels(drive, a0, t, n, mode, top)
    alive = lam < levels.size
    a = np.where(alive, levels[np.minimum(lam, levels.size - 1)], 0.0)
    status = np.zeros(m, dtype=np.int8)
    if not alive.all():
        trapped = exit_status is FlowStatus.EXHAUSTED_LOW
        a[~alive] = 0.0 if trapped else math.inf
        status[~alive] = int(Status.TRAPPED if trapped else Status.EXPLODED)
    x = np.where(alive, np.sqrt(2.0 * np.where(alive, a, 0.0) * t / n) * y, 0.0)
    return ProcessEnsemble(x, a, status, float(t))


def sample_from_general_start(
    drive: PowerLawDrive, x0, a0: float, t: float, rng: RngLike, size: int | None = None
):
    """Exact draw of ``(X_t, A_t)`` from ``(x0, a0)`` with ``x0 != 0``.

    Before the first visit to 0 the diffusivity is frozen at ``a0`` and
    ``X = x0 + sqrt(2 a0) W``.  The visit happens at
    ``zeta = x0^2 / (2 a0 N^2)``; if ``zeta >= t`` the position is drawn from
    the killed Gaussian by rejection, otherwise the exact sampler restarts
    from the origin for the remaining time.

    ``x0`` may be an array of length ``size``.  The returned ensemble carries
    the empirical acceptance rate of the rejection step, whose expectation is
    ``erf(|x0| / sqrt(4 a0 t))``.
    """
    if np.any(np.asarray(x0) == 0):
        raise ValueError("x0 = 0: use sample_exact")
    if not (a0 > 0 and t > 0):
        raise ValueError("a0 and t must be > 0")
    scale = math.sqrt(2.0 * a0)
    joint, rate = joint_wl_from(np.asarray(x0, dtype=float) / scale, t, rng, 1 if size is None else size)
    x, a, status = _from_wl(drive, a0, joint.w, joint.l)
    if size is None:
        return ProcessPoint(float(x[0]), float(a[0]), Status(int(status[0])), float(t))
    return ProcessEnsemble(x, a, status, float(t), rate)


def survival_probability(drive: PowerLawDrive, t, a0: float = 1.0):
    """Probability that the particle started at ``(0, a0)`` is not trapped by ``t``.

    Equals ``erf(a0^s / (s sqrt(t)))`` with ``s = 3/2 - gamma``; for large
    ``t`` it decays like ``2 a0^s / (s sqrt(pi t))``.
    """
    from scipy.special import erf

    if drive.sigma != -1:
        raise ValueError("survival probability is defined for sigma = -1")
    if drive.gamma >= 1.5:
        raise ValueError("gamma >= 3/2: the particle is never trapped, survival is 1")
    s = drive.exponent
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be > 0")
    return erf(a0**s / (s * np.sqrt(t)))[()]


class Regime(str, enum.Enum):
    TRAPPED_FINITE_TIME = "trapped-finite-time"
    DECAYS_NEVER_TRAPPED = "decays-never-trapped"
    RECURRENT = "recurrent"
    EXPLODES_X_TO_0 = "explodes-x-to-0"
    EXPLODES_OSCILLATING = "explodes-oscillating"
    GROWS_FOREVER = "grows-forever"


@dataclass(frozen=True)
class RegimeReport:
    drive: PowerLawDrive
    regime: Regime
    tau_finite: bool
    rate_exponent: float | None


def limit_law_applies(drive: PowerLawDrive) -> bool:
    """Whether the rescaled limit laws cover this drive."""
    return (drive.sigma == -1 and drive.gamma > 1.5) or (drive.sigma == 1 and drive.gamma < 1)


def classify_regime(drive: PowerLawDrive) -> RegimeReport:
    """Long-time behaviour of the process as a function of ``(sigma, gamma)``."""
    g = drive.gamma
    if drive.sigma == 0:
        raise ValueError("a zero drive has no regime")
    if drive.sigma == -1:
        regime = (
            Regime.TRAPPED_FINITE_TIME if g < 1.5 else Regime.DECAYS_NEVER_TRAPPED if g < 2 else Regime.RECURRENT
        )
    else:
        regime = Regime.EXPLODES_X_TO_0 if g >= 2 else Regime.EXPLODES_OSCILLATING if g > 1.5 else Regime.GROWS_FOREVER
    rate = (2 - g) / (3 - 2 * g) if limit_law_applies(drive) else None
    return RegimeReport(drive, regime, drive.finite_tau, rate)
