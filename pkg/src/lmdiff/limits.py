"""Rescaled limit laws, two-sample KS tests and weak generator checks.

Starting from 0 the process satisfies, in distribution,

    X_t = sqrt(2) (a0^s + sigma s sqrt(t/2) L_1)^(1/(2s)) sqrt(t) W_1,   s = 3/2 - gamma,

so ``t^((gamma-2)/(3-2 gamma)) X_t`` converges to ``C L_1^(1/(3-2 gamma)) W_1``
with ``C = 2^((1-gamma)/(3-2 gamma)) |gamma - 3/2|^(1/(3-2 gamma))`` whenever the
bracket grows without bound.  The same law describes the process a time ``u``
before it is absorbed, with ``u`` in place of ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from scipy.integrate import quad

from .brownian import joint_wl_from, sample_joint_wl
from .flow import FlowStatus, PowerLawDrive, euler_path
from .process import _rate, sample_exact, sample_from_general_start
from .rng import RngLike, as_generator

VARIANTS = ("derived", "alternative", "alternative-swapped")


@dataclass(frozen=True)
class LimitLaw:
    """The law of ``constant * L_1**l_exponent * W_1``.

    ``variant`` is ``"derived"`` for the law that follows from the product
    representation.  The other two use the competing constant
    ``2^((1-gamma)/(3-2 gamma)) |gamma-3/2|^(1/(2(3-2 gamma)))``:
    ``"alternative"`` pairs it with the exponent ``1/(2(3-2 gamma))`` when
    ``sigma=-1`` and ``1/(3-2 gamma)`` when ``sigma=+1``, and
    ``"alternative-swapped"`` uses the other exponent.

    The joint density of ``(W_1, L_1)`` stays positive as ``l -> 0``, so the
    derived law has a finite first absolute moment exactly when
    ``l_exponent > -1``: always for ``sigma=+1, gamma<1`` and for
    ``sigma=-1`` only when ``gamma > 2``.
    """

    constant: float
    l_exponent: float
    time_exponent: float
    drive: PowerLawDrive
    variant: str = "derived"
    reversed: bool = False

    def sample(self, m: int, rng: RngLike) -> np.ndarray:
        if m == 0:
            return np.empty(0)
        joint = sample_joint_wl(1.0, rng, m)
        return self.constant * joint.l**self.l_exponent * joint.w


def _check_regime(drive: PowerLawDrive, reversed: bool):
    g = drive.gamma
    if reversed:
        if not drive.finite_tau:
            raise ValueError(
                f"sigma={drive.sigma}, gamma={g}: the absorption time is infinite "
                "(needs sigma=-1 with gamma<3/2 or sigma=+1 with gamma>3/2)"
            )
    elif not ((drive.sigma == -1 and g > 1.5) or (drive.sigma == 1 and g < 1)):
        raise ValueError(
            f"sigma={drive.sigma}, gamma={g}: the rescaled limit law needs sigma=-1 with gamma>3/2 "
            "or sigma=+1 with gamma<1"
        )


def limit_law(drive: PowerLawDrive, variant: str = "derived", reversed: bool = False) -> LimitLaw:
    """Build the limit law for ``drive``.

    Examples
    --------
    >>> law = limit_law(PowerLawDrive(-1, 2.0))
    >>> law.constant, law.l_exponent
    (4.0, -1.0)
    """
    _check_regime(drive, reversed)
    g = drive.gamma
    d = 3 - 2 * g
    base = 2 ** ((1 - g) / d)
    gap = abs(g - 1.5)
    if variant == "derived":
        constant, p = base * gap ** (1 / d), 1 / d
    elif variant in ("alternative", "alternative-swapped"):
        constant = base * gap ** (1 / (2 * d))
        # Halved exponent on the trapping side, full on the explosion side.
        halved = drive.sigma == -1
        if variant == "alternative-swapped":
            halved = not halved
        p = 1 / (2 * d) if halved else 1 / d
    else:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return LimitLaw(float(constant), float(p), (g - 2) / d, drive, variant, reversed)


def limit_law_sample(drive: PowerLawDrive, m: int, rng: RngLike, variant: str = "derived") -> np.ndarray:
    """``m`` draws of the large-time limit law."""
    return limit_law(drive, variant).sample(m, rng)


def rescaled_empirical(drive: PowerLawDrive, t: float, m: int, rng: RngLike, a0: float = 1.0) -> np.ndarray:
    """``t^((gamma-2)/(3-2 gamma)) X_t`` for ``m`` exact draws of ``X_t``."""
    _check_regime(drive, False)
    if not t > 0:
        raise ValueError("t must be > 0")
    ens = sample_exact(drive, a0, t, rng, m)
    return t ** ((drive.gamma - 2) / (3 - 2 * drive.gamma)) * ens.x


def growth_exponent(
    drive: PowerLawDrive, ts, m: int, rng: RngLike, a0: float = 1.0
) -> tuple[float, np.ndarray]:
    """Least-squares slope of ``log median |X_t|`` against ``log t``.

    Returns the slope and the medians.
    """
    gen = as_generator(rng)
    ts = np.asarray(ts, dtype=float)
    medians = np.array([np.median(np.abs(sample_exact(drive, a0, t, gen, m).x)) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(medians), 1)[0]
    return float(slope), medians


@numba.njit(cache=True)
def _reversed_kernel(bits, n_steps, back, levels, scale):
    # For each path: walk until the zero count exceeds the alive levels, then
    # read the state ``back`` steps earlier from the stored history.
    m = bits.shape[0]
    n_alive = levels.size
    values = np.zeros(m)
    absorbed = np.zeros(m, dtype=np.bool_)
    early = np.zeros(m, dtype=np.bool_)
    ys = np.empty(n_steps + 1, dtype=np.int64)
    lams = np.empty(n_steps + 1, dtype=np.int64)
    for p in range(m):
        y = 0
        lam = 0
        ys[0] = 0
        lams[0] = 0
        k = 0
        hit = -1
        for word_index in range(bits.shape[1]):
            word = bits[p, word_index]
            for b in range(64):
                if k == n_steps:
                    break
                k += 1
                if (word >> np.uint64(b)) & np.uint64(1):
                    y += 1
                else:
                    y -= 1
                if y == 0:
                    lam += 1
                ys[k] = y
                lams[k] = lam
                if lam >= n_alive:
                    hit = k
                    break
            if hit >= 0 or k == n_steps:
                break
        if hit < 0:
            continue
        absorbed[p] = True
        j = hit - back
        if j < 0:
            early[p] = True
            continue
        values[p] = math.sqrt(2.0 * levels[lams[j]] * scale) * ys[j]
    return values, absorbed, early


@dataclass(frozen=True)
class ReversedSample:
    """Rescaled positions a fixed time before absorption.

    ``values`` holds one entry per absorbed path (0 for paths absorbed within
    ``t_back`` of the start).  ``paths`` counts all simulated paths.
    """

    values: np.ndarray
    paths: int
    absorbed_early: int
    t_back: float
    step: float


def reversed_blowup_empirical(
    drive: PowerLawDrive,
    t_back: float,
    m: int,
    rng: RngLike,
    a0: float = 1.0,
    n_steps: int = 100_000,
    back_steps: int = 10_000,
    chunk: int = 2_000,
    max_paths: int | None = None,
) -> ReversedSample:
    """Samples of ``u^((gamma-2)/(3-2 gamma)) X_{tau-u}`` at ``u = t_back``.

    Each path runs the random-walk scheme (``mode="sde"``) with time step
    ``t_back / back_steps`` for at most ``n_steps`` steps.  Paths absorbed
    within the window are kept and the state ``back_steps`` steps before the
    absorbing step is recorded; paths still alive at the end are discarded,
    so the law is conditional on absorption inside the window.
    """
    _check_regime(drive, True)
    if not t_back > 0 or back_steps < 1 or n_steps <= back_steps:
        raise ValueError("need t_back > 0 and 1 <= back_steps < n_steps")
    gen = as_generator(rng)
    step = t_back / back_steps
    # The walk makes at most n_steps/2 returns, so this many levels always suffices.
    levels, status = euler_path(_rate(drive, "sde"), math.sqrt(step), n_steps // 2 + 1, a0)
    if status is FlowStatus.ALIVE:
        raise ValueError("the discrete flow does not exit within the simulated window")
    words = -(-n_steps // 64)
    max_paths = 1000 * max(m, 1) if max_paths is None else max_paths
    kept: list[np.ndarray] = []
    have = 0
    paths = 0
    early = 0
    while have < m and paths < max_paths:
        k = min(chunk, max_paths - paths)
        bits = gen.integers(0, np.iinfo(np.uint64).max, size=(k, words), dtype=np.uint64, endpoint=True)
        values, absorbed, is_early = _reversed_kernel(bits, n_steps, back_steps, levels, step)
        got = values[absorbed]
        kept.append(got)
        have += got.size
        paths += k
        early += int(is_early.sum())
    out = np.concatenate(kept)[:m] if kept else np.empty(0)
    if out.size < m:
        raise RuntimeError(f"only {out.size} of {m} paths were absorbed in {paths} attempts")
    factor = t_back ** ((drive.gamma - 2) / (3 - 2 * drive.gamma))
    return ReversedSample(factor * out, paths, early, float(t_back), step)


@dataclass(frozen=True)
class KsReport:
    d_statistic: float
    n_a: int
    n_b: int

    @property
    def critical_5pct(self) -> float:
        return 1.36 * math.sqrt((self.n_a + self.n_b) / (self.n_a * self.n_b))

    def critical(self, alpha: float = 0.05) -> float:
        """Asymptotic two-sample critical value at level ``alpha``."""
        c = 1.36 if alpha == 0.05 else math.sqrt(-math.log(alpha / 2) / 2)
        return c * math.sqrt((self.n_a + self.n_b) / (self.n_a * self.n_b))

    def rejects(self, alpha: float = 0.05) -> bool:
        return self.d_statistic > self.critical(alpha)


def ks_two_sample(sample_a, sample_b) -> KsReport:
    """Exact sup distance between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float).reshape(-1))
    b = np.sort(np.asarray(sample_b, dtype=float).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return KsReport(float(np.max(np.abs(fa - fb))), int(a.size), int(b.size))


@dataclass(frozen=True)
class GeneratorProbe:
    """Test function ``h(x, a)`` with its derivatives and a weight ``phi``.

    ``phi`` must be nonnegative, continuous and vanish outside ``support``.
    """

    h: Callable
    h_xx: Callable
    h_a: Callable
    phi: Callable
    support: tuple[float, float] = (-0.5, 0.5)
    t_small: float = 1e-3
    n_samples: int = 1_000_000


@dataclass(frozen=True)
class GeneratorResult:
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_err: float = 0.0

    @property
    def relative_gap(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs) if self.rhs else abs(self.lhs)


def bump(x):
    """Unit-mass weight ``15/8 (1 - 4 x^2)^2`` on ``[-1/2, 1/2]``."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 0.5, 1.875 * (1 - 4 * x * x) ** 2, 0.0)


def _stratified_starts(phi, support, n, gen) -> tuple[np.ndarray, float]:
    """Stratified draws from the density ``phi / mass`` by inverse CDF."""
    lo, hi = support
    grid = np.linspace(lo, hi, 20_001)
    dens = np.asarray(phi(grid), dtype=float)
    if np.any(dens < 0):
        raise ValueError("phi must be nonnegative")
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))])
    mass = float(cdf[-1])
    if mass <= 0:
        raise ValueError("phi has no mass on its support")
    u = (np.arange(n) + gen.random(n)) / n
    x = np.interp(u * mass, cdf, grid)
    # x0 = 0 exactly has probability zero; nudge it to keep the sampler's branch valid.
    x[x == 0] = np.finfo(float).tiny
    return x, mass


def _mean_err(values) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def generator_check(probe: GeneratorProbe, drive: PowerLawDrive, a: float, rng: RngLike) -> GeneratorResult:
    """Compare both sides of the weak generator identity at diffusivity ``a``.

    ``lhs = int phi(x) E^{x,a}[(h(X_t, A_t) - h(x, a)) / t] dx`` at
    ``t = probe.t_small`` by Monte Carlo over stratified starting points, and
    ``rhs = int phi(x) a h_xx(x, a) dx + phi(0) f(a) h_a(0, a)`` by quadrature.
    """
    gen = as_generator(rng)
    x0, mass = _stratified_starts(probe.phi, probe.support, probe.n_samples, gen)
    ens = sample_from_general_start(drive, x0, a, probe.t_small, gen, x0.size)
    with np.errstate(invalid="ignore"):
        inc = (np.asarray(probe.h(ens.x, ens.a), dtype=float) - np.asarray(probe.h(x0, a), dtype=float)) / probe.t_small
    inc = np.broadcast_to(inc, x0.shape)
    mean, err = _mean_err(inc)
    lo, hi = probe.support
    bulk, bulk_err = quad(lambda x: float(probe.phi(x)) * a * float(probe.h_xx(x, a)), lo, hi, points=[0.0])
    rhs = bulk + float(probe.phi(0.0)) * float(drive.f(a)) * float(probe.h_a(0.0, a))
    return GeneratorResult(mass * mean, mass * err, float(rhs), float(bulk_err))


def wl_generator_check(
    h: Callable,
    h_ww: Callable,
    h_l: Callable,
    rng: RngLike,
    phi: Callable = bump,
    support: tuple[float, float] = (-0.5, 0.5),
    t_small: float = 1e-3,
    n_samples: int = 1_000_000,
    l0: float = 0.0,
) -> GeneratorResult:
    """Weak generator identity for the pair ``(W, L)`` started at ``(w, l0)``.

    ``rhs = int phi(w) h_ww(w, l0) / 2 dw + phi(0) h_l(0, l0)``.
    """
    gen = as_generator(rng)
    w0, mass = _stratified_starts(phi, support, n_samples, gen)
    joint, _ = joint_wl_from(w0, t_small, gen, w0.size)
    inc = (np.asarray(h(joint.w, l0 + joint.l), dtype=float) - np.asarray(h(w0, l0), dtype=float)) / t_small
    inc = np.broadcast_to(inc, w0.shape)
    mean, err = _mean_err(inc)
    lo, hi = support
    bulk, bulk_err = quad(lambda w: float(phi(w)) * 0.5 * float(h_ww(w, l0)), lo, hi, points=[0.0])
    rhs = bulk + float(phi(0.0)) * float(h_l(0.0, l0))
    return GeneratorResult(mass * mean, mass * err, float(rhs), float(bulk_err))
