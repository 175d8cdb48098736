"""Random walks with discrete local time and exact Brownian (W, L) draws.

The joint law of ``(W_t, L_t)`` for a Brownian motion started at 0 has the
Lévy density

    rho(w, l) = (l + |w|) / sqrt(2 pi t^3) * exp(-(l + |w|)^2 / (2 t)),  l > 0.

Writing ``S = l + |w|`` gives a Maxwell-distributed radius, and conditionally
on ``S`` the value ``w`` is uniform on ``[-S, S]``.  That turns exact sampling
into three Gaussian draws and one uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .rng import RngLike, as_generator


@dataclass(frozen=True)
class WalkPath:
    """A simple random walk ``Y_0 = 0, Y_k = U_1 + ... + U_k``."""

    increments: np.ndarray
    positions: np.ndarray

    @property
    def n_steps(self) -> int:
        return int(self.increments.size)


@dataclass(frozen=True)
class DiscreteLocalTime:
    """Running count ``Lambda_k`` of returns to 0 among ``Y_1 .. Y_k``."""

    lambda_: np.ndarray

    @property
    def total(self) -> int:
        return int(self.lambda_[-1])


@dataclass(frozen=True)
class JointSample:
    """Draw(s) of ``(W_t, L_t)``; ``w`` and ``l`` are scalars or equal-length arrays."""

    w: np.ndarray | float
    l: np.ndarray | float
    t: float


def walk_from_increments(increments: Sequence[int]) -> WalkPath:
    """Build a walk from explicit ``+-1`` steps.

    >>> walk_from_increments([1, -1, -1]).positions.tolist()
    [0, 1, 0, -1]
    """
    inc = np.asarray(increments, dtype=np.int64).reshape(-1)
    if inc.size and not np.all(np.abs(inc) == 1):
        bad = inc[np.abs(inc) != 1][0]
        raise ValueError(f"walk increments must be +1 or -1, got {bad}")
    positions = np.zeros(inc.size + 1, dtype=np.int64)
    np.cumsum(inc, out=positions[1:])
    return WalkPath(inc.astype(np.int8), positions)


def sample_walk(n_steps: int, rng: RngLike) -> WalkPath:
    """Walk of ``n_steps`` fair ``+-1`` steps drawn from ``rng``."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    gen = as_generator(rng)
    inc = 2 * gen.integers(0, 2, size=int(n_steps), dtype=np.int8) - 1
    return walk_from_increments(inc)


def discrete_local_time(path: WalkPath) -> DiscreteLocalTime:
    """``Lambda_k = #{1 <= j <= k : Y_j = 0}``.

    >>> discrete_local_time(walk_from_increments([1, -1, -1, 1])).lambda_.tolist()
    [0, 0, 1, 1, 2]
    """
    hits = (path.positions == 0).astype(np.int64)
    hits[0] = 0
    return DiscreteLocalTime(np.cumsum(hits))


@numba.njit(cache=True)
def _walk_stats(bits, n_steps, starts):
    # Each uint64 word of ``bits`` supplies 64 fair steps for one path.
    m = starts.size
    y_end = np.empty(m, dtype=np.int64)
    zeros = np.empty(m, dtype=np.int64)
    for p in range(m):
        y = starts[p]
        count = 0
        k = 0
        for word_index in range(bits.shape[1]):
            word = bits[p, word_index]
            for b in range(64):
                if k == n_steps:
                    break
                if (word >> np.uint64(b)) & np.uint64(1):
                    y += 1
                else:
                    y -= 1
                if y == 0:
                    count += 1
                k += 1
        y_end[p] = y
        zeros[p] = count
    return y_end, zeros


def walk_endpoints(n_steps: int, m: int, rng: RngLike, starts=None) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints ``Y_n`` and local times ``Lambda_n`` of ``m`` independent walks.

    Parameters
    ----------
    n_steps : int
        Steps per walk.
    m : int
        Number of walks.
    rng : RngLike
        Source of randomness.
    starts : array_like of int, optional
        Integer starting points (default 0).  Zeros are still counted at 0.

    Returns
    -------
    y_end, lam : ndarray of int64
    """
    if n_steps < 0 or m < 0:
        raise ValueError("n_steps and m must be >= 0")
    gen = as_generator(rng)
    starts = np.zeros(m, dtype=np.int64) if starts is None else np.asarray(starts, dtype=np.int64)
    if starts.shape != (m,):
        raise ValueError("starts must have length m")
    words = max(1, -(-int(n_steps) // 64))
    bits = gen.integers(0, np.iinfo(np.uint64).max, size=(m, words), dtype=np.uint64, endpoint=True)
    return _walk_stats(bits, int(n_steps), starts)


def sample_joint_wl(t: float, rng: RngLike, size: int | None = None) -> JointSample:
    """Exact draw of ``(W_t, L_t)`` for Brownian motion from 0.

    Parameters
    ----------
    t : float
        Horizon, ``t > 0``.
    rng : RngLike
        Source of randomness.
    size : int, optional
        Number of draws.  ``None`` returns scalars.
    """
    if not t > 0:
        raise ValueError(f"horizon t must be > 0, got {t!r}")
    gen = as_generator(rng)
    shape = () if size is None else (int(size),)
    radius = math.sqrt(t) * np.linalg.norm(gen.standard_normal(shape + (3,)), axis=-1)
    w = radius * (2.0 * gen.random(shape) - 1.0)
    l = radius - np.abs(w)
    if size is None:
        return JointSample(float(w), float(l), float(t))
    return JointSample(w, l, float(t))


def local_time_from(w0, t: float, rng: RngLike, size: int) -> np.ndarray:
    """Exact draws of ``L_t`` at 0 for Brownian motion started at ``w0``.

    The path first hits 0 at ``zeta = w0^2 / N^2``; afterwards the local time
    over the remaining horizon is distributed as ``|W_{t - zeta}|``.
    """
    gen = as_generator(rng)
    zeta = w0 * w0 / gen.standard_normal(size) ** 2
    rest = np.maximum(t - zeta, 0.0)
    return np.sqrt(rest) * np.abs(gen.standard_normal(size))


def _meander(gen: np.random.Generator, w0: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, int]:
    """``w0 + W_t`` conditioned on not touching 0 before ``t``, elementwise.

    Proposals ``y ~ N(w0, t)`` on the correct side are kept with probability
    ``1 - exp(-2 w0 y / t)``.  Returns the draws and the proposal count.
    """
    out = np.empty(w0.size)
    todo = np.arange(w0.size)
    proposals = 0
    while todo.size:
        y = w0[todo] + np.sqrt(t[todo]) * gen.standard_normal(todo.size)
        u = gen.random(todo.size)
        with np.errstate(over="ignore"):
            keep = (y * w0[todo] > 0) & (u < -np.expm1(-2.0 * w0[todo] * y / t[todo]))
        out[todo[keep]] = y[keep]
        proposals += todo.size
        todo = todo[~keep]
    return out, proposals


def joint_wl_from(w0, t: float, rng: RngLike, size: int | None = None) -> tuple[JointSample, float | None]:
    """Exact draw of ``(W_t, L_t)`` for Brownian motion started at ``w0``.

    The first visit to 0 happens at ``zeta = w0^2 / N^2``.  If ``zeta >= t``
    the local time is 0 and ``W_t`` follows the killed Gaussian, sampled by
    rejection; otherwise the origin sampler runs over ``t - zeta``.

    Returns
    -------
    sample : JointSample
    acceptance_rate : float or None
        Accepted / proposed in the rejection step (``None`` if unused).  Its
        expectation is ``erf(|w0| / sqrt(2 t))``.
    """
    if not t > 0:
        raise ValueError(f"horizon t must be > 0, got {t!r}")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    w0 = np.broadcast_to(np.asarray(w0, dtype=float), (m,)).copy()
    zeta = np.full(m, np.inf)
    moving = w0 != 0
    zeta[~moving] = 0.0
    zeta[moving] = w0[moving] ** 2 / gen.standard_normal(int(moving.sum())) ** 2
    w = np.empty(m)
    l = np.zeros(m)
    late = zeta >= t
    rate = None
    if late.any():
        w[late], proposals = _meander(gen, w0[late], np.full(int(late.sum()), float(t)))
        rate = int(late.sum()) / proposals
    early = ~late
    if early.any():
        rest = t - zeta[early]
        radius = np.sqrt(rest) * np.linalg.norm(gen.standard_normal((rest.size, 3)), axis=-1)
        w[early] = radius * (2.0 * gen.random(rest.size) - 1.0)
        l[early] = radius - np.abs(w[early])
    if size is None:
        return JointSample(float(w[0]), float(l[0]), float(t)), rate
    return JointSample(w, l, float(t)), rate


@dataclass(frozen=True)
class OccupationEstimate:
    """Quadrature of ``E^w[L_1]`` over starting points ``w``."""

    value: float
    stderr: float
    means: np.ndarray
    stderrs: np.ndarray
    weights: np.ndarray


def occupation_integrand(
    n_samples: int,
    w_grid,
    rng: RngLike,
    estimator: str = "first-passage",
    n_steps: int = 10_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo means and standard errors of ``E^w[L_1]`` at each node.

    ``estimator="first-passage"`` is exact; ``estimator="walk"`` rescales the
    zero count of a walk of ``n_steps`` steps started at ``round(w sqrt(n))``.
    """
    gen = as_generator(rng)
    nodes = np.asarray(w_grid, dtype=float).reshape(-1)
    means = np.empty(nodes.size)
    errs = np.empty(nodes.size)
    for i, w in enumerate(nodes):
        if estimator == "first-passage":
            sample = local_time_from(w, 1.0, gen, int(n_samples))
        elif estimator == "walk":
            start = int(round(w * math.sqrt(n_steps)))
            _, lam = walk_endpoints(n_steps, int(n_samples), gen, np.full(int(n_samples), start))
            sample = lam / math.sqrt(n_steps)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        means[i] = sample.mean()
        errs[i] = sample.std(ddof=1) / math.sqrt(sample.size) if sample.size > 1 else math.inf
    return means, errs


def trapezoid_weights(nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float).reshape(-1)
    weights = np.zeros(nodes.size)
    if nodes.size > 1:
        gaps = np.diff(nodes)
        weights[:-1] += gaps / 2
        weights[1:] += gaps / 2
    return weights


def occupation_estimate(
    n_samples: int,
    w_grid,
    rng: RngLike,
    weights=None,
    estimator: str = "first-passage",
    n_steps: int = 10_000,
) -> OccupationEstimate:
    """Like :func:`occupation_identity_check` but keeps the per-node detail."""
    nodes = np.asarray(w_grid, dtype=float).reshape(-1)
    weights = trapezoid_weights(nodes) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape != nodes.shape:
        raise ValueError("weights must match the grid")
    means, errs = occupation_integrand(n_samples, nodes, rng, estimator, n_steps)
    live = weights != 0
    value = float(np.sum(weights[live] * means[live]))
    stderr = float(np.sqrt(np.sum((weights[live] * errs[live]) ** 2)))
    return OccupationEstimate(value, stderr, means, errs, weights)


def occupation_identity_check(
    n_samples: int,
    w_grid,
    rng: RngLike,
    weights=None,
    estimator: str = "first-passage",
    n_steps: int = 10_000,
) -> float:
    """Integrate ``E^w[L_1]`` over starting points; the exact answer is 1.

    Parameters
    ----------
    n_samples : int
        Monte Carlo draws per node.
    w_grid : array_like
        Quadrature nodes.
    rng : RngLike
        Source of randomness.
    weights : array_like, optional
        Quadrature weights; trapezoid weights by default.
    estimator : {"first-passage", "walk"}
        How ``L_1`` from ``w`` is drawn.
    n_steps : int
        Walk length for the ``"walk"`` estimator.
    """
    return occupation_estimate(n_samples, w_grid, rng, weights, estimator, n_steps).value
