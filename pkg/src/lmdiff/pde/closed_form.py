"""Explicit density of ``(X_t, A_t)`` started from ``(0, a0)``.

With the similarity variable

    Z(x, a) = |x| / sqrt(a) + 2 * integral_{a0}^{a} sqrt(a') / f(a') da'

the continuous part of the law is

    n_t(x, a) = H * Z / (|f(a)| sqrt(4 pi t^3)) * exp(-Z^2 / (4 t)),

where ``H`` restricts ``a`` to the side of ``a0`` the flow moves towards.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from ..flow import PowerLawDrive


def _flow_part(drive: PowerLawDrive, a0: float, a):
    s = drive.exponent
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        if s == 0:
            return 2.0 * drive.sigma * np.log(a / a0)
        return (2.0 * drive.sigma / s) * (np.power(a, s) - a0**s)


def _admissible(drive: PowerLawDrive, a0: float, a):
    a = np.asarray(a, dtype=float)
    return (a <= a0) if drive.sigma < 0 else (a >= a0)


def z_function(drive: PowerLawDrive, a0: float, x, a):
    """Similarity variable ``Z(x, a)`` for a power-law drive.

    Examples
    --------
    >>> round(float(z_function(PowerLawDrive(-1, 0.0), 1.0, 0.0, 0.0)), 12)
    1.333333333333
    """
    if drive.sigma == 0:
        raise ValueError("Z is undefined for a zero drive")
    if not a0 > 0:
        raise ValueError("a0 must be > 0")
    x, a = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(a, dtype=float))
    if np.any(a < 0) or not np.all(_admissible(drive, a0, a)):
        side = "0 <= a <= a0" if drive.sigma < 0 else "a >= a0"
        raise ValueError(f"inadmissible a: need {side} for sigma={drive.sigma}")
    at_zero = a == 0
    if np.any(at_zero) and (drive.exponent <= 0 or np.any(x[at_zero] != 0)):
        raise ValueError("a = 0 is admissible only on x = 0 with gamma < 3/2")
    with np.errstate(divide="ignore", invalid="ignore"):
        head = np.where(x == 0, 0.0, np.abs(x) / np.sqrt(a))
    return (head + _flow_part(drive, a0, a))[()]


def closed_form_density(drive: PowerLawDrive, a0: float, t: float, x, a):
    """Continuous part of the law of ``(X_t, A_t)``; 0 off its support."""
    if not t > 0:
        raise ValueError("t must be > 0")
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("a must be > 0")
    x = np.asarray(x, dtype=float)
    inside = _admissible(drive, a0, a)
    a_safe = np.where(inside, a, a0)
    z = np.abs(x) / np.sqrt(a_safe) + _flow_part(drive, a0, a_safe)
    fa = np.abs(drive.f(a_safe))
    out = z / (fa * math.sqrt(4 * math.pi * t**3)) * np.exp(-z * z / (4 * t))
    return np.where(inside, out, 0.0)[()]


def absorption_constant(drive: PowerLawDrive, a0: float) -> float:
    """``K = integral_0^{a0} sqrt(a)/|f(a)| da = a0^s / s``."""
    s = drive.exponent
    return a0**s / s


def absorbed_mass(drive: PowerLawDrive, a0: float, t: float, time_integrated: bool = False) -> float:
    """Mass of the atom at ``(0, 0)`` at time ``t``.

    The default is ``erfc(K / sqrt(t))``, the probability of being trapped by
    ``t``.  ``time_integrated=True`` returns the time-integrated form
    ``integral_0^t erfc(K / sqrt(s)) ds``, which exceeds 1 for large ``t`` and
    is kept only for comparison.
    """
    if not t >= 0:
        raise ValueError("t must be >= 0")
    if drive.sigma >= 0 or drive.exponent <= 0 or t == 0:
        return 0.0
    k = absorption_constant(drive, a0)
    if time_integrated:
        return float(quad(lambda s: erfc(k / math.sqrt(s)) if s > 0 else 0.0, 0.0, t, limit=200)[0])
    return float(erfc(k / math.sqrt(t)))
