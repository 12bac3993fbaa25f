"""Launch amplitude profiles and named parameter presets.

Three profile families are supported:

``SingleGaussian``
    ``exp(-x**2)``.
``SumCentered``
    A central Gaussian of weight ``a`` plus ``M`` symmetric pairs of weight
    ``b`` centred at ``+-N*xc``, all sharing the inverse width ``q``.
``SumPaired``
    Two combs of ``2M + 1`` Gaussians each, one around ``+xc`` and one
    around ``-xc``, with comb pitch ``x1``.

All profiles are even in ``x`` and strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

DEFAULT_EPSILON = 1.65e-4
SEED_FLOOR = 1e-6


@dataclass(frozen=True)
class SingleGaussian:
    """The unit-waist Gaussian ``exp(-x**2)``."""

    kind = "gaussian"


@dataclass(frozen=True)
class SumCentered:
    """Central Gaussian plus symmetric side lobes.

    Parameters
    ----------
    a, b : float
        Non-negative weights of the central term and of every side term.
    q : float
        Inverse Gaussian width, in units of ``1/w0``.
    m : int
        Number of side-lobe pairs.
    xc : float
        Pitch of the side lobes, in units of ``w0``.
    """

    a: float
    b: float
    q: float
    m: int
    xc: float
    kind = "centered"

    def __post_init__(self):
        _check_common(self.q, self.m, self.xc)
        if self.a < 0 or self.b < 0:
            raise ValueError(f"weights must be non-negative, got a={self.a}, b={self.b}")
        if self.a == 0 and (self.b == 0 or self.m == 0):
            raise ValueError("profile is identically zero")


@dataclass(frozen=True)
class SumPaired:
    """Two Gaussian combs mirrored about the origin.

    Parameters
    ----------
    q : float
        Inverse Gaussian width.
    m : int
        Each comb has ``2*m + 1`` members.
    xc : float
        Offset of the comb centres from the origin.
    x1 : float
        Pitch inside each comb.
    """

    q: float
    m: int
    xc: float
    x1: float
    kind = "paired"

    def __post_init__(self):
        _check_common(self.q, self.m, self.xc)
        if not (self.x1 >= 0 and math.isfinite(self.x1)):
            raise ValueError(f"x1 must be a finite non-negative number, got {self.x1}")


ProfileSpec = Union[SingleGaussian, SumCentered, SumPaired]


def _check_common(q, m, xc):
    if not (q > 0 and math.isfinite(q)):
        raise ValueError(f"q must be positive and finite, got {q}")
    if int(m) != m or m < 0:
        raise ValueError(f"M must be a non-negative integer, got {m}")
    if not (xc >= 0 and math.isfinite(xc)):
        raise ValueError(f"xc must be a finite non-negative number, got {xc}")


def eval_profile(spec: ProfileSpec, x) -> np.ndarray:
    """Evaluate the launch amplitude ``R(x)`` of ``spec``.

    Parameters
    ----------
    spec : ProfileSpec
        Profile description.
    x : array_like
        Transverse positions in units of ``w0``.

    Returns
    -------
    numpy.ndarray
        Amplitudes with the shape of ``x``.

    Notes
    -----
    Mirrored terms are added in pairs, ``g(x - c) + g(x + c)``, so that
    ``R(x)`` and ``R(-x)`` are built from the same two numbers and the
    result is exactly even.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(spec, SingleGaussian):
        return np.exp(-(x**2))
    q2 = spec.q**2

    def pair(c):
        return np.exp(-q2 * (x - c) ** 2) + np.exp(-q2 * (x + c) ** 2)

    if isinstance(spec, SumCentered):
        out = spec.a * np.exp(-q2 * x**2)
        for k in range(1, spec.m + 1):
            out = out + spec.b * pair(k * spec.xc)
        return out
    if isinstance(spec, SumPaired):
        # Terms N and -N of the two combs are mirror images of each other,
        # so pairing (x - xc + N x1) with (x + xc - N x1) keeps exact evenness.
        out = np.zeros_like(x)
        for k in range(-spec.m, spec.m + 1):
            out = out + pair(spec.xc - k * spec.x1)
        return out
    raise TypeError(f"not a profile spec: {spec!r}")


@dataclass(frozen=True)
class Preset:
    """A named launch configuration."""

    name: str
    spec: ProfileSpec
    epsilon: float
    half_span: float

    def describe(self) -> str:
        s = self.spec
        if isinstance(s, SingleGaussian):
            params = "R=exp(-x^2)"
        elif isinstance(s, SumCentered):
            params = f"a={s.a:g}; b={s.b:g}; q={s.q:g}; M={s.m}; x_c={s.xc:g}"
        else:
            params = f"q={s.q:g}; M={s.m}; x_c={s.xc:g}; x_1={s.x1:g}"
        return f"{self.name}: {params}; epsilon={self.epsilon:g}"


_PRESET_SPECS = {
    "gaussian": SingleGaussian(),
    "fig2": SumCentered(a=0.0, b=1.0, q=1.68, m=2, xc=0.31),
    "fig5": SumPaired(q=3.5, m=3, xc=1.15, x1=0.3),
    "fig8": SumCentered(a=0.0, b=1.0, q=1.0, m=1, xc=2.5),
}

PRESET_NAMES = tuple(_PRESET_SPECS)


def preset(name: str) -> Preset:
    """Look up a named preset.

    Parameters
    ----------
    name : str
        One of ``gaussian``, ``fig2``, ``fig5``, ``fig8``.

    Returns
    -------
    Preset
        Profile spec, suggested ``epsilon`` and seeding half span.
    """
    try:
        spec = _PRESET_SPECS[name]
    except KeyError:
        valid = ", ".join(PRESET_NAMES)
        raise KeyError(f"unknown preset {name!r}; valid presets: {valid}") from None
    return Preset(name, spec, DEFAULT_EPSILON, support_halfwidth(spec, SEED_FLOOR))


def profile_max(spec: ProfileSpec) -> float:
    """Global maximum of ``R`` located by a dense scan plus local refinement."""
    xr = _outer_extent(spec)
    xs = np.linspace(0.0, xr, 20001)
    vals = eval_profile(spec, xs)
    k = int(np.argmax(vals))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
    fine = np.linspace(lo, hi, 2001)
    return float(max(vals[k], eval_profile(spec, fine).max()))


def _outer_extent(spec: ProfileSpec) -> float:
    """A distance beyond which every term of the profile is decaying."""
    if isinstance(spec, SingleGaussian):
        return 10.0
    if isinstance(spec, SumCentered):
        centre = spec.m * spec.xc
    else:
        centre = spec.xc + spec.m * spec.x1
    return centre + 10.0 / spec.q


def support_halfwidth(spec: ProfileSpec, floor: float) -> float:
    """Smallest ``X`` with ``R(x) < floor * max(R)`` for all ``|x| > X``.

    Parameters
    ----------
    spec : ProfileSpec
        Profile description.
    floor : float
        Relative threshold in ``(0, 1)``.

    Returns
    -------
    float
        Half width of the support above the threshold.
    """
    if not 0.0 < floor < 1.0:
        raise ValueError(f"floor must lie in (0, 1), got {floor}")
    rmax = profile_max(spec)
    target = floor * rmax

    def excess(x):
        return float(eval_profile(spec, np.array([x]))[0]) - target

    # Outward scan from the far side until the profile exceeds the target,
    # then bisection on the bracketing interval.
    step = 0.01 if isinstance(spec, SingleGaussian) else min(0.01, 0.05 / spec.q)
    hi = _outer_extent(spec)
    while excess(hi) >= 0:
        hi *= 2.0
    lo = hi
    while lo > 0 and excess(lo) < 0:
        lo -= step
    lo = max(lo, 0.0)
    if excess(lo) < 0:
        return 0.0
    hi = lo + step
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, hi):
            break
    return hi
