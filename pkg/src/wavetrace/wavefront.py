"""The synchronized ray front and the numerics that live on it.

A :class:`Wavefront` stores the ray ensemble as parallel numpy arrays
sorted by seed position. Derivatives across the front use Lagrange
interpolation on the current (non-uniform) ray abscissae, the carried
amplitude follows from flux conservation between neighbouring rays, and the
local wave potential is ``G = R'' / (p_z**2 R)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import kernels
from .profiles import ProfileSpec, eval_profile

DEFAULT_STENCIL = 5
DEFAULT_R_FLOOR = 1e-8


class RayCrossingError(RuntimeError):
    """Two neighbouring rays met or swapped order."""

    def __init__(self, message, ids=(), t=float("nan")):
        super().__init__(message)
        self.ids = tuple(ids)
        self.t = t


@dataclass(frozen=True)
class Ray:
    """Snapshot of one trajectory."""

    id: int
    x: float
    z: float
    px: float
    pz: float
    r: float
    g: float


@dataclass
class Wavefront:
    """Equal-time ensemble of rays.

    Attributes
    ----------
    t : float
        Common time of all rays.
    x, z, px : ndarray
        Ray positions and transverse direction cosine.
    r, g : ndarray
        Carried amplitude and wave potential.
    seed_x, seed_spacing, seed_r : ndarray
        Launch bookkeeping used by flux transport.
    clamped : int
        Number of rays whose amplitude hit the floor in the last potential
        evaluation.
    """

    t: float
    x: np.ndarray
    z: np.ndarray
    px: np.ndarray
    r: np.ndarray
    g: np.ndarray
    seed_x: np.ndarray
    seed_spacing: np.ndarray
    seed_r: np.ndarray
    clamped: int = 0
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    @property
    def pz(self) -> np.ndarray:
        return np.sqrt(1.0 - self.px**2)

    @property
    def rays(self) -> list[Ray]:
        pz = self.pz
        return [
            Ray(i, self.x[i], self.z[i], self.px[i], pz[i], self.r[i], self.g[i])
            for i in range(self.n)
        ]

    def copy(self) -> "Wavefront":
        """Deep copy of the mutable arrays; seed arrays and caches are shared."""
        return replace(
            self,
            x=self.x.copy(),
            z=self.z.copy(),
            px=self.px.copy(),
            r=self.r.copy(),
            g=self.g.copy(),
        )


def seed_wavefront(
    spec: ProfileSpec,
    n_rays: int,
    half_span: float,
    stencil_width: int = DEFAULT_STENCIL,
    r_floor: float = DEFAULT_R_FLOOR,
) -> Wavefront:
    """Launch ``n_rays`` rays uniformly on ``[-half_span, half_span]``.

    All rays start at ``z = 0`` travelling along ``+z``. Amplitudes come
    from the profile and the wave potential is evaluated on the seed front.
    """
    if n_rays < max(7, stencil_width + 2):
        raise ValueError(
            f"n_rays={n_rays} too small for a {stencil_width}-point stencil "
            f"(need at least {max(7, stencil_width + 2)})"
        )
    if not half_span > 0:
        raise ValueError(f"half_span must be positive, got {half_span}")
    x = np.linspace(-half_span, half_span, n_rays)
    # linspace is not exactly antisymmetric in floating point; enforce it.
    x = 0.5 * (x - x[::-1])
    z = np.zeros(n_rays)
    r = eval_profile(spec, x)
    spacing = front_spacing(x, z)
    wf = Wavefront(
        t=0.0,
        x=x,
        z=z,
        px=np.zeros(n_rays),
        r=r.copy(),
        g=np.zeros(n_rays),
        seed_x=x.copy(),
        seed_spacing=spacing,
        seed_r=r,
    )
    compute_wave_potential(wf, stencil_width, r_floor)
    return wf


def _check_increasing(xs):
    d = np.diff(xs)
    if not np.all(d > 0):
        k = int(np.argmin(d))
        raise RayCrossingError(
            f"abscissae not strictly increasing between indices {k} and {k + 1}",
            ids=(k, k + 1),
        )


def derivative_all(xs, vals, order: int, width: int = DEFAULT_STENCIL) -> np.ndarray:
    """Lagrange-stencil derivative of ``vals`` at every node of ``xs``.

    Stencils are centred where possible and one-sided near the two ends.
    The result is exact for polynomials of degree below ``width``.
    """
    xs = np.ascontiguousarray(xs, dtype=float)
    vals = np.ascontiguousarray(vals, dtype=float)
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if width <= order or xs.shape[0] < width:
        raise ValueError(f"stencil width {width} unusable for order {order} on {xs.shape[0]} points")
    _check_increasing(xs)
    return kernels.lagrange_derivative(xs, vals, order, width)


def derivative_nonuniform(xs, vals, i: int, order: int, width: int = DEFAULT_STENCIL) -> float:
    """Derivative of the local Lagrange interpolant at node ``i``.

    Parameters
    ----------
    xs : array_like
        Strictly increasing abscissae.
    vals : array_like
        Samples at ``xs``.
    i : int
        Node index.
    order : int
        1 or 2.
    width : int, optional
        Stencil size, default 5.
    """
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(vals, dtype=float)
    n = xs.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"node {i} outside 0..{n - 1}")
    s = min(max(i - width // 2, 0), n - width)
    sl = slice(s, s + width)
    # Evaluate on the stencil alone; the node sits at position i - s.
    return float(derivative_all(xs[sl], vals[sl], order, width)[i - s])


def front_spacing(x, z) -> np.ndarray:
    """Mean Euclidean distance from each ray to its neighbours in ``(x, z)``.

    End rays use their single neighbour.
    """
    d = np.hypot(np.diff(x), np.diff(z))
    s = np.empty(len(x))
    s[1:-1] = 0.5 * (d[:-1] + d[1:])
    s[0] = d[0]
    s[-1] = d[-1]
    return s


def transport_amplitude(wf: Wavefront) -> np.ndarray:
    """Update ``wf.r`` from flux conservation and return it.

    ``R_i = seed_R_i * sqrt(seed_spacing_i / spacing_i)`` so that
    ``R_i**2 * spacing_i`` is the launch flux of tube ``i``.
    """
    dx = np.diff(wf.x)
    if not np.all(dx > 0):
        bad = np.flatnonzero(~(dx > 0))
        ids = [(int(k), int(k) + 1) for k in bad[:5]]
        raise RayCrossingError(f"rays crossed at t={wf.t:.17g}: pairs {ids}", ids=ids[0], t=wf.t)
    spacing = front_spacing(wf.x, wf.z)
    wf.r = wf.seed_r * np.sqrt(wf.seed_spacing / spacing)
    return wf.r


def flux_ratio(wf: Wavefront) -> np.ndarray:
    """Per-tube flux relative to launch; identically one by construction."""
    spacing = front_spacing(wf.x, wf.z)
    return (wf.r**2 * spacing) / (wf.seed_r**2 * wf.seed_spacing)


def compute_wave_potential(
    wf: Wavefront, width: int = DEFAULT_STENCIL, r_floor: float = DEFAULT_R_FLOOR
) -> np.ndarray:
    """Evaluate ``G = R'' / (p_z**2 R)`` on the front and store it in ``wf.g``.

    Amplitudes below ``r_floor * max(seed_r)`` are clamped to that value in
    the denominator; the number of clamped rays is stored in ``wf.clamped``.
    """
    floor = r_floor * float(np.max(wf.seed_r))
    r = np.maximum(wf.r, floor)
    wf.clamped = int(np.count_nonzero(wf.r < floor))
    d2 = derivative_all(wf.x, wf.r, 2, width)
    wf.g = d2 / ((1.0 - wf.px**2) * r)
    return wf.g


def compute_force(wf: Wavefront, eps: float, width: int = DEFAULT_STENCIL) -> np.ndarray:
    """Stencil force ``eps**2 / (8 pi**2) * dG/dx`` from the stored ``wf.g``."""
    return eps**2 / (8.0 * np.pi**2) * derivative_all(wf.x, wf.g, 1, width)


def intensity_profile(wf: Wavefront) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, R**2)`` in ray order, without normalization."""
    return wf.x.copy(), wf.r**2
