"""Independent references for validating ray simulations.

* Closed-form Gaussian-beam ray paths.
* An angular-spectrum propagator that solves the scalar Helmholtz problem
  exactly for a sampled field.
* A flow-line oracle: in one transverse dimension non-crossing rays that
  conserve flux follow the quantile map of the exact intensity.
* Ray-versus-field comparison metrics and the along-ray drift of ``G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import ProfileSpec, eval_profile

DEFAULT_GRID_SPAN = 400.0
DEFAULT_GRID_POINTS = 2**16
PEAK_THRESHOLD = 0.02
LEAKAGE_LIMIT = 1e-10


class OracleResolutionError(RuntimeError):
    """The field grid is too coarse or too narrow for the request."""


@dataclass(frozen=True)
class FieldGrid:
    """Complex scalar field sampled on a uniform transverse grid.

    Attributes
    ----------
    x : ndarray
        Uniform abscissae.
    u : ndarray
        Complex samples.
    z : float
        Propagation distance at which the field applies.
    eps : float
        Dimensionless wavelength.
    """

    x: np.ndarray
    u: np.ndarray
    z: float
    eps: float

    def __post_init__(self):
        if self.x.shape != self.u.shape or self.x.ndim != 1 or self.x.shape[0] < 4:
            raise ValueError("x and u must be 1-d arrays of equal length >= 4")
        d = np.diff(self.x)
        if np.ptp(d) > 1e-9 * d[0]:
            raise ValueError("field abscissae must be uniformly spaced")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.u) ** 2

    def power(self) -> float:
        return float(np.sum(self.intensity) * self.dx)


def waist_trajectory(z, eps: float):
    """Edge-ray path ``sqrt(1 + (eps z / pi)**2)`` of the unit Gaussian beam."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    return np.sqrt(1.0 + (eps * z / math.pi) ** 2)


def gaussian_ray_oracle(x0, z, eps: float):
    """Self-similar Gaussian-beam ray ``x0 * sqrt(1 + (eps z / pi)**2)``."""
    return np.asarray(x0, dtype=float) * waist_trajectory(z, eps)


def launch_field(
    spec: ProfileSpec,
    eps: float,
    span: float = DEFAULT_GRID_SPAN,
    n_points: int = DEFAULT_GRID_POINTS,
) -> FieldGrid:
    """Sample the launch profile with flat phase on a centred uniform grid."""
    x = (np.arange(n_points) - n_points // 2) * (span / n_points)
    return FieldGrid(x, eval_profile(spec, x).astype(complex), 0.0, eps)


def angular_spectrum_propagate(field: FieldGrid, z: float) -> FieldGrid:
    """Propagate ``field`` by a further distance ``z``.

    Each transverse plane wave ``exp(i kx x)`` picks up the phase
    ``exp(i z (sqrt(k0**2 - kx**2) - k0))`` with ``k0 = 2 pi / eps``; the
    common carrier ``exp(i k0 z)`` is dropped.

    Raises
    ------
    OracleResolutionError
        If the spectrum is not negligible near the Nyquist limit, or the
        propagated field reaches the grid edges (wrap-around).
    """
    n = field.x.shape[0]
    spectrum = np.fft.fft(field.u)
    power = np.abs(spectrum) ** 2
    kx = 2.0 * math.pi * np.fft.fftfreq(n, d=field.dx)
    knyq = math.pi / field.dx
    if power[np.abs(kx) > 0.8 * knyq].sum() > LEAKAGE_LIMIT * power.sum():
        raise OracleResolutionError("spectrum reaches the Nyquist limit; use a finer grid")
    if z == 0:
        return FieldGrid(field.x, field.u.copy(), field.z, field.eps)
    k0 = 2.0 * math.pi / field.eps
    kz = np.sqrt(k0**2 - kx.astype(complex) ** 2)
    u = np.fft.ifft(spectrum * np.exp(1j * z * (kz - k0)))
    out = FieldGrid(field.x, u, field.z + z, field.eps)
    inten = out.intensity
    edge = max(n // 100, 2)
    if max(inten[:edge].max(), inten[-edge:].max()) > LEAKAGE_LIMIT * inten.max():
        raise OracleResolutionError("propagated field reaches the grid edge; use a wider grid")
    return out


def oracle_field(spec: ProfileSpec, eps: float, z: float, **grid) -> FieldGrid:
    """Launch ``spec`` and propagate it to ``z``."""
    return angular_spectrum_propagate(launch_field(spec, eps, **grid), z)


def flow_line_oracle(spec: ProfileSpec, eps: float, x0, z: float, **grid) -> np.ndarray:
    """Positions at ``z`` of flux-conserving rays launched at ``x0``.

    The fraction of beam power on either side of a ray is invariant, so the
    ray position follows from matching cumulative intensities. Cumulative
    sums start at the beam axis, which keeps small offsets accurate for
    even profiles.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = launch_field(spec, eps, **grid)
    fz = angular_spectrum_propagate(f0, z)
    c = f0.x.shape[0] // 2
    xs = f0.x[c:]

    def cumulative(i):
        i = i[c:]
        return np.concatenate([[0.0], np.cumsum(0.5 * (i[1:] + i[:-1]) * f0.dx)])

    c0 = cumulative(f0.intensity)
    cz = cumulative(fz.intensity)
    mass = np.interp(np.abs(x0), xs, c0)
    return np.sign(x0) * np.interp(mass, cz, xs)


def find_maxima(x, y, rel_threshold: float = PEAK_THRESHOLD) -> np.ndarray:
    """Local maxima of samples ``y(x)`` refined by a 3-point parabola.

    Peaks below ``rel_threshold * max(y)`` are ignored.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 3:
        return np.empty(0)
    k = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    k = k[y[k] >= rel_threshold * y.max()]
    out = np.empty(k.shape[0])
    for j, i in enumerate(k):
        xa, xb, xc = x[i - 1 : i + 2]
        ya, yb, yc = y[i - 1 : i + 2]
        # Vertex of the parabola through three (possibly unevenly spaced) points.
        num = (xb - xa) ** 2 * (yb - yc) - (xb - xc) ** 2 * (yb - ya)
        den = (xb - xa) * (yb - yc) - (xb - xc) * (yb - ya)
        out[j] = xb - 0.5 * num / den if den != 0 else xb
    return out


def _central(maxima, count):
    if maxima.shape[0] <= count:
        return maxima
    order = np.argsort(np.abs(maxima), kind="stable")[:count]
    return np.sort(maxima[order])


def compare_intensity(ray_x, ray_intensity, field: FieldGrid, region: float = 0.8,
                      edge_rays: int = 2) -> dict:
    """Compare ray intensities with a reference field.

    Parameters
    ----------
    ray_x, ray_intensity : array_like
        Ray abscissae (increasing) and intensities.
    field : FieldGrid
        Reference field.
    region : float, optional
        Fraction of the ray support, centred on the axis, that is compared.
    edge_rays : int, optional
        Rays dropped at each end before the comparison.

    Returns
    -------
    dict
        ``l2_error``: relative L2 distance of the unit-peak intensities;
        ``ray_maxima`` and ``oracle_maxima``: peak positions inside the
        region; ``fringe_spacing``: mean gap between oracle peaks;
        ``max_fringe_discrepancy``: largest distance from a ray peak to the
        nearest oracle peak in units of the local oracle fringe spacing;
        ``fringe_mismatch``: true when one signal has at least three peaks
        and the other has fewer.
    """
    x = np.asarray(ray_x, dtype=float)
    a = np.asarray(ray_intensity, dtype=float)
    if edge_rays:
        x, a = x[edge_rays:-edge_rays], a[edge_rays:-edge_rays]
    if x[0] > field.x[-1] or x[-1] < field.x[0]:
        raise ValueError("ray and field ranges do not overlap")
    half = region * max(abs(x[0]), abs(x[-1]))
    b = np.interp(x, field.x, field.intensity)
    a = a / a.max()
    b = b / b.max()
    sel = np.abs(x) <= half
    xs = x[sel]
    diff = np.trapezoid((a[sel] - b[sel]) ** 2, xs)
    ref = np.trapezoid(b[sel] ** 2, xs)
    l2 = math.sqrt(diff / ref) if ref > 0 else math.inf

    fsel = np.abs(field.x) <= half
    fi = field.intensity[fsel]
    om = find_maxima(field.x[fsel], fi / fi.max())
    rm = find_maxima(xs, a[sel])
    spacing = float(np.mean(np.diff(om))) if om.shape[0] >= 2 else math.nan
    disc = 0.0
    if rm.shape[0] and om.shape[0] >= 2:
        gaps = np.diff(om)
        for m in rm:
            j = int(np.argmin(np.abs(om - m)))
            local = np.mean(gaps[max(j - 1, 0) : j + 1])
            disc = max(disc, abs(m - om[j]) / local)
    elif rm.shape[0] != om.shape[0]:
        disc = math.inf
    mismatch = (rm.shape[0] >= 3) != (om.shape[0] >= 3)
    return {
        "l2_error": l2,
        "ray_maxima": rm,
        "oracle_maxima": om,
        "fringe_spacing": spacing,
        "max_fringe_discrepancy": disc,
        "fringe_mismatch": bool(mismatch),
    }


def central_maxima(maxima, count: int) -> np.ndarray:
    """The ``count`` maxima closest to the axis, in increasing order."""
    return _central(np.asarray(maxima, dtype=float), count)


def perpendicularity_diagnostic(record, edge_rays: int = 2) -> dict:
    """Along-ray drift of the wave potential ``G``.

    Returns
    -------
    dict
        ``drift``: array (snapshots, interior rays) of ``G(t) - G(0)``;
        ``normalized``: per-ray ``max |G(t) - G(0)| / (1 + |G(0)|)``.
        Both are empty when the record has fewer than two snapshots.
    """
    snaps = record.snapshots
    if len(snaps) < 2:
        return {"drift": np.empty((0, 0)), "normalized": np.empty(0)}
    g = np.array([s.g for s in snaps])
    if edge_rays:
        g = g[:, edge_rays:-edge_rays]
    drift = g - g[0]
    normalized = np.abs(drift).max(axis=0) / (1.0 + np.abs(g[0]))
    return {"drift": drift, "normalized": normalized}
