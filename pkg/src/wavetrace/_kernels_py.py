"""Pure numpy implementation of the hot kernels.

This module is the reference implementation and the fallback when the
compiled extension is unavailable. Every function here has a twin of the
same name and signature in the Cython module ``_kernels``.

Banded operators are stored row-wise: row ``i`` touches the ``w`` entries
``starts[i] .. starts[i] + w - 1`` with coefficients ``weights[i, :]``.
"""

import numpy as np

BACKEND = "numpy"


def _index(starts, width):
    return starts[:, None] + np.arange(width)[None, :]


def band_apply(weights, starts, v):
    """Return ``B @ v`` for the banded matrix ``B``."""
    idx = _index(starts, weights.shape[1])
    return np.einsum("ij,ij->i", weights, v[idx])


def band_apply_t(weights, starts, v, n):
    """Return ``B.T @ v`` for the banded matrix ``B`` with ``n`` columns."""
    idx = _index(starts, weights.shape[1])
    return np.bincount(idx.ravel(), weights=(weights * v[:, None]).ravel(), minlength=n)


def energy_gradient(x, mu, quad, dw, ds, tw, ts, aw, at, coef):
    """Discrete amplitude-gradient energy of a ray front and its gradient.

    Ray densities live at half labels, ``u = D x``; the amplitude there is
    ``R = sqrt(mu / u)``. Its slope ``v = T R`` and the interpolated density
    ``ubar = A u`` live back at integer labels, and the energy is
    ``coef * sum(quad * v**2 / ubar)``.

    Parameters
    ----------
    x : ndarray, shape (n,)
        Ray abscissae, increasing.
    mu : ndarray, shape (n - 1,)
        Conserved flux per unit label at half labels.
    quad : ndarray, shape (n,)
        Quadrature weights at integer labels.
    dw, ds : ndarray
        Banded derivative, integer to half labels.
    tw, ts : ndarray
        Banded derivative, half to integer labels.
    aw, at : ndarray
        Banded interpolation, half to integer labels.
    coef : float
        Overall prefactor.

    Returns
    -------
    energy : float
    grad : ndarray, shape (n,)
        Derivative of the energy with respect to every ``x``.
    """
    n = x.shape[0]
    m = n - 1
    u = band_apply(dw, ds, x)
    r = np.sqrt(mu / u)
    v = band_apply(tw, ts, r)
    ubar = band_apply(aw, at, u)
    energy = coef * np.sum(quad * v * v / ubar)
    g_r = band_apply_t(tw, ts, 2.0 * coef * quad * v / ubar, m)
    g_u = band_apply_t(aw, at, -coef * quad * v * v / (ubar * ubar), m) - 0.5 * g_r * r / u
    return float(energy), band_apply_t(dw, ds, g_u, n)


STATUS_MAX_STEPS = 0
STATUS_Z_FINAL = 1
STATUS_CROSSING = 2
STATUS_PARAXIAL = 3
STATUS_UNSTABLE = 4


def expand_buffer(v_act, left, right, nbuf, out):
    """Write active values and their linear extrapolation into ``out``."""
    n = out.shape[0]
    nfit = left.shape[1]
    out[nbuf : n - nbuf] = v_act
    if nbuf:
        out[:nbuf] = left @ v_act[:nfit]
        out[n - nbuf :] = right @ v_act[-nfit:]


def active_force(x, mu, quad, dw, ds, tw, ts, aw, at, coef, left, right, nbuf, mass):
    """Acceleration of the active rays for the full front ``x``."""
    grad = energy_gradient(x, mu, quad, dw, ds, tw, ts, aw, at, coef)[1]
    n = x.shape[0]
    nfit = left.shape[1]
    g = grad[nbuf : n - nbuf].copy()
    if nbuf:
        g[:nfit] += left.T @ grad[:nbuf]
        g[-nfit:] += right.T @ grad[n - nbuf :]
    return -g / mass


def leapfrog_block(x, p, z, f, mu, quad, dw, ds, tw, ts, aw, at, coef, left, right, nbuf,
                   mass, dt, max_steps, z_final, stability, eps):
    """Up to ``max_steps`` kick-drift-kick steps of the energy-force system.

    ``x``, ``p`` and ``z`` (full front) and ``f`` (active acceleration at
    ``x``) are updated in place. Before each step the loop stops if the
    median ``z`` has reached ``z_final`` or, when ``stability > 0``, if
    ``dt`` exceeds ``stability * min_spacing**2 / eps``.

    Returns
    -------
    steps : int
        Steps completed.
    status : int
        One of the ``STATUS_*`` codes.
    where : int
        Offending ray index for crossing or paraxial breakdown, else -1.
    """
    n = x.shape[0]
    act = slice(nbuf, n - nbuf)
    half = 0.5 * dt
    for k in range(max_steps):
        if np.median(z) >= z_final:
            return k, STATUS_Z_FINAL, -1
        if stability > 0:
            smin = np.min(np.diff(x))
            if dt > stability * smin * smin / eps:
                return k, STATUS_UNSTABLE, -1
        pa = p[act] + half * f
        expand_buffer(pa, left, right, nbuf, p)
        bad = np.flatnonzero(np.abs(p) >= 1.0)
        if bad.size:
            return k, STATUS_PARAXIAL, int(bad[0])
        expand_buffer(x[act] + pa * dt, left, right, nbuf, x)
        z += np.sqrt(1.0 - p * p) * dt
        d = np.diff(x)
        if not np.all(d > 0):
            return k + 1, STATUS_CROSSING, int(np.argmin(d))
        f[:] = active_force(x, mu, quad, dw, ds, tw, ts, aw, at, coef, left, right, nbuf, mass)
        expand_buffer(pa + half * f, left, right, nbuf, p)
        bad = np.flatnonzero(np.abs(p) >= 1.0)
        if bad.size:
            return k + 1, STATUS_PARAXIAL, int(bad[0])
    return max_steps, STATUS_MAX_STEPS, -1


def lagrange_derivative(xs, vals, order, width):
    """Derivative of the local Lagrange interpolant at every node.

    Parameters
    ----------
    xs : ndarray, shape (n,)
        Strictly increasing abscissae.
    vals : ndarray, shape (n,)
        Samples at ``xs``.
    order : int
        Derivative order, 1 or 2.
    width : int
        Stencil size; centred where possible, one-sided near the ends.

    Returns
    -------
    ndarray, shape (n,)
    """
    n = xs.shape[0]
    starts = np.clip(np.arange(n) - width // 2, 0, n - width)
    idx = _index(starts, width)
    offs = xs[idx] - xs[:, None]
    # Scale offsets by the local stencil extent so the Vandermonde systems
    # stay well conditioned on arbitrarily fine grids.
    scale = offs[:, -1] - offs[:, 0]
    t = offs / scale[:, None]
    vand = np.stack([t**k for k in range(width)], axis=1)
    rhs = np.zeros((n, width))
    rhs[:, order] = float(np.prod(np.arange(1, order + 1)))
    w = np.linalg.solve(vand, rhs[..., None])[..., 0]
    return np.einsum("ij,ij->i", w, vals[idx]) / scale**order
