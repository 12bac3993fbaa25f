"""Ray coupling force derived from a discrete amplitude-gradient energy.

Rays are labelled by their seed index ``a``. Flux conservation fixes the
amplitude as a function of ray density, ``R**2 * dx/da = mu(a)``, and the
wave-potential force is the variational derivative of

    E[x] = c * integral (dR/da)**2 / (dx/da) da,   c = eps**2 / (8 pi**2),

which in the continuum limit equals ``c * integral (dR/dx)**2 dx``. Its
Euler-Lagrange equation, divided by the tube mass ``mu``, is exactly
``c * d/dx (R''/R)``.

Discretizing the energy first and differentiating afterwards gives a force
that is the exact gradient of a bounded-below discrete energy. The resulting
particle system is Hamiltonian, so leapfrog is symplectic and no spurious
growing modes appear. Differentiating ``R''/R`` on the ray stencil directly
produces a non-self-adjoint operator whose complex eigenvalues grow without
bound at any step size.

The outermost ``n_buffer`` rays at each end are slaved to a linear fit of
their inner neighbours in label space. This keeps one-sided stencils away
from the dynamically active rays.
"""

from __future__ import annotations

import numpy as np

from ._backend import kernels


def band_operator(out_pos, node_offset: float, n_nodes: int, width: int, deriv: int):
    """Lagrange interpolation or differentiation between label lattices.

    Nodes sit at labels ``k + node_offset`` for ``k = 0..n_nodes-1``; row
    ``i`` acts at label ``out_pos[i]`` with the ``width`` nearest nodes
    (one-sided near the ends).

    Returns
    -------
    weights : ndarray, shape (len(out_pos), width)
    starts : ndarray of int64
    """
    out_pos = np.asarray(out_pos, dtype=float)
    if n_nodes < width:
        raise ValueError(f"need at least {width} labels, got {n_nodes}")
    centred = np.floor(out_pos - node_offset - 0.5 * (width - 1) + 0.5)
    starts = np.clip(centred, 0, n_nodes - width).astype(np.int64)
    weights = np.empty((out_pos.shape[0], width))
    cache = {}
    for i, (p, s) in enumerate(zip(out_pos, starts)):
        rel = float(s + node_offset - p)
        if rel not in cache:
            t = rel + np.arange(width, dtype=float)
            vand = np.vander(t, increasing=True).T
            rhs = np.zeros(width)
            rhs[deriv] = 1.0
            cache[rel] = np.linalg.solve(vand, rhs)
        weights[i] = cache[rel]
    return weights, starts


def _fit_rows(labels_out, labels_fit):
    design = np.column_stack([np.ones_like(labels_fit), labels_fit])
    pinv = np.linalg.pinv(design)
    return np.column_stack([np.ones_like(labels_out), labels_out]) @ pinv


class AmplitudeEnergy:
    """Discrete energy ``E[x]`` and the force it exerts on the active rays.

    Parameters
    ----------
    seed_x : ndarray
        Launch abscissae, increasing.
    seed_r : ndarray
        Launch amplitudes.
    eps : float
        Dimensionless wavelength.
    width : int, optional
        Label-space derivative stencil, default 5.
    n_buffer : int, optional
        Slaved rays at each end. Reduced automatically on short fronts.
    """

    def __init__(self, seed_x, seed_r, eps, width=5, n_buffer=5):
        seed_x = np.ascontiguousarray(seed_x, dtype=float)
        n = seed_x.shape[0]
        self.n = n
        seed_r = np.asarray(seed_r, dtype=float)
        self.coef = eps**2 / (8.0 * np.pi**2)
        # An even stencil is centred on the staggered lattice.
        sw = width - 1 if width % 2 else width
        whole = np.arange(n, dtype=float)
        half = whole[:-1] + 0.5
        self._ops = (
            band_operator(half, 0.0, n, sw, 1)
            + band_operator(whole, 0.5, n - 1, sw, 1)
            + band_operator(whole, 0.5, n - 1, sw, 0)
        )
        self.quad = np.ones(n)
        self.quad[0] = self.quad[-1] = 0.5
        dw, ds = self._ops[:2]
        u0 = kernels.band_apply(dw, ds, seed_x)
        iw, is_ = band_operator(half, 0.0, n, sw, 0)
        # Interpolating log(R**2) keeps the flux positive on coarse tails,
        # where polynomial interpolation of R**2 itself can undershoot.
        log_r2 = 2.0 * np.log(np.maximum(seed_r, np.finfo(float).tiny))
        self.mu = np.ascontiguousarray(np.exp(kernels.band_apply(iw, is_, log_r2)) * u0)
        cw, cs = band_operator(whole, 0.0, n, width, 1)
        mu_whole = seed_r**2 * kernels.band_apply(cw, cs, seed_x)
        k = max(0, min(n_buffer, (n - width) // 2))
        self.n_buffer = k
        n_act = n - 2 * k
        nfit = min(5, n_act)
        labels = np.arange(n, dtype=float)
        act = labels[k : n - k]
        self.left = np.ascontiguousarray(_fit_rows(labels[:k], act[:nfit]).reshape(k, nfit))
        self.right = np.ascontiguousarray(
            _fit_rows(labels[n - k :], act[n_act - nfit :]).reshape(k, nfit)
        )
        self.mass = np.ascontiguousarray((self.quad * mu_whole)[k : n - k])

    @property
    def active(self) -> slice:
        """Slice selecting the dynamically active rays."""
        return slice(self.n_buffer, self.n - self.n_buffer)

    @property
    def kernel_args(self) -> tuple:
        """Arrays describing the system, in the order the kernels expect."""
        return (self.mu, self.quad, *self._ops, self.coef, self.left, self.right,
                self.n_buffer, self.mass)

    def expand(self, v_act: np.ndarray) -> np.ndarray:
        """Fill the slaved buffer entries from the active ones."""
        out = np.empty(self.n)
        kernels.expand_buffer(np.ascontiguousarray(v_act, dtype=float), self.left, self.right,
                              self.n_buffer, out)
        return out

    def energy_gradient(self, x_full: np.ndarray) -> tuple[float, np.ndarray]:
        """Energy and its gradient with respect to every ray abscissa."""
        return kernels.energy_gradient(
            np.ascontiguousarray(x_full, dtype=float), self.mu, self.quad, *self._ops, self.coef
        )

    def energy(self, x_act: np.ndarray) -> float:
        return self.energy_gradient(self.expand(x_act))[0]

    def force(self, x_act: np.ndarray) -> np.ndarray:
        """Acceleration ``dp_x/dt`` of every active ray."""
        return kernels.active_force(self.expand(x_act), *self.kernel_args)
