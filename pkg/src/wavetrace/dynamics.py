"""Time stepping of the ray front and parameter conversions.

The reduced equations of motion are

    dx/dt = p_x,   dz/dt = sqrt(1 - p_x**2),   dp_x/dt = F(x) + m'(x) / 2,

with ``F`` the wave-potential force and ``m`` an optional refractive
medium. A kick-drift-kick leapfrog advances them. The force depends on
positions only, so the scheme is explicit, time-reversible and, with the
default energy-based force, symplectic.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._backend import kernels
from .coupling import AmplitudeEnergy
from .profiles import SEED_FLOOR, ProfileSpec, support_halfwidth
from .wavefront import (
    DEFAULT_R_FLOOR,
    DEFAULT_STENCIL,
    RayCrossingError,
    Wavefront,
    compute_force,
    compute_wave_potential,
    seed_wavefront,
    transport_amplitude,
)

FORCE_MODELS = ("energy", "stencil")
STEP_CONTROLS = ("stability", "fixed")
DEFAULT_N_RAYS = 401
DEFAULT_SNAPSHOTS = 200
# Steps per Rayleigh length pi/eps used for the default step size.
STEPS_PER_RAYLEIGH = 40000
# The fastest mode of the energy force oscillates at about
# 0.43 * eps / spacing**2, so leapfrog is stable for dt < 4.6 spacing**2 / eps.
# Steps are kept below STABILITY_FACTOR * spacing**2 / eps.
STABILITY_FACTOR = 1.0
# Step control gives up after this many halvings of the requested step.
MAX_HALVINGS = 12


class ParaxialBreakdownError(RuntimeError):
    """A ray reached ``|p_x| >= 1``."""


class StiffnessError(RuntimeError):
    """Ray compression forced the step below the allowed minimum."""


class RunAborted(RuntimeError):
    """A run stopped before reaching ``z_final``; ``record`` holds the partial result."""

    def __init__(self, message, record):
        super().__init__(message)
        self.record = record


@dataclass
class SimConfig:
    """Simulation settings.

    ``None`` entries are filled by :meth:`resolve` from the profile and the
    other settings.

    Attributes
    ----------
    epsilon : float
        Wavelength over waist, in ``(0, 1)``.
    n_rays : int
        Number of rays.
    half_span : float or None
        Seeding half width; default is the support above ``1e-6 * max R``.
    dt : float or None
        Time step; default resolves a Rayleigh length by 40000 steps, capped
        by the stability limit of the seed spacing.
    z_final : float or None
        Stopping distance on the median ray; default two Rayleigh lengths.
    record_every : int or None
        Snapshot stride; default gives about 200 snapshots.
    wave_potential_enabled : bool
        When false, rays are straight lines.
    stencil_width : int
        Points per derivative stencil.
    r_floor : float
        Amplitude floor relative to the launch maximum.
    force_model : str
        ``energy`` (default, stable) or ``stencil`` (direct differentiation
        of ``R''/R`` on the front; kept for comparison, it is unstable).
    step_control : str
        ``stability`` (default): ``dt`` is an upper bound, halved whenever
        the closest ray pair makes it unstable. ``fixed``: every step is
        exactly ``dt``.
    medium_gradient : callable or None
        ``(x, z) -> dm/dx`` of an external medium ``m = n**2``.
    """

    epsilon: float = 1.65e-4
    n_rays: int = DEFAULT_N_RAYS
    half_span: Optional[float] = None
    dt: Optional[float] = None
    z_final: Optional[float] = None
    record_every: Optional[int] = None
    wave_potential_enabled: bool = True
    stencil_width: int = DEFAULT_STENCIL
    r_floor: float = DEFAULT_R_FLOOR
    force_model: str = "energy"
    step_control: str = "stability"
    medium_gradient: Optional[Callable] = field(default=None, compare=False)

    def validate(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if int(self.n_rays) != self.n_rays or self.n_rays < self.stencil_width + 2:
            raise ValueError(f"n_rays must be an integer >= stencil_width + 2, got {self.n_rays}")
        if int(self.stencil_width) != self.stencil_width or self.stencil_width < 3:
            raise ValueError(f"stencil_width must be an integer >= 3, got {self.stencil_width}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.z_final is not None and not self.z_final >= 0:
            raise ValueError(f"z_final must be non-negative, got {self.z_final}")
        if self.half_span is not None and not self.half_span > 0:
            raise ValueError(f"half_span must be positive, got {self.half_span}")
        if self.record_every is not None and (
            int(self.record_every) != self.record_every or self.record_every < 1
        ):
            raise ValueError(f"record_every must be a positive integer, got {self.record_every}")
        if not 0.0 < self.r_floor < 1.0:
            raise ValueError(f"r_floor must lie in (0, 1), got {self.r_floor}")
        if self.force_model not in FORCE_MODELS:
            raise ValueError(f"force_model must be one of {FORCE_MODELS}, got {self.force_model!r}")
        if self.step_control not in STEP_CONTROLS:
            raise ValueError(
                f"step_control must be one of {STEP_CONTROLS}, got {self.step_control!r}"
            )

    def resolve(self, spec: ProfileSpec) -> "SimConfig":
        """Return a copy with every default made explicit."""
        self.validate()
        half_span = self.half_span
        if half_span is None:
            half_span = support_halfwidth(spec, SEED_FLOOR)
        z_final = self.z_final if self.z_final is not None else 2.0 * math.pi / self.epsilon
        dt = self.dt if self.dt is not None else default_dt(self.epsilon, half_span, self.n_rays)
        record_every = self.record_every
        if record_every is None:
            record_every = max(1, int(math.ceil(z_final / dt / DEFAULT_SNAPSHOTS)))
        return replace(self, half_span=half_span, z_final=z_final, dt=dt, record_every=record_every)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("medium_gradient")
        return d


def default_dt(eps: float, half_span: float, n_rays: int) -> float:
    """Default step: fine on the Rayleigh scale and stable on the seed grid."""
    spacing = 2.0 * half_span / (n_rays - 1)
    return min(math.pi / (eps * STEPS_PER_RAYLEIGH), stable_dt(spacing, eps))


def stable_dt(min_spacing: float, eps: float) -> float:
    """Largest step kept by step control for a given closest ray pair."""
    return STABILITY_FACTOR * min_spacing**2 / eps


@dataclass
class TrajectoryRecord:
    """Recorded snapshots of one run.

    Attributes
    ----------
    config : SimConfig
        Fully resolved configuration.
    spec : ProfileSpec
        Launch profile.
    snapshots : list of Wavefront
        Seed front first, final front last.
    steps : int
        Number of leapfrog steps taken.
    min_dt : float
        Smallest step used.
    termination : str
        Why the run stopped.
    clamp_counts : list of int
        Floor-clamped rays per snapshot.
    wall_time : float
        Seconds spent stepping.
    """

    config: SimConfig
    spec: ProfileSpec
    snapshots: list = field(default_factory=list)
    steps: int = 0
    min_dt: float = math.nan
    termination: str = ""
    clamp_counts: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def completed(self) -> bool:
        return self.termination == "z_final reached"

    @property
    def initial(self) -> Wavefront:
        return self.snapshots[0]

    @property
    def final(self) -> Wavefront:
        return self.snapshots[-1]

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def series(self, name: str) -> np.ndarray:
        """Stack attribute ``name`` over snapshots into shape (snapshots, rays)."""
        return np.array([getattr(s, name) for s in self.snapshots])

    def add(self, wf: Wavefront) -> None:
        self.snapshots.append(wf.copy())
        self.clamp_counts.append(wf.clamped)


def _energy_model(wf: Wavefront, cfg: SimConfig) -> AmplitudeEnergy:
    key = ("energy", cfg.epsilon, cfg.stencil_width)
    model = wf.cache.get(key)
    if model is None:
        model = AmplitudeEnergy(wf.seed_x, wf.seed_r, cfg.epsilon, cfg.stencil_width)
        wf.cache[key] = model
    return model


def _medium_kick(cfg: SimConfig, x, z):
    if cfg.medium_gradient is None:
        return 0.0
    return 0.5 * np.asarray(cfg.medium_gradient(x, z), dtype=float)


def _acceleration(wf: Wavefront, cfg: SimConfig):
    """Acceleration of every ray at the current positions.

    For the energy model only the active rays are returned together with
    the slice that selects them.
    """
    if not cfg.wave_potential_enabled:
        return slice(None), np.zeros(wf.n) + _medium_kick(cfg, wf.x, wf.z)
    if cfg.force_model == "stencil":
        transport_amplitude(wf)
        compute_wave_potential(wf, cfg.stencil_width, cfg.r_floor)
        f = compute_force(wf, cfg.epsilon, cfg.stencil_width)
        return slice(None), f + _medium_kick(cfg, wf.x, wf.z)
    model = _energy_model(wf, cfg)
    act = model.active
    xa = wf.x[act]
    cached = wf.cache.get("force")
    if cached is not None and cached[0] is model and np.array_equal(cached[1], xa):
        f = cached[2]
    else:
        f = model.force(xa)
        wf.cache["force"] = (model, xa.copy(), f)
    return act, f + _medium_kick(cfg, xa, wf.z[act])


def _expand(wf: Wavefront, cfg: SimConfig, act: slice, v_act: np.ndarray) -> np.ndarray:
    if act == slice(None):
        return v_act
    return _energy_model(wf, cfg).expand(v_act)


def _advance(wf: Wavefront, cfg: SimConfig, dt: float, refresh: bool) -> Wavefront:
    out = wf.copy()
    act, f = _acceleration(out, cfg)
    p = out.px[act] + 0.5 * dt * f
    pf = _expand(out, cfg, act, p)
    if np.any(np.abs(pf) >= 1.0):
        raise ParaxialBreakdownError(f"|p_x| >= 1 at t={out.t:.17g}")
    out.x = _expand(out, cfg, act, out.x[act] + p * dt)
    out.z = out.z + np.sqrt(1.0 - pf**2) * dt
    out.t = wf.t + dt
    if cfg.force_model == "energy" or not cfg.wave_potential_enabled:
        d = np.diff(out.x)
        if not np.all(d > 0):
            k = int(np.argmin(d))
            raise RayCrossingError(
                f"rays {k} and {k + 1} crossed at t={out.t:.17g}", ids=(k, k + 1), t=out.t
            )
    act, f = _acceleration(out, cfg)
    p = p + 0.5 * dt * f
    out.px = _expand(out, cfg, act, p)
    if np.any(np.abs(out.px) >= 1.0):
        raise ParaxialBreakdownError(f"|p_x| >= 1 at t={out.t:.17g}")
    if refresh:
        transport_amplitude(out)
        compute_wave_potential(out, cfg.stencil_width, cfg.r_floor)
    return out


def step(wf: Wavefront, cfg: SimConfig, dt: Optional[float] = None) -> Wavefront:
    """Advance the front by one kick-drift-kick step.

    Parameters
    ----------
    wf : Wavefront
        Current front; left unchanged.
    cfg : SimConfig
        Settings; ``cfg.dt`` is used unless ``dt`` is given. A negative step
        runs the scheme backwards in time.

    Returns
    -------
    Wavefront
        The new front with amplitudes and wave potential refreshed.
    """
    if dt is None:
        dt = cfg.dt
    if dt is None:
        raise ValueError("no step size: set cfg.dt or pass dt")
    return _advance(wf, cfg, float(dt), refresh=True)


def run(cfg: SimConfig, spec: ProfileSpec) -> TrajectoryRecord:
    """Seed a front and step it until the median ray reaches ``z_final``.

    Raises
    ------
    RunAborted
        On ray crossing, paraxial breakdown or excessive stiffness. The
        exception carries the record up to the front where the run stopped,
        with the reason in ``termination``.
    """
    cfg = cfg.resolve(spec)
    wf = seed_wavefront(spec, cfg.n_rays, cfg.half_span, cfg.stencil_width, cfg.r_floor)
    rec = TrajectoryRecord(config=cfg, spec=spec)
    rec.add(wf)
    controlled = cfg.step_control == "stability" and cfg.wave_potential_enabled
    dt = cfg.dt
    dt_min = cfg.dt * 0.5**MAX_HALVINGS
    rec.min_dt = dt
    t0 = time.perf_counter()
    k = 0

    def finish(reason):
        rec.steps = k
        rec.wall_time = time.perf_counter() - t0
        rec.termination = reason
        if rec.snapshots[-1].t != wf.t:
            try:
                transport_amplitude(wf)
                compute_wave_potential(wf, cfg.stencil_width, cfg.r_floor)
            except RayCrossingError:
                # The front is no longer ordered: amplitudes are undefined.
                wf.r = np.full(wf.n, np.nan)
                wf.g = np.full(wf.n, np.nan)
            rec.add(wf)

    try:
        if cfg.wave_potential_enabled and cfg.force_model == "energy" and cfg.medium_gradient is None:
            wf, k, dt = _run_blocks(wf, cfg, rec, dt, dt_min, controlled)
        else:
            while np.median(wf.z) < cfg.z_final:
                if controlled:
                    dt = _controlled_dt(wf.x, dt, dt_min, cfg.epsilon, wf.t)
                    rec.min_dt = min(rec.min_dt, dt)
                wf = _advance(wf, cfg, dt, refresh=False)
                k += 1
                if k % cfg.record_every == 0:
                    _record(wf, cfg, rec)
    except (RayCrossingError, ParaxialBreakdownError, StiffnessError) as exc:
        if hasattr(exc, "front"):
            wf, k = exc.front, exc.steps
        finish(f"aborted: {exc}")
        raise RunAborted(rec.termination, rec) from exc
    finish("z_final reached")
    return rec


def _record(wf, cfg, rec):
    transport_amplitude(wf)
    compute_wave_potential(wf, cfg.stencil_width, cfg.r_floor)
    rec.add(wf)


def _controlled_dt(x, dt, dt_min, eps, t):
    """Halve ``dt`` until it is stable for the closest pair of rays in ``x``."""
    smin = float(np.min(np.diff(x)))
    while dt > stable_dt(smin, eps):
        dt *= 0.5
        if dt < dt_min:
            raise StiffnessError(
                f"ray spacing {smin:.3g} at t={t:.17g} needs a step below {dt_min:.3g}"
            )
    return dt


def _run_blocks(wf, cfg, rec, dt, dt_min, controlled):
    """Energy-force stepping in compiled blocks between snapshots."""
    model = _energy_model(wf, cfg)
    args = model.kernel_args
    wf = wf.copy()
    x, p, z = wf.x, wf.px, wf.z
    f = model.force(x[model.active])
    stability = STABILITY_FACTOR if controlled else 0.0
    k = 0
    since = 0
    while True:
        done, status, where = kernels.leapfrog_block(
            x, p, z, f, *args, dt, cfg.record_every - since, cfg.z_final, stability, cfg.epsilon
        )
        wf.t += done * dt
        k += done
        since += done
        if status == kernels.STATUS_UNSTABLE:
            try:
                dt = _controlled_dt(x, dt, dt_min, cfg.epsilon, wf.t)
            except StiffnessError as exc:
                exc.front, exc.steps = wf, k
                raise
            rec.min_dt = min(rec.min_dt, dt)
            continue
        if status in (kernels.STATUS_CROSSING, kernels.STATUS_PARAXIAL):
            if status == kernels.STATUS_CROSSING:
                exc = RayCrossingError(
                    f"rays {where} and {where + 1} crossed at t={wf.t:.17g}",
                    ids=(where, where + 1), t=wf.t,
                )
            else:
                exc = ParaxialBreakdownError(f"|p_x| >= 1 for ray {where} at t={wf.t:.17g}")
            exc.front, exc.steps = wf, k
            raise exc
        if since == cfg.record_every:
            _record(wf, cfg, rec)
            since = 0
        if status == kernels.STATUS_Z_FINAL:
            return wf, k, dt


def epsilon_from_optical(lambda0: float, w0: float) -> float:
    """Dimensionless wavelength ``lambda0 / w0``."""
    if not (lambda0 > 0 and w0 > 0):
        raise ValueError("wavelength and waist must be positive")
    return lambda0 / w0


def epsilon_from_quantum(mass: float, energy: float, w0: float, action_constant: float) -> float:
    """Dimensionless de Broglie wavelength ``2 pi a / (sqrt(2 m E) w0)``.

    Parameters
    ----------
    mass, energy : float
        Particle mass and kinetic energy.
    w0 : float
        Beam waist.
    action_constant : float
        Action quantum ``a`` (Planck's reduced constant for matter waves).
    """
    if not (mass > 0 and energy > 0 and w0 > 0 and action_constant > 0):
        raise ValueError("mass, energy, waist and action constant must be positive")
    return 2.0 * math.pi * action_constant / math.sqrt(2.0 * mass * energy) / w0
