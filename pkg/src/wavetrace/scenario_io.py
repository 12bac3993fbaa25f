"""Configuration parsing and run output formats.

Configuration files are flat ``key = value`` lines with ``#`` comments.
A profile is given either as ``preset = <name>`` or through the
``profile.*`` keys, never both.

Outputs are plain comma-separated text with 17 significant digits, so every
number re-parses to the exact double that was written.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, fields, replace

import numpy as np

from .dynamics import FORCE_MODELS, STEP_CONTROLS, SimConfig
from .profiles import PRESET_NAMES, SingleGaussian, SumCentered, SumPaired, preset
from .wavefront import Wavefront

TRAJECTORY_HEADER = ("ray_id", "t", "x", "z", "px", "pz", "r", "g")
PROFILE_HEADER = ("x", "intensity_initial", "intensity_final", "g_initial", "g_final")
PROFILE_KINDS = ("gaussian", "centered", "paired")
DEFAULT_L2_THRESHOLD = 0.10
DEFAULT_FRINGE_THRESHOLD = 0.10


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based, or 0 for whole-file issues."""

    def __init__(self, message: str, line: int = 0, source: str = "line"):
        where = f"{source} {line}: " if line else ""
        super().__init__(where + message)
        self.line = line


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _parse_choice(choices):
    def parse(text):
        if text not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {text!r}")
        return text

    return parse


_SIM_KEYS = {
    "epsilon": float,
    "n_rays": _parse_int,
    "half_span": float,
    "dt": float,
    "z_final": float,
    "record_every": _parse_int,
    "wave_potential_enabled": _parse_bool,
    "stencil_width": _parse_int,
    "r_floor": float,
    "force_model": _parse_choice(FORCE_MODELS),
    "step_control": _parse_choice(STEP_CONTROLS),
}
_PROFILE_KEYS = {
    "profile.kind": _parse_choice(PROFILE_KINDS),
    "profile.a": float,
    "profile.b": float,
    "profile.q": float,
    "profile.m": _parse_int,
    "profile.xc": float,
    "profile.x1": float,
}
_THRESHOLD_KEYS = {"l2_threshold": float, "fringe_threshold": float}
_ALL_KEYS = {"preset": _parse_choice(PRESET_NAMES), **_SIM_KEYS, **_PROFILE_KEYS, **_THRESHOLD_KEYS}
_PROFILE_FIELDS = {
    "centered": ("a", "b", "q", "m", "xc"),
    "paired": ("q", "m", "xc", "x1"),
    "gaussian": (),
}


@dataclass
class Scenario:
    """A parsed configuration: simulation settings, profile and thresholds."""

    config: SimConfig
    spec: object
    preset: str | None = None
    l2_threshold: float = DEFAULT_L2_THRESHOLD
    fringe_threshold: float = DEFAULT_FRINGE_THRESHOLD

    def resolved(self) -> "Scenario":
        return replace(self, config=self.config.resolve(self.spec))


def _entries(text: str, source: str = "line"):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        yield lineno, key, value


def _collect(pairs, source, values=None, lines=None):
    values = {} if values is None else values
    lines = {} if lines is None else lines
    for lineno, key, text in pairs:
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values and lines.get(key, (None, None))[1] == source:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        try:
            values[key] = _ALL_KEYS[key](text)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno, source) from None
        lines[key] = (lineno, source)
    return values, lines


def _build(values, lines) -> Scenario:
    def fail(message, key):
        lineno, source = lines.get(key, (0, "line"))
        raise ConfigError(message, lineno, source)

    profile_keys = [k for k in values if k.startswith("profile.")]
    name = values.get("preset")
    if name is not None and profile_keys:
        fail("'preset' and explicit profile keys are mutually exclusive", profile_keys[0])
    if name is not None:
        p = preset(name)
        spec = p.spec
        sim = {"epsilon": p.epsilon, "half_span": p.half_span}
    else:
        kind = values.get("profile.kind")
        if kind is None:
            raise ConfigError("no profile: give 'preset' or 'profile.kind'")
        wanted = _PROFILE_FIELDS[kind]
        for key in profile_keys:
            if key != "profile.kind" and key[len("profile.") :] not in wanted:
                fail(f"{key} does not apply to profile kind {kind!r}", key)
        missing = [f"profile.{f}" for f in wanted if f"profile.{f}" not in values]
        if missing:
            fail(f"profile kind {kind!r} needs {', '.join(missing)}", "profile.kind")
        kwargs = {f: values[f"profile.{f}"] for f in wanted}
        try:
            spec = {"gaussian": SingleGaussian, "centered": SumCentered, "paired": SumPaired}[kind](
                **kwargs
            )
        except ValueError as exc:
            fail(str(exc), profile_keys[-1])
        sim = {}
    for key in _SIM_KEYS:
        if key in values:
            sim[key] = values[key]
    cfg = SimConfig(**sim)
    try:
        cfg.validate()
    except ValueError as exc:
        first = str(exc).split()[0]
        bad = next((k for k in _SIM_KEYS if k == first and k in lines), None)
        fail(str(exc), bad)
    scenario = Scenario(cfg, spec, name)
    for key in _THRESHOLD_KEYS:
        if key in values:
            if not values[key] >= 0:
                fail(f"{key} must be non-negative", key)
            setattr(scenario, key, values[key])
    return scenario


def load_config(text: str, overrides=()) -> Scenario:
    """Parse configuration text, then apply ``key=value`` overrides.

    Parameters
    ----------
    text : str
        Configuration document.
    overrides : sequence of str
        Extra ``key=value`` assignments; they replace file values and are
        validated together with them.

    Returns
    -------
    Scenario
        Validated settings; unspecified keys keep their defaults.
    """
    values, lines = _collect(_entries(text), "line")
    over = "\n".join(overrides)
    if over:
        over_values, over_lines = _collect(_entries(over, "override"), "override")
        # An override of the profile source replaces the other source entirely.
        if "preset" in over_values:
            for k in [k for k in values if k.startswith("profile.")]:
                del values[k]
        if any(k.startswith("profile.") for k in over_values):
            values.pop("preset", None)
        values.update(over_values)
        lines.update(over_lines)
    return _build(values, lines)


def load_config_file(path, overrides=()) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read(), overrides)


def serialize_config(scenario: Scenario) -> str:
    """Configuration text that :func:`load_config` maps back to ``scenario``."""
    out = []
    spec = scenario.spec
    if scenario.preset is not None:
        out.append(f"preset = {scenario.preset}")
    else:
        kind = {SingleGaussian: "gaussian", SumCentered: "centered", SumPaired: "paired"}[type(spec)]
        out.append(f"profile.kind = {kind}")
        for f in _PROFILE_FIELDS[kind]:
            v = getattr(spec, f)
            out.append(f"profile.{f} = {v if f == 'm' else _fmt(v)}")
    cfg = scenario.config
    for f in fields(SimConfig):
        if f.name not in _SIM_KEYS:
            continue
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, (int, np.integer)) or isinstance(v, str):
            text = str(v)
        else:
            text = _fmt(v)
        out.append(f"{f.name} = {text}")
    out.append(f"l2_threshold = {_fmt(scenario.l2_threshold)}")
    out.append(f"fringe_threshold = {_fmt(scenario.fringe_threshold)}")
    return "\n".join(out) + "\n"


@contextmanager
def _sink(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            yield fh


def write_trajectories(record, sink) -> None:
    """Write every snapshot as ``ray_id,t,x,z,px,pz,r,g`` rows.

    Rows are ordered by snapshot, then by ray id.
    """
    if not record.snapshots:
        raise ValueError("record has no snapshots")
    with _sink(sink) as fh:
        fh.write(",".join(TRAJECTORY_HEADER) + "\n")
        for wf in record.snapshots:
            t = _fmt(wf.t)
            cols = (wf.x, wf.z, wf.px, wf.pz, wf.r, wf.g)
            lines = [
                f"{i},{t}," + ",".join(_fmt(c[i]) for c in cols) for i in range(wf.n)
            ]
            fh.write("\n".join(lines) + "\n")


def read_trajectories(source) -> dict:
    """Parse a trajectory file into arrays of shape (snapshots, rays).

    Returns
    -------
    dict
        Keys ``t`` (per snapshot) and ``x``, ``z``, ``px``, ``pz``, ``r``,
        ``g``.
    """
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected trajectory header {rows[0]}")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    ids = data[:, 0].astype(int)
    n = int(ids.max()) + 1
    if data.shape[0] % n:
        raise ValueError("row count is not a multiple of the ray count")
    data = data.reshape(-1, n, len(TRAJECTORY_HEADER))
    out = {"t": data[:, 0, 1]}
    for j, name in enumerate(TRAJECTORY_HEADER[2:], start=2):
        out[name] = data[:, :, j]
    return out


def _samples(pair, what):
    x, y = (np.asarray(v, dtype=float) for v in pair)
    if x.size == 0 or x.shape != y.shape:
        raise ValueError(f"{what} samples must be non-empty and of matching length")
    return x, y


def write_profiles(initial, final, g_initial, g_final, sink) -> None:
    """Write initial and final intensity and wave-potential profiles.

    Each argument is an ``(x, values)`` pair. Every column is resampled to
    the initial abscissae by linear interpolation when its own abscissae
    differ; outside its range a column holds zero (intensity) or ``nan``
    (wave potential).
    """
    x0, i0 = _samples(initial, "initial")
    xf, i_f = _samples(final, "final")
    xg0, g0 = _samples(g_initial, "g_initial")
    xgf, gf = _samples(g_final, "g_final")

    def on_initial(x, y, fill):
        if x.shape == x0.shape and np.array_equal(x, x0):
            return y
        return np.interp(x0, x, y, left=fill, right=fill)

    cols = (
        x0,
        i0,
        on_initial(xf, i_f, 0.0),
        on_initial(xg0, g0, math.nan),
        on_initial(xgf, gf, math.nan),
    )
    with _sink(sink) as fh:
        fh.write(",".join(PROFILE_HEADER) + "\n")
        rows = (",".join(_fmt(c[i]) for c in cols) for i in range(x0.shape[0]))
        fh.write("\n".join(rows) + "\n")


def profiles_of(record) -> tuple:
    """The four ``(x, values)`` pairs that :func:`write_profiles` expects."""
    a: Wavefront = record.initial
    b: Wavefront = record.final
    return (a.x, a.r**2), (b.x, b.r**2), (a.x, a.g), (b.x, b.g)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(e) for e in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(e) for e in v]
    if isinstance(v, dict):
        return {k: _jsonable(e) for k, e in v.items()}
    return v


def summary_dict(record, metrics=None) -> dict:
    """Summary fields in their fixed order; comparison keys only with ``metrics``."""
    from .oracles import perpendicularity_diagnostic

    drift = perpendicularity_diagnostic(record)["normalized"]
    drift = drift[np.isfinite(drift)]
    cfg = record.config
    out = {
        "config": cfg.as_dict(),
        "profile": profile_dict(record.spec),
        "steps": record.steps,
        "snapshots": len(record.snapshots),
        "min_dt": record.min_dt,
        "final_t": record.final.t,
        "final_median_z": float(np.median(record.final.z)),
        "termination": record.termination,
        "clamp_total": int(sum(record.clamp_counts)),
        "clamp_max": int(max(record.clamp_counts)),
        "g_drift_max": float(drift.max()) if drift.size else 0.0,
        "g_drift_median": float(np.median(drift)) if drift.size else 0.0,
        "wall_time": record.wall_time,
    }
    if metrics is not None:
        for key in (
            "l2_error",
            "fringe_spacing",
            "max_fringe_discrepancy",
            "fringe_mismatch",
            "ray_maxima",
            "oracle_maxima",
        ):
            out[key] = metrics[key]
    return out


def profile_dict(spec) -> dict:
    if isinstance(spec, SingleGaussian):
        return {"kind": "gaussian"}
    if isinstance(spec, SumCentered):
        return {"kind": "centered", "a": spec.a, "b": spec.b, "q": spec.q, "m": spec.m,
                "xc": spec.xc}
    return {"kind": "paired", "q": spec.q, "m": spec.m, "xc": spec.xc, "x1": spec.x1}


def write_summary(record, metrics, sink) -> None:
    """Write the run summary as JSON with a fixed key order.

    ``metrics`` is the result of :func:`wavetrace.oracles.compare_intensity`
    or ``None``; without it the comparison keys are left out entirely.
    """
    with _sink(sink) as fh:
        json.dump(_jsonable(summary_dict(record, metrics)), fh, indent=2)
        fh.write("\n")


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunBundle:
    """Files of one run: resolved configuration, manifest and checksum."""

    config_text: str
    files: list
    trajectory_sha256: str

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config_text, "files": self.files,
             "trajectory_sha256": self.trajectory_sha256},
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunBundle":
        d = json.loads(text)
        return cls(d["config"], d["files"], d["trajectory_sha256"])


def write_bundle(record, scenario: Scenario, out_dir, extra_files=()) -> RunBundle:
    """Write trajectories, profiles, summary and manifest into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    traj = os.path.join(out_dir, "trajectories.csv")
    write_trajectories(record, traj)
    write_profiles(*profiles_of(record), os.path.join(out_dir, "profiles.csv"))
    write_summary(record, None, os.path.join(out_dir, "summary.json"))
    resolved = replace(scenario, config=record.config)
    files = ["trajectories.csv", "profiles.csv", "summary.json", *extra_files, "manifest.json"]
    bundle = RunBundle(serialize_config(resolved), files, file_checksum(traj))
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(bundle.to_json())
    return bundle
