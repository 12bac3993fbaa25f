"""Command-line front end.

::

    wavetrace presets
    wavetrace run     --preset fig2 --out runs/fig2 [--set key=value ...]
    wavetrace oracle  --preset fig2 --out runs/fig2
    wavetrace compare --out runs/fig2

``run`` and ``oracle`` accept ``--config FILE`` instead of ``--preset``.
``compare`` reads the run and oracle outputs from ``--out`` and exits
non-zero when a threshold fails.

Exit codes: 0 success, 1 comparison threshold failed, 2 bad input,
3 simulation aborted.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import oracles
from .dynamics import RunAborted, run
from .profiles import PRESET_NAMES, SingleGaussian, preset
from .scenario_io import (
    ConfigError,
    load_config,
    load_config_file,
    read_trajectories,
    serialize_config,
    write_bundle,
    _jsonable,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_ABORT = 0, 1, 2, 3
ORACLE_MAX_POINTS = 2**21
ORACLE_WINDOW_FLOOR = 1e-12
FAN_SEEDS = (0.25, 0.5, 1.0, 1.5)


class UsageError(Exception):
    pass


def _scenario(args):
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        return load_config_file(args.config, args.set)
    if args.preset:
        return load_config(f"preset = {args.preset}", args.set)
    raise UsageError("one of --config or --preset is required")


def _out_dir(args):
    if not args.out:
        raise UsageError("--out is required")
    os.makedirs(args.out, exist_ok=True)
    return args.out


PLOT_TEMPLATE = """\
# gnuplot script: trajectory fan and transverse profiles of one run.
set datafile separator ','
set terminal pngcairo size 1400,560
set output 'figure.png'
set multiplot layout 1,2
set title 'Ray trajectories'
set xlabel 'z'
set ylabel 'x'
plot for [i=0:{last}:{stride}] 'trajectories.csv' skip 1 every {n}::i using 4:3 \\
    with lines lc rgb '#1f4e79' notitle
set title 'Transverse profiles'
set xlabel 'x'
set ylabel 'intensity'
set y2label 'G'
set y2tics
set ytics nomirror
plot 'profiles.csv' skip 1 using 1:2 with lines lw 2 title 'initial intensity', \\
     '' skip 1 using 1:3 with lines dt 2 lw 2 title 'final intensity', \\
     '' skip 1 using 1:4 axes x1y2 with lines lc rgb '#888888' title 'initial G', \\
     '' skip 1 using 1:5 axes x1y2 with lines dt 3 lc rgb '#888888' title 'final G'
unset multiplot
"""


def plot_script(n_rays: int, shown: int = 41) -> str:
    """Gnuplot script drawing about ``shown`` trajectories and both profiles."""
    stride = max(1, (n_rays - 1) // max(shown - 1, 1))
    return PLOT_TEMPLATE.format(last=n_rays - 1, stride=stride, n=n_rays)


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        print(preset(name).describe())
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args)
    status = EXIT_OK
    try:
        record = run(scenario.config, scenario.spec)
    except RunAborted as exc:
        record = exc.record
        status = EXIT_ABORT
        print(f"run aborted: {record.termination}", file=sys.stderr)
    with open(os.path.join(out, "plot.gp"), "w", encoding="utf-8") as fh:
        fh.write(plot_script(record.config.n_rays))
    write_bundle(record, scenario, out, extra_files=["plot.gp"])
    print(
        f"{record.termination}: {record.steps} steps, t={record.final.t:.6g}, "
        f"median z={np.median(record.final.z):.6g}, wall {record.wall_time:.2f} s -> {out}"
    )
    return status


def _oracle_field(spec, eps, z):
    span, points = oracles.DEFAULT_GRID_SPAN, oracles.DEFAULT_GRID_POINTS
    while True:
        try:
            return oracles.oracle_field(spec, eps, z, span=span, n_points=points)
        except oracles.OracleResolutionError:
            if points >= ORACLE_MAX_POINTS:
                raise
            span, points = 2 * span, 2 * points


def cmd_oracle(args) -> int:
    scenario = _scenario(args).resolved()
    out = _out_dir(args)
    cfg, spec = scenario.config, scenario.spec
    f0 = oracles.launch_field(spec, cfg.epsilon)
    fz = _oracle_field(spec, cfg.epsilon, cfg.z_final)
    if fz.x.shape != f0.x.shape:
        f0 = oracles.launch_field(spec, cfg.epsilon, span=-2 * fz.x[0], n_points=fz.x.shape[0])
    i0, iz = f0.intensity, fz.intensity
    keep = np.flatnonzero(np.maximum(i0, iz) > ORACLE_WINDOW_FLOOR * max(i0.max(), iz.max()))
    lo, hi = keep[0], keep[-1] + 1
    with open(os.path.join(out, "oracle.csv"), "w", encoding="utf-8") as fh:
        fh.write("x,intensity_initial,intensity_final\n")
        for x, a, b in zip(fz.x[lo:hi], i0[lo:hi], iz[lo:hi]):
            fh.write(f"{x:.17g},{a:.17g},{b:.17g}\n")
    meta = {"epsilon": cfg.epsilon, "z": cfg.z_final, "config": serialize_config(scenario)}
    with open(os.path.join(out, "oracle.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    if isinstance(spec, SingleGaussian):
        zs = np.linspace(0.0, cfg.z_final, 401)
        with open(os.path.join(out, "waist.csv"), "w", encoding="utf-8") as fh:
            fh.write("z," + ",".join(f"x0_{s:g}" for s in FAN_SEEDS) + "\n")
            for z in zs:
                row = [oracles.gaussian_ray_oracle(s, z, cfg.epsilon) for s in FAN_SEEDS]
                fh.write(f"{z:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    print(f"oracle field at z={cfg.z_final:.6g} on {hi - lo} points -> {out}")
    return EXIT_OK


def _read_oracle(out):
    path = os.path.join(out, "oracle.csv")
    meta_path = os.path.join(out, "oracle.json")
    if not (os.path.exists(path) and os.path.exists(meta_path)):
        raise UsageError(f"no oracle output in {out}; run the 'oracle' verb first")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    return data, meta


def cmd_compare(args) -> int:
    out = args.out
    if not out:
        raise UsageError("--out is required")
    manifest = os.path.join(out, "manifest.json")
    traj_path = os.path.join(out, "trajectories.csv")
    if not (os.path.exists(manifest) and os.path.exists(traj_path)):
        raise UsageError(f"no run output in {out}; run the 'run' verb first")
    with open(manifest, encoding="utf-8") as fh:
        scenario = load_config(json.load(fh)["config"], args.set)
    data, meta = _read_oracle(out)
    eps = scenario.config.epsilon
    if not math.isclose(meta["epsilon"], eps, rel_tol=1e-12):
        raise UsageError(f"epsilon mismatch: run {eps:g}, oracle {meta['epsilon']:g}")
    traj = read_trajectories(traj_path)
    final_z = float(np.median(traj["z"][-1]))
    if not math.isclose(meta["z"], scenario.config.z_final, rel_tol=1e-12):
        raise UsageError(
            f"propagation distance mismatch: run z_final {scenario.config.z_final:g}, "
            f"oracle {meta['z']:g}"
        )
    field = oracles.FieldGrid(data[:, 0], np.sqrt(data[:, 2]).astype(complex), meta["z"], eps)
    metrics = oracles.compare_intensity(traj["x"][-1], traj["r"][-1] ** 2, field)
    metrics["final_median_z"] = final_z
    l2_ok = metrics["l2_error"] <= scenario.l2_threshold
    fringe_ok = (
        not metrics["fringe_mismatch"]
        and metrics["max_fringe_discrepancy"] <= scenario.fringe_threshold
    )
    reached = final_z >= meta["z"] * (1 - 1e-9)
    passed = l2_ok and fringe_ok and reached
    report = {
        "passed": passed,
        "l2_threshold": scenario.l2_threshold,
        "fringe_threshold": scenario.fringe_threshold,
        "reached_z_final": reached,
        **metrics,
    }
    with open(os.path.join(out, "compare.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2)
        fh.write("\n")
    summary_path = os.path.join(out, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path, encoding="utf-8") as fh:
            summary = json.load(fh)
        for key in ("l2_error", "fringe_spacing", "max_fringe_discrepancy", "fringe_mismatch",
                    "ray_maxima", "oracle_maxima"):
            summary[key] = _jsonable(metrics[key])
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    verdict = "PASS" if passed else "FAIL"
    print(
        f"{verdict}: l2_error={metrics['l2_error']:.4g} (<= {scenario.l2_threshold:g}), "
        f"fringe discrepancy={metrics['max_fringe_discrepancy']:.4g} "
        f"(<= {scenario.fringe_threshold:g}), reached z_final: {reached}"
    )
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavetrace", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    helps = {
        "run": "simulate a beam and write trajectories, profiles, summary and plot script",
        "oracle": "propagate the launch field with the angular-spectrum oracle",
        "compare": "compare a run with its oracle output and apply thresholds",
        "presets": "list the named presets",
    }
    for verb, text in helps.items():
        p = sub.add_parser(verb, help=text, description=text)
        if verb != "presets":
            p.add_argument("--config", help="configuration file")
            p.add_argument("--preset", help=f"preset name ({', '.join(PRESET_NAMES)})")
            p.add_argument("--out", help="output directory")
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override a configuration key (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "oracle": cmd_oracle, "compare": cmd_compare,
               "presets": cmd_presets}[args.verb]
    try:
        return handler(args)
    except (UsageError, ConfigError, KeyError, oracles.OracleResolutionError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
