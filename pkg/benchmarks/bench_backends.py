"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_backends.py [--rays 401] [--steps 2000] [--repeat 3]

Each backend is timed on the force evaluation alone and on a block of
leapfrog steps over the same single-Gaussian front. The final states of the
two blocks are compared so that a speedup never hides a divergence.
"""

import argparse
import timeit

import numpy as np

from wavetrace import SimConfig, SingleGaussian, _kernels_py
from wavetrace._backend import get_kernels
from wavetrace.coupling import AmplitudeEnergy
from wavetrace.wavefront import seed_wavefront


def setup(n_rays):
    spec = SingleGaussian()
    cfg = SimConfig(n_rays=n_rays).resolve(spec)
    wf = seed_wavefront(spec, cfg.n_rays, cfg.half_span, cfg.stencil_width, cfg.r_floor)
    return cfg, wf, AmplitudeEnergy(wf.x, wf.r, cfg.epsilon, width=cfg.stencil_width)


def leapfrog(mod, cfg, wf, model, steps):
    x, p, z = wf.x.copy(), np.zeros(wf.n), np.zeros(wf.n)
    f = mod.active_force(x, *model.kernel_args)
    mod.leapfrog_block(x, p, z, f, *model.kernel_args, cfg.dt, steps, 1e300, 0.0, cfg.epsilon)
    return x, p


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--rays", type=int, default=401)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = {"numpy": _kernels_py}
    try:
        backends["cython"] = get_kernels("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")

    cfg, wf, model = setup(args.rays)
    print(f"{args.rays} rays, dt={cfg.dt:.4g}, {args.steps} leapfrog steps per block")
    print(f"{'backend':<8} {'force (us)':>12} {'block (s)':>10} {'us/step':>9}")
    timings, finals = {}, {}
    for name, mod in backends.items():
        force = min(timeit.repeat(lambda: mod.active_force(wf.x, *model.kernel_args),
                                  number=200, repeat=args.repeat)) / 200
        block = min(timeit.repeat(lambda: leapfrog(mod, cfg, wf, model, args.steps),
                                  number=1, repeat=args.repeat))
        finals[name] = leapfrog(mod, cfg, wf, model, args.steps)
        timings[name] = block
        print(f"{name:<8} {force * 1e6:12.1f} {block:10.3f} {block / args.steps * 1e6:9.1f}")

    if "cython" in timings:
        dx = np.max(np.abs(finals["cython"][0] - finals["numpy"][0]))
        print(f"speedup {timings['numpy'] / timings['cython']:.1f}x, "
              f"max |x_cython - x_numpy| = {dx:.2e}")


if __name__ == "__main__":
    main()
