"""Wave-trajectory simulation of diffracting monochromatic beams."""

from ._backend import BACKEND
from .dynamics import SimConfig, TrajectoryRecord, run, step
from .profiles import SingleGaussian, SumCentered, SumPaired, eval_profile, preset

__all__ = [
    "BACKEND",
    "SimConfig",
    "TrajectoryRecord",
    "run",
    "step",
    "SingleGaussian",
    "SumCentered",
    "SumPaired",
    "eval_profile",
    "preset",
]

__version__ = "0.1.0"
