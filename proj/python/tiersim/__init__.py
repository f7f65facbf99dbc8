"""Tiered body sensor node simulator."""

from ._tiersim import *  # noqa: F401,F403
from ._tiersim import __doc__  # noqa: F401


def simulate(tiers=(1, 2, 3), runs=3, seed=1, spec=None):
    """Run an experiment over generated traces and return the result."""
    cfg = ExperimentConfig()  # noqa: F405
    cfg.tiers = [Tier(t) if isinstance(t, int) else t for t in tiers]  # noqa: F405
    cfg.runs = runs
    cfg.base_seed = seed
    if spec is not None:
        cfg.trace_spec = spec
    return run_experiment(cfg)  # noqa: F405
