"""Wave front set detection for magnetic Schroedinger equations."""

from mswf._core import (
    Field,
    Grid,
    MswfError,
    VectorPotential,
    datum,
    discrete_delta,
    evolve,
    flow,
    gaussian,
    run_experiment,
    theorem_exponent,
    wf_test,
    wpt_gaussian,
)

__all__ = [
    "Field",
    "Grid",
    "MswfError",
    "VectorPotential",
    "datum",
    "discrete_delta",
    "evolve",
    "flow",
    "gaussian",
    "run_experiment",
    "theorem_exponent",
    "wf_test",
    "wpt_gaussian",
]
