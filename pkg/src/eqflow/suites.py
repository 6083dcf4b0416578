"""Reusable verification sweeps shared by the CLI and the acceptance tests."""

from __future__ import annotations

import numpy as np

from .checks import FLOW_EQUIVARIANCE_TOL, EQUIVARIANCE_TOL
from .flows import Schedule, integrate
from .layers import declared_group_spec, evaluate, random_layer
from .perm_groups import parse_group_spec
from .reports import VerificationReport, make_report
from .rng import substream

# Family -> default grid used by the symmetry and gradient sweeps.
# Degrees / flattened dims stay <= 6 so the full groups are enumerable fast.
SWEEP_DIMS: dict[str, tuple[int, ...]] = {
    "conv1": (5,),
    "conv2": (5,),
    "fs1": (5,),
    "fs2": (5,),
    "janossy1": (5,),
    "janossy2": (5,),
    "fsmax": (5,),
    "prod2d_1": (2, 3),
    "prod2d_2": (2, 3),
    "prodkd_1": (2, 3),
    "prodkd_2": (2, 3),
    "gamma1": (5,),
}

# 2D grid variants exercised in addition to the defaults.
EXTRA_SWEEP_DIMS: dict[str, tuple[int, ...]] = {
    "conv1": (2, 3),
    "conv2": (2, 3),
}


def layer_symmetry_sweep(
    family: str,
    dims: tuple[int, ...],
    samples: int = 200,
    tol: float = EQUIVARIANCE_TOL,
    seed: int = 0,
    activation: str = "tanh",
) -> VerificationReport:
    """Worst equivariance gap over random (theta, x, g) triples."""
    rng = substream(seed, "layer-symmetry", family, "x".join(map(str, dims)))
    worst = 0.0
    failures = []
    group = None
    for k in range(samples):
        layer = random_layer(family, dims, rng, activation)
        if group is None:
            group = parse_group_spec(declared_group_spec(layer))
        x = rng.uniform(-1.5, 1.5, size=layer.n)
        g = group.random_element(rng)
        cols = list(g.word)
        gap = float(np.max(np.abs(evaluate(layer, x[cols]) - evaluate(layer, x)[cols])))
        worst = max(worst, gap)
        if gap > tol:
            failures.append({"sample": k, "gap": gap, "g": str(g)})
    return make_report(
        f"layer_symmetry[{family}]", samples, failures, worst, tol,
        details={"group": group.descriptor, "dims": "x".join(map(str, dims))},
    )


def flow_symmetry_sweep(
    family: str,
    dims: tuple[int, ...],
    samples: int = 200,
    tol: float = FLOW_EQUIVARIANCE_TOL,
    seed: int = 0,
    activation: str = "tanh",
    segments: int = 3,
) -> VerificationReport:
    """Worst equivariance gap of random discrete flows over random triples."""
    rng = substream(seed, "flow-symmetry", family, "x".join(map(str, dims)))
    worst = 0.0
    failures = []
    group = None
    for k in range(samples):
        segs = tuple(
            (random_layer(family, dims, rng, activation), float(rng.choice([0.25, 0.5, 1.0])))
            for _ in range(segments)
        )
        sched = Schedule(segs, steps_per_unit_time=4, method="euler")
        if group is None:
            group = parse_group_spec(sched.group_spec)
        x = rng.uniform(-1.0, 1.0, size=sched.n)
        g = group.random_element(rng)
        cols = list(g.word)
        gap = float(np.max(np.abs(integrate(sched, x[cols]).y - integrate(sched, x).y[cols])))
        worst = max(worst, gap)
        if gap > tol:
            failures.append({"sample": k, "gap": gap, "g": str(g)})
    return make_report(
        f"flow_symmetry[{family}]", samples, failures, worst, tol,
        details={"group": group.descriptor, "dims": "x".join(map(str, dims))},
    )
