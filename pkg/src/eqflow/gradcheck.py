"""Finite-difference oracles for the reverse-mode derivatives.

Central differences are computed directly from ``evaluate`` / ``integrate``
so they stay independent of the hand-written adjoint code they certify.
"""

from __future__ import annotations

import numpy as np

from .flows import Schedule, flow_vjp, integrate
from .layers import ControlLayer, evaluate, make_layer, random_layer
from .reports import VerificationReport, make_report
from .rng import substream

FD_STEP = 1e-5
GRAD_RTOL = 1e-5


def fd_layer_grads(
    layer: ControlLayer, x: np.ndarray, cotangent: np.ndarray, step: float = FD_STEP
) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of <cotangent, f_theta(x)> in theta and x."""

    def value(lay: ControlLayer, xx: np.ndarray) -> float:
        return float(np.sum(cotangent * evaluate(lay, xx)))

    gt = np.zeros(len(layer.theta))
    for k in range(len(layer.theta)):
        up = list(layer.theta)
        dn = list(layer.theta)
        up[k] += step
        dn[k] -= step
        lay_up = make_layer(layer.family, layer.dims, up, layer.activation)
        lay_dn = make_layer(layer.family, layer.dims, dn, layer.activation)
        gt[k] = (value(lay_up, x) - value(lay_dn, x)) / (2 * step)
    gx = np.zeros_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        gx[k] = (value(layer, xp) - value(layer, xm)) / (2 * step)
    return gt, gx


def fd_flow_grads(
    schedule: Schedule, x: np.ndarray, cotangent: np.ndarray, step: float = FD_STEP
) -> tuple[list[np.ndarray], np.ndarray]:
    """Central finite differences of <cotangent, flow(x)> in all parameters."""

    def value(sched: Schedule, xx: np.ndarray) -> float:
        return float(np.sum(cotangent * integrate(sched, xx).y))

    seg_grads = []
    segments = list(schedule.segments)
    for si, (layer, tau) in enumerate(segments):
        g = np.zeros(len(layer.theta))
        for k in range(len(layer.theta)):
            up = list(layer.theta)
            dn = list(layer.theta)
            up[k] += step
            dn[k] -= step
            segs_up = list(segments)
            segs_dn = list(segments)
            segs_up[si] = (make_layer(layer.family, layer.dims, up, layer.activation), tau)
            segs_dn[si] = (make_layer(layer.family, layer.dims, dn, layer.activation), tau)
            sched_up = Schedule(tuple(segs_up), schedule.steps_per_unit_time, schedule.method)
            sched_dn = Schedule(tuple(segs_dn), schedule.steps_per_unit_time, schedule.method)
            g[k] = (value(sched_up, x) - value(sched_dn, x)) / (2 * step)
        seg_grads.append(g)
    gx = np.zeros_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        gx[k] = (value(schedule, xp) - value(schedule, xm)) / (2 * step)
    return seg_grads, gx


def relative_gap(analytic: np.ndarray, oracle: np.ndarray, floor: float = 1e-6) -> float:
    analytic = np.asarray(analytic).ravel()
    oracle = np.asarray(oracle).ravel()
    if analytic.size == 0:
        return 0.0
    denom = max(float(np.max(np.abs(oracle))), floor)
    return float(np.max(np.abs(analytic - oracle))) / denom


def kink_safe_input(
    layer: ControlLayer, rng: np.random.Generator, scale: float = 1.0, margin: float = 1e-3
) -> np.ndarray:
    """An input whose pre-activations stay away from relu kinks.

    Resamples until every pre-activation magnitude exceeds ``margin``,
    so a central difference stencil cannot straddle the kink.
    """
    from .layers import preactivations

    for _ in range(500):
        x = rng.uniform(-scale, scale, size=layer.n)
        pre = preactivations(layer, x)
        if pre is None or np.all(np.abs(pre) > margin):
            return x
    raise RuntimeError("could not find a kink-safe input")


def check_gradients(
    family: str,
    dims: int | tuple[int, ...],
    instances: int = 100,
    seed: int = 0,
    tol: float = GRAD_RTOL,
    activation: str = "tanh",
    segments: int = 2,
    step: float = FD_STEP,
) -> VerificationReport:
    """flow_vjp against the central finite-difference oracle.

    Each instance is a random short schedule and input; the comparison
    covers every layer parameter and the input gradient.
    """
    rng = substream(seed, "gradcheck", family, activation)
    dims_t = (dims,) if isinstance(dims, int) else tuple(dims)
    failures = []
    worst = 0.0
    for k in range(instances):
        segs = tuple(
            (random_layer(family, dims_t, rng, activation), float(rng.choice([0.25, 0.5])))
            for _ in range(segments)
        )
        sched = Schedule(segs, steps_per_unit_time=4, method="euler")
        if activation == "relu":
            x = kink_safe_input(segs[0][0], rng)
        else:
            x = rng.uniform(-1.0, 1.0, size=segs[0][0].n)
        cot = rng.uniform(-1.0, 1.0, size=x.size)
        grads, gx = flow_vjp(sched, x, cot)
        fd_grads, fd_gx = fd_flow_grads(sched, x, cot, step=step)
        gaps = [relative_gap(g, f) for g, f in zip(grads, fd_grads)]
        gaps.append(relative_gap(gx, fd_gx))
        gap = max(gaps)
        worst = max(worst, gap)
        if gap > tol:
            failures.append({"instance": k, "gap": gap})
    return make_report(
        f"check_gradients[{family}/{activation}]",
        instances,
        failures,
        worst,
        tol,
        details={"fd_step": step},
    )
