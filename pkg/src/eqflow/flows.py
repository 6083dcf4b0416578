"""Discretized flow maps of control layers.

A schedule is the discrete counterpart of an attainable-set element: an
ordered list of (layer, duration) segments integrated with a single-step
scheme (forward Euler or classical RK4).  Durations are split into
``ceil(duration * steps_per_unit_time)`` uniform substeps.  With
``steps_per_unit_time = 1`` and unit durations the Euler scheme is
exactly a residual network, one layer per step.

Gradients are computed by the discrete adjoint: a backward sweep over the
stored trajectory chaining the per-layer reverse-mode derivatives, i.e.
we differentiate the scheme that is actually run, not the continuous
flow it approximates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .layers import ControlLayer, declared_group_spec, evaluate, layer_vjp

BLOWUP_LIMIT = 1e8
DEFAULT_STEPS_PER_UNIT_TIME = 100


class FlowBlowUpError(RuntimeError):
    """State left the trust region (non-finite or huge) during integration."""

    def __init__(self, step: int, norm: float):
        super().__init__(f"state blew up at step {step} (|state|_inf = {norm:.3e})")
        self.step = step
        self.norm = norm


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant control: ordered (layer, duration) segments."""

    segments: tuple[tuple[ControlLayer, float], ...]
    steps_per_unit_time: int = DEFAULT_STEPS_PER_UNIT_TIME
    method: str = "euler"

    def __post_init__(self) -> None:
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if self.steps_per_unit_time < 1:
            raise ValueError("steps_per_unit_time must be >= 1")
        specs = set()
        for layer, tau in self.segments:
            if not (math.isfinite(tau) and tau >= 0.0):
                raise ValueError(f"bad segment duration {tau!r}")
            specs.add((layer.n, declared_group_spec(layer)))
        if len(specs) > 1:
            raise ValueError(f"segments mix degrees or declared groups: {sorted(specs)}")

    @property
    def n(self) -> int:
        if not self.segments:
            raise ValueError("empty schedule has no degree")
        return self.segments[0][0].n

    @property
    def group_spec(self) -> str:
        return declared_group_spec(self.segments[0][0])

    def total_time(self) -> float:
        return sum(tau for _, tau in self.segments)

    def concat(self, other: "Schedule") -> "Schedule":
        if (other.steps_per_unit_time, other.method) != (self.steps_per_unit_time, self.method):
            raise ValueError("can only concatenate schedules with the same stepping")
        return replace(self, segments=self.segments + other.segments)

    def with_steps(self, steps_per_unit_time: int) -> "Schedule":
        return replace(self, steps_per_unit_time=steps_per_unit_time)


@dataclass
class FlowResult:
    y: np.ndarray
    steps: int
    trajectory: list[np.ndarray] | None = None


def euler_step(layer: ControlLayer, x: np.ndarray, t: float) -> np.ndarray:
    """x + t f(x)."""
    if t < 0:
        raise ValueError("step size must be >= 0")
    return x + t * evaluate(layer, x)


def rk4_step(layer: ControlLayer, x: np.ndarray, t: float) -> np.ndarray:
    """Classical 4-stage Runge-Kutta step."""
    if t < 0:
        raise ValueError("step size must be >= 0")
    k1 = evaluate(layer, x)
    k2 = evaluate(layer, x + 0.5 * t * k1)
    k3 = evaluate(layer, x + 0.5 * t * k2)
    k4 = evaluate(layer, x + t * k3)
    return x + (t / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segment_plan(schedule: Schedule) -> list[tuple[ControlLayer, float, int]]:
    plan = []
    for layer, tau in schedule.segments:
        if tau == 0.0:
            continue
        steps = int(math.ceil(tau * schedule.steps_per_unit_time))
        plan.append((layer, tau / steps, steps))
    return plan


def _guard(x: np.ndarray, step: int) -> None:
    norm = float(np.max(np.abs(x))) if x.size else 0.0
    if not np.isfinite(norm) or norm > BLOWUP_LIMIT:
        raise FlowBlowUpError(step, norm)


def integrate(
    schedule: Schedule,
    x: np.ndarray | Sequence[float],
    record: bool = False,
    sign: float = 1.0,
) -> FlowResult:
    """Run the discrete flow from x; batched over leading axes.

    ``sign = -1`` integrates the negated vector fields (used by the
    inverse flow).  With ``record`` the full state trajectory is kept for
    the adjoint sweep.
    """
    x = np.asarray(x, dtype=float)
    step_fn = euler_step if schedule.method == "euler" else rk4_step
    traj = [x] if record else None
    count = 0
    for layer, h, steps in _segment_plan(schedule):
        for _ in range(steps):
            if sign == 1.0:
                x = step_fn(layer, x, h)
            else:
                # negated field: x + h * sign * f(x) and the RK4 analogue
                x = _signed_step(step_fn, layer, x, h, sign)
            count += 1
            _guard(x, count)
            if record:
                traj.append(x)
    return FlowResult(y=x, steps=count, trajectory=traj)


def _signed_step(step_fn, layer: ControlLayer, x: np.ndarray, h: float, sign: float) -> np.ndarray:
    if step_fn is euler_step:
        return x + h * sign * evaluate(layer, x)
    k1 = sign * evaluate(layer, x)
    k2 = sign * evaluate(layer, x + 0.5 * h * k1)
    k3 = sign * evaluate(layer, x + 0.5 * h * k2)
    k4 = sign * evaluate(layer, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def inverse_integrate(schedule: Schedule, y: np.ndarray | Sequence[float]) -> np.ndarray:
    """Integrate the negated fields over the reversed segments.

    This is the discrete counterpart of the inverse flow; the round trip
    inverse(forward(x)) -> x converges as steps are refined.
    """
    rev = replace(schedule, segments=tuple(reversed(schedule.segments)))
    return integrate(rev, y, sign=-1.0).y


@dataclass
class RefinementStudy:
    step_counts: list[int]
    errors: list[float]
    orders: list[float]
    exact: bool

    def rows(self) -> list[tuple[int, float, float]]:
        out = []
        for i, (steps, err) in enumerate(zip(self.step_counts, self.errors)):
            order = self.orders[i - 1] if 0 < i <= len(self.orders) else float("nan")
            out.append((steps, err, order))
        return out


def refinement_study(
    schedule: Schedule, x: np.ndarray, levels: int = 4, ref_extra: int = 4
) -> RefinementStudy:
    """Observed convergence order by step doubling.

    Integrates with steps_per_unit_time scaled by 1, 2, 4, ... for
    ``levels`` levels; the error reference is the finest level, taken
    ``ref_extra`` extra doublings beyond the last study level so the
    reference bias does not contaminate the order estimates.  The
    observed order between consecutive levels is log2 of the error ratio.
    """
    if levels < 2:
        raise ValueError("need at least two refinement levels")
    x = np.asarray(x, dtype=float)
    results = []
    counts = []
    for k in range(levels):
        sched_k = schedule.with_steps(schedule.steps_per_unit_time * 2**k)
        res = integrate(sched_k, x)
        results.append(res.y)
        counts.append(res.steps)
    ref_spt = schedule.steps_per_unit_time * 2 ** (levels - 1 + ref_extra)
    ref = integrate(schedule.with_steps(ref_spt), x).y
    errors = [float(np.max(np.abs(y - ref))) for y in results]
    if all(e == 0.0 for e in errors):
        return RefinementStudy(counts, errors, [], exact=True)
    orders = []
    for e0, e1 in zip(errors[:-1], errors[1:]):
        if e1 == 0.0 or e0 == 0.0:
            orders.append(float("nan"))
        else:
            orders.append(math.log2(e0 / e1))
    return RefinementStudy(counts, errors, orders, exact=False)


def flow_backward(
    schedule: Schedule,
    trajectory: list[np.ndarray],
    cotangent: np.ndarray,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Adjoint sweep over a recorded trajectory.

    Returns per-segment parameter gradients (summed over any batch) and
    the gradient with respect to the initial state.
    """
    plan = _segment_plan(schedule)
    grads = [np.zeros(len(layer.theta)) for layer, _ in schedule.segments]
    seg_of_plan = []
    idx = 0
    for layer, tau in schedule.segments:
        if tau != 0.0:
            seg_of_plan.append(idx)
        idx += 1

    c = np.asarray(cotangent, dtype=float)
    pos = len(trajectory) - 1
    for plan_idx in range(len(plan) - 1, -1, -1):
        layer, h, steps = plan[plan_idx]
        seg_idx = seg_of_plan[plan_idx]
        for _ in range(steps):
            pos -= 1
            x0 = trajectory[pos]
            if schedule.method == "euler":
                gtheta, gx = layer_vjp(layer, x0, c)
                grads[seg_idx] += h * gtheta
                c = c + h * gx
            else:
                gtheta, c = _rk4_step_vjp(layer, x0, h, c)
                grads[seg_idx] += gtheta
    return grads, c


def _rk4_step_vjp(
    layer: ControlLayer, x: np.ndarray, h: float, c: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    k1 = evaluate(layer, x)
    u2 = x + 0.5 * h * k1
    k2 = evaluate(layer, u2)
    u3 = x + 0.5 * h * k2
    k3 = evaluate(layer, u3)
    u4 = x + h * k3

    gx = c.copy()
    ck1 = (h / 6.0) * c
    ck2 = (h / 3.0) * c
    ck3 = (h / 3.0) * c
    ck4 = (h / 6.0) * c

    gtheta4, gu4 = layer_vjp(layer, u4, ck4)
    gx = gx + gu4
    ck3 = ck3 + h * gu4

    gtheta3, gu3 = layer_vjp(layer, u3, ck3)
    gx = gx + gu3
    ck2 = ck2 + 0.5 * h * gu3

    gtheta2, gu2 = layer_vjp(layer, u2, ck2)
    gx = gx + gu2
    ck1 = ck1 + 0.5 * h * gu2

    gtheta1, gu1 = layer_vjp(layer, x, ck1)
    gx = gx + gu1

    return gtheta1 + gtheta2 + gtheta3 + gtheta4, gx


def flow_vjp(
    schedule: Schedule,
    x: np.ndarray | Sequence[float],
    cotangent: np.ndarray | Sequence[float],
) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse-mode gradient of <cotangent, integrate(schedule, x).y>.

    Returns one parameter-gradient vector per segment plus the gradient
    with respect to x.  Uses full checkpointing of the forward states.
    """
    x = np.asarray(x, dtype=float)
    cot = np.asarray(cotangent, dtype=float)
    if cot.shape != x.shape:
        raise ValueError("cotangent shape must match input shape")
    res = integrate(schedule, x, record=True)
    return flow_backward(schedule, res.trajectory, cot)


# ---------------------------------------------------------------------------
# Serialization


def schedule_to_text(schedule: Schedule) -> str:
    from .layers import layer_to_text

    lines = [f"integrator {schedule.method} steps_per_unit_time {schedule.steps_per_unit_time}"]
    for layer, tau in schedule.segments:
        lines.append(f"segment {tau!r} | {layer_to_text(layer)}")
    return "\n".join(lines) + "\n"


def schedule_from_text(text: str) -> Schedule:
    from .layers import layer_from_text

    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "integrator" or head[2] != "steps_per_unit_time":
        raise ValueError(f"bad schedule header: {lines[0]!r}")
    method, spt = head[1], int(head[3])
    segments = []
    for ln in lines[1:]:
        if not ln.startswith("segment "):
            raise ValueError(f"bad segment record: {ln!r}")
        dur_s, layer_s = ln[len("segment ") :].split(" | ", 1)
        segments.append((layer_from_text(layer_s), float(dur_s)))
    return Schedule(tuple(segments), steps_per_unit_time=spt, method=method)
