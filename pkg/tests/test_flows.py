"""Discrete flows: steps, schedules, inversion, convergence, adjoint."""

import numpy as np
import pytest

from eqflow.flows import (
    FlowBlowUpError,
    Schedule,
    euler_step,
    flow_vjp,
    integrate,
    inverse_integrate,
    refinement_study,
    rk4_step,
    schedule_from_text,
    schedule_to_text,
)
from eqflow.gradcheck import fd_flow_grads, relative_gap
from eqflow.layers import make_layer, random_layer
from eqflow.perm_groups import parse_group_spec
from eqflow.rng import substream


def _linear(n, lam):
    return make_layer("linear", n, [lam])


def test_euler_step_examples():
    lay = _linear(1, 1.0)
    assert euler_step(lay, np.array([1.0]), 0.1) == pytest.approx([1.1])
    x = np.array([0.5, -0.25])
    assert np.array_equal(euler_step(_linear(2, 3.0), x, 0.0), x)
    assert np.array_equal(euler_step(_linear(2, 0.0), x, 5.0), x)
    with pytest.raises(ValueError):
        euler_step(lay, np.array([1.0]), -0.1)


def test_rk4_step_examples():
    lay = _linear(1, 1.0)
    one = rk4_step(lay, np.array([1.0]), 1.0)
    assert abs(one[0] - np.e) < 1e-2
    sched = Schedule(((lay, 1.0),), steps_per_unit_time=100, method="rk4")
    assert abs(integrate(sched, np.array([1.0])).y[0] - np.e) < 1e-8
    x = np.array([2.0])
    assert np.array_equal(rk4_step(lay, x, 0.0), x)


def test_rk4_matches_euler_to_second_order():
    rng = substream(0, "rk4-euler")
    lay = random_layer("fs1", 3, rng)
    x = rng.uniform(-1, 1, 3)
    for t in (1e-2, 1e-3):
        gap = np.max(np.abs(rk4_step(lay, x, t) - euler_step(lay, x, t)))
        assert gap < 5.0 * t**2


def test_integrate_empty_schedule():
    sched = Schedule((), steps_per_unit_time=10)
    x = np.array([1.0, 2.0])
    res = integrate(sched, x)
    assert np.array_equal(res.y, x) and res.steps == 0


def test_integrate_zero_field():
    sched = Schedule(((_linear(3, 0.0), 2.0),), steps_per_unit_time=7)
    x = np.array([1.0, -1.0, 0.5])
    assert np.array_equal(integrate(sched, x).y, x)


def test_integrate_zero_duration_segment():
    lay = _linear(2, 1.0)
    sched = Schedule(((lay, 0.0),), steps_per_unit_time=10)
    x = np.array([1.0, 2.0])
    assert np.array_equal(integrate(sched, x).y, x)


def test_gamma1_euler_preserves_differences():
    """Each Euler step adds the same increment to every coordinate."""
    rng = substream(1, "gamma")
    lay = make_layer("gamma1", 3, [])
    sched = Schedule(((lay, 1.0),), steps_per_unit_time=4)
    # dyadic data keeps the arithmetic exact, so equality is bitwise
    x = rng.integers(-2**21, 2**21, size=3) / 2**20
    y = integrate(sched, x).y
    diffs = lambda v: v[:, None] - v[None, :]
    assert np.array_equal(diffs(y), diffs(x))


def test_schedule_validation():
    lay3 = _linear(3, 1.0)
    with pytest.raises(ValueError):
        Schedule(((lay3, -1.0),))
    with pytest.raises(ValueError):
        Schedule(((lay3, 1.0),), steps_per_unit_time=0)
    with pytest.raises(ValueError):
        Schedule(((lay3, 1.0),), method="verlet")
    rng = substream(2, "mix")
    conv = random_layer("conv1", 3, rng)
    fs = random_layer("fs1", 3, rng)
    with pytest.raises(ValueError, match="mix"):
        Schedule(((conv, 1.0), (fs, 1.0)))


def test_blow_up_guard():
    sched = Schedule(((_linear(2, 40.0), 10.0),), steps_per_unit_time=2)
    with pytest.raises(FlowBlowUpError) as err:
        integrate(sched, np.array([1.0, 1.0]))
    assert err.value.step > 0


def test_inverse_integrate_round_trips():
    x = np.array([1.0, -0.5, 0.25])
    lay = _linear(3, 1.0)
    zero = _linear(3, 0.0)
    # zero field: exact identity
    sz = Schedule(((zero, 1.0),), steps_per_unit_time=10)
    assert np.array_equal(inverse_integrate(sz, integrate(sz, x).y), x)
    # euler at 1e3 steps
    se = Schedule(((lay, 1.0),), steps_per_unit_time=1000)
    err = np.max(np.abs(inverse_integrate(se, integrate(se, x).y) - x))
    assert err < 1e-3
    # rk4 at 1e2 steps
    sr = Schedule(((lay, 1.0),), steps_per_unit_time=100, method="rk4")
    err = np.max(np.abs(inverse_integrate(sr, integrate(sr, x).y) - x))
    assert err < 1e-9


def test_round_trip_improves_with_refinement():
    x = np.array([1.0, -0.5, 0.25])
    lay = _linear(3, 1.0)
    errs = []
    for steps in (10, 100, 1000):
        s = Schedule(((lay, 1.0),), steps_per_unit_time=steps)
        errs.append(np.max(np.abs(inverse_integrate(s, integrate(s, x).y) - x)))
    assert errs[0] > errs[1] > errs[2]


def test_refinement_study_orders():
    x = np.array([1.0, -0.5, 0.25])
    lay = _linear(3, 1.0)
    st = refinement_study(Schedule(((lay, 1.0),), steps_per_unit_time=8), x, levels=4)
    assert all(0.8 <= o <= 1.2 for o in st.orders)
    st = refinement_study(
        Schedule(((lay, 1.0),), steps_per_unit_time=8, method="rk4"), x, levels=4
    )
    assert all(3.5 <= o <= 4.5 for o in st.orders)


def test_refinement_study_smooth_random_layers():
    rng = substream(3, "refine")
    lay = random_layer("fs2", 3, rng, "tanh")
    st = refinement_study(Schedule(((lay, 1.0),), steps_per_unit_time=8), rng.uniform(-1, 1, 3), levels=4)
    assert all(0.8 <= o <= 1.2 for o in st.orders)


def test_refinement_study_zero_field_exact():
    st = refinement_study(
        Schedule(((_linear(2, 0.0), 1.0),), steps_per_unit_time=4), np.array([1.0, 2.0]), levels=3
    )
    assert st.exact and all(e == 0.0 for e in st.errors)


def test_monotone_refinement_on_linear_benchmark():
    x = np.array([1.0, -0.5, 0.25])
    lay = _linear(3, 1.0)
    truth = np.e * x
    errs = []
    for k in range(5):
        s = Schedule(((lay, 1.0),), steps_per_unit_time=8 * 2**k)
        errs.append(np.max(np.abs(integrate(s, x).y - truth)))
    assert all(e0 > e1 for e0, e1 in zip(errs, errs[1:]))


def test_composition_closure_bitwise():
    rng = substream(4, "concat")
    a = random_layer("conv1", 4, rng)
    b = random_layer("conv1", 4, rng)
    sa = Schedule(((a, 0.5),), steps_per_unit_time=10)
    sb = Schedule(((b, 0.75),), steps_per_unit_time=10)
    x = rng.uniform(-1, 1, 4)
    assert np.array_equal(integrate(sb, integrate(sa, x).y).y, integrate(sa.concat(sb), x).y)


@pytest.mark.parametrize("family", ["conv1", "fs1", "janossy2", "prod2d_2", "gamma1"])
def test_flow_equivariance(family):
    rng = substream(5, "flow-equi", family)
    dims = (2, 3) if family.startswith("prod") else (4,)
    worst = 0.0
    for _ in range(20):
        segs = tuple(
            (random_layer(family, dims, rng), float(rng.choice([0.25, 0.5, 1.0])))
            for _ in range(3)
        )
        sched = Schedule(segs, steps_per_unit_time=4)
        group = parse_group_spec(sched.group_spec)
        x = rng.uniform(-1, 1, sched.n)
        g = group.random_element(rng)
        cols = list(g.word)
        worst = max(
            worst, float(np.max(np.abs(integrate(sched, x[cols]).y - integrate(sched, x).y[cols])))
        )
    assert worst <= 1e-10


def test_flow_vjp_zero_cotangent():
    rng = substream(6, "vjp0")
    lay = random_layer("fs1", 3, rng)
    sched = Schedule(((lay, 1.0),), steps_per_unit_time=4)
    x = rng.uniform(-1, 1, 3)
    grads, gx = flow_vjp(sched, x, np.zeros(3))
    assert np.all(grads[0] == 0.0) and np.all(gx == 0.0)


def test_flow_vjp_single_euler_step_is_layer_rule():
    """One Euler step: grad_theta = h * layer grad, grad_x = c + h * layer_x."""
    from eqflow.layers import layer_vjp

    rng = substream(7, "vjp1")
    lay = random_layer("fs2", 3, rng)
    h = 0.5
    sched = Schedule(((lay, h),), steps_per_unit_time=2)
    x = rng.uniform(-1, 1, 3)
    c = rng.uniform(-1, 1, 3)
    grads, gx = flow_vjp(sched, x, c)
    gt_lay, gx_lay = layer_vjp(lay, x, c)
    # ceil(0.5 * 2) = 1 substep of size h = 0.5
    assert np.allclose(grads[0], h * gt_lay, atol=1e-14)
    assert np.allclose(gx, c + h * gx_lay, atol=1e-14)


@pytest.mark.parametrize("method", ["euler", "rk4"])
@pytest.mark.parametrize("family", ["conv2", "fs1", "prod2d_1"])
def test_flow_vjp_matches_fd(method, family):
    rng = substream(8, "vjpfd", method, family)
    dims = (2, 3) if family.startswith("prod") else (4,)
    worst = 0.0
    for _ in range(5):
        segs = tuple(
            (random_layer(family, dims, rng), float(rng.choice([0.25, 0.5])))
            for _ in range(2)
        )
        sched = Schedule(segs, steps_per_unit_time=4, method=method)
        x = rng.uniform(-1, 1, sched.n)
        c = rng.uniform(-1, 1, sched.n)
        grads, gx = flow_vjp(sched, x, c)
        fd_grads, fd_gx = fd_flow_grads(sched, x, c)
        for g, f in zip(grads, fd_grads):
            worst = max(worst, relative_gap(g, f))
        worst = max(worst, relative_gap(gx, fd_gx))
    assert worst < 1e-5, (method, family, worst)


def test_flow_vjp_batched_consistent():
    rng = substream(9, "vjpb")
    lay = random_layer("conv1", 3, rng)
    sched = Schedule(((lay, 1.0),), steps_per_unit_time=3)
    X = rng.uniform(-1, 1, (6, 3))
    C = rng.uniform(-1, 1, (6, 3))
    grads, gX = flow_vjp(sched, X, C)
    acc = np.zeros_like(grads[0])
    for i in range(6):
        gi, gxi = flow_vjp(sched, X[i], C[i])
        acc += gi[0]
        assert np.allclose(gxi, gX[i], atol=1e-12)
    assert np.allclose(grads[0], acc, atol=1e-11)


def test_schedule_serialization_round_trip():
    rng = substream(10, "ser")
    segs = tuple((random_layer("janossy1", 3, rng, "sigmoid"), tau) for tau in (0.5, 1.0))
    sched = Schedule(segs, steps_per_unit_time=7, method="rk4")
    back = schedule_from_text(schedule_to_text(sched))
    assert back.method == "rk4" and back.steps_per_unit_time == 7
    assert all(
        a[0].theta == b[0].theta and a[1] == b[1] for a, b in zip(back.segments, sched.segments)
    )
    x = rng.uniform(-1, 1, 3)
    assert np.array_equal(integrate(back, x).y, integrate(sched, x).y)


def test_substep_counts_round_up():
    lay = _linear(2, 0.0)
    sched = Schedule(((lay, 0.26),), steps_per_unit_time=4)
    assert integrate(sched, np.zeros(2)).steps == 2  # ceil(1.04)
    sched = Schedule(((lay, 0.25),), steps_per_unit_time=4)
    assert integrate(sched, np.zeros(2)).steps == 1
