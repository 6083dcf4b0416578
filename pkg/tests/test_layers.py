"""Layer catalog: closed-form values, exact equivariance, derivatives."""

import numpy as np
import pytest

from eqflow.gradcheck import fd_layer_grads, kink_safe_input, relative_gap
from eqflow.layers import (
    ACTIVATIONS,
    CATALOG,
    circular_convolution,
    coor_representative,
    declared_group_spec,
    evaluate,
    layer_from_text,
    layer_to_text,
    layer_vjp,
    make_layer,
    param_count,
    preactivations,
    random_layer,
)
from eqflow.perm_groups import parse_group_spec, symmetric_group, translation_group_1d
from eqflow.rng import substream

DIMS = {
    "conv1": (4,),
    "conv2": (4,),
    "fs1": (4,),
    "fs2": (4,),
    "janossy1": (4,),
    "janossy2": (4,),
    "fsmax": (4,),
    "prod2d_1": (2, 3),
    "prod2d_2": (2, 3),
    "prodkd_1": (2, 3),
    "prodkd_2": (2, 3),
    "gamma1": (4,),
    "linear": (4,),
}


# ---------------------------------------------------------------------------
# circular convolution


def test_conv_shift_filter():
    assert np.array_equal(circular_convolution([0, 1, 0], [1.0, 2.0, 3.0]), [2.0, 3.0, 1.0])


def test_conv_identity_filter():
    x = np.array([4.0, 5.0, 6.0, 7.0])
    assert np.array_equal(circular_convolution([1, 0, 0, 0], x), x)


def test_conv_nd_identity_filter():
    w = np.zeros(6)
    w[0] = 1.0
    x = np.arange(6.0)
    assert np.array_equal(circular_convolution(w, x, dims=(2, 3)), x)


def test_conv_rejects_mismatch():
    with pytest.raises(ValueError):
        circular_convolution([1, 0], [1.0, 2.0, 3.0])


def test_conv_definition_direct():
    """entry j = sum_k x_{k+j-1} w_k with periodic indexing (1-based)."""
    rng = substream(0, "conv-def")
    for n in (3, 5):
        w = rng.uniform(-1, 1, n)
        x = rng.uniform(-1, 1, n)
        got = circular_convolution(w, x)
        want = [sum(x[(k + j) % n] * w[k] for k in range(n)) for j in range(n)]
        assert np.allclose(got, want, atol=1e-15)


# ---------------------------------------------------------------------------
# evaluation examples


def test_fs1_zero_params_give_zero_field():
    layer = make_layer("fs1", 3, [1.0, 0.0, 0.0, 0.0], "relu")
    x = np.array([0.3, -0.7, 2.0])
    assert np.array_equal(evaluate(layer, x), np.zeros(3))


def test_prod2d_row_and_column_sums():
    x = np.array([1.0, 2.0, 3.0, 4.0])  # [[1,2],[3,4]]
    lay_r = make_layer("prod2d_1", (2, 2), [1.0, 0.0, 1.0, 0.0, 0.0], "tanh")
    assert np.allclose(np.arctanh(evaluate(lay_r, x)), [3.0, 3.0, 7.0, 7.0])
    lay_c = make_layer("prod2d_1", (2, 2), [1.0, 0.0, 0.0, 1.0, 0.0], "tanh")
    assert np.allclose(np.arctanh(evaluate(lay_c, x)), [4.0, 6.0, 4.0, 6.0])


def test_prod2d_second_order_sums():
    x = np.array([0.1, 0.2, 0.3, 0.4])  # keep tanh well away from saturation
    lay = make_layer("prod2d_2", (2, 2), [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], "tanh")
    rows = np.array([0.3, 0.3, 0.7, 0.7])
    assert np.allclose(np.arctanh(evaluate(lay, x)), rows**2)


def test_prodkd_matches_prod2d_first_order():
    rng = substream(1, "kd")
    th = rng.uniform(-0.5, 0.5, 5)
    a = make_layer("prod2d_1", (2, 3), th, "tanh")
    b = make_layer("prodkd_1", (2, 3), th, "tanh")
    x = rng.uniform(-1, 1, 6)
    assert np.array_equal(evaluate(a, x), evaluate(b, x))


def test_gamma1_constant_coordinates():
    layer = make_layer("gamma1", 3, [], "tanh")
    x = np.array([2.0, 0.5, 0.25])
    y = evaluate(layer, x)
    assert y[0] == y[1] == y[2]
    # gamma = bump(sum): sum = 2.75 -> 1.75
    assert y[0] == pytest.approx(1.75)


def test_linear_layer():
    layer = make_layer("linear", 3, [2.5])
    x = np.array([1.0, -2.0, 0.0])
    assert np.array_equal(evaluate(layer, x), 2.5 * x)


def test_eval_batched_matches_loop():
    rng = substream(2, "batch")
    for fam in CATALOG:
        layer = random_layer(fam, DIMS[fam], rng)
        X = rng.uniform(-1, 1, size=(7, layer.n))
        batched = evaluate(layer, X)
        rows = np.stack([evaluate(layer, X[i]) for i in range(7)])
        # matmul picks different BLAS kernels for stacked vs flat shapes,
        # so conv results may differ in the last ulp
        assert np.allclose(batched, rows, atol=1e-15, rtol=0), fam


def test_eval_errors():
    layer = make_layer("fs1", 3, [1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        evaluate(layer, np.zeros(4))
    with pytest.raises(ValueError):
        make_layer("fs1", 3, [np.nan, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        make_layer("fs1", 3, [1.0])
    with pytest.raises(ValueError):
        make_layer("nope", 3, [])
    with pytest.raises(ValueError):
        make_layer("prod2d_1", 6, [0.0] * 5)


# ---------------------------------------------------------------------------
# declared groups and equivariance


def test_declared_groups():
    assert declared_group_spec(random_layer("conv1", 3, substream(0, "g"))) == "translation_1d 3"
    assert declared_group_spec(random_layer("fs1", 4, substream(0, "g"))) == "symmetric 4"
    assert (
        declared_group_spec(random_layer("prod2d_1", (2, 3), substream(0, "g")))
        == "product 2 3"
    )
    assert (
        declared_group_spec(random_layer("conv1", (2, 3), substream(0, "g")))
        == "translation_nd 2 3"
    )


@pytest.mark.parametrize("family", CATALOG)
@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid"])
def test_exact_equivariance(family, activation):
    rng = substream(3, "equi", family, activation)
    dims = DIMS[family]
    group = None
    worst = 0.0
    for _ in range(40):
        layer = random_layer(family, dims, rng, activation)
        if group is None:
            group = parse_group_spec(declared_group_spec(layer))
        x = rng.uniform(-1.5, 1.5, size=layer.n)
        g = group.random_element(rng)
        cols = list(g.word)
        worst = max(worst, float(np.max(np.abs(evaluate(layer, x[cols]) - evaluate(layer, x)[cols]))))
    assert worst <= 1e-12, (family, activation, worst)


@pytest.mark.parametrize("family", ["fs1", "fs2", "janossy1", "janossy2", "fsmax"])
def test_symmetric_families_equivariant_on_translation_subgroup(family):
    rng = substream(4, "sub", family)
    T = translation_group_1d(4)
    worst = 0.0
    for _ in range(40):
        layer = random_layer(family, 4, rng)
        x = rng.uniform(-1.5, 1.5, size=4)
        g = T.random_element(rng)
        cols = list(g.word)
        worst = max(worst, float(np.max(np.abs(evaluate(layer, x[cols]) - evaluate(layer, x)[cols]))))
    assert worst <= 1e-12


@pytest.mark.parametrize("family", ["fs1", "fs2", "janossy1", "janossy2", "fsmax", "gamma1"])
def test_coor_representative_stabilizer_invariant(family):
    """[f(x)]_1 is invariant under permutations fixing index 1."""
    rng = substream(5, "coor", family)
    stab = symmetric_group(4).stabilizer(1)
    worst = 0.0
    for _ in range(30):
        layer = random_layer(family, 4, rng)
        rep = coor_representative(layer)
        x = rng.uniform(-1.5, 1.5, size=4)
        for h in stab:
            worst = max(worst, abs(float(rep(h.act_vector(x)) - rep(x))))
    assert worst <= 1e-12


def test_coor_representative_examples():
    # fs1 first coordinate: a sigma(w x_1 + v sum + b)
    layer = make_layer("fs1", 3, [2.0, 0.5, 0.25, -0.1], "tanh")
    x = np.array([0.3, -0.4, 0.9])
    want = 2.0 * np.tanh(0.5 * x[0] + 0.25 * np.sum(np.sort(x)) + -0.1)
    # the layer itself sums unsorted; both are within rounding of each other
    assert coor_representative(layer)(x) == pytest.approx(want, abs=1e-12)
    # conv1 with w = e_1: v sigma(x_1 + b)
    layer = make_layer("conv1", 3, [1.5, 0.2, 1.0, 0.0, 0.0], "sigmoid")
    got = coor_representative(layer)(x)
    assert got == pytest.approx(1.5 / (1.0 + np.exp(-(x[0] + 0.2))))
    # gamma1 coor is gamma itself
    layer = make_layer("gamma1", 3, [])
    assert coor_representative(layer)(np.array([2.0, 1.0, 0.5])) == pytest.approx(2.5)


# ---------------------------------------------------------------------------
# derivatives


@pytest.mark.parametrize("family", CATALOG + ("linear",))
@pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
def test_vjp_matches_finite_differences(family, activation):
    rng = substream(6, "vjp", family, activation)
    dims = DIMS[family]
    worst = 0.0
    for _ in range(50):
        layer = random_layer(family, dims, rng, activation)
        x = rng.uniform(-1.5, 1.5, size=layer.n)
        if family == "fsmax":
            while np.ptp(np.sort(x)[-2:]) < 1e-3:
                x = rng.uniform(-1.5, 1.5, size=layer.n)
        if family == "gamma1":
            while abs(abs(np.sum(x)) - 1.0) < 1e-2:
                x = rng.uniform(-1.5, 1.5, size=layer.n)
        cot = rng.uniform(-1, 1, size=layer.n)
        gt, gx = layer_vjp(layer, x, cot)
        fgt, fgx = fd_layer_grads(layer, x, cot)
        worst = max(worst, relative_gap(np.concatenate([gt, gx]), np.concatenate([fgt, fgx])))
    assert worst < 1e-5, (family, activation, worst)


@pytest.mark.parametrize("family", ["conv1", "fs2", "prod2d_1"])
def test_vjp_relu_away_from_kinks(family):
    rng = substream(7, "vjp-relu", family)
    dims = DIMS[family]
    worst = 0.0
    for _ in range(25):
        layer = random_layer(family, dims, rng, "relu")
        x = kink_safe_input(layer, rng, scale=1.5)
        cot = rng.uniform(-1, 1, size=layer.n)
        gt, gx = layer_vjp(layer, x, cot)
        fgt, fgx = fd_layer_grads(layer, x, cot)
        worst = max(worst, relative_gap(np.concatenate([gt, gx]), np.concatenate([fgt, fgx])))
    assert worst < 1e-5


def test_vjp_zero_cotangent():
    rng = substream(8, "zero-cot")
    for family in CATALOG:
        layer = random_layer(family, DIMS[family], rng)
        x = rng.uniform(-1, 1, size=layer.n)
        gt, gx = layer_vjp(layer, x, np.zeros(layer.n))
        assert np.all(gt == 0.0) and np.all(gx == 0.0)


def test_vjp_batched_sums_over_batch():
    rng = substream(9, "vjp-batch")
    layer = random_layer("conv1", 4, rng)
    X = rng.uniform(-1, 1, size=(5, 4))
    C = rng.uniform(-1, 1, size=(5, 4))
    gt, gx = layer_vjp(layer, X, C)
    gt_sum = np.zeros_like(gt)
    for i in range(5):
        gti, gxi = layer_vjp(layer, X[i], C[i])
        gt_sum += gti
        assert np.allclose(gxi, gx[i], atol=1e-14)
    assert np.allclose(gt, gt_sum, atol=1e-13)


def test_relu_derivative_zero_at_kink():
    act = ACTIVATIONS["relu"]
    assert act.deriv(np.array([0.0]))[0] == 0.0


def test_preactivations_cover_catalog():
    rng = substream(10, "pre")
    for family in CATALOG:
        layer = random_layer(family, DIMS[family], rng)
        x = rng.uniform(-1, 1, size=layer.n)
        pre = preactivations(layer, x)
        if family == "gamma1":
            assert pre is None
        else:
            assert pre is not None and np.all(np.isfinite(pre))


# ---------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("family", CATALOG + ("linear",))
def test_layer_text_round_trip(family):
    rng = substream(11, "ser", family)
    layer = random_layer(family, DIMS[family], rng, "sigmoid")
    back = layer_from_text(layer_to_text(layer))
    assert back.family == layer.family
    assert back.dims == layer.dims
    assert back.activation.tag == layer.activation.tag
    assert back.theta == layer.theta  # bit-exact round trip


def test_param_count_matches_layouts():
    assert param_count("conv1", (5,)) == 7
    assert param_count("fs2", (9,)) == 6
    assert param_count("prod2d_2", (2, 3)) == 7
    assert param_count("prodkd_1", (2, 3, 2)) == 6
    assert param_count("gamma1", (4,)) == 0
