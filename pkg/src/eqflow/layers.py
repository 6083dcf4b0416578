"""The equivariant layer catalog: parameterized vector fields on R^n.

Each family evaluates f_theta: R^n -> R^n in closed form and is exactly
equivariant with respect to its declared group (translations for the
convolutional families, the full symmetric group for the sum/pooling
families, product permutations for the grid families).  Evaluation is
batched: ``x`` may have shape (n,) or (..., n).

Parameter layouts (flat ``theta``, positional serialization):

    conv1     [v, b, w_1..w_n]                    v*sigma(w (*) x + b 1)
    conv2     [v, b, w_1..w_n]                    w (*) sigma(v x + b 1)
    fs1       [a, w, v, b]                        a*sigma(w x + v (sum x) 1 + b 1)
    fs2       [a, b, w, v, c, d]                  a*sigma(w x + c 1) + b (sum_j sigma(v x_j + d)) 1
    janossy1  [v, a, b, c]                        v*sigma(a x + b (sum_i phi(x_i)) 1 + c 1)
    janossy2  [v, a, b, c]                        v*sigma(a x + b (sum_ij phi(x_i, x_j)) 1 + c 1)
    fsmax     [v, a, b, c]                        v*sigma(a x + b max(x) 1 + c 1)
    prod2d_1  [v, w0, wr1, wc1, c]                v*sigma(w0 x + wr1 S_r1 + wc1 S_c1 + c 1)
    prod2d_2  [v, w0, wr1, wc1, wr2, wc2, c]      ... + wr2 S_r2 + wc2 S_c2
    prodkd_1  [v, w0, w_11..w_k1, c]              axis sums S_s1 for each grid axis s
    prodkd_2  [v, w0, w_11..w_k1, w_12..w_k2, c]  ... + squared axis sums S_s2
    gamma1    []                                  gamma(x) 1, gamma a fixed invariant scalar
    linear    [lam]                               lam * x  (integrator benchmarks only)

(*) is circular convolution with periodic indexing; filters span the whole
input (ND filters for grid-shaped conv layers).  S_r1/S_c1 are row/column
sums broadcast back to the grid, S_r2/S_c2 their squares.

The order-1 Janossy pooling map is phi(z) = sigmoid(z) and the order-2 map
is phi(z, w) = sigmoid(z*w) (symmetric); gamma defaults to the symmetric
well function bump(sum x).  These are fixed, not trained.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .wells import WELL_BUMP, sym_well_sum


@dataclass(frozen=True)
class Activation:
    tag: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    # derivative recovered from the already-computed value sigma(x);
    # all three activations admit this, which spares the backward pass
    # a second transcendental evaluation
    deriv_from_value: Callable[[np.ndarray], np.ndarray]


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_deriv(x):
    # relu'(0) := 0 by convention
    return np.where(x > 0.0, 1.0, 0.0)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _sigmoid_deriv(x):
    s = _sigmoid(x)
    return s * (1.0 - s)


def _tanh_deriv(x):
    t = np.tanh(x)
    return 1.0 - t * t


ACTIVATIONS = {
    "relu": Activation("relu", _relu, _relu_deriv, lambda z: np.where(z > 0.0, 1.0, 0.0)),
    "tanh": Activation("tanh", np.tanh, _tanh_deriv, lambda z: 1.0 - z * z),
    "sigmoid": Activation("sigmoid", _sigmoid, _sigmoid_deriv, lambda z: z * (1.0 - z)),
}

# Janossy pooling maps, fixed by design.
_phi1 = _sigmoid
_phi1_deriv = _sigmoid_deriv


def _phi2(u, w):
    return _sigmoid(u * w)


# The control-family catalog; "linear" is a benchmark-only extra.
CATALOG = (
    "conv1",
    "conv2",
    "fs1",
    "fs2",
    "janossy1",
    "janossy2",
    "fsmax",
    "prod2d_1",
    "prod2d_2",
    "prodkd_1",
    "prodkd_2",
    "gamma1",
)

_SYMMETRIC_FAMILIES = ("fs1", "fs2", "janossy1", "janossy2", "fsmax", "gamma1", "linear")
_CONV_FAMILIES = ("conv1", "conv2")
_PROD_FAMILIES = ("prod2d_1", "prod2d_2", "prodkd_1", "prodkd_2")


class _CircIndex:
    """Gather tables for circular convolution on a (flattened) grid.

    add[j, k] = flat index of (multi_j + multi_k) mod dims, so that
    [w (*) x]_j = sum_k x[add[j, k]] w[k]; sub[m, j] is the inverse
    offset table used by the backward pass.
    """

    _cache: dict[tuple[int, ...], "_CircIndex"] = {}

    def __init__(self, dims: tuple[int, ...]):
        self.dims = dims
        n = int(np.prod(dims))
        multi = np.stack(np.unravel_index(np.arange(n), dims), axis=-1)  # (n, N)
        add = (multi[:, None, :] + multi[None, :, :]) % np.array(dims)
        sub = (multi[:, None, :] - multi[None, :, :]) % np.array(dims)
        self.add = np.ravel_multi_index(tuple(add.transpose(2, 0, 1)), dims)
        self.sub = np.ravel_multi_index(tuple(sub.transpose(2, 0, 1)), dims)

    @classmethod
    def get(cls, dims: tuple[int, ...]) -> "_CircIndex":
        if dims not in cls._cache:
            cls._cache[dims] = cls(dims)
        return cls._cache[dims]


def circular_convolution(w: np.ndarray, x: np.ndarray, dims: Sequence[int] | None = None) -> np.ndarray:
    """Periodic convolution [w (*) x]_j = sum_k x_{k+j-1} w_k (1-based).

    For grid-shaped signals pass ``dims``; both arguments are flat
    row-major vectors of length prod(dims).  Implemented as one matmul
    against the circulant matrix of w, so batches stay cheap.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    dims = tuple(int(d) for d in (dims if dims is not None else (x.shape[-1],)))
    n = int(np.prod(dims))
    if w.shape != (n,) or x.shape[-1] != n:
        raise ValueError(f"filter/signal length mismatch for dims {dims}")
    idx = _CircIndex.get(dims)
    return x @ w[idx.sub]


def _conv_vjp_w(gs: np.ndarray, x: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    # gw[k] = sum_{b,j} gs[b,j] x[b,(j+k) mod n]: contract the batch first
    # (S = gs^T x), then gather the n^2 matrix once
    idx = _CircIndex.get(dims)
    n = x.shape[-1]
    gs2 = gs.reshape(-1, n)
    x2 = x.reshape(-1, n)
    S = gs2.T @ x2
    return np.take_along_axis(S, idx.add, axis=1).sum(axis=0)


def _conv_vjp_x(gs: np.ndarray, w: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    idx = _CircIndex.get(dims)
    return gs @ w[idx.sub].T



@dataclass(frozen=True)
class InvariantScalar:
    """A fixed invariant scalar field gamma with its gradient (for gamma1)."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    name: str


def _bump_of_sum(n: int) -> InvariantScalar:
    tau = sym_well_sum(WELL_BUMP, n)

    def grad(x):
        s = np.sum(x, axis=-1)
        slope = np.where(s > 1.0, 1.0, 0.0) - np.where(s < -1.0, 1.0, 0.0)
        return np.broadcast_to(slope[..., None], x.shape).copy()

    return InvariantScalar(value=tau, grad=grad, name=tau.name)


@dataclass(frozen=True)
class ControlLayer:
    """One member of a control family: family tag + flat parameters."""

    family: str
    dims: tuple[int, ...]
    theta: tuple[float, ...]
    activation: Activation

    def __post_init__(self) -> None:
        object.__setattr__(self, "_n", int(np.prod(self.dims)))

    @property
    def n(self) -> int:
        return self._n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return evaluate(self, x)


def param_count(family: str, dims: Sequence[int]) -> int:
    n = int(np.prod(tuple(dims)))
    k = len(tuple(dims))
    counts = {
        "conv1": 2 + n,
        "conv2": 2 + n,
        "fs1": 4,
        "fs2": 6,
        "janossy1": 4,
        "janossy2": 4,
        "fsmax": 4,
        "prod2d_1": 5,
        "prod2d_2": 7,
        "prodkd_1": 3 + k,
        "prodkd_2": 3 + 2 * k,
        "gamma1": 0,
        "linear": 1,
    }
    if family not in counts:
        raise ValueError(f"unknown family {family!r}")
    return counts[family]


def make_layer(
    family: str,
    dims: int | Sequence[int],
    theta: Sequence[float],
    activation: str | Activation = "tanh",
) -> ControlLayer:
    dims = (dims,) if isinstance(dims, int) else tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError("dims must be positive")
    if family in ("prod2d_1", "prod2d_2") and len(dims) != 2:
        raise ValueError(f"{family} needs a 2D grid, got dims {dims}")
    if family in ("prodkd_1", "prodkd_2") and len(dims) < 2:
        raise ValueError(f"{family} needs a grid of rank >= 2, got dims {dims}")
    if family in _SYMMETRIC_FAMILIES and len(dims) != 1:
        raise ValueError(f"{family} acts on a plain vector, got dims {dims}")
    if isinstance(activation, str):
        activation = ACTIVATIONS[activation]
    theta = tuple(float(t) for t in theta)
    if len(theta) != param_count(family, dims):
        raise ValueError(
            f"{family} on dims {dims} takes {param_count(family, dims)} parameters, "
            f"got {len(theta)}"
        )
    if not all(np.isfinite(theta)):
        raise ValueError("non-finite parameter")
    return ControlLayer(family, dims, theta, activation)


def random_layer(
    family: str,
    dims: int | Sequence[int],
    rng: np.random.Generator,
    activation: str | Activation = "tanh",
    scale: float = 0.5,
) -> ControlLayer:
    dims_t = (dims,) if isinstance(dims, int) else tuple(dims)
    theta = rng.uniform(-scale, scale, size=param_count(family, dims_t))
    return make_layer(family, dims_t, theta, activation)


def declared_group_spec(layer: ControlLayer) -> str:
    """The symmetry group the family is exactly equivariant under."""
    if layer.family in _CONV_FAMILIES:
        if len(layer.dims) == 1:
            return f"translation_1d {layer.dims[0]}"
        return "translation_nd " + " ".join(map(str, layer.dims))
    if layer.family in _PROD_FAMILIES:
        return "product " + " ".join(map(str, layer.dims))
    if layer.family in _SYMMETRIC_FAMILIES:
        return f"symmetric {layer.n}"
    raise ValueError(f"unknown family {layer.family!r}")


def _grid(x: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    return x.reshape(x.shape[:-1] + dims)


def _axis_sum(xg: np.ndarray, axis: int, rank: int) -> np.ndarray:
    """sum over every grid axis except ``axis``, broadcast back to the grid."""
    axes = tuple(-(rank - i) for i in range(rank) if i != axis)
    if not axes:
        return xg.copy()
    return np.broadcast_to(xg.sum(axis=axes, keepdims=True), xg.shape)


def evaluate(layer: ControlLayer, x: np.ndarray) -> np.ndarray:
    """f_theta(x); x has shape (..., n)."""
    x = np.asarray(x, dtype=float)
    n = layer.n
    if x.shape[-1] != n:
        raise ValueError(f"input length {x.shape[-1]} != layer degree {n}")
    th = layer.theta
    sig = layer.activation.fn
    fam = layer.family

    if fam == "conv1":
        v, b = th[0], th[1]
        w = np.asarray(th[2:])
        return v * sig(circular_convolution(w, x, layer.dims) + b)
    if fam == "conv2":
        v, b = th[0], th[1]
        w = np.asarray(th[2:])
        return circular_convolution(w, sig(v * x + b), layer.dims)
    if fam == "fs1":
        a, w, v, b = th
        s = np.sum(x, axis=-1, keepdims=True)
        return a * sig(w * x + v * s + b)
    if fam == "fs2":
        a, b, w, v, c, d = th
        pooled = np.sum(sig(v * x + d), axis=-1, keepdims=True)
        return a * sig(w * x + c) + b * pooled
    if fam == "janossy1":
        v, a, b, c = th
        pooled = np.sum(_phi1(x), axis=-1, keepdims=True)
        return v * sig(a * x + b * pooled + c)
    if fam == "janossy2":
        v, a, b, c = th
        pairs = _phi2(x[..., :, None], x[..., None, :])
        pooled = np.sum(pairs, axis=(-2, -1))[..., None]
        return v * sig(a * x + b * pooled + c)
    if fam == "fsmax":
        v, a, b, c = th
        m = np.max(x, axis=-1, keepdims=True)
        return v * sig(a * x + b * m + c)
    if fam in ("prod2d_1", "prod2d_2", "prodkd_1", "prodkd_2"):
        rank = len(layer.dims)
        xg = _grid(x, layer.dims)
        v, w0 = th[0], th[1]
        order2 = fam in ("prod2d_2", "prodkd_2")
        w1 = np.asarray(th[2 : 2 + rank])
        w2 = np.asarray(th[2 + rank : 2 + 2 * rank]) if order2 else None
        cc = th[-1]
        pre = w0 * xg
        for s in range(rank):
            ssum = _axis_sum(xg, s, rank)
            pre = pre + w1[s] * ssum
            if order2:
                pre = pre + w2[s] * ssum * ssum
        return (v * sig(pre + cc)).reshape(x.shape)
    if fam == "gamma1":
        gamma = _bump_of_sum(n)
        return np.broadcast_to(gamma.value(x)[..., None], x.shape).copy()
    if fam == "linear":
        return th[0] * x
    raise ValueError(f"unknown family {fam!r}")


def layer_vjp(
    layer: ControlLayer, x: np.ndarray, cotangent: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode derivatives of <cotangent, f_theta(x)>.

    Returns (grad_theta, grad_x).  For batched inputs grad_theta is the
    sum over the batch and grad_x matches the input shape.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(cotangent, dtype=float)
    if x.shape != c.shape:
        raise ValueError("cotangent shape must match input shape")
    n = layer.n
    if x.shape[-1] != n:
        raise ValueError(f"input length {x.shape[-1]} != layer degree {n}")
    th = layer.theta
    sig = layer.activation.fn
    dvz = layer.activation.deriv_from_value
    fam = layer.family

    if fam == "conv1":
        v = th[0]
        w = np.asarray(th[2:])
        pre = circular_convolution(w, x, layer.dims) + th[1]
        z = sig(pre)
        gv = float(np.sum(c * z))
        gs = v * c * dvz(z)
        gb = float(np.sum(gs))
        gw = _conv_vjp_w(gs, x, layer.dims)
        gx = _conv_vjp_x(gs, w, layer.dims)
        return np.concatenate(([gv, gb], gw)), gx
    if fam == "conv2":
        v, b = th[0], th[1]
        w = np.asarray(th[2:])
        z = sig(v * x + b)
        gw = _conv_vjp_w(c, z, layer.dims)
        gz = _conv_vjp_x(c, w, layer.dims)
        gpre = gz * dvz(z)
        gv = float(np.sum(gpre * x))
        gb = float(np.sum(gpre))
        gx = v * gpre
        return np.concatenate(([gv, gb], gw)), gx
    if fam == "fs1":
        a, w, v, b = th
        s = np.sum(x, axis=-1, keepdims=True)
        z = sig(w * x + v * s + b)
        ga = float(np.sum(c * z))
        gpre = a * c * dvz(z)
        row = np.sum(gpre, axis=-1, keepdims=True)
        gw = float(np.sum(gpre * x))
        gv = float(np.sum(row * s))
        gb = float(np.sum(row))
        gx = w * gpre + v * row
        return np.array([ga, gw, gv, gb]), gx
    if fam == "fs2":
        a, b, w, v, cc, d = th
        z1 = sig(w * x + cc)
        z2 = sig(v * x + d)
        pooled = np.sum(z2, axis=-1, keepdims=True)
        ga = float(np.sum(c * z1))
        gp1 = a * c * dvz(z1)
        gw = float(np.sum(gp1 * x))
        gc = float(np.sum(gp1))
        gb = float(np.sum(c * pooled))
        gpool = b * np.sum(c, axis=-1, keepdims=True)
        gp2 = gpool * dvz(z2)
        gv = float(np.sum(gp2 * x))
        gd = float(np.sum(gp2))
        gx = w * gp1 + v * gp2
        return np.array([ga, gb, gw, gv, gc, gd]), gx
    if fam == "janossy1":
        v, a, b, cc = th
        phi = _phi1(x)
        pooled = np.sum(phi, axis=-1, keepdims=True)
        z = sig(a * x + b * pooled + cc)
        gv = float(np.sum(c * z))
        gpre = v * c * dvz(z)
        row = np.sum(gpre, axis=-1, keepdims=True)
        ga = float(np.sum(gpre * x))
        gb = float(np.sum(row * pooled))
        gc = float(np.sum(row))
        gx = a * gpre + (b * row) * (phi * (1.0 - phi))
        return np.array([gv, ga, gb, gc]), gx
    if fam == "janossy2":
        v, a, b, cc = th
        pairs = _sigmoid(x[..., :, None] * x[..., None, :])
        pooled = np.sum(pairs, axis=(-2, -1))[..., None]
        z = sig(a * x + b * pooled + cc)
        gv = float(np.sum(c * z))
        gpre = v * c * dvz(z)
        row = np.sum(gpre, axis=-1, keepdims=True)
        ga = float(np.sum(gpre * x))
        gb = float(np.sum(row * pooled))
        gc = float(np.sum(row))
        # d pooled / d x_m = 2 sum_j sigmoid'(x_m x_j) x_j  (phi symmetric)
        dpool = 2.0 * np.sum(pairs * (1.0 - pairs) * x[..., None, :], axis=-1)
        gx = a * gpre + (b * row) * dpool
        return np.array([gv, ga, gb, gc]), gx
    if fam == "fsmax":
        v, a, b, cc = th
        m = np.max(x, axis=-1, keepdims=True)
        z = sig(a * x + b * m + cc)
        gv = float(np.sum(c * z))
        gpre = v * c * dvz(z)
        row = np.sum(gpre, axis=-1, keepdims=True)
        ga = float(np.sum(gpre * x))
        gb = float(np.sum(row * m))
        gc = float(np.sum(row))
        onehot = np.zeros_like(x)
        np.put_along_axis(onehot, np.argmax(x, axis=-1)[..., None], 1.0, axis=-1)
        gx = a * gpre + (b * row) * onehot
        return np.array([gv, ga, gb, gc]), gx
    if fam in ("prod2d_1", "prod2d_2", "prodkd_1", "prodkd_2"):
        rank = len(layer.dims)
        xg = _grid(x, layer.dims)
        cg = _grid(c, layer.dims)
        v, w0 = th[0], th[1]
        order2 = fam in ("prod2d_2", "prodkd_2")
        w1 = np.asarray(th[2 : 2 + rank])
        w2 = np.asarray(th[2 + rank : 2 + 2 * rank]) if order2 else None
        cc = th[-1]
        sums = [_axis_sum(xg, s, rank) for s in range(rank)]
        pre = w0 * xg + cc
        for s in range(rank):
            pre = pre + w1[s] * sums[s]
            if order2:
                pre = pre + w2[s] * sums[s] * sums[s]
        z = sig(pre)
        gv = float(np.sum(cg * z))
        gpre = v * cg * dvz(z)
        gw0 = float(np.sum(gpre * xg))
        gc = float(np.sum(gpre))
        gw1 = np.array([float(np.sum(gpre * sums[s])) for s in range(rank)])
        gxg = w0 * gpre
        gw2 = []
        for s in range(rank):
            gsum_s = _axis_sum(gpre, s, rank)
            gxg = gxg + w1[s] * gsum_s
            if order2:
                gw2.append(float(np.sum(gpre * sums[s] * sums[s])))
                gxg = gxg + w2[s] * 2.0 * sums[s] * _axis_sum(gpre, s, rank)
        parts = [np.array([gv, gw0]), gw1]
        if order2:
            parts.append(np.array(gw2))
        parts.append(np.array([gc]))
        return np.concatenate(parts), gxg.reshape(x.shape)
    if fam == "gamma1":
        gamma = _bump_of_sum(n)
        gscal = np.sum(c, axis=-1)
        gx = gscal[..., None] * gamma.grad(x)
        return np.zeros(0), gx
    if fam == "linear":
        glam = float(np.sum(c * x))
        return np.array([glam]), th[0] * c
    raise ValueError(f"unknown family {fam!r}")


def preactivations(layer: ControlLayer, x: np.ndarray) -> np.ndarray | None:
    """The argument(s) the activation sees at x, for kink screening.

    Returns None for families without an activation (gamma1, linear).
    """
    x = np.asarray(x, dtype=float)
    th = layer.theta
    fam = layer.family
    if fam == "conv1":
        return circular_convolution(np.asarray(th[2:]), x, layer.dims) + th[1]
    if fam == "conv2":
        return th[0] * x + th[1]
    if fam == "fs1":
        a, w, v, b = th
        return w * x + v * np.sum(x, axis=-1, keepdims=True) + b
    if fam == "fs2":
        a, b, w, v, c, d = th
        return np.concatenate([w * x + c, v * x + d], axis=-1)
    if fam == "janossy1":
        v, a, b, c = th
        return a * x + b * np.sum(_phi1(x), axis=-1, keepdims=True) + c
    if fam == "janossy2":
        v, a, b, c = th
        pooled = np.sum(_phi2(x[..., :, None], x[..., None, :]), axis=(-2, -1))[..., None]
        return a * x + b * pooled + c
    if fam == "fsmax":
        v, a, b, c = th
        return a * x + b * np.max(x, axis=-1, keepdims=True) + c
    if fam in ("prod2d_1", "prod2d_2", "prodkd_1", "prodkd_2"):
        rank = len(layer.dims)
        xg = _grid(x, layer.dims)
        v, w0 = th[0], th[1]
        order2 = fam in ("prod2d_2", "prodkd_2")
        w1 = np.asarray(th[2 : 2 + rank])
        w2 = np.asarray(th[2 + rank : 2 + 2 * rank]) if order2 else None
        pre = w0 * xg + th[-1]
        for s in range(rank):
            ssum = _axis_sum(xg, s, rank)
            pre = pre + w1[s] * ssum
            if order2:
                pre = pre + w2[s] * ssum * ssum
        return pre.reshape(x.shape)
    return None


def coor_representative(layer: ControlLayer) -> Callable[[np.ndarray], np.ndarray]:
    """The first-coordinate scalar representative x -> [f_theta(x)]_1.

    For a transitive declared group this function is invariant under the
    stabilizer of index 1.
    """

    def rep(x: np.ndarray) -> np.ndarray:
        return evaluate(layer, x)[..., 0]

    return rep


def layer_to_text(layer: ControlLayer) -> str:
    dims = "x".join(map(str, layer.dims))
    theta = ",".join(repr(t) for t in layer.theta) if layer.theta else "-"
    return f"{layer.family} {dims} {layer.activation.tag} {theta}"


def layer_from_text(line: str) -> ControlLayer:
    parts = line.split()
    if len(parts) != 4:
        raise ValueError(f"bad layer record: {line!r}")
    family, dims_s, act, theta_s = parts
    dims = tuple(int(d) for d in dims_s.split("x"))
    theta = [] if theta_s == "-" else [float(t) for t in theta_s.split(",")]
    return make_layer(family, dims, theta, act)
