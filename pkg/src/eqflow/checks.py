"""Property checkers: equivariance, perturbation, connectivity, resolvence.

The existential checkers (perturbation property, direct connectivity)
first try the explicit constructions that make these properties hold for
the catalog families: coordinate-picking filters with a separating bias
for convolutional families, pooled-invariant separation through a scale
and bias for sum/pooling families, axis-sum separation for the product
families.  A bounded random search backs them up.  Absence of a witness
is reported as ``inconclusive`` unless the observed separation gap is
identically zero across the whole search, which is a structural failure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .flows import Schedule, integrate
from .layers import (
    _CircIndex,
    ControlLayer,
    evaluate,
    make_layer,
    random_layer,
)
from .perm_groups import (
    PermGroup,
    Permutation,
    compose,
    is_g_distinct,
    right_transversal,
    transposition,
)
from .reports import VerificationReport, make_report
from .rng import substream

SEPARATION_TOL = 1e-6
EQUIVARIANCE_TOL = 1e-12
FLOW_EQUIVARIANCE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Equivariance / invariance


def check_equivariance(
    map_fn: Callable[[np.ndarray], np.ndarray],
    group: PermGroup,
    samples: int = 200,
    tol: float = EQUIVARIANCE_TOL,
    seed: int = 0,
    scale: float = 1.0,
) -> VerificationReport:
    """Worst |map(g x) - g map(x)| over random x and every g in G."""
    rng = substream(seed, "check_equivariance")
    X = rng.uniform(-scale, scale, size=(samples, group.n))
    base = np.asarray(map_fn(X))
    worst = 0.0
    failures = []
    for g in group:
        cols = list(g.word)
        gap = np.max(np.abs(np.asarray(map_fn(X[:, cols])) - base[:, cols]), axis=-1)
        k = int(np.argmax(gap))
        worst = max(worst, float(gap[k]))
        if gap[k] > tol:
            failures.append({"g": str(g), "x": list(X[k])})
    return make_report(
        "check_equivariance", samples * len(group), failures, worst, tol,
        details={"group": group.descriptor},
    )


def check_invariance(
    fn: Callable[[np.ndarray], np.ndarray],
    group: PermGroup,
    samples: int = 200,
    tol: float = EQUIVARIANCE_TOL,
    seed: int = 0,
    scale: float = 1.0,
) -> VerificationReport:
    """Worst |fn(g x) - fn(x)| over random x and every g in G."""
    rng = substream(seed, "check_invariance")
    X = rng.uniform(-scale, scale, size=(samples, group.n))
    base = np.asarray(fn(X))
    worst = 0.0
    failures = []
    for g in group:
        gap = np.abs(np.asarray(fn(X[:, list(g.word)])) - base)
        k = int(np.argmax(gap))
        worst = max(worst, float(gap[k]))
        if gap[k] > tol:
            failures.append({"g": str(g), "x": list(X[k])})
    return make_report(
        "check_invariance", samples * len(group), failures, worst, tol,
        details={"group": group.descriptor},
    )


def sampled_equivariance_gap(
    map_fn: Callable[[np.ndarray], np.ndarray],
    group: PermGroup,
    samples: int,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> float:
    """Worst gap over ``samples`` random (x, g) pairs (not the full group)."""
    X = rng.uniform(-scale, scale, size=(samples, group.n))
    base = np.asarray(map_fn(X))
    worst = 0.0
    for k in range(samples):
        g = group.random_element(rng)
        cols = list(g.word)
        gap = float(np.max(np.abs(np.asarray(map_fn(X[k][cols])) - base[k][cols])))
        worst = max(worst, gap)
    return worst


# ---------------------------------------------------------------------------
# Similarity and coordinate zooming


def similarity(x: np.ndarray, y: np.ndarray) -> int:
    """|{(i, i'): x_i = y_{i'}}| if either point is in general position, else 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gp = len(np.unique(x)) == x.size or len(np.unique(y)) == y.size
    if not gp:
        return 0
    return int(np.sum(x[:, None] == y[None, :]))


@dataclass(frozen=True)
class Zoom:
    """A strictly increasing scalar map applied coordinate-wise."""

    fn: Callable[[np.ndarray], np.ndarray]
    desc: str

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


ZOOM_IDENTITY = Zoom(lambda x: x, "id")


def affine_zoom(alpha: float, beta: float) -> Zoom:
    if alpha <= 0:
        raise ValueError("zoom slope must be positive")
    return Zoom(lambda x: alpha * x + beta, f"affine({alpha:.4g},{beta:.4g})")


def compose_zooms(outer: Zoom, inner: Zoom) -> Zoom:
    return Zoom(lambda x: outer.fn(inner.fn(x)), f"{outer.desc}o{inner.desc}")


def piecewise_zoom(knots: Sequence[float], slopes: Sequence[float]) -> Zoom:
    """Increasing piecewise-linear map with the given interior knots.

    ``slopes`` has one entry per piece (len(knots) + 1), each >= 1e-3.
    """
    knots = np.asarray(sorted(knots), dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if len(slopes) != len(knots) + 1:
        raise ValueError("need len(knots) + 1 slopes")
    if np.any(slopes < 1e-3):
        raise ValueError("slopes must be >= 1e-3")
    kvals = np.concatenate(([0.0], np.cumsum(slopes[1:-1] * np.diff(knots)))) if len(knots) > 1 else np.array([0.0])

    def fn(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 1)
        inner = kvals[idx] + np.take(slopes, idx + 1) * (x - knots[idx])
        lo = slopes[0] * (x - knots[0])
        hi = kvals[-1] + slopes[-1] * (x - knots[-1])
        out = np.where(x < knots[0], lo, np.where(x >= knots[-1], hi, inner))
        return out

    return Zoom(fn, f"pl({len(knots)} knots)")


def random_zoom(rng: np.random.Generator, max_knots: int = 8) -> Zoom:
    k = int(rng.integers(2, max_knots + 1))
    knots = np.sort(rng.uniform(-10.0, 10.0, size=k))
    slopes = np.exp(rng.uniform(math.log(1e-3), math.log(4.0), size=k + 1))
    return piecewise_zoom(knots, slopes)


# ---------------------------------------------------------------------------
# Separating constructions (per family)


def _sep_scale(delta: float) -> float:
    return 2.0 / abs(delta)


def _axis_sums_at(z: np.ndarray, dims: tuple[int, ...], flat: int) -> list[float]:
    grid = z.reshape(dims)
    multi = np.unravel_index(flat, dims)
    out = []
    for s in range(len(dims)):
        axes = tuple(i for i in range(len(dims)) if i != s)
        sums = grid.sum(axis=axes)
        out.append(float(sums[multi[s]]))
    return out


def _build_prod_theta(family: str, dims: tuple[int, ...], axis: int, sc: float, bias: float):
    rank = len(dims)
    order2 = family in ("prod2d_2", "prodkd_2")
    theta = [1.0, 0.0]  # v, w0
    w1 = [0.0] * rank
    w1[axis] = sc
    theta.extend(w1)
    if order2:
        theta.extend([0.0] * rank)
    theta.append(bias)
    return theta


def _separating_layer(
    family: str,
    dims: tuple[int, ...],
    activation: str,
    ux: np.ndarray,
    uy: np.ndarray,
    i0: int,
    rng: np.random.Generator,
) -> ControlLayer | None:
    """The explicit construction separating [f(ux)]_{i0} from [f(uy)]_{i0}.

    Returns a layer known to separate the zoomed pair at the shared
    coordinate, or None when this zoom gives nothing to work with.
    """
    n = int(np.prod(dims))
    if family in ("conv1", "conv2"):
        diffs = np.abs(ux - uy)
        m = int(np.argmax(diffs))
        if diffs[m] <= 1e-12:
            return None
        k0 = int(_CircIndex.get(dims).sub[m, i0])
        s = _sep_scale(uy[m] - ux[m])
        w = np.zeros(n)
        w[k0] = s
        if family == "conv1":
            return make_layer("conv1", dims, [1.0, -s * ux[m]] + list(w), activation)
        w_e = np.zeros(n)
        w_e[k0] = 1.0
        return make_layer("conv2", dims, [s, -s * ux[m]] + list(w_e), activation)
    if family == "fs1":
        sx, sy = float(np.sum(ux)), float(np.sum(uy))
        if abs(sy - sx) <= 1e-12:
            return None
        s = _sep_scale(sy - sx)
        return make_layer("fs1", dims, [1.0, 0.0, s, -s * sx], activation)
    if family == "fs2":
        for _ in range(8):
            p = float(rng.uniform(0.2, 2.0))
            q = float(rng.uniform(-1.0, 1.0))
            layer = make_layer("fs2", dims, [0.0, 1.0, 0.0, p, 0.0, q], activation)
            if abs(evaluate(layer, ux)[i0] - evaluate(layer, uy)[i0]) > SEPARATION_TOL:
                return layer
        return None
    if family in ("janossy1", "janossy2", "fsmax"):
        if family == "janossy1":
            pool = lambda z: float(np.sum(1.0 / (1.0 + np.exp(-z))))
        elif family == "janossy2":
            pool = lambda z: float(np.sum(1.0 / (1.0 + np.exp(-np.outer(z, z)))))
        else:
            pool = lambda z: float(np.max(z))
        px, py = pool(ux), pool(uy)
        if abs(py - px) <= 1e-12:
            return None
        s = _sep_scale(py - px)
        return make_layer(family, dims, [1.0, 0.0, s, -s * px], activation)
    if family == "gamma1":
        # handled by the zoom itself (see _perturbation_witness)
        return None
    if family in ("prod2d_1", "prod2d_2", "prodkd_1", "prodkd_2"):
        ax_x = _axis_sums_at(ux, dims, i0)
        ax_y = _axis_sums_at(uy, dims, i0)
        for axis, (vx, vy) in enumerate(zip(ax_x, ax_y)):
            if abs(vy - vx) > 1e-9:
                sc = _sep_scale(vy - vx)
                theta = _build_prod_theta(family, dims, axis, sc, -sc * vx)
                return make_layer(family, dims, theta, activation)
        return None
    raise ValueError(f"unknown family {family!r}")


def _perturbation_witness(
    family: str,
    dims: tuple[int, ...],
    activation: str,
    x: np.ndarray,
    y: np.ndarray,
    i0: int,
    rng: np.random.Generator,
    zoom_tries: int = 40,
    draw_budget: int = 200,
) -> dict | None:
    """Search for (f, zoom) with [f(u x)]_{i0} != [f(u y)]_{i0}."""
    n = int(np.prod(dims))
    zooms = [ZOOM_IDENTITY] + [random_zoom(rng) for _ in range(zoom_tries)]
    for zoom in zooms:
        ux, uy = zoom(x), zoom(y)
        if family == "gamma1":
            sx, sy = float(np.sum(ux)), float(np.sum(uy))
            if abs(sy - sx) <= 1e-12:
                continue
            alpha = 3.0 / abs(sy - sx)
            full = compose_zooms(affine_zoom(alpha, -alpha * sx / n), zoom)
            layer = make_layer("gamma1", dims, [], activation)
            gap = abs(float(evaluate(layer, full(x))[i0] - evaluate(layer, full(y))[i0]))
            if gap > SEPARATION_TOL:
                return {"zoom": full.desc, "layer": "gamma1", "gap": gap}
            continue
        layer = _separating_layer(family, dims, activation, ux, uy, i0, rng)
        if layer is None:
            continue
        gap = abs(float(evaluate(layer, ux)[i0] - evaluate(layer, uy)[i0]))
        if gap > SEPARATION_TOL:
            return {"zoom": zoom.desc, "layer": list(layer.theta), "gap": gap}
    for _ in range(draw_budget):
        layer = random_layer(family, dims, rng, activation, scale=2.0)
        zoom = ZOOM_IDENTITY if rng.random() < 0.5 else random_zoom(rng)
        gap = abs(float(evaluate(layer, zoom(x))[i0] - evaluate(layer, zoom(y))[i0]))
        if gap > SEPARATION_TOL:
            return {"zoom": zoom.desc, "layer": list(layer.theta), "gap": gap}
    return None


def check_perturbation_property(
    family: str,
    group: PermGroup,
    pairs: int = 30,
    seed: int = 0,
    dims: tuple[int, ...] | None = None,
    activation: str = "tanh",
    explicit_pairs: Sequence[tuple[np.ndarray, np.ndarray, int]] | None = None,
) -> VerificationReport:
    """For sampled G-distinct pairs sharing a coordinate value, search for
    a control field and coordinate zoom separating them at the shared index.

    Pairs that fall in the same G-orbit are filtered out and counted in
    the details.  The property is existential, so an exhausted search is
    ``inconclusive`` rather than a disproof.
    """
    dims = dims if dims is not None else (group.n,)
    n = int(np.prod(dims))
    if n != group.n:
        raise ValueError("dims do not match group degree")
    rng = substream(seed, "perturbation", family, group.descriptor)

    tasks: list[tuple[np.ndarray, np.ndarray, int]] = []
    filtered = 0
    if explicit_pairs is not None:
        for x, y, i0 in explicit_pairs:
            x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
            if similarity(x, y) == 0 or not is_g_distinct(group, [x, y]):
                filtered += 1
                continue
            tasks.append((x, y, i0))
    else:
        while len(tasks) < pairs:
            x = rng.uniform(-2.0, 2.0, size=n)
            if len(np.unique(x)) != n:
                continue
            i0 = int(rng.integers(n))
            y = rng.uniform(-2.0, 2.0, size=n)
            y[i0] = x[i0]
            if len(np.unique(y)) != n:
                continue
            if not is_g_distinct(group, [x, y]):
                filtered += 1
                continue
            tasks.append((x, y, i0))

    failures = []
    found = 0
    for x, y, i0 in tasks:
        wit = _perturbation_witness(family, dims, activation, x, y, i0, rng)
        if wit is None:
            failures.append({"x": list(x), "y": list(y), "shared_index": i0 + 1})
        else:
            found += 1
    return make_report(
        f"check_perturbation_property[{family} vs {group.descriptor}]",
        len(tasks),
        failures,
        worst=float(len(failures)),
        tolerance=SEPARATION_TOL,
        details={"found": found, "filtered_same_orbit": filtered},
        inconclusive=True,
    )


# ---------------------------------------------------------------------------
# Direct connectivity and resolvence


def _transposition_positions(a: Permutation, b: Permutation) -> tuple[int, int]:
    tau = compose(a, b.inverse())
    cycles = tau.cycles()
    if len(cycles) != 1 or len(cycles[0]) != 2:
        raise ValueError(f"{a} and {b} do not differ by a transposition")
    p, q = sorted(cycles[0])
    return p, q


def _boundary_point(
    a: Permutation, b: Permutation, rng: np.random.Generator
) -> tuple[np.ndarray, int, int]:
    """A point of the shared cross-section boundary of Q_a and Q_b.

    Returns (z, c1, c2) with c1/c2 the 0-based coordinates whose ranks the
    transposition swaps.  For adjacent swapped positions only those two
    coordinates are tied and the remaining chain inequalities are strict;
    for non-adjacent positions the whole rank band between them must be
    tied for the boundaries to intersect.
    """
    n = a.n
    p, q = _transposition_positions(a, b)
    vals = np.sort(rng.uniform(-2.0, 2.0, size=n))[::-1]
    while np.min(-np.diff(vals)) < 0.05:
        vals = np.sort(rng.uniform(-2.0, 2.0, size=n))[::-1]
    tie = 0.5 * (vals[p - 1] + vals[q - 1])
    binv = b.inverse()
    z = np.empty(n)
    for pos in range(1, n + 1):
        z[binv.act_index(pos) - 1] = vals[pos - 1]
    for pos in range(p, q + 1):
        z[binv.act_index(pos) - 1] = tie
    c1, c2 = binv.act_index(p) - 1, binv.act_index(q) - 1
    return z, c1, c2


def _connectivity_layer(
    family: str,
    dims: tuple[int, ...],
    activation: str,
    z: np.ndarray,
    c1: int,
    c2: int,
) -> ControlLayer | None:
    """Explicit field with [f(z)]_{c1} != [f(z)]_{c2} for the tied point z."""
    n = int(np.prod(dims))
    if family in ("conv1", "conv2"):
        idx = _CircIndex.get(dims)
        for k0 in range(n):
            u1, u2 = z[idx.add[c1, k0]], z[idx.add[c2, k0]]
            if abs(u1 - u2) > 1e-9:
                s = _sep_scale(u2 - u1)
                if family == "conv1":
                    w = np.zeros(n)
                    w[k0] = s
                    return make_layer("conv1", dims, [1.0, -s * u1] + list(w), activation)
                w = np.zeros(n)
                w[k0] = 1.0
                return make_layer("conv2", dims, [s, -s * u1] + list(w), activation)
        return None
    if family in ("prod2d_1", "prod2d_2", "prodkd_1", "prodkd_2"):
        ax1 = _axis_sums_at(z, dims, c1)
        ax2 = _axis_sums_at(z, dims, c2)
        for axis, (v1, v2) in enumerate(zip(ax1, ax2)):
            if abs(v1 - v2) > 1e-9:
                sc = _sep_scale(v2 - v1)
                theta = _build_prod_theta(family, dims, axis, sc, -sc * v1)
                return make_layer(family, dims, theta, activation)
        return None
    # fs*/janossy*/fsmax/gamma1: coordinate i of f depends only on z_i and
    # invariants of z, so tied coordinates always map to tied coordinates.
    return None


def check_direct_connectivity(
    family: str,
    a: Permutation,
    b: Permutation,
    seed: int = 0,
    dims: tuple[int, ...] | None = None,
    activation: str = "tanh",
    attempts: int = 10,
    draw_budget: int = 100,
) -> VerificationReport:
    """Witness search for direct connectivity of cross sections Q_a, Q_b.

    Requires a = (i j) b for a transposition; samples tied boundary points
    and looks for a family member whose velocities at the tied coordinates
    differ.  A search where the velocity gap is identically zero is a
    structural failure; otherwise absence of a witness is inconclusive.
    """
    if a.n != b.n:
        raise ValueError("degree mismatch")
    dims = dims if dims is not None else (a.n,)
    rng = substream(seed, "connectivity", family, "".join(map(str, a.word + b.word)))
    gap_seen = 0.0
    witness = None
    for _ in range(attempts):
        z, c1, c2 = _boundary_point(a, b, rng)
        layer = _connectivity_layer(family, dims, activation, z, c1, c2)
        candidates = [layer] if layer is not None else []
        for _ in range(draw_budget // attempts):
            candidates.append(random_layer(family, dims, rng, activation, scale=2.0))
        for cand in candidates:
            fz = evaluate(cand, z)
            gap = abs(float(fz[c1] - fz[c2]))
            gap_seen = max(gap_seen, gap)
            if gap > SEPARATION_TOL:
                witness = {"z": list(z), "theta": list(cand.theta), "gap": gap}
                break
        if witness:
            break
    if witness:
        return make_report(
            f"check_direct_connectivity[{family}:{a}|{b}]", attempts, [], 0.0,
            SEPARATION_TOL, details={"witness_gap": witness["gap"]},
        )
    failures = [{"a": str(a), "b": str(b), "max_gap": gap_seen}]
    return make_report(
        f"check_direct_connectivity[{family}:{a}|{b}]", attempts, failures,
        worst=gap_seen, tolerance=SEPARATION_TOL,
        inconclusive=gap_seen > 0.0,
    )


class _UnionFind:
    def __init__(self, items):
        self.parent = {it: it for it in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[rx] = ry

    def connected(self, items) -> bool:
        roots = {self.find(it) for it in items}
        return len(roots) <= 1


def _edge_has_witness(
    family: str,
    dims: tuple[int, ...],
    activation: str,
    a: Permutation,
    b: Permutation,
    rng: np.random.Generator,
    attempts: int = 4,
    draws: int = 8,
) -> tuple[bool, float]:
    gap_seen = 0.0
    for _ in range(attempts):
        z, c1, c2 = _boundary_point(a, b, rng)
        layer = _connectivity_layer(family, dims, activation, z, c1, c2)
        candidates = ([layer] if layer is not None else []) + [
            random_layer(family, dims, rng, activation, scale=2.0) for _ in range(draws)
        ]
        for cand in candidates:
            fz = evaluate(cand, z)
            gap = abs(float(fz[c1] - fz[c2]))
            gap_seen = max(gap_seen, gap)
            if gap > SEPARATION_TOL:
                return True, gap_seen
    return False, gap_seen


def check_resolves(
    family: str,
    group: PermGroup,
    seed: int = 0,
    dims: tuple[int, ...] | None = None,
    activation: str = "tanh",
    pert_pairs: int = 20,
) -> VerificationReport:
    """Perturbation property plus transversal transitivity.

    Transitivity is certified by connecting all transversal reps inside
    the graph on S_n whose edges are directly connected cross-section
    pairs (adjacent-position transpositions); paths may pass through
    non-representative permutations, as the definition allows.
    """
    dims = dims if dims is not None else (group.n,)
    n = group.n
    pert = check_perturbation_property(
        family, group, pairs=pert_pairs, seed=seed, dims=dims, activation=activation
    )

    trans = right_transversal(group)
    rng = substream(seed, "resolves", family, group.descriptor)
    rep_words = [r.word for r in trans.reps]
    details: dict = {
        "perturbation": pert.verdict,
        "reps": len(trans.reps),
        "group": group.descriptor,
    }

    if len(trans.reps) <= 1:
        connected = True
        max_failed_gap = 0.0
        edges_found = 0
        edges_tested = 0
        details["transitivity"] = "trivial (single representative)"
    else:
        all_words = sorted(itertools.permutations(range(n)))
        uf = _UnionFind(all_words)
        taus = [transposition(n, k, k + 1) for k in range(1, n)]
        edges_found = 0
        edges_tested = 0
        max_failed_gap = 0.0
        rep_edges = 0
        rep_word_set = set(rep_words)
        for word in all_words:
            bperm = Permutation(word)
            for tau in taus:
                aperm = compose(tau, bperm)
                if aperm.word < word:
                    continue
                edges_tested += 1
                ok, gap = _edge_has_witness(family, dims, activation, aperm, bperm, rng)
                if ok:
                    edges_found += 1
                    uf.union(word, aperm.word)
                    if word in rep_word_set and aperm.word in rep_word_set:
                        rep_edges += 1
                else:
                    max_failed_gap = max(max_failed_gap, gap)
        connected = uf.connected(rep_words)
        details.update(
            {
                "edges_tested": edges_tested,
                "edges_found": edges_found,
                "rep_edges": rep_edges,
            }
        )

    failures = []
    if not pert.passed:
        failures.append({"aspect": "perturbation", "verdict": pert.verdict})
    if not connected:
        failures.append({"aspect": "transversal_transitivity", "max_gap": max_failed_gap})
    structural = (not connected) and max_failed_gap == 0.0
    return make_report(
        f"check_resolves[{family} vs {group.descriptor}]",
        samples=pert.samples + (edges_tested if len(trans.reps) > 1 else 0),
        failures=failures,
        worst=float(len(failures)),
        tolerance=SEPARATION_TOL,
        details=details,
        inconclusive=bool(failures) and not structural and pert.verdict != "fail",
    )


# ---------------------------------------------------------------------------
# Counterexample checks


def _pairwise_diffs(x: np.ndarray) -> np.ndarray:
    return x[..., :, None] - x[..., None, :]


def _dyadic(rng: np.random.Generator, shape, grain_bits: int = 20, magnitude: float = 2.0):
    steps = int(magnitude * 2**grain_bits)
    return rng.integers(-steps, steps + 1, size=shape) / float(2**grain_bits)


def _random_gamma_schedule(rng: np.random.Generator, n: int) -> Schedule:
    segs = []
    for _ in range(int(rng.integers(1, 4))):
        dur = float(rng.choice([0.25, 0.5, 1.0]))
        segs.append((make_layer("gamma1", n, [], "tanh"), dur))
    return Schedule(tuple(segs), steps_per_unit_time=4, method="euler")


def _sorted_descending(rng: np.random.Generator, n: int, lo: float, hi: float, gap: float):
    while True:
        v = np.sort(rng.uniform(lo, hi, size=n))[::-1]
        if np.min(-np.diff(v)) > gap:
            return v


def check_counterexamples(seed: int = 0, schedules: int = 50) -> VerificationReport:
    """The negative-family invariants, asserted over random schedules.

    * gamma1 flows add the same increment to every coordinate, so pairwise
      coordinate differences are preserved exactly (inputs and durations
      are drawn on a dyadic grid so the arithmetic itself is exact and the
      equality is bitwise).
    * fsmax flows keep ordered points ordered and preserve the order of
      first coordinates, at sufficiently fine steps.
    * fs1 (a positive family) violates difference preservation, so the
      first check is not vacuous.
    * With a max terminal, no fsmax model can push the error on min(x)
      below the paired-sample oracle bound.
    """
    rng = substream(seed, "counterexamples")
    failures = []
    details: dict = {}

    # gamma1: exact difference preservation
    exact_ok = 0
    for k in range(schedules):
        n = int(rng.integers(3, 6))
        sched = _random_gamma_schedule(rng, n)
        x = _dyadic(rng, n)
        y = integrate(sched, x).y
        if np.array_equal(_pairwise_diffs(y), _pairwise_diffs(x)):
            exact_ok += 1
        else:
            failures.append({"check": "gamma1_differences", "schedule": k, "x": list(x)})
    details["gamma1_exact"] = f"{exact_ok}/{schedules}"

    # fsmax: Q-preservation and first-coordinate order at refined steps
    fsmax_ok = 0
    artifacts = 0
    for k in range(schedules):
        n = int(rng.integers(3, 6))
        segs = tuple(
            (random_layer("fsmax", n, rng, "tanh", scale=0.5), float(rng.choice([0.5, 1.0])))
            for _ in range(int(rng.integers(1, 4)))
        )
        x = _sorted_descending(rng, n, -2.0, 2.0, 0.05)
        y = _sorted_descending(rng, n, -2.0, 2.0, 0.05)
        if x[0] <= y[0]:
            x, y = (y, x) if y[0] > x[0] else (x + 1.0, y)
        spt = 4
        ok = False
        while spt <= 4096:
            sched = Schedule(segs, steps_per_unit_time=spt, method="euler")
            fx = integrate(sched, x).y
            fy = integrate(sched, y).y
            in_q = np.all(np.diff(fx) < 0) and np.all(np.diff(fy) < 0)
            if in_q and fx[0] > fy[0]:
                ok = True
                break
            artifacts += 1
            spt *= 2
        if ok:
            fsmax_ok += 1
        else:
            failures.append({"check": "fsmax_order", "schedule": k})
    details["fsmax_ok"] = f"{fsmax_ok}/{schedules}"
    details["fsmax_coarse_step_artifacts"] = artifacts

    # fs1 must violate difference preservation (non-vacuity)
    violated = False
    for _ in range(10):
        n = 3
        segs = ((random_layer("fs1", n, rng, "tanh", scale=0.5), 1.0),)
        sched = Schedule(segs, steps_per_unit_time=4, method="euler")
        x = rng.uniform(-1.0, 1.0, size=n)
        y = integrate(sched, x).y
        if np.max(np.abs(_pairwise_diffs(y) - _pairwise_diffs(x))) > 1e-6:
            violated = True
            break
    if not violated:
        failures.append({"check": "fs1_nonvacuity"})
    details["fs1_violates_difference_preservation"] = violated

    # fsmax + max terminal cannot approximate min(x): paired oracle bound
    from .models import Model, fit_arrays, forward

    n = 3
    pairs = 48
    xs, ys, gaps = [], [], []
    for _ in range(pairs):
        x = _sorted_descending(rng, n, -3.0, 3.0, 0.2)
        width = x[0] - x[-1]
        inner = _sorted_descending(rng, n, x[-1] + 0.1 * width, x[0] - 0.1 * width, 0.02)
        xs.append(x)
        ys.append(inner)
        gaps.append(inner[-1] - x[-1])
    X = np.concatenate([np.stack(xs), np.stack(ys)])
    t_min = np.min(X, axis=-1)
    bound = float(np.mean(np.square(gaps)) / 4.0)

    def paired_mse(model: Model) -> float:
        pred = forward(model, X)
        return float(np.mean((pred - t_min) ** 2))

    worst_margin = np.inf
    for trial in range(6):
        segs = tuple((random_layer("fsmax", n, rng, "tanh", scale=0.5), 1.0) for _ in range(5))
        model = Model(Schedule(segs, steps_per_unit_time=8, method="euler"), terminal="max")
        if trial == 0:
            model, _ = fit_arrays(
                model, X, t_min, iterations=150, learning_rate=1e-2, momentum=0.9, log_every=150
            )
        model = Model(model.schedule.with_steps(64), terminal="max")
        mse = paired_mse(model)
        worst_margin = min(worst_margin, mse / bound)
        if mse < 0.99 * bound:
            failures.append({"check": "fsmax_min_oracle", "mse": mse, "bound": bound})
            break
    details["fsmax_min_bound"] = bound
    details["fsmax_min_worst_margin"] = float(worst_margin)

    return make_report(
        "check_counterexamples",
        samples=2 * schedules + 10 + pairs,
        failures=failures,
        worst=float(len(failures)),
        tolerance=0.0,
        details=details,
    )
