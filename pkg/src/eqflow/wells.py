"""One-dimensional well functions and their symmetric invariant extensions.

A 1D well function is Lipschitz with a nondegenerate closed interval as
its exact zero set.  The symmetric extensions vanish on a box and escape
zero when a single coordinate grows; both facts are checked empirically
here rather than assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .reports import VerificationReport, make_report
from .rng import substream

ZERO_ATOL = 1e-12
ESCAPE_CAP = 1e6


@dataclass(frozen=True)
class ScalarFunction:
    """A real function of one variable with a declared Lipschitz constant.

    The constant is carried for test bounds only; it is asserted on
    sampled pairs, never estimated globally.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    name: str

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SymmetricWellCandidate:
    """A symmetric function R^n -> R with a declared zero box I^n."""

    fn: Callable[[np.ndarray], np.ndarray]
    n: int
    zero_box: tuple[float, float]
    name: str

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"vector length {x.shape[-1]} != degree {self.n}")
        return self.fn(x)


def well_bump(x):
    """relu(x-1) + relu(-x-1); zero exactly on [-1, 1], slope 1 outside."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x - 1.0, 0.0) + np.maximum(-x - 1.0, 0.0)


WELL_BUMP = ScalarFunction(well_bump, lipschitz=1.0, name="well_bump")


def _invariant_sum(values: np.ndarray) -> np.ndarray:
    # summed in sorted order so the floating-point result is permutation
    # invariant bit for bit, not just up to rounding
    return np.sum(np.sort(values, axis=-1), axis=-1)


def sym_well_sum(h: ScalarFunction, n: int) -> SymmetricWellCandidate:
    """tau(x) = h(x_1 + ... + x_n).

    Symmetric and invariant, with zero box I = [-1/n, 1/n] for the bump;
    its zero set is unbounded, so it is not a plain well function.
    """
    return SymmetricWellCandidate(
        fn=lambda x: h(_invariant_sum(x)),
        n=n,
        zero_box=(-1.0 / n, 1.0 / n),
        name=f"sum[{h.name}]",
    )


def sym_well_coordwise(h: ScalarFunction, n: int) -> SymmetricWellCandidate:
    """tau(x) = h(x_1) + ... + h(x_n), zero box [-1, 1] for the bump."""
    return SymmetricWellCandidate(
        fn=lambda x: _invariant_sum(h(x)),
        n=n,
        zero_box=(-1.0, 1.0),
        name=f"coordwise[{h.name}]",
    )


def check_1d_well(
    f: ScalarFunction,
    lo: float,
    hi: float,
    count: int = 10_001,
    atol: float = ZERO_ATOL,
) -> VerificationReport:
    """Sample f on a grid and test that its numerical zero set is one
    contiguous nondegenerate interval strictly inside the grid."""
    if not (hi > lo) or count < 3:
        raise ValueError("degenerate grid")
    grid = np.linspace(lo, hi, count)
    vals = np.asarray(f(grid))
    zero = np.abs(vals) <= atol

    runs: list[tuple[int, int]] = []
    start = None
    for i, z in enumerate(zero):
        if z and start is None:
            start = i
        elif not z and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, count - 1))

    flags = []
    if not runs:
        flags.append("empty")
    else:
        if len(runs) > 1:
            flags.append("disconnected")
        if any(a == 0 or b == count - 1 for a, b in runs):
            flags.append("unbounded-at-grid-edge")
        if all(b == a for a, b in runs):
            flags.append("degenerate")
    failures = [flags] if flags else []
    details: dict = {"flags": flags}
    if runs:
        a, b = runs[0]
        details["zero_interval"] = (float(grid[a]), float(grid[b]))
    return make_report(
        name=f"check_1d_well[{f.name}]",
        samples=count,
        failures=failures,
        worst=float(len(flags)),
        tolerance=atol,
        details=details,
    )


def check_symmetric_invariant_well(
    tau: SymmetricWellCandidate,
    samples: int = 200,
    seed: int = 0,
    b: float = 2.0,
    atol: float = ZERO_ATOL,
    escape_cap: float = ESCAPE_CAP,
) -> VerificationReport:
    """Three sub-checks: permutation invariance, zero box, escape.

    The escape parameter a is searched by doubling; exhausting the cap
    counts as failure of the escape condition (the verdict records a
    bounded search, not a disproof).
    """
    n = tau.n
    rng = substream(seed, "sym_well", tau.name)
    failures: list = []
    worst = 0.0
    details: dict = {}

    # 1. invariance under random permutations, exact to atol
    X = rng.uniform(-3.0, 3.0, size=(samples, n))
    base = np.asarray(tau(X))
    for _ in range(8):
        perm = rng.permutation(n)
        diff = np.abs(np.asarray(tau(X[:, perm])) - base)
        worst = max(worst, float(diff.max()))
        if diff.max() > atol:
            k = int(diff.argmax())
            failures.append(("invariance", list(X[k]), list(perm)))

    # 2. zero on the declared box
    lo, hi = tau.zero_box
    Z = rng.uniform(lo, hi, size=(samples, n))
    zvals = np.abs(np.asarray(tau(Z)))
    worst = max(worst, float(zvals.max()))
    if zvals.max() > atol:
        failures.append(("zero_box", list(Z[int(zvals.argmax())])))

    # 3. escape: find a such that tau != 0 whenever one coordinate
    #    exceeds a in magnitude and the others stay below b.  Corner
    #    probes (big coordinate just above a, others at +-b) catch the
    #    cancellation cases random sampling can miss.
    a = max(1.0, abs(lo), abs(hi))
    found_a = None
    while a <= escape_cap:
        ok = True
        for i in range(n):
            pts = rng.uniform(-b, b, size=(samples, n))
            mag = rng.uniform(a * (1.0 + 1e-9), 2.0 * a, size=samples)
            pts[:, i] = np.where(rng.random(samples) < 0.5, mag, -mag)
            corners = []
            for big in (a * (1.0 + 1e-9), 2.0 * a, -a * (1.0 + 1e-9), -2.0 * a):
                for signs in itertools.product((-1.0, 1.0), repeat=n - 1):
                    corner = np.array(signs) * b * (1.0 - 1e-9)
                    corner = np.insert(corner, i, big)
                    corners.append(corner)
            pts = np.concatenate([pts, np.stack(corners)])
            if np.any(np.abs(np.asarray(tau(pts))) <= atol):
                ok = False
                break
        if ok:
            found_a = a
            break
        a *= 2.0
    if found_a is None:
        failures.append(("escape", f"no a below cap {escape_cap:g} at b={b:g}"))
        details["escape"] = "exhausted"
    else:
        details["escape_a"] = found_a
    details["b"] = b

    return make_report(
        name=f"check_symmetric_invariant_well[{tau.name}]",
        samples=samples,
        failures=failures,
        worst=worst,
        tolerance=atol,
        details=details,
    )


def exhaustive_invariance_gap(tau: SymmetricWellCandidate, points: np.ndarray) -> float:
    """Worst |tau(px) - tau(x)| over all n! permutations of each point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    base = np.asarray(tau(points))
    worst = 0.0
    for perm in itertools.permutations(range(tau.n)):
        vals = np.asarray(tau(points[:, list(perm)]))
        worst = max(worst, float(np.abs(vals - base).max()))
    return worst
