"""Registry of invariant target functions for approximation experiments.

Each target declares the permutation group it is invariant under; the
declaration is spot-checked by sampling at construction time, so a wrong
registration fails immediately rather than polluting experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .perm_groups import PermGroup, parse_group_spec
from .rng import substream

_REGISTRATION_TOL = 1e-10


@dataclass(frozen=True)
class TargetFunction:
    tag: str
    fn: Callable[[np.ndarray], np.ndarray]
    group_spec: str
    n: int

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"target {self.tag} expects length {self.n}")
        return self.fn(x)


def _check_registered_invariance(target: TargetFunction, seed: int = 7) -> None:
    rng = substream(seed, "target-registration", target.tag)
    X = rng.uniform(-1.5, 1.5, size=(64, target.n))
    base = target.fn(X)
    spec = target.group_spec
    if spec.startswith("symmetric"):
        perms = [rng.permutation(target.n) for _ in range(6)]
    else:
        group = parse_group_spec(spec)
        perms = [np.array(group.random_element(rng).word) for _ in range(6)]
    for perm in perms:
        gap = np.max(np.abs(target.fn(X[:, perm]) - base))
        if gap > _REGISTRATION_TOL:
            raise ValueError(
                f"target {target.tag!r} is not invariant under {spec!r} (gap {gap:.3e})"
            )


def _make(tag: str, fn, group_spec: str, n: int) -> TargetFunction:
    target = TargetFunction(tag, fn, group_spec, n)
    _check_registered_invariance(target)
    return target


def _t3_antisym(x):
    return (x[..., 0] - x[..., 1]) * (x[..., 1] - x[..., 2]) * (x[..., 2] - x[..., 0])


def build_target(tag: str, n: int | None = None, dims: tuple[int, ...] | None = None) -> TargetFunction:
    """Construct a registered target by tag.

    Tags: ``t3_antisym`` (n = 3, cyclic-shift invariant only), ``range``,
    ``prod``, ``sum_sq``, ``min`` (fully symmetric), ``row_sumsq_2d``
    (product-permutation invariant on a 2D grid, needs ``dims``).
    """
    if tag == "t3_antisym":
        if n not in (None, 3):
            raise ValueError("t3_antisym is defined on n = 3")
        return _make("t3_antisym", _t3_antisym, "translation_1d 3", 3)
    if tag == "row_sumsq_2d":
        if dims is None or len(dims) != 2:
            raise ValueError("row_sumsq_2d needs dims = (d1, d2)")
        d1, d2 = dims

        def fn(x):
            grid = x.reshape(x.shape[:-1] + (d1, d2))
            return np.sum(np.sum(grid, axis=-1) ** 2, axis=-1)

        return _make("row_sumsq_2d", fn, f"product {d1} {d2}", d1 * d2)
    if n is None:
        raise ValueError(f"target {tag!r} needs the degree n")
    simple = {
        "range": lambda x: np.max(x, axis=-1) - np.min(x, axis=-1),
        "prod": lambda x: np.prod(x, axis=-1),
        "sum_sq": lambda x: np.sum(x * x, axis=-1),
        "min": lambda x: np.min(x, axis=-1),
    }
    if tag not in simple:
        raise KeyError(f"unknown target tag {tag!r}")
    return _make(tag, simple[tag], f"symmetric {n}", n)


def register_targets(n: int = 3, dims: tuple[int, ...] = (2, 3)) -> dict[str, TargetFunction]:
    """The stock registry at a given degree (and grid shape)."""
    reg = {tag: build_target(tag, n=n) for tag in ("range", "prod", "sum_sq", "min")}
    reg["t3_antisym"] = build_target("t3_antisym")
    reg["row_sumsq_2d"] = build_target("row_sumsq_2d", dims=dims)
    return reg


def group_average(target: TargetFunction, group: PermGroup) -> TargetFunction:
    """The L2-optimal invariant baseline: mean of target over the group orbit.

    Averaging an invariant function returns it unchanged; averaging a
    non-invariant one gives the best approximation any G-invariant model
    can reach in mean square.
    """
    if group.n != target.n:
        raise ValueError("group degree does not match target")
    words = [list(g.word) for g in group]

    def fn(x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros(x.shape[:-1])
        for word in words:
            acc = acc + target.fn(x[..., word])
        return acc / len(words)

    return TargetFunction(
        tag=f"avg[{target.tag}|{group.descriptor}]",
        fn=fn,
        group_spec=group.descriptor,
        n=target.n,
    )
