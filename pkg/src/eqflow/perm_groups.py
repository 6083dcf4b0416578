"""Exact permutation-group algebra on index sets {1..n}.

Conventions
-----------
* The public API speaks 1-based indices; internally a permutation is a
  0-based word ``word[i] = image of i``.
* A permutation acts on a vector by ``act_vector(p, x)[i] = x[p(i)]``.
  Under this action ``act_vector(compose(p, q), x) ==
  act_vector(q, act_vector(p, x))`` (the action is contravariant in the
  composition order; the unit tests pin this orientation).
* Coordinate equality is exact floating point.  Cross-section membership
  is a strict-inequality predicate, and fuzzy comparisons would break the
  partition property this module is verified against.

The cross section ``Q_a`` is the open cone of vectors whose coordinates
are strictly ordered by ``a``: coordinate ``inverse(a)(k)`` holds the k-th
largest value.  ``Q_a == a(Q)`` with ``Q`` the descending cone.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .reports import VerificationReport, make_report
from .rng import substream

GROUP_SIZE_CAP = 10**6
TRANSVERSAL_MAX_DEGREE = 8


@dataclass(frozen=True)
class Permutation:
    """A bijection of {1..n}, stored as the 0-based word ``word[i] = p(i+1)-1``."""

    word: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.word)
        if sorted(self.word) != list(range(n)):
            raise ValueError(f"not a bijection on {{1..{n}}}: {self.word}")

    @property
    def n(self) -> int:
        return len(self.word)

    def act_index(self, i: int) -> int:
        """Image of the 1-based index ``i``."""
        if not 1 <= i <= self.n:
            raise IndexError(f"index {i} out of range 1..{self.n}")
        return self.word[i - 1] + 1

    def act_vector(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ValueError(f"vector length {x.shape[-1]} != degree {self.n}")
        return x[..., list(self.word)]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, img in enumerate(self.word):
            inv[img] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == img for i, img in enumerate(self.word))

    def cycles(self) -> list[tuple[int, ...]]:
        """Disjoint cycles in 1-based notation, fixed points omitted."""
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i + 1)
                i = self.word[i]
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def __str__(self) -> str:
        cycs = self.cycles()
        if not cycs:
            return "e"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cycs)


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(n)))


def transposition(n: int, i: int, j: int) -> Permutation:
    """The transposition (i j) of 1-based indices in S_n."""
    if i == j:
        raise ValueError("transposition needs two distinct indices")
    word = list(range(n))
    word[i - 1], word[j - 1] = word[j - 1], word[i - 1]
    return Permutation(tuple(word))


def shift(n: int) -> Permutation:
    """The 1-step shift t with t(i) = i+1, periodic."""
    return Permutation(tuple((i + 1) % n for i in range(n)))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """p∘q on indices: (p∘q)(i) = p(q(i)).

    On vectors this runs the actions in the other order:
    ``act_vector(compose(p, q), x) == act_vector(q, act_vector(p, x))``.
    """
    if p.n != q.n:
        raise ValueError("degree mismatch")
    return Permutation(tuple(p.word[q.word[i]] for i in range(p.n)))


def inverse(p: Permutation) -> Permutation:
    return p.inverse()


def from_cycles(n: int, text: str) -> Permutation:
    """Parse 1-based cycle notation such as ``(1 2)(3 4)`` or ``e``."""
    text = text.strip()
    if text in ("e", "()", ""):
        return identity(n)
    if not re.fullmatch(r"(\(\s*\d+(\s+\d+)*\s*\))+", text):
        raise ValueError(f"bad cycle notation: {text!r}")
    word = list(range(n))
    for cyc in re.findall(r"\(([^)]*)\)", text):
        idx = [int(tok) for tok in cyc.split()]
        if any(not 1 <= i <= n for i in idx):
            raise ValueError(f"cycle index out of range 1..{n}: {cyc!r}")
        if len(set(idx)) != len(idx):
            raise ValueError(f"repeated index in cycle: {cyc!r}")
        for a, b in zip(idx, idx[1:] + idx[:1]):
            word[a - 1] = b - 1
    return Permutation(tuple(word))


class PermGroup:
    """A finite permutation group on {1..n}, fully enumerated.

    Immutable after construction.  ``descriptor`` is the serializable
    builder record (e.g. ``translation_1d 3``); explicit generator lists
    serialize through :func:`format_group_spec`.
    """

    def __init__(
        self,
        n: int,
        elements: Iterable[Permutation],
        generators: Iterable[Permutation] = (),
        descriptor: str = "",
    ) -> None:
        self.n = n
        self.elements: tuple[Permutation, ...] = tuple(
            sorted(elements, key=lambda p: p.word)
        )
        self.generators: tuple[Permutation, ...] = tuple(generators)
        self.descriptor = descriptor or format_group_spec(self)
        self._set = frozenset(self.elements)
        self._check_axioms()

    def _check_axioms(self) -> None:
        if identity(self.n) not in self._set:
            raise ValueError("group does not contain the identity")
        for p in self.elements:
            if p.inverse() not in self._set:
                raise ValueError(f"not closed under inverse at {p}")

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.elements)

    def __contains__(self, p: Permutation) -> bool:
        return p in self._set

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PermGroup) and self.n == other.n and self._set == other._set

    def __hash__(self) -> int:
        return hash((self.n, self._set))

    def __repr__(self) -> str:
        return f"PermGroup({self.descriptor!r}, order={len(self)})"

    @property
    def identity(self) -> Permutation:
        return identity(self.n)

    def orbit(self, i: int) -> frozenset[int]:
        return frozenset(g.act_index(i) for g in self.elements)

    def is_transitive(self) -> bool:
        return len(self.orbit(1)) == self.n

    def stabilizer(self, i: int) -> "PermGroup":
        if not 1 <= i <= self.n:
            raise IndexError(f"index {i} out of range 1..{self.n}")
        elems = [g for g in self.elements if g.act_index(i) == i]
        return PermGroup(self.n, elems, descriptor=f"stab_{i}({self.descriptor})")

    def random_element(self, rng: np.random.Generator) -> Permutation:
        return self.elements[int(rng.integers(len(self.elements)))]


def generate_group(
    n: int,
    generators: Iterable[Permutation],
    cap: int = GROUP_SIZE_CAP,
    descriptor: str = "",
) -> PermGroup:
    """Closure of ``generators`` under composition, by breadth-first products."""
    gens = tuple(generators)
    for g in gens:
        if g.n != n:
            raise ValueError(f"generator degree {g.n} != {n}")
    seen = {identity(n)}
    queue = deque(seen)
    while queue:
        p = queue.popleft()
        for g in gens:
            q = compose(p, g)
            if q not in seen:
                if len(seen) + 1 > cap:
                    raise ValueError(f"group size cap {cap} exceeded")
                seen.add(q)
                queue.append(q)
    return PermGroup(n, seen, gens, descriptor=descriptor)


# ---------------------------------------------------------------------------
# Builders


def trivial_group(n: int) -> PermGroup:
    return generate_group(n, (), descriptor=f"trivial {n}")


def symmetric_group(n: int) -> PermGroup:
    gens = [transposition(n, i, i + 1) for i in range(1, n)] if n >= 2 else []
    return generate_group(n, gens, descriptor=f"symmetric {n}")


def translation_group_1d(n: int) -> PermGroup:
    return generate_group(n, [shift(n)], descriptor=f"translation_1d {n}")


def _flat(dims: Sequence[int], multi: Sequence[int]) -> int:
    """Row-major flattening of a 0-based multi-index."""
    f = 0
    for d, i in zip(dims, multi):
        f = f * d + i
    return f


def _axis_shift_word(dims: Sequence[int], axis: int) -> tuple[int, ...]:
    n = int(np.prod(dims))
    word = [0] * n
    for multi in itertools.product(*[range(d) for d in dims]):
        shifted = list(multi)
        shifted[axis] = (shifted[axis] + 1) % dims[axis]
        word[_flat(dims, multi)] = _flat(dims, shifted)
    return tuple(word)


def translation_group_nd(dims: Sequence[int]) -> PermGroup:
    """Translations of a d1 x ... x dN grid, on row-major flattened indices."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError("dims must be positive")
    n = int(np.prod(dims))
    gens = [Permutation(_axis_shift_word(dims, ax)) for ax in range(len(dims))]
    return generate_group(n, gens, descriptor="translation_nd " + " ".join(map(str, dims)))


def product_permutation_group(*sizes: int) -> PermGroup:
    """S_{n1} x S_{n2} x ... acting on the row-major flattened grid.

    The factor for axis k permutes the k-th multi-index slot:
    (a, b)(i, j) = (a(i), b(j)) in the 2D case.
    """
    dims = tuple(int(s) for s in sizes)
    if any(d < 1 for d in dims):
        raise ValueError("sizes must be positive")
    n = int(np.prod(dims))
    gens = []
    for axis, d in enumerate(dims):
        for a in range(d - 1):
            word = [0] * n
            for multi in itertools.product(*[range(dd) for dd in dims]):
                img = list(multi)
                if img[axis] == a:
                    img[axis] = a + 1
                elif img[axis] == a + 1:
                    img[axis] = a
                word[_flat(dims, multi)] = _flat(dims, img)
            gens.append(Permutation(tuple(word)))
    return generate_group(n, gens, descriptor="product " + " ".join(map(str, dims)))


def parse_group_spec(spec: str) -> PermGroup:
    """Build a group from its text descriptor.

    Understood forms: ``trivial n``, ``symmetric n``, ``translation_1d n``,
    ``translation_nd d1 d2 ...``, ``product n1 n2 ...`` and
    ``generators n (1 2)(3 4) (1 3) ...``.
    """
    toks = spec.split()
    if not toks:
        raise ValueError("empty group spec")
    kind, args = toks[0], toks[1:]
    if kind == "trivial":
        return trivial_group(int(args[0]))
    if kind == "symmetric":
        return symmetric_group(int(args[0]))
    if kind == "translation_1d":
        return translation_group_1d(int(args[0]))
    if kind == "translation_nd":
        return translation_group_nd([int(a) for a in args])
    if kind == "product":
        return product_permutation_group(*[int(a) for a in args])
    if kind == "generators":
        n = int(args[0])
        rest = spec.split(None, 2)[2] if len(args) > 1 else ""
        gens = [from_cycles(n, tok) for tok in _split_cycle_tokens(rest)]
        return generate_group(n, gens, descriptor=spec)
    raise ValueError(f"unknown group spec {spec!r}")


def _split_cycle_tokens(text: str) -> list[str]:
    """Split generator expressions, honoring spaces inside cycles.

    ``(1 2)(3 4) (1 3)`` -> [``(1 2)(3 4)``, ``(1 3)``].
    """
    tokens = []
    depth = 0
    cur = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch.isspace() and depth == 0:
            if cur:
                tokens.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        tokens.append("".join(cur))
    return [t for t in tokens if t and t != "e"]


def format_group_spec(group: PermGroup) -> str:
    gens = " ".join(str(g) for g in group.generators) or "e"
    return f"generators {group.n} {gens}"


# ---------------------------------------------------------------------------
# Cross-section geometry


def is_general_position(x: np.ndarray | Sequence[float]) -> bool:
    """True iff all coordinates are pairwise distinct (exact comparison)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a vector of length >= 2")
    return len(np.unique(x)) == x.size


def in_cross_section(x: np.ndarray | Sequence[float], a: Permutation) -> bool:
    """True iff x_{a^{-1}(1)} > x_{a^{-1}(2)} > ... > x_{a^{-1}(n)}."""
    x = np.asarray(x, dtype=float)
    chain = x[list(a.inverse().word)]
    return bool(np.all(chain[:-1] > chain[1:]))


def locate_cross_section(x: np.ndarray | Sequence[float]) -> Permutation | None:
    """The unique a with x in Q_a, or None off general position."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(-x, kind="stable")
    ranked = x[order]
    if np.any(ranked[:-1] <= ranked[1:]):
        return None
    return Permutation(tuple(int(i) for i in order)).inverse()


def snap_coordinates(x: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
    """Collapse coordinates closer than ``tolerance`` onto a common value.

    With the default tolerance of 0 this is the identity; callers that
    need fuzzy coincidence detection opt in explicitly so the strict
    cross-section predicates above stay exact.
    """
    x = np.asarray(x, dtype=float).copy()
    if tolerance <= 0.0:
        return x
    order = np.argsort(x)
    for prev, cur in zip(order[:-1], order[1:]):
        if x[cur] - x[prev] <= tolerance:
            x[cur] = x[prev]
    return x


def is_g_distinct(group: PermGroup, points: Sequence[np.ndarray]) -> bool:
    """True iff g(x^i) = x^j only for g = e and i = j (exact equality)."""
    pts = [np.asarray(p, dtype=float) for p in points]
    for g in group:
        for i, p in enumerate(pts):
            gp = g.act_vector(p)
            for j, q in enumerate(pts):
                if np.array_equal(gp, q) and not (g.is_identity() and i == j):
                    return False
    return True


# ---------------------------------------------------------------------------
# Transversals


@dataclass(frozen=True)
class Transversal:
    """Coset representatives of G in S_n.

    The reps simultaneously represent the right cosets (G∘rep pairwise
    disjoint, covering S_n) and the left cosets (rep∘G), which is what the
    cross-section partition needs.  A common system always exists (Hall);
    it is found by a deterministic matching.
    """

    group: PermGroup
    reps: tuple[Permutation, ...]

    def __len__(self) -> int:
        return len(self.reps)


def _bipartite_match(candidates: list[list[int]], prefer_last: bool) -> list[int] | None:
    """Assign to each row a distinct column from its candidate list.

    Rows are processed in order and each tries its candidates in list
    order (reversed when ``prefer_last``), recursing via augmenting paths,
    so the result is deterministic.
    """
    col_of_row: list[int] = [-1] * len(candidates)
    row_of_col: dict[int, int] = {}

    def try_assign(row: int, banned: set[int]) -> bool:
        cols = candidates[row][::-1] if prefer_last else candidates[row]
        for col in cols:
            if col in banned:
                continue
            banned.add(col)
            if col not in row_of_col or try_assign(row_of_col[col], banned):
                row_of_col[col] = row
                col_of_row[row] = col
                return True
        return False

    for row in range(len(candidates)):
        if not try_assign(row, set()):
            return None
    return col_of_row


def right_transversal(group: PermGroup, tie_break: str = "lex_min") -> Transversal:
    """A deterministic transversal of ``group`` in S_n (n <= 8).

    ``tie_break`` selects between two distinct deterministic choices
    (``lex_min`` / ``lex_max``) so that downstream results can be checked
    for transversal independence.
    """
    n = group.n
    if n > TRANSVERSAL_MAX_DEGREE:
        raise ValueError(f"transversal computation requires n <= {TRANSVERSAL_MAX_DEGREE}")
    if tie_break not in ("lex_min", "lex_max"):
        raise ValueError(f"unknown tie_break {tie_break!r}")
    prefer_last = tie_break == "lex_max"

    all_words = sorted(itertools.permutations(range(n)), reverse=prefer_last)
    left_key: dict[tuple[int, ...], tuple[int, ...]] = {}
    right_key: dict[tuple[int, ...], tuple[int, ...]] = {}
    for word in all_words:
        s = Permutation(word)
        if word not in left_key:
            members = [compose(s, g).word for g in group]
            key = min(members)
            for m in members:
                left_key[m] = key
        if word not in right_key:
            members = [compose(g, s).word for g in group]
            key = min(members)
            for m in members:
                right_key[m] = key

    left_cosets: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for word in all_words:
        left_cosets.setdefault(left_key[word], []).append(word)
    left_keys = sorted(left_cosets, reverse=prefer_last)
    right_keys = sorted({right_key[w] for w in right_key}, reverse=prefer_last)
    right_index = {key: i for i, key in enumerate(right_keys)}

    # One rep per left coset, all in distinct right cosets: match left
    # cosets to right cosets through their intersections.
    candidates = []
    members_by_pair: dict[tuple[int, int], tuple[int, ...]] = {}
    for row, lkey in enumerate(left_keys):
        cols = []
        for word in left_cosets[lkey]:
            col = right_index[right_key[word]]
            if (row, col) not in members_by_pair:
                members_by_pair[(row, col)] = word
                cols.append(col)
        candidates.append(cols)
    assignment = _bipartite_match(candidates, prefer_last)
    if assignment is None:
        raise RuntimeError("no common left/right transversal found (should not happen)")
    reps = [Permutation(members_by_pair[(row, col)]) for row, col in enumerate(assignment)]
    reps.sort(key=lambda p: p.word)
    return Transversal(group, tuple(reps))


def check_transversal_axioms(trans: Transversal) -> None:
    """Raise unless reps are pairwise non-equivalent and cover S_n (n <= 8)."""
    group = trans.group
    n = group.n
    for i, a in enumerate(trans.reps):
        for j, b in enumerate(trans.reps):
            if i != j and compose(a, b.inverse()) in group:
                raise AssertionError(f"reps {a} and {b} share a right coset")
    covered = set()
    for rep in trans.reps:
        for g in group:
            covered.add(compose(g, rep).word)
    if len(covered) != int(np.prod(range(1, n + 1))):
        raise AssertionError("right cosets of the reps do not cover S_n")


# ---------------------------------------------------------------------------
# Partition check


def partition_check(
    group: PermGroup,
    trans: Transversal,
    sample_count: int = 10_000,
    seed: int = 0,
    extra_points: Sequence[np.ndarray] | None = None,
) -> VerificationReport:
    """Check that the images g(Q_A) tile general-position space, g in G.

    Every sampled general-position point must lie in exactly one g(Q_A);
    points off general position are excluded from the count and reported
    as boundary.
    """
    n = group.n
    rng = substream(seed, "partition_check", group.descriptor)
    X = rng.uniform(-1.0, 1.0, size=(sample_count, n))
    rep_words = frozenset(r.word for r in trans.reps)

    points = [X[k] for k in range(sample_count)]
    if extra_points is not None:
        points.extend(np.asarray(p, dtype=float) for p in extra_points)

    failures: list[list[float]] = []
    worst = 0.0
    boundary = 0
    checked = 0
    for x in points:
        if len(np.unique(x)) != n:
            boundary += 1
            continue
        checked += 1
        hits = 0
        for g in group:
            y = g.inverse().act_vector(x)
            located = locate_cross_section(y)
            if located is not None and located.word in rep_words:
                hits += 1
        if hits != 1:
            failures.append(list(x))
            worst = max(worst, abs(hits - 1))
    return make_report(
        name=f"partition_check[{group.descriptor}]",
        samples=checked,
        failures=failures,
        worst=worst,
        tolerance=0.0,
        details={"boundary_skipped": boundary, "reps": len(trans.reps)},
    )
