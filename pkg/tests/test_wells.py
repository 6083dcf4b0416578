"""Well functions: 1D bump, symmetric constructions, empirical checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqflow.wells import (
    WELL_BUMP,
    ScalarFunction,
    SymmetricWellCandidate,
    check_1d_well,
    check_symmetric_invariant_well,
    exhaustive_invariance_gap,
    sym_well_coordwise,
    sym_well_sum,
    well_bump,
)


def test_well_bump_values():
    assert well_bump(0.0) == 0.0
    assert well_bump(2.0) == 1.0
    assert well_bump(-3.0) == 2.0
    assert well_bump(1.0) == 0.0 and well_bump(-1.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50))
def test_well_bump_zero_set_is_interval(x):
    inside = -1.0 <= x <= 1.0
    assert (well_bump(x) == 0.0) == inside


def test_sym_well_sum_values():
    tau = sym_well_sum(WELL_BUMP, 3)
    assert tau(np.array([0.2, 0.3, -0.4])) == 0.0
    assert tau(np.array([1.0, 1.0, 1.0])) == well_bump(3.0) == 2.0
    x = np.array([0.5, -1.2, 2.0])
    assert tau(x) == tau(x[[2, 0, 1]])


def test_sym_well_coordwise_values():
    tau = sym_well_coordwise(WELL_BUMP, 3)
    assert tau(np.array([0.0, 0.5, -1.0])) == 0.0
    assert tau(np.array([2.0, 0.0, 0.0])) == 1.0
    x = np.array([0.5, -1.2, 2.0])
    assert tau(x) == tau(x[[1, 2, 0]])


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("ctor", [sym_well_sum, sym_well_coordwise])
def test_exact_invariance_all_permutations(n, ctor):
    tau = ctor(WELL_BUMP, n)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-3, 3, size=(20, n))
    assert exhaustive_invariance_gap(tau, pts) == 0.0


def test_sum_construction_zero_set_unbounded():
    """A zero of tau = bump(sum) exists outside any ball."""
    tau = sym_well_sum(WELL_BUMP, 3)
    for radius in (10.0, 1e3, 1e6):
        x = np.array([radius, -radius, 0.0])
        assert tau(x) == 0.0 and np.linalg.norm(x) >= radius


def test_check_1d_well_bump_passes():
    rep = check_1d_well(WELL_BUMP, -5, 5, count=10_001)
    assert rep.passed
    lo, hi = rep.details["zero_interval"]
    assert abs(lo + 1.0) < 2e-3 and abs(hi - 1.0) < 2e-3


def test_check_1d_well_relu_fails_at_edge():
    relu = ScalarFunction(lambda x: np.maximum(x, 0.0), 1.0, "relu")
    rep = check_1d_well(relu, -5, 5)
    assert not rep.passed
    assert "unbounded-at-grid-edge" in rep.details["flags"]


def test_check_1d_well_square_degenerate():
    sq = ScalarFunction(lambda x: x * x, 10.0, "square")
    rep = check_1d_well(sq, -5, 5, count=10_001)
    assert not rep.passed
    flags = rep.details["flags"]
    assert "degenerate" in flags or "empty" in flags


def test_check_1d_well_rejects_bad_grid():
    with pytest.raises(ValueError):
        check_1d_well(WELL_BUMP, 5, -5)


def test_check_symmetric_invariant_well_sum():
    rep = check_symmetric_invariant_well(sym_well_sum(WELL_BUMP, 3), seed=2, b=2.0)
    assert rep.passed
    # escape threshold near 1 + (n-1) b = 5, up to doubling resolution
    assert 5.0 <= rep.details["escape_a"] <= 10.0


def test_check_symmetric_invariant_well_coordwise():
    rep = check_symmetric_invariant_well(sym_well_coordwise(WELL_BUMP, 3), seed=2, b=2.0)
    assert rep.passed
    assert rep.details["escape_a"] == pytest.approx(1.0)


def test_check_symmetric_invariant_well_zero_function_fails():
    zero = SymmetricWellCandidate(lambda x: np.zeros(x.shape[:-1]), 3, (-1.0, 1.0), "zero")
    rep = check_symmetric_invariant_well(zero, seed=2)
    assert rep.verdict == "fail"
    assert rep.details["escape"] == "exhausted"


def test_non_invariant_candidate_fails():
    skew = SymmetricWellCandidate(lambda x: np.abs(x[..., 0]), 3, (0.0, 0.0), "skew")
    rep = check_symmetric_invariant_well(skew, seed=2)
    assert rep.verdict == "fail"
