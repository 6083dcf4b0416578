"""Property checkers: equivariance/invariance, perturbation, connectivity."""

import numpy as np
import pytest

from eqflow.checks import (
    check_counterexamples,
    check_direct_connectivity,
    check_equivariance,
    check_invariance,
    check_perturbation_property,
    check_resolves,
    piecewise_zoom,
    random_zoom,
    similarity,
)
from eqflow.layers import evaluate, random_layer
from eqflow.perm_groups import from_cycles, identity, parse_group_spec
from eqflow.reports import VerificationReport, make_report
from eqflow.rng import substream
from eqflow.targets import build_target


def test_report_invariants():
    rep = make_report("x", 10, [], 0.0, 1e-6)
    assert rep.passed
    rep = make_report("x", 10, [{"bad": 1}], 2.0, 1e-6)
    assert rep.verdict == "fail" and rep.witnesses
    rep = make_report("x", 10, [{"bad": 1}], 2.0, 1e-6, inconclusive=True)
    assert rep.verdict == "inconclusive"
    with pytest.raises(ValueError):
        VerificationReport("x", violations=1, verdict="pass")
    text = make_report("x", 3, [], 0.0, 1e-9, details={"k": 1}).to_text()
    assert "checker = x" in text and "detail.k = 1" in text


def test_check_equivariance_identity_and_catalog():
    G = parse_group_spec("translation_1d 3")
    rep = check_equivariance(lambda x: x, G, samples=50, seed=1)
    assert rep.passed and rep.worst_violation == 0.0
    lay = random_layer("conv1", 3, substream(0, "ce"))
    rep = check_equivariance(lambda x: evaluate(lay, x), G, samples=100, seed=1)
    assert rep.passed


def test_check_equivariance_detects_reversal():
    G = parse_group_spec("translation_1d 3")
    rep = check_equivariance(lambda x: x[..., ::-1], G, samples=50, seed=1)
    assert rep.verdict == "fail" and rep.witnesses


def test_check_invariance_cases():
    S3 = parse_group_spec("symmetric 3")
    assert check_invariance(lambda x: np.sum(x, axis=-1), S3, seed=1).passed
    rep = check_invariance(lambda x: x[..., 0], S3, seed=1)
    assert rep.verdict == "fail"
    t3 = build_target("t3_antisym")
    assert check_invariance(t3.fn, parse_group_spec("translation_1d 3"), seed=1).passed
    assert check_invariance(t3.fn, S3, seed=1).verdict == "fail"


def test_similarity_definition():
    assert similarity(np.array([1.0, 2.0, 3.0]), np.array([1.0, 5.0, 4.0])) == 1
    # counts all coincident (i, i') pairs
    assert similarity(np.array([1.0, 2.0, 3.0]), np.array([9.0, 3.0, 1.0])) == 2
    # zero when both points are off general position
    assert similarity(np.array([1.0, 1.0, 3.0]), np.array([1.0, 1.0, 3.0])) == 0


def test_zooms_are_increasing():
    rng = substream(1, "zoom")
    grid = np.linspace(-12, 12, 400)
    for _ in range(20):
        z = random_zoom(rng)
        vals = z(grid)
        assert np.all(np.diff(vals) > 0)
    z = piecewise_zoom([-1.0, 1.0], [0.5, 2.0, 0.5])
    assert np.all(np.diff(z(grid)) > 0)
    with pytest.raises(ValueError):
        piecewise_zoom([0.0], [1.0, 1e-6])


def test_perturbation_spec_example():
    """x = [1,2,3], y = [1,5,4] share x_1 = y_1 and differ at i = 2."""
    G = parse_group_spec("translation_1d 3")
    x, y = np.array([1.0, 2.0, 3.0]), np.array([1.0, 5.0, 4.0])
    rep = check_perturbation_property("conv1", G, seed=2, explicit_pairs=[(x, y, 0)])
    assert rep.passed and rep.details["found"] == 1


def test_perturbation_filters_same_orbit():
    G = parse_group_spec("symmetric 3")
    x = np.array([1.0, 2.0, 3.0])
    y = x[[1, 0, 2]]
    rep = check_perturbation_property("fs1", G, seed=2, explicit_pairs=[(x, y, 2)])
    assert rep.details["filtered_same_orbit"] == 1
    assert rep.samples == 0


@pytest.mark.parametrize(
    "family,gspec,dims",
    [
        ("conv1", "translation_1d 3", None),
        ("conv2", "translation_1d 4", None),
        ("fs1", "symmetric 3", None),
        ("fs2", "symmetric 3", None),
        ("janossy1", "symmetric 3", None),
        ("janossy2", "symmetric 3", None),
        ("fsmax", "symmetric 3", None),
        ("gamma1", "symmetric 3", None),
        ("prod2d_1", "product 2 3", (2, 3)),
        ("prod2d_2", "product 2 3", (2, 3)),
    ],
)
def test_perturbation_property_families(family, gspec, dims):
    rep = check_perturbation_property(
        family, parse_group_spec(gspec), pairs=8, seed=3, dims=dims
    )
    assert rep.passed, rep.summary_line()


def test_perturbation_crafted_equal_sums_needs_zoom():
    """Equal coordinate sums defeat the identity zoom for fs1."""
    G = parse_group_spec("symmetric 4")
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([0.0, 1.5, 2.5, 2.0])  # same sum, shares x_1 = y_1
    assert np.sum(x) == np.sum(y)
    rep = check_perturbation_property("fs1", G, seed=4, explicit_pairs=[(x, y, 0)])
    assert rep.passed


def test_direct_connectivity_adjacent_cones():
    """Q_a = {x1>x2>x3} and Q_b = {x2>x1>x3} are conv-connected."""
    a, b = identity(3), from_cycles(3, "(1 2)")
    rep = check_direct_connectivity("conv1", a, b, seed=1)
    assert rep.passed and rep.details["witness_gap"] > 1e-6
    rep = check_direct_connectivity("conv2", a, b, seed=1)
    assert rep.passed


def test_direct_connectivity_requires_transposition():
    a, b = identity(4), from_cycles(4, "(1 2 3)")
    with pytest.raises(ValueError, match="transposition"):
        check_direct_connectivity("conv1", a, b, seed=1)


def test_direct_connectivity_gamma1_fails_structurally():
    a, b = identity(3), from_cycles(3, "(1 2)")
    rep = check_direct_connectivity("gamma1", a, b, seed=1)
    assert rep.verdict == "fail"
    assert rep.worst_violation == 0.0


def test_direct_connectivity_fs_families_have_no_edges():
    a, b = identity(3), from_cycles(3, "(2 3)")
    for family in ("fs1", "janossy1", "fsmax"):
        rep = check_direct_connectivity(family, a, b, seed=1)
        assert rep.verdict == "fail" and rep.worst_violation == 0.0


def test_resolves_positive_cases_small():
    assert check_resolves("conv1", parse_group_spec("translation_1d 3"), seed=1).passed
    rep = check_resolves("fs1", parse_group_spec("symmetric 3"), seed=1)
    assert rep.passed and rep.details["reps"] == 1


def test_resolves_reports_rep_edges():
    rep = check_resolves("conv1", parse_group_spec("translation_1d 3"), seed=1)
    assert rep.details["reps"] == 2 and rep.details["rep_edges"] == 1


def test_resolves_gamma1_fails_no_edges():
    rep = check_resolves("gamma1", parse_group_spec("translation_1d 3"), seed=1)
    assert rep.verdict == "fail"
    assert rep.details["edges_found"] == 0


def test_fs1_does_not_resolve_translation_group():
    """Fully symmetric fields cannot cross cross sections, so the merely
    cyclic group is out of reach (the counterexample target exists)."""
    rep = check_resolves("fs1", parse_group_spec("translation_1d 3"), seed=1)
    assert rep.verdict == "fail"
    assert rep.details["edges_found"] == 0


def test_counterexamples_small():
    rep = check_counterexamples(seed=11, schedules=8)
    assert rep.passed, rep.summary_line()
    assert rep.details["fs1_violates_difference_preservation"] is True
    assert rep.details["fsmax_min_worst_margin"] >= 0.99
