import json

import numpy as np
import pytest

from ergokit import ctmc
from ergokit.analysis import (
    Check,
    diffusion_suite,
    digest,
    equivalence_suite,
    identity_suite,
    random_instance,
    regularity_transfer_check,
    skeleton_suite,
    theorem2_suite,
)
from ergokit.diffusion import ScalarField, ornstein_uhlenbeck
from ergokit.measures import RegionSet


def test_check_relations():
    assert Check("a", 1e-11, 1e-10, "le").passed
    assert not Check("a", float("nan"), 1e-10, "le").passed
    assert Check("b", 0.5, 0.0, "ge").passed
    assert not Check("c", float("inf"), None, "finite").passed
    with pytest.raises(ValueError):
        Check("d", 1.0, 1.0, "eq").passed


def test_random_instances_are_irreducible():
    rng = np.random.default_rng(3)
    for _ in range(50):
        Q, f, C = random_instance(rng, int(rng.integers(1, 9)))
        assert ctmc.irreducibility_aperiodicity_check(Q).irreducible
        assert np.all(f >= 1) and len(C) >= 1


def test_digest_is_canonical():
    assert digest({"a": 1, "b": [1.0, 2.0]}) == digest({"b": np.array([1.0, 2.0]), "a": 1})
    assert digest({"a": 1}) != digest({"a": 2})


def test_suites_pass_on_random_instances(instances):
    for Q, f, C in instances[:10]:
        g = np.full(Q.n, 2.0)
        reports = [
            identity_suite(Q, f, C, g, C.indicator),
            equivalence_suite(Q, f, C),
            skeleton_suite(Q, f, 1.0, C),
            theorem2_suite(Q, f, C),
        ]
        for rep in reports:
            assert rep.passed, (rep.name, rep.failures())
            json.dumps(rep.to_dict())


def test_equivalence_two_state(two_state):
    rep = equivalence_suite(two_state, [1.0, 1.0], [0], r=0.0)
    assert rep.passed
    assert rep.constants["pi_f"] == pytest.approx(1.0)
    assert rep.constants["b"] == pytest.approx(1.5)
    assert np.allclose(rep.tables["lyapunov"]["V"], [1.5, 2.0])


def test_regularity_transfer(instances):
    for Q, f, C in instances[:5]:
        B_list = [[0], list(range(Q.n))]
        rep = regularity_transfer_check(Q, f, C, B_list, r=2.0)
        assert rep.passed, rep.failures()
        assert rep.constants["b_C"] >= 0


def test_report_checks_are_sorted_and_lookup(two_state):
    rep = identity_suite(two_state, [1, 1], [0], [2, 2], [1, 0])
    names = [c.name for c in rep.checks]
    assert names == sorted(names)
    assert rep.check("drift_identity_residual").passed
    with pytest.raises(KeyError):
        rep.check("missing")


def test_skeleton_suite_reports_constants(two_state):
    rep = skeleton_suite(two_state, [1.0, 1.0], 1.0, [0])
    assert rep.passed
    for key in ("b0", "eps0", "k0", "b", "B_f", "M_f"):
        assert np.isfinite(rep.constants[key])


def test_diffusion_suite_ou():
    ou = ornstein_uhlenbeck()
    rep = diffusion_suite(
        ou, ScalarField.from_expr("x1^2 + 1", 1), ScalarField.from_expr("x1^2", 1),
        RegionSet.box([[-np.sqrt(3), np.sqrt(3)]]), 3.0, np.linspace(-10, 10, 2001),
        mc_params={"x0": [2.0], "n_paths": 1000, "dt": 0.01, "seed": 0, "beta": 2.0},
    )
    assert rep.passed, rep.failures()
    assert "domination_max_ratio" in rep.constants
    assert not any("domination" in c.name for c in rep.checks)
