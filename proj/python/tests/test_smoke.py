"""Smoke tests for the _nhsparse extension module."""

import json
import math

import pytest

import _nhsparse as nh


@pytest.fixture(scope="module")
def uniform():
    return nh.Workspace("uniform8-1d")


@pytest.fixture(scope="module")
def cantor():
    return nh.Workspace("cantor6")


def test_fixture_basics(uniform, cantor):
    assert uniform.dim == 1
    assert uniform.atom_count == 8
    assert uniform.total_mass == pytest.approx(1.0)
    assert cantor.alpha == pytest.approx(math.log(2) / math.log(3))
    assert cantor.growth_constant > 0


def test_mass_queries(uniform, cantor):
    assert uniform.mass([0.0], [0.5], half_open=True) == pytest.approx(0.5)
    assert uniform.mass([2.0], [3.0]) == 0.0
    # middle-thirds self-similarity
    assert cantor.mass([0.0], [1.0 / 3.0]) == pytest.approx(0.5)


def test_mass_additivity_over_random_boxes(cantor):
    for k in range(5):
        lo, mid, hi = 0.1 * k, 0.1 * k + 0.17, 0.1 * k + 0.34
        whole = cantor.mass([lo], [hi], half_open=True)
        parts = cantor.mass([lo], [mid], half_open=True) + cantor.mass(
            [mid], [hi], half_open=True
        )
        assert whole == pytest.approx(parts, abs=1e-14)


def test_density_report(cantor):
    rep = cantor.density([0.0], [1.0 / 9.0], truncation=32)
    assert rep["rho"] >= rep["series_term"] >= 0
    assert rep["sup_is_estimate"]


def test_haar_coefficients_and_plancherel(cantor):
    f = cantor.generate("trig", 5)
    coefs = cantor.haar_coefficients(f, depth=6)
    assert coefs and any(abs(c) > 0 for _, c in coefs)
    constant = cantor.generate("ones", 0)
    assert all(abs(c) <= 1e-12 for _, c in cantor.haar_coefficients(constant, depth=6))
    rep = cantor.plancherel(f)
    assert rep["coef_energy"] <= 10.0 * rep["norm_sq"]


def test_dual_pair_antisymmetry(uniform):
    f = uniform.generate("trig", 1)
    g = uniform.generate("poly", 2)
    fg = uniform.dual_pair(f=f, g=g, gamma=0.01)
    gf = uniform.dual_pair(f=g, g=f, gamma=0.01)
    assert fg == pytest.approx(-gf, rel=1e-12)


def test_sparse_family_and_packing(cantor):
    f = cantor.generate("trig", 11)
    g = cantor.generate("poly", 12)
    fam = cantor.build_sparse_family(f, g, c_stop=16.0, q=1)
    assert fam["sparse"]
    assert fam["worst_packing_levels"] <= fam["tau"]
    assert fam["size"] >= 2
    assert fam["lambda_value"] > 0


def test_domination_ratio_finite(cantor):
    f = cantor.generate("trig", 21)
    g = cantor.generate("trig", 22)
    rep = cantor.dominate(f=f, g=g, alpha=cantor.alpha, gamma=0.0078125)
    assert not rep["ratio_infinite"]
    assert math.isfinite(rep["ratio"])
    assert rep["sparse_form"] > 0


def test_square_functions_nonnegative(cantor):
    f = cantor.generate("random", 31)
    for j in (1, 2, 3):
        for sign in (1, -1):
            values = cantor.square_function(f, j, sign, e=1, depth=5)
            assert len(values) == cantor.atom_count
            assert all(v >= 0 for v in values)


def test_run_suites_roundtrip():
    cfg = {"measure": "uniform8-1d", "suites": ["geometry", "haar"], "seed": 3}
    report = json.loads(nh.run_suites(json.dumps(cfg)))
    assert report["schema_version"] == 1
    assert report["pass"] is True
    assert {s["name"] for s in report["suites"]} == {"geometry", "haar"}
