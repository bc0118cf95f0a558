import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasisasaki import zoo
from quasisasaki.contact import (
    StructureClass, StructureTag, _rank, cartan_class, check_almost_contact_metric,
    check_quasi_sasakian, check_three_structure, classify, detect_c, structure_record,
)
from quasisasaki.errors import InconsistentC, RankUnstable, StructureViolation
from quasisasaki.exprjet import Const, Var
from quasisasaki.geometry import ManifoldModel, local
from conftest import ZOO, points, zoo_id

ALL = [zoo_id(e) for e in ZOO]


def test_flat_structure_exact(models):
    M = models["flat"]
    for p in points(M):
        for idx in (1, 2, 3):
            assert check_almost_contact_metric(M, p, idx).max == 0.0
            assert check_quasi_sasakian(M, p, idx).max == 0.0
        assert check_three_structure(M, p).max == 0.0


def test_s7_almost_contact_metric(models):
    M = models["s7"]
    for p in points(M, 16):
        for idx in (1, 2, 3):
            assert check_almost_contact_metric(M, p, idx).max <= 1e-8


@pytest.mark.parametrize("name", ["s3xr4", "s3xr8"])
def test_products_are_quasi_sasakian(models, name):
    M = models[name]
    for p in points(M):
        assert check_three_structure(M, p).max <= 1e-8
        for idx in (1, 2, 3):
            assert check_quasi_sasakian(M, p, idx).max <= 1e-7


def test_phi_corruption_detected(models):
    M = zoo.perturb(models["s7"], "phi", (0, 1, 2))
    p = points(M, 1)[0]
    rec = check_almost_contact_metric(M, p, 1)
    assert 1e-4 < rec.max < 1e-2
    assert not rec.passed


def test_reeb_swap_detected(models):
    M = zoo.swap_reeb(models["s3xr4"])
    p = points(M, 1)[0]
    assert not check_three_structure(M, p).passed


def test_nonclosed_fundamental_form_detected(models):
    F = models["flat"]
    phi = F.phi.copy()
    bump = Const(1e-3) * Var(2)
    phi[0, 0, 1] = phi[0, 0, 1] + bump
    phi[0, 1, 0] = phi[0, 1, 0] - bump
    M = ManifoldModel("flat+bump", F.dom, F.metric, phi, F.xi, F.eta)
    p = points(M, 1)[0]
    rec = check_quasi_sasakian(M, p, 1, tol=1e-7)
    assert rec.residuals["closed_Phi"] > 1e-7


@pytest.mark.parametrize("name, rank", [("flat", 1), ("s7", 7), ("s3xr4", 3)])
def test_cartan_class(models, name, rank):
    M = models[name]
    assert cartan_class(M, points(M, 1)[0], 1) == rank


@pytest.mark.parametrize("name, c", [("flat", 0.0), ("s3", 2.0), ("s7", 2.0), ("s7-r2", 1.0), ("s3xr4", 2.0)])
def test_detect_c(models, name, c):
    M = models[name]
    assert detect_c(M, points(M)) == pytest.approx(c, abs=1e-8)


@pytest.mark.parametrize("name", ALL)
def test_rank_is_the_same_for_all_three_structures(models, name):
    M = models[name]
    for p in points(M):
        assert len({cartan_class(M, p, idx) for idx in (1, 2, 3)}) == 1


@pytest.mark.parametrize("name", ALL)
def test_parity_law(models, name):
    M = models[name]
    pts = points(M)
    c, rank = detect_c(M, pts), cartan_class(M, pts[0], 1)
    assert (c == 0.0) == (rank % 4 == 1)
    assert (c != 0.0) == (rank % 4 == 3)


@pytest.mark.parametrize("name", ALL + ["flat0"])
def test_zero_c_implies_cosymplectic(models, name):
    M = zoo.flat_three_cosymplectic(0) if name == "flat0" else models[name]
    pts = points(M)
    if detect_c(M, pts) != 0.0:
        return
    for p in pts:
        L = local(M, p)
        assert np.abs(L.deta).max() <= 1e-8
        assert np.abs(L.nabla_phi).max() <= 1e-7
    assert classify(M, pts).tag is StructureTag.THREE_COSYMPLECTIC


@pytest.mark.parametrize("name", ALL)
def test_ricci_flat_iff_cosymplectic(models, name):
    M = models[name]
    pts = points(M)
    flat = all(np.abs(local(M, p).ricci).max() <= 1e-7 for p in pts)
    assert flat == (classify(M, pts).tag is StructureTag.THREE_COSYMPLECTIC)


@pytest.mark.parametrize("name, tag, rank, c", [
    ("flat", StructureTag.THREE_COSYMPLECTIC, 1, 0.0),
    ("s7", StructureTag.THREE_ALPHA_SASAKIAN, 7, 2.0),
    ("s3xr4", StructureTag.THREE_QUASI_SASAKIAN, 3, 2.0),
])
def test_classify(models, name, tag, rank, c):
    M = models[name]
    cls = classify(M, points(M))
    assert (cls.tag, cls.rank) == (tag, rank)
    assert cls.c == pytest.approx(c, abs=1e-8)


def test_classify_rejects_broken_structure(models):
    M = zoo.perturb(models["s3xr4"], "eta", (0, 4))
    with pytest.raises(StructureViolation):
        classify(M, points(M))


def test_structure_class_invariants():
    with pytest.raises(ValueError):
        StructureClass(StructureTag.THREE_COSYMPLECTIC, 3, 0.0)
    with pytest.raises(ValueError):
        StructureClass(StructureTag.THREE_QUASI_SASAKIAN, 4, 2.0)


def test_rank_guard_band():
    with pytest.raises(RankUnstable):
        _rank(np.diag([1.0, 1e-7]))
    assert _rank(np.diag([1.0, 1e-3])) == 2
    assert _rank(np.diag([1.0, 1e-12])) == 1


def test_inconsistent_c(models):
    M = zoo.perturb(models["s3"], "xi", (0, 0))
    with pytest.raises(InconsistentC):
        detect_c(M, points(M))


@given(st.integers(0, 10_000))
def test_structure_record_passes_everywhere_on_s3xr4(seed):
    M = zoo.build("s3xr4")
    p = points(M, 1, seed=seed)[0]
    assert structure_record(M, p).max <= 1e-8
