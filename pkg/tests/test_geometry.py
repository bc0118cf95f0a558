import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasisasaki import geometry as geo
from quasisasaki import zoo
from quasisasaki.errors import DegeneratePlane
from quasisasaki.exprjet import random_expr
from quasisasaki.forms import Form, wedge
from quasisasaki.geometry import bracket_jet, local
from conftest import ZOO, points, zoo_id
from oracles import koszul_christoffel

ALL = [zoo_id(e) for e in ZOO]


@pytest.fixture(scope="module")
def s3():
    return zoo.build("s3")


@pytest.fixture(scope="module")
def flat():
    return zoo.build("flat")


def random_field(seed, d):
    rng = np.random.default_rng(seed)
    return np.array([random_expr(rng, 4, d) for _ in range(d)], dtype=object)


def test_flat_christoffel_and_curvature_vanish(flat):
    for p in points(flat):
        assert not geo.christoffel(flat, p).array.any()
        assert not geo.riemann(flat, p).array.any()
        assert not geo.ricci(flat, p).array.any()


def test_s3_christoffel_matches_koszul_oracle(s3):
    p = np.array([0.1, 0.2, 0.1])
    got = geo.christoffel(s3, p).array
    assert np.abs(got - koszul_christoffel(s3, p)).max() < 1e-7


@pytest.mark.parametrize("name", ALL)
def test_christoffel_symmetric(models, name):
    M = models[name]
    for p in points(M, 2):
        G = geo.christoffel(M, p).array
        assert np.array_equal(G, np.swapaxes(G, 1, 2))


def test_flat_reeb_fields_parallel(flat):
    for p in points(flat):
        for a in range(3):
            assert not local(flat, p).nabla_xi[a].any()


def test_s3_nabla_xi_is_minus_phi(s3):
    for p in points(s3):
        L = local(s3, p)
        X = np.random.default_rng(0).normal(size=3)
        got = geo.covariant_derivative(s3, p, s3.xi[0], X).array
        assert np.abs(got + L.phi[0] @ X).max() <= 1e-8


def test_zero_direction_gives_zero(s3):
    p = points(s3, 1)[0]
    for kind, fld in (("vector", s3.xi[0]), ("1-form", s3.eta[1]), ("endomorphism", s3.phi[2])):
        assert not geo.covariant_derivative(s3, p, fld, np.zeros(3), kind).array.any()


def test_reeb_curvature_on_product(models):
    M = models["s3xr4"]
    for p in points(M):
        L = local(M, p)
        x1, x2 = L.xi[0], L.xi[1]
        assert L.curvature_apply(x1, x2, x2) @ L.g @ x1 == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("name", ALL)
def test_curvature_symmetries(models, name):
    M = models[name]
    for p in points(M, 2):
        L = local(M, p)
        res = geo.curvature_symmetry_residuals(L)
        assert max(res.values()) <= 1e-8
        R = L.riemann
        assert np.array_equal(R, -np.swapaxes(R, 2, 3))


@pytest.mark.parametrize("name", ALL)
def test_metric_compatibility(models, name):
    M = models[name]
    for p in points(M, 2):
        L = local(M, p)
        assert np.abs(L.nabla_bilinear(L.g_jet)).max() <= 1e-9


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_torsion_free_on_random_fields(sx, sy):
    M = zoo.build("s3")
    p = points(M, 1, seed=sx % 1000)[0]
    L = local(M, p)
    X, Y = L.field(random_field(sx, 3)), L.field(random_field(sy, 3))
    torsion = L.nabla_vector(Y) @ X.val - L.nabla_vector(X) @ Y.val - bracket_jet(X, Y).val
    assert np.abs(torsion).max() <= 1e-9 * max(1.0, np.abs(bracket_jet(X, Y).val).max())


def test_closed_constant_form(flat):
    eta = np.array([0] * 6 + [1], dtype=object)
    p = points(flat, 1)[0]
    assert not geo.exterior_derivative(flat, p, eta).array.any()


@pytest.mark.parametrize("r", [1, 2])
def test_sphere_deta_is_phi_over_r(r):
    M = zoo.build("s7", r=r)
    for p in points(M):
        L = local(M, p)
        assert np.abs(L.deta - L.Phi / r).max() <= 1e-8


@pytest.mark.parametrize("name", ALL)
def test_d_squared_vanishes(models, name):
    M = models[name]
    for p in points(M, 2):
        L = local(M, p)
        for a in range(3):
            assert np.abs(geo.exterior_d(L.deta_jet[a]).val).max() <= 1e-8


@given(st.integers(0, 2**31))
def test_self_bracket_vanishes(seed):
    M = zoo.build("s3")
    p = points(M, 1)[0]
    X = random_field(seed, 3)
    assert np.abs(geo.lie_derivative(M, p, X, X, "vector").array).max() <= 1e-12


def test_reeb_is_killing(s3):
    for p in points(s3):
        L = local(s3, p)
        for a in range(3):
            assert np.abs(geo.lie_derivative_jet(L.xi_jet[a], L.g_jet, "dd").val).max() <= 1e-8


def test_flat_reeb_preserves_phi(flat):
    p = points(flat, 1)[0]
    for a in range(3):
        for b in range(3):
            got = geo.lie_derivative(flat, p, flat.phi[b], flat.xi[a], "endomorphism").array
            assert not got.any()


@pytest.mark.parametrize("name", ["flat", "s7", "s7-r2"])
def test_normality(models, name):
    M = models[name]
    for p in points(M, 2):
        for idx in (1, 2, 3):
            N1, N2 = geo.nijenhuis(M, p, idx)
            assert np.abs(N1.array).max() <= 1e-7
            if name == "flat":
                assert not N2.array.any()


def test_nijenhuis_with_zero_phi_is_deta_term(s3):
    # phi = 0 leaves only 2 d eta (x) xi
    M = geo.ManifoldModel("zero-phi", s3.dom, s3.metric, np.full((3, 3, 3), geo.as_expr(0)), s3.xi, s3.eta)
    p = points(M, 1)[0]
    L = local(M, p)
    N1, _ = L.nijenhuis(0)
    np.testing.assert_allclose(N1, 2 * np.einsum("xy,k->kxy", L.deta[0], L.xi[0]), atol=1e-14)


@given(st.integers(0, 2**31))
def test_fundamental_form_alternating(seed):
    M = zoo.build("s3xr4")
    rng = np.random.default_rng(seed)
    p = points(M, 1, seed=seed % 997)[0]
    X = rng.normal(size=7)
    for idx in (1, 2, 3):
        Phi = geo.fundamental_two_form(M, p, idx).array
        assert abs(X @ Phi @ X) <= 1e-12 * max(1.0, X @ X)


def test_rank_volume_flat_and_sphere(models):
    flat, s7 = models["flat"], models["s7"]
    p = points(flat, 1)[0]
    L = local(flat, p)
    assert not geo.wedge_power(L.deta[0], 1).comps
    assert Form.from_dense(L.eta[0]).max_abs() > 0
    p = points(s7, 1)[0]
    L = local(s7, p)
    top = wedge(Form.from_dense(L.eta[0]), geo.wedge_power(L.deta[0], 3))
    assert geo.volume_nondegenerate(top, g=L.g)
    assert geo.wedge_power(L.deta[0], 4).max_abs() == 0.0


@pytest.mark.parametrize("name", ALL)
def test_covariant_phi_formula(models, name):
    M = models[name]
    for p in points(M, 4):
        assert geo.covariant_phi_residual(M, p) <= 1e-7


@pytest.mark.parametrize("name", ALL)
def test_reeb_ricci_equals_norm_of_nabla_xi(models, name):
    M = models[name]
    for p in points(M, 2):
        L = local(M, p)
        for a in range(3):
            nx = L.nabla_xi[a]
            norm2 = np.einsum("kl,ki,lj,ij->", L.g, nx, nx, L.ginv)
            ric = L.xi[a] @ L.ricci @ L.xi[a]
            assert ric == pytest.approx(norm2, abs=1e-7)


def test_degenerate_plane(s3):
    p = points(s3, 1)[0]
    X = np.array([1.0, 0.5, 0.0])
    with pytest.raises(DegeneratePlane):
        geo.sectional(s3, p, X, 2 * X)


@pytest.mark.parametrize("r", [1, 2])
def test_round_sphere_sectional_curvature(r):
    M = zoo.build("s7", r=r)
    rng = np.random.default_rng(3)
    for p in points(M, 2):
        X, Y = rng.normal(size=7), rng.normal(size=7)
        assert geo.sectional(M, p, X, Y) == pytest.approx(1 / r**2, abs=1e-8)
