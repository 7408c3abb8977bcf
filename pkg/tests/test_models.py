import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affleg.errors import DomainError
from affleg.models import (
    HeisenbergModel,
    SphereModel,
    christoffel_by_differences,
    eta_einstein_fit,
    make_model,
    structure_residuals,
)

MODELS = [("sphere", 1), ("sphere", 2), ("heisenberg", 1), ("heisenberg", 2)]


@pytest.mark.parametrize("name,n", MODELS)
def test_structure_identities(name, n, rng):
    model = make_model(name, n)
    pts = model.random_points(rng, 16)
    res = structure_residuals(model, pts, rng)
    assert len(res) == 17
    tol = 1e-9 if model.closed_form else 1e-7
    assert max(res.values()) < tol, res


@pytest.mark.parametrize("name,n,A", [("sphere", 1, 2), ("sphere", 2, 4), ("heisenberg", 1, -2),
                                      ("heisenberg", 2, -2)])
def test_eta_einstein_constant(name, n, A, rng):
    model = make_model(name, n)
    fitted, B, residual = eta_einstein_fit(model, model.random_points(rng, 16), rng)
    assert fitted == pytest.approx(A, abs=1e-6)
    assert fitted + B == pytest.approx(2 * n, abs=1e-6)


def test_bumped_metric_is_a_negative_control(rng):
    model = HeisenbergModel(1, conformal_bump=0.3)
    pts = model.random_points(rng, 8)
    res = structure_residuals(model, pts, rng)
    assert res["d eta=2g(.,phi .)"] > 1e-3
    A, _, residual = eta_einstein_fit(model, pts, rng)
    assert A is None and residual > 1e-4


def test_heisenberg_christoffels_match_differences(rng):
    model = HeisenbergModel(2)
    for p in model.random_points(rng, 4):
        fd = christoffel_by_differences(model.metric, p)
        assert np.max(np.abs(model.christoffel(p) - fd)) < 1e-8


def test_reeb_orbits_are_geodesics(rng):
    model = HeisenbergModel(1)
    p = model.random_points(rng, 1)[0]
    q = model.exp(p, 0.7 * model.xi(p))
    assert np.allclose(q, p + np.array([0.0, 0.0, 1.4]), atol=1e-10)


@given(st.floats(0.0, 3.0))
def test_sphere_exp_is_unit_speed_great_circle(s):
    model = SphereModel(1)
    p = np.array([1.0, 0, 0, 0])
    v = np.array([0, 0, 1.0, 0])
    q = model.exp(p, s * v)
    assert np.allclose(q, [np.cos(s), 0, np.sin(s), 0], atol=1e-14)


def test_points_off_the_sphere_are_rejected():
    model = SphereModel(1)
    with pytest.raises(DomainError):
        model.validate_point(np.array([1.0, 1.0, 0, 0]))
    with pytest.raises(DomainError):
        model.validate_tangent(np.array([1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]))


def test_reeb_field_is_minus_J_position():
    model = SphereModel(1)
    p = np.array([0.6, 0.8, 0.0, 0.0])
    assert np.allclose(model.xi(p), [-0.8, 0.6, 0, 0])


@pytest.mark.parametrize("name,n", MODELS)
def test_reference_legendrian_frame_has_unit_affine_volume(name, n):
    model = make_model(name, n)
    p, E = model.reference_legendrian_frame()
    assert model.volume(p, model._rho_vectors(p, E)) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_phi_squared_on_random_tangents(seed):
    rng = np.random.default_rng(seed)
    for model in (SphereModel(1), HeisenbergModel(1)):
        p = model.random_points(rng, 1)[0]
        X = model.random_tangent(rng, p)
        lhs = model.phi_of(p, model.phi_of(p, X))
        rhs = -X + model.eta_of(p, X) * model.xi(p)
        assert np.allclose(lhs, rhs, atol=1e-12)
