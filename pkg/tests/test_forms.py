import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affleg.forms import DiscreteComplex
from affleg.immersion import deformed_clifford_torus, great_circle, perturbed_curve
from affleg.variation import random_smooth_field


@pytest.fixture(scope="module")
def curve_complex():
    return DiscreteComplex.of(perturbed_curve(65))


@pytest.fixture(scope="module")
def torus_complex():
    return DiscreteComplex.of(deformed_clifford_torus(16))


@given(st.integers(0, 2**31 - 1))
def test_codifferential_is_adjoint_of_d(seed):
    rng = np.random.default_rng(seed)
    for cx in (DiscreteComplex.of(perturbed_curve(33)), DiscreteComplex.of(deformed_clifford_torus(10))):
        f = random_smooth_field(cx.grid, rng)
        alpha = random_smooth_field(cx.grid, rng, cx.n)
        assert cx.inner1(cx.d0(f), alpha) == pytest.approx(cx.inner0(f, cx.codiff(alpha)), abs=1e-10)


def test_laplacian_spectrum_on_unit_circle():
    cx = DiscreteComplex.of(great_circle(32))
    u = cx.grid.axis_nodes
    for k in range(1, 6):
        assert np.allclose(cx.laplacian(np.cos(k * u)), k * k * np.cos(k * u), atol=1e-10)


def test_d_squared_vanishes(torus_complex):
    rng = np.random.default_rng(1)
    f = random_smooth_field(torus_complex.grid, rng)
    assert np.max(np.abs(torus_complex.d1(torus_complex.d0(f)))) < 1e-12


@pytest.mark.parametrize("name", ["curve_complex", "torus_complex"])
def test_hodge_split(name, request):
    cx = request.getfixturevalue(name)
    rng = np.random.default_rng(2)
    alpha = random_smooth_field(cx.grid, rng, cx.n)
    coclosed, exact, beta = cx.hodge_split(alpha)
    assert np.allclose(coclosed + exact, alpha)
    assert np.max(np.abs(cx.codiff(coclosed))) < 1e-8
    assert abs(cx.inner1(coclosed, exact)) < 1e-8


def test_coclosed_basis_dimension(curve_complex, torus_complex):
    assert len(curve_complex.coclosed_forms()) == 1
    forms = torus_complex.coclosed_forms()
    assert len(forms) == 2
    for a in forms:
        assert np.max(np.abs(torus_complex.codiff(a))) < 1e-8


def test_poisson_solution_even_grid():
    cx = DiscreteComplex.of(great_circle(32))
    u = cx.grid.axis_nodes
    beta = cx.solve_poisson(np.sin(3 * u))
    assert np.allclose(beta, np.sin(3 * u) / 9, atol=1e-12)
