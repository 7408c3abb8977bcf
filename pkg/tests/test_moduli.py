import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affleg.cone import calibration_check, psi_modulus_residual, special_defect
from affleg.errors import ContractError
from affleg.immersion import clifford_torus, great_circle, rho_by_gram, torus_curve
from affleg.moduli import (
    ModuliOperators,
    convergence_orders,
    decode,
    encode,
    exp_normal,
    hausdorff_distance,
    moduli_walk,
    newton_project,
    residual_jacobian,
)
from affleg.variation import random_smooth_field


@pytest.fixture(scope="module")
def circle():
    return great_circle(64)


@pytest.fixture(scope="module")
def ops(circle):
    return ModuliOperators(circle)


def generic_direction(ops):
    u = ops.base.grid.nodes[..., 0]
    alpha = (np.cos(u) + 0.5 * np.sin(2 * u) + 0.3 * np.cos(3 * u) + 1.0)[..., None]
    return ops.kernel_direction(alpha)


def test_linearization_is_D1_on_resolved_fields():
    # node deltas are not band-limited, so compare on low modes only
    base = great_circle(24)
    ops = ModuliOperators(base)
    J = residual_jacobian(base, np.zeros(24), np.zeros((24, 1)))
    rng = np.random.default_rng(5)
    for kmax in (1, 4, 7):
        g = random_smooth_field(base.grid, rng, kmax=kmax)
        a = random_smooth_field(base.grid, rng, 1, kmax=kmax)
        x = np.concatenate([g, a.ravel()])
        assert np.max(np.abs(J @ x - ops.d1_apply(g, a))) < 1e-9


def test_D1_D1_star_spectrum():
    # (n+1)^2 plus the Laplacian eigenvalues k^2 of the unit circle, k = 1.. doubled
    ops = ModuliOperators(great_circle(65))
    expected = np.sort(np.concatenate([[4.0], 4.0 + np.repeat(np.arange(1, 33) ** 2, 2)]))
    assert np.max(np.abs(ops.laplacian_identity_spectrum() - expected)) < 1e-9


@given(st.integers(0, 2**31 - 1))
def test_D1_adjoint(seed):
    rng = np.random.default_rng(seed)
    ops = ModuliOperators(great_circle(33))
    g = random_smooth_field(ops.base.grid, rng)
    a = random_smooth_field(ops.base.grid, rng, 1)
    h = random_smooth_field(ops.base.grid, rng)
    lhs = ops.pair0(ops.d1_apply(g, a), h)
    rhs = ops.pair1(g, a, *ops.d1_adjoint(h))
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_encode_decode_round_trip(seed):
    rng = np.random.default_rng(seed)
    base = great_circle(32, phase=0.0)
    f = random_smooth_field(base.grid, rng)
    Y = random_smooth_field(base.grid, rng, 1)
    f2, Y2 = decode(base, *encode(base, f, Y))
    assert np.allclose(f2, f) and np.allclose(Y2, Y)


def test_kernel_dimension_and_split():
    for base in (great_circle(17), clifford_torus(7, phase=np.pi / 3)):
        ops = ModuliOperators(base)
        size, n = base.grid.size, base.grid.n
        D = ops.d1_matrix()
        kernel = D.shape[1] - np.linalg.matrix_rank(D)
        assert kernel == size * n  # discrete dimension of one-forms
        basis = ops.tangent_basis()
        assert len(basis) == kernel
        for g, a in basis[:5]:
            assert np.max(np.abs(ops.d1_apply(g, a))) < 1e-10
        # coclosed forms plus mean-zero functions (odd N: no Nyquist mode in ker d)
        codiff = np.stack([ops.cx.codiff(np.eye(size * n)[k].reshape(base.grid.shape + (n,))).reshape(-1)
                           for k in range(size * n)], axis=1)
        coclosed = size * n - np.linalg.matrix_rank(codiff)
        assert coclosed + (size - 1) == kernel


def test_newton_from_zero_takes_no_steps(circle, ops):
    state = newton_project(circle, ops=ops)
    assert state.history == [0.0] or len(state.history) == 1


def test_newton_quadratic_order(circle, ops):
    g, a = generic_direction(ops)
    state = newton_project(circle, 0.2 * g, 0.2 * a, ops=ops)
    assert state.history[-1] < 1e-10
    assert max(state.orders) >= 1.8


def test_small_perturbation_contracts_quadratically(circle, ops):
    # at t = 0.05 the residual reaches roundoff in two steps, too few for an order
    # estimate; the contraction r1 <= 0.1 r0^2 still separates Newton from a chord method
    g, a = generic_direction(ops)
    newton = newton_project(circle, 0.05 * g, 0.05 * a, ops=ops)
    chord = newton_project(circle, 0.05 * g, 0.05 * a, jacobian="frozen", ops=ops)
    assert newton.history[-1] < 1e-10
    assert newton.history[1] <= 0.1 * newton.history[0] ** 2
    assert chord.history[1] > 0.1 * chord.history[0] ** 2


def test_frozen_jacobian_is_linear(circle, ops):
    g, a = generic_direction(ops)
    state = newton_project(circle, 0.05 * g, 0.05 * a, jacobian="frozen", ops=ops)
    assert state.history[-1] < 1e-10
    assert all(abs(o - 1.0) < 0.2 for o in state.orders)


def test_oversized_field_rejected(circle):
    with pytest.raises(ContractError):
        exp_normal(circle, np.full(64, 3.0), np.zeros((64, 1)))


def test_non_special_base_rejected():
    with pytest.raises(ContractError):
        ModuliOperators(torus_curve(0.6, 2, 32))
    with pytest.raises(ContractError):
        ModuliOperators(great_circle(32, phase=0.4))


def test_differenced_jacobian_is_curves_only():
    base = clifford_torus(6, phase=np.pi / 3)
    with pytest.raises(ContractError):
        newton_project(base, np.full(base.grid.shape, 1e-3), jacobian="current")


def test_convergence_orders():
    assert convergence_orders([1e-1, 1e-2, 1e-4, 1e-8]) == pytest.approx([2.0, 2.0])
    assert convergence_orders([1e-2, 1e-14]) == []


def test_moduli_walk(circle, ops):
    states = moduli_walk(circle, generic_direction(ops), steps=5, step_size=0.02)
    assert len(states) == 5
    clouds = []
    for st_ in states:
        imm = st_.immersion()
        theta, defect = special_defect(imm)
        assert defect < 1e-9 and abs(theta) < 1e-9
        assert imm.legendrian_defect() > 1e-4
        assert psi_modulus_residual(imm) < 1e-8
        assert np.max(np.abs(imm.frame.rho - rho_by_gram(imm))) < 1e-12
        report = calibration_check(imm)
        assert report.special and not report.legendrian and report.max_violation < 1e-10
        clouds.append(imm.values)
    gaps = [hausdorff_distance(a, b) for i, a in enumerate(clouds) for b in clouds[i + 1:]]
    assert min(gaps) > 1e-3


def test_divergent_chord_iteration_reports_convergence_error(circle, ops):
    from affleg.errors import ConvergenceError

    g, a = generic_direction(ops)
    with pytest.raises(ConvergenceError):
        newton_project(circle, 0.3 * g, 0.3 * a, jacobian="frozen", ops=ops)
