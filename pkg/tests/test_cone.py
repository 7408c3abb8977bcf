import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affleg.cone import (
    affine_angle,
    angle_relation_residual,
    calibration_check,
    holomorphic_volume,
    lagrangian_cone_volume_ratio,
    normalization_residual,
    psi_modulus_residual,
    psi_on_frame,
    reconstruction_residual,
    special_defect,
)
from affleg.errors import ContractError, ResolutionError
from affleg.immersion import (
    clifford_torus,
    deformed_clifford_torus,
    great_circle,
    heisenberg_line,
    perturbed_curve,
    torus_curve,
)
from affleg.models import SphereModel

AFFINE = [lambda: torus_curve(np.pi / 4, 2, 128), lambda: torus_curve(0.6, 3, 128),
          lambda: perturbed_curve(128), lambda: deformed_clifford_torus(24)]


@pytest.mark.parametrize("n", [1, 2])
def test_normalization_and_reconstruction(n, rng):
    model = SphereModel(n)
    assert normalization_residual(model) < 1e-12
    assert reconstruction_residual(model, rng) < 1e-12
    assert reconstruction_residual(model, rng, radius=None) < 1e-12


def test_reconstruction_without_radial_factor_fails_off_the_link(rng):
    model = SphereModel(1)
    assert reconstruction_residual(model, rng, radius=1.0, scale_eta=False) < 1e-12
    assert reconstruction_residual(model, rng, radius=1.7, scale_eta=False) > 1e-3


def test_holomorphic_volume_of_standard_frame():
    # w = x - i y: dw_k(e_{2k}) = 1, dw_k(e_{2k+1}) = -i
    assert holomorphic_volume(np.eye(4)[[0, 2]]) == pytest.approx(1.0)
    assert holomorphic_volume(np.eye(4)[[1, 3]]) == pytest.approx(-1.0)


@pytest.mark.parametrize("make", AFFINE)
def test_psi_modulus_equals_rho(make):
    assert psi_modulus_residual(make()) < 1e-8


@pytest.mark.parametrize("make", AFFINE)
def test_angle_relation(make):
    assert angle_relation_residual(make()) < 1e-5


@pytest.mark.parametrize("make", AFFINE + [lambda: great_circle(64), lambda: clifford_torus(12)])
def test_calibration_chain(make):
    imm = make()
    theta, defect = special_defect(imm)
    report = calibration_check(imm, theta=theta)
    assert report.max_violation < 1e-10
    assert report.special == (defect < 1e-10)
    assert report.legendrian == (imm.legendrian_defect() < 1e-8)


def test_real_great_circle_is_special():
    theta, defect = special_defect(great_circle(64))
    assert defect < 1e-10 and abs(theta) < 1e-10


@given(st.floats(-1.2, 1.2))
def test_rotated_great_circle_phase(phase):
    # both complex coordinates pick up e^{-i phase}
    theta, defect = special_defect(great_circle(32, phase=phase))
    assert defect < 1e-10
    assert theta == pytest.approx(-2 * phase, abs=1e-8)


def test_clifford_torus_is_special_of_phase_pi():
    theta, defect = special_defect(clifford_torus(12))
    assert defect < 1e-10
    assert abs(abs(theta) - np.pi) < 1e-8


def test_non_special_curve_has_defect():
    assert special_defect(perturbed_curve(64))[1] > 1e-2


def test_volume_ratio_is_one_only_for_legendrians():
    assert lagrangian_cone_volume_ratio(great_circle(32)) == pytest.approx(1.0, abs=1e-14)
    assert lagrangian_cone_volume_ratio(torus_curve(np.pi / 4, 2, 32)) == pytest.approx(np.sqrt(0.1))


def test_coarse_grid_phase_jump():
    with pytest.raises(ResolutionError):
        affine_angle(torus_curve(0.6, 5, 4))


def test_angle_is_continuous_when_resolved():
    theta = affine_angle(torus_curve(0.6, 3, 128)).theta
    assert np.max(np.abs(np.diff(theta))) < 0.5


def test_cone_requires_sphere():
    with pytest.raises(ContractError):
        special_defect(heisenberg_line(1, 16))


def test_affine_curve_has_strict_calibration_inequalities():
    imm = torus_curve(np.pi / 4, 2, 128)
    theta, defect = special_defect(imm)
    assert defect > 1e-2
    z = psi_on_frame(imm) * np.exp(-1j * theta)
    s = imm.sqrt_det_h
    rho = imm.frame.rho
    assert np.all(np.real(z) * s < rho * s) and np.all(rho * s < s)
