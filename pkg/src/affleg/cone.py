"""Calabi-Yau cone over the round sphere: the form psi, angles and calibration.

The cone over S^{2n+1} is C^{n+1} with holomorphic coordinates
w_k = x_k - i y_k (holomorphic for the complex structure J used by the sphere
model).  The holomorphic volume form is Omega = dw_1 ^ ... ^ dw_{n+1} and
psi is its contraction with the radial vector, restricted to the link.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ContractError, ResolutionError
from .models import SphereModel
from .variation import phi_mean_curvature

MAX_PHASE_JUMP = 0.9 * np.pi


def require_cone(model):
    if not isinstance(model, SphereModel):
        raise ContractError(
            "the cone calibration needs a Sasaki-Einstein link with a flat Calabi-Yau cone "
            f"(got {model.name})"
        )
    return model


def complex_coordinates(v):
    """w(v) = x - i y per coordinate pair; v has shape (..., 2n+2)."""
    v = np.asarray(v, dtype=float)
    return v[..., 0::2] - 1j * v[..., 1::2]


def holomorphic_volume(vectors):
    """Omega(v_0, ..., v_n) for vectors of shape (..., n+1, 2n+2)."""
    return np.linalg.det(complex_coordinates(vectors))


def psi_form(p, vectors):
    """psi_p(v_1..v_n) = Omega(p, v_1, ..., v_n); vectors shape (..., n, 2n+2)."""
    stacked = np.concatenate([np.asarray(p)[..., None, :], vectors], axis=-2)
    return holomorphic_volume(stacked)


def kaehler_matrix(model):
    """omega_ab = g(J e_a, e_b) on the standard basis of R^{2n+2}."""
    return model.J.T.copy()


def _pfaffian(A):
    """Pfaffian of a small antisymmetric matrix by expansion along the first row."""
    m = A.shape[0]
    if m == 0:
        return 1.0
    total = 0.0
    for j in range(1, m):
        keep = [k for k in range(m) if k not in (0, j)]
        total += (-1) ** (j + 1) * A[0, j] * _pfaffian(A[np.ix_(keep, keep)])
    return total


def normalization_residual(model):
    """|omega^m/m! - (-1)^{m(m-1)/2} (i/2)^m Omega ^ conj(Omega)| on the standard frame."""
    require_cone(model)
    m = model.n + 1
    top_kaehler = _pfaffian(kaehler_matrix(model))  # omega^m / m! evaluated on e_1..e_2m
    basis = np.eye(2 * m)
    W = complex_coordinates(basis).T  # rows: dw_k evaluated on basis vectors
    rows = np.concatenate([W, np.conj(W)], axis=0)
    omega_omegabar = np.linalg.det(rows)
    rhs = (-1) ** (m * (m - 1) // 2) * (0.5j) ** m * omega_omegabar
    return float(abs(top_kaehler - rhs))


def reconstruction_residual(model, rng, samples=16, radius=1.0, scale_eta=True):
    """Max |Omega - (dr - i c eta) ^ r^n psi| on random cone frames, c = r or 1.

    eta and psi are pulled back to the cone through the projection onto the
    link.  With ``scale_eta`` the eta term carries the factor r needed for
    the identity to hold at every radius; on the link itself (radius 1) both
    versions coincide.
    """
    require_cone(model)
    n, m = model.n, model.m
    worst = 0.0
    for _ in range(samples):
        r = radius if radius is not None else rng.uniform(0.5, 2.0)
        p = model.random_points(rng, 1)[0]
        vs = rng.standard_normal((n + 1, m))
        lhs = holomorphic_volume(vs)

        def proj(v):
            return (v - np.dot(v, p) * p) / r

        eta_factor = r if scale_eta else 1.0
        total = 0.0
        for j in range(n + 1):
            v = vs[j]
            one_form = np.dot(v, p) - 1j * eta_factor * np.dot(model.eta(p), proj(v))
            rest = np.array([proj(vs[k]) for k in range(n + 1) if k != j])
            total += (-1) ** j * one_form * r**n * psi_form(p, rest)
        worst = max(worst, abs(lhs - total))
    return float(worst)


def psi_on_frame(imm):
    """Complex value psi(e_1, ..., e_n) at every node."""
    require_cone(imm.model)
    return psi_form(imm.values, imm.frame.e)


@dataclass
class AngleField:
    psi: np.ndarray
    theta: np.ndarray

    @property
    def modulus(self):
        return np.abs(self.psi)


def _unwrap_axis(theta, axis, max_jump):
    jumps = np.diff(theta, axis=axis)
    wrapped = (jumps + np.pi) % (2 * np.pi) - np.pi
    if np.max(np.abs(wrapped)) > max_jump:
        raise ResolutionError(
            f"phase changes by {np.max(np.abs(wrapped)):.3f} between neighbouring nodes"
        )
    return np.unwrap(theta, axis=axis)


def affine_angle(imm, max_jump=MAX_PHASE_JUMP):
    """Phase of psi on the oriented frame, unwrapped along the grid from node 0."""
    z = psi_on_frame(imm)
    theta = np.angle(z)
    if imm.grid.n == 1:
        theta = _unwrap_axis(theta, 0, max_jump)
    else:
        first = _unwrap_axis(theta[:, 0], 0, max_jump)
        theta = theta - theta[:, :1] + first[:, None]
        theta = _unwrap_axis(theta, 1, max_jump)
    return AngleField(z, theta)


def angle_differential(imm):
    """Coordinate components of d theta from Im(conj(c) dc), c = psi/|psi|."""
    z = psi_on_frame(imm)
    c = z / np.abs(z)
    return np.stack([np.imag(np.conj(c) * imm.diff(c, a)) for a in range(imm.grid.n)], -1)


def reeb_tangential(imm):
    """Orthogonal projection of xi onto the tangent space of L, as an ambient field."""
    coeff = np.einsum("...im,...m->...i", imm.frame.e, imm.model.eta(imm.values))
    return imm.pushforward(coeff)


def angle_relation_residual(imm):
    """max node g-norm of (d theta)^sharp - (-(n+1) xi^T + H_phi)."""
    n = imm.grid.n
    dtheta = angle_differential(imm)
    sharp = np.einsum("...ab,...b->...a", imm.inverse_metric, dtheta)
    lhs = np.einsum("...a,...am->...m", sharp, imm.partials)
    rhs = -(n + 1) * reeb_tangential(imm) + phi_mean_curvature(imm).vector
    return float(np.max(imm.model.norm(imm.values, lhs - rhs)))


def psi_modulus_residual(imm):
    """max | |psi(e)| - rho_phi |."""
    return float(np.max(np.abs(np.abs(psi_on_frame(imm)) - imm.frame.rho)))


@dataclass
class CalibrationReport:
    max_violation: float
    special: bool
    legendrian: bool
    special_equality_defect: float
    legendrian_equality_defect: float

    def as_dict(self):
        return dict(self.__dict__)


def calibration_check(imm, theta=0.0, tol=1e-10):
    """Re(e^{-i theta} psi) vol <= vol_phi <= vol on every node, with equality cases.

    The first inequality is an equality exactly where L is special of phase
    theta, the second exactly where L is Legendrian.
    """
    z = psi_on_frame(imm) * np.exp(-1j * theta)
    s = imm.sqrt_det_h
    rho = imm.frame.rho
    first = np.real(z) * s
    second = rho * s
    third = s
    violation = max(float(np.max(first - second)), float(np.max(second - third)), 0.0)
    special_defect = float(np.max(np.abs(second - first) / s))
    legendrian_defect = float(np.max(np.abs(third - second) / s))
    return CalibrationReport(
        max_violation=violation,
        special=special_defect < tol,
        legendrian=legendrian_defect < tol,
        special_equality_defect=special_defect,
        legendrian_equality_defect=legendrian_defect,
    )


def special_defect(imm):
    """Best phase theta and max node |Im(e^{-i theta} psi(e))|.

    The phase is chosen with Re(e^{-i theta} psi) > 0 on average, which removes
    the theta -> theta + pi ambiguity.
    """
    z = psi_on_frame(imm)
    flat = z.reshape(-1)
    theta0 = float(np.angle(np.sum(flat)))

    def objective(t):
        return float(np.max(np.abs(np.imag(np.exp(-1j * t) * flat))))

    res = minimize_scalar(objective, bounds=(theta0 - 0.5, theta0 + 0.5), method="bounded",
                          options={"xatol": 1e-14})
    best = min((theta0, objective(theta0)), (float(res.x), float(res.fun)), key=lambda x: x[1])
    theta = (best[0] + np.pi) % (2 * np.pi) - np.pi
    return theta, best[1]


def lagrangian_cone_volume_ratio(imm):
    """Integral of rho_phi against the induced measure divided by the Riemannian area.

    Equals 1 exactly for Legendrian immersions.
    """
    return imm.integrate(imm.frame.rho * imm.sqrt_det_h) / imm.area


__all__ = [
    "AngleField",
    "CalibrationReport",
    "affine_angle",
    "angle_differential",
    "angle_relation_residual",
    "calibration_check",
    "holomorphic_volume",
    "normalization_residual",
    "psi_modulus_residual",
    "psi_on_frame",
    "reconstruction_residual",
    "special_defect",
]
