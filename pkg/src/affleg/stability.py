"""Second-variation quadratic form at phi-minimal immersions and its spectrum."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ContractError
from .forms import DiscreteComplex
from .models import eta_einstein_fit
from .variation import (
    geodesic_evolve,
    phi_mean_curvature,
    phi_volume_density,
    second_variation_analytic,
    volume_phi,
)

PHI_MINIMAL_GATE = 1e-5


@dataclass
class QuadraticForm:
    """Q over frame coefficients of Y; DOF index is node * n + i."""

    matrix: np.ndarray
    mass: np.ndarray
    curvature_blocks: np.ndarray
    A: float = None

    def __call__(self, Y):
        y = np.asarray(Y).reshape(-1)
        return float(y @ self.matrix @ y)

    def norm_squared(self, Y):
        y = np.asarray(Y).reshape(-1)
        return float(y @ self.mass @ y)

    def symmetry_defect(self):
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


@dataclass
class StabilityVerdict:
    lambda_min: float
    witness: np.ndarray
    stable: bool
    A: float
    regime: str
    eigen_residual: float
    witness_rayleigh_error: float
    coclosed_witness_Q: float = None

    def as_dict(self):
        return {
            "A": self.A,
            "lambda_min": self.lambda_min,
            "stable": self.stable,
            "regime": self.regime,
            "eigen_residual": self.eigen_residual,
            "witness_rayleigh_error": self.witness_rayleigh_error,
            "coclosed_witness_Q": self.coclosed_witness_Q,
        }


def differentiation_matrices(grid):
    """Dense spectral derivative matrices along every grid axis (flattened C order)."""
    D = grid.diff(np.eye(grid.N), 0)
    if grid.n == 1:
        return [D]
    eye = np.eye(grid.N)
    return [np.kron(D, eye), np.kron(eye, D)]


def curvature_block(imm):
    """Node-wise n x n matrix of (2n+2) eta(Y)^2 - 2 g(Y,Y) - Ric(Y,Y) in the e-frame."""
    model, p, fr = imm.model, imm.values, imm.frame
    n = imm.grid.n
    etae = np.einsum("...im,...m->...i", fr.e, model.eta(p))
    ric = np.zeros(imm.grid.shape + (n, n))
    for i in range(n):
        for j in range(n):
            ric[..., i, j] = model.ricci(p, fr.e[..., i, :], fr.e[..., j, :])
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    return (2 * n + 2) * np.einsum("...i,...j->...ij", etae, etae) - 2 * np.eye(n) - ric


def divergence_operator(imm):
    """Matrix of Y -> div(rho Y)/rho acting on flattened frame coefficients."""
    n = imm.grid.n
    size = imm.grid.size
    dens = phi_volume_density(imm).reshape(-1)
    C = imm.frame.C.reshape(size, n, n)
    Ds = differentiation_matrices(imm.grid)
    op = np.zeros((size, size * n))
    for a in range(n):
        # V^a = dens * sum_i C[i, a] Y^i
        S = np.zeros((size, size * n))
        for i in range(n):
            S[np.arange(size), np.arange(size) * n + i] = C[:, i, a] * dens
        op += Ds[a] @ S
    return op / dens[:, None]


def assemble_Q(imm, gate=PHI_MINIMAL_GATE):
    """Galerkin matrix of the second variation at a phi-minimal immersion."""
    H = phi_mean_curvature(imm)
    hnorm = H.max_norm()
    if hnorm > gate:
        raise ContractError(f"immersion is not phi-minimal: max |H_phi| = {hnorm:.3e}")
    n = imm.grid.n
    size = imm.grid.size
    wdens = (phi_volume_density(imm) * imm.grid.weight).reshape(-1)
    K = curvature_block(imm)
    Hc = H.coefficients
    K = K + np.einsum("...i,...j->...ij", Hc, Hc)
    K = K.reshape(size, n, n)
    block = scipy.linalg.block_diag(*(wdens[k] * K[k] for k in range(size)))
    Dv = divergence_operator(imm)
    Q = block + Dv.T @ (wdens[:, None] * Dv)
    Q = 0.5 * (Q + Q.T)
    mass = np.diag(np.repeat(wdens, n))
    return QuadraticForm(Q, mass, K, getattr(imm.model, "expected_A", None))


def coclosed_witness(imm, which=0, scale=1.0):
    """Y with rho_phi * Y metric-dual to a coclosed one-form (zero divergence term)."""
    cx = DiscreteComplex.of(imm)
    alpha = scale * cx.coclosed_forms()[which]
    Ya = cx.raise_index(alpha) / imm.frame.rho[..., None]
    return imm.frame_components(Ya)


def stability_check(model, imm, rng=None, fit_points=32):
    """Spectral stability verdict with the threshold A <= -2.

    The model must be eta-Einstein (checked by a least-squares fit).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    A, _, residual = eta_einstein_fit(model, model.random_points(rng, fit_points), rng)
    if A is None:
        raise ContractError(f"model is not eta-Einstein (fit residual {residual:.3e})")
    Q = assemble_Q(imm)
    vals, vecs = scipy.linalg.eigh(Q.matrix, Q.mass)
    lam, w = float(vals[0]), vecs[:, 0]
    resid = float(np.max(np.abs(Q.matrix @ w - lam * Q.mass @ w)))
    rayleigh = abs(Q(w) - lam * Q.norm_squared(w))
    shape = imm.grid.shape + (imm.grid.n,)
    verdict = StabilityVerdict(
        lambda_min=lam,
        witness=w.reshape(shape),
        stable=lam >= -1e-6,
        A=A,
        regime="stable (A <= -2)" if A <= -2 + 1e-8 else "unstable (A > -2)",
        eigen_residual=resid,
        witness_rayleigh_error=rayleigh,
    )
    if A > -2 + 1e-8:
        verdict.coclosed_witness_Q = Q(coclosed_witness(imm))
    return verdict


def spectrum(imm, k=6):
    """Lowest k generalized eigenvalues of (Q, mass)."""
    Q = assemble_Q(imm)
    vals = scipy.linalg.eigh(Q.matrix, Q.mass, eigvals_only=True)
    return vals[:k]


@dataclass
class ConvexityReport:
    times: np.ndarray
    volumes: np.ndarray
    second_differences: np.ndarray
    tolerance: float

    @property
    def min_second_difference(self):
        return float(np.min(self.second_differences))

    @property
    def passed(self):
        return self.min_second_difference >= -self.tolerance


def convexity_check(model, imm, Y, f=None, T=0.5, dt=None, samples=11, tol=1e-6):
    """Vol_phi along a geodesic family sampled at equal steps, with second differences."""
    if dt is None:
        dt = min(1e-3, imm.grid.spacing / 4)
    stride = max(1, int(round(T / (samples - 1) / dt)))
    dt = T / ((samples - 1) * stride)
    fam = geodesic_evolve(imm, Y, f, T=T, dt=dt)
    idx = np.arange(0, len(fam.times), stride)
    vols = np.array([volume_phi(fam.immersion(k)) for k in idx])
    second = vols[2:] - 2 * vols[1:-1] + vols[:-2]
    return ConvexityReport(fam.times[idx], vols, second, tol)


def gradient_field(imm, f):
    """Frame coefficients of the Riemannian gradient of f on L."""
    cx = DiscreteComplex.of(imm)
    return imm.frame_components(cx.raise_index(cx.d0(f)))


def legendrian_second_variation_check(imm, f, tol=1e-8, gate=PHI_MINIMAL_GATE):
    """Compare the general second variation with its Legendrian reduction.

    Y is determined from f by the Legendrian constraint 2 g(Y, .) + df = 0.
    The immersion must be minimal Legendrian: when H does not vanish the
    reduction also absorbs a bracket term that is specific to Legendrian
    (non-geodesic) families, so the two sides are not comparable.
    Returns (general, reduced, |difference|).
    """
    if imm.legendrian_defect() > tol:
        raise ContractError("Legendrian reduction needs a Legendrian immersion")
    from .variation import legendrian_mean_curvature, nabla_frame

    hmax = float(np.max(imm.model.norm(imm.values, legendrian_mean_curvature(imm))))
    if hmax > gate:
        raise ContractError(f"Legendrian reduction needs a minimal immersion (max |H| = {hmax:.3e})")

    f = np.asarray(f, float)
    Y = -0.5 * gradient_field(imm, f)
    general = second_variation_analytic(imm, Y, f)
    model, p = imm.model, imm.values
    cx = DiscreteComplex.of(imm)
    lap = cx.laplacian(f)
    Yv = imm.pushforward(Y)
    phiY = model.phi_of(p, Yv)
    H = legendrian_mean_curvature(imm)
    nabla_YY = np.einsum("...i,...im->...m", Y, nabla_frame(imm, Yv))
    integrand = (
        0.25 * lap**2
        - 2 * np.sum(Y**2, -1)
        - model.ricci(p, phiY, phiY)
        - 2 * model.inner(p, nabla_YY, H)
        + model.inner(p, Yv, H) ** 2
    )
    reduced = imm.integrate(integrand * imm.sqrt_det_h)
    return general, reduced, abs(general - reduced)
