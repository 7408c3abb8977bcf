"""Deformations of special affine Legendrian immersions.

Normal variations v = phi(iota_* Y) + f xi of a base immersion are encoded by
a function and a one-form, (g, alpha) = (rho f, rho * h(Y, .)), with h the
induced metric of the base.  The nonlinear map

    F(g, alpha) = Im psi(d_1 q, ..., d_n q) / sqrt(det h),   q = exp(v),

vanishes exactly on special (phase zero) deformations.  Its linearization at
a special Legendrian base is D1(g, alpha) = -(n+1) g - d* alpha.
"""

from dataclasses import dataclass, field

import numpy as np

from .cone import psi_form, require_cone, special_defect
from .errors import ContractError, ConvergenceError
from .forms import DiscreteComplex
from .immersion import Immersion


@dataclass
class ModuliState:
    """A base special immersion, an encoded normal field and its residual."""

    base: Immersion
    g: np.ndarray
    alpha: np.ndarray
    residual: np.ndarray = None
    history: list = field(default_factory=list)
    orders: list = field(default_factory=list)

    @property
    def n(self):
        return self.base.grid.n

    def vector(self):
        return np.concatenate([self.g.reshape(-1), self.alpha.reshape(-1)])

    def immersion(self):
        return exp_normal(self.base, self.g, self.alpha)


class ModuliOperators:
    """Linear operators of the deformation problem at a base immersion."""

    def __init__(self, base, special_tol=1e-8):
        require_cone(base.model)
        theta, defect = special_defect(base)
        if defect > special_tol or abs(theta) > 1e-6:
            raise ContractError(
                f"base immersion is not special of phase 0 (defect {defect:.2e}, phase {theta:.2e})"
            )
        self.base = base
        self.cx = DiscreteComplex.of(base)
        self.n = base.grid.n

    # -- D1 and its adjoint ---------------------------------------------------------
    def d1_apply(self, g, alpha):
        return -(self.n + 1) * g - self.cx.codiff(alpha)

    def d1_adjoint(self, h):
        return -(self.n + 1) * h, -self.cx.d0(h)

    def pair0(self, a, b):
        return self.cx.inner0(a, b)

    def pair1(self, g1, a1, g2, a2):
        return self.cx.inner0(g1, g2) + self.cx.inner1(a1, a2)

    # -- dense matrices ---------------------------------------------------------------
    def d1_matrix(self):
        """Matrix of D1 acting on the flattened vector (g, alpha)."""
        size, n = self.base.grid.size, self.n
        shape = self.base.grid.shape
        cols = []
        for k in range(size):
            g = np.zeros(size)
            g[k] = 1.0
            cols.append(self.d1_apply(g.reshape(shape), np.zeros(shape + (n,))).reshape(-1))
        for k in range(size * n):
            a = np.zeros(size * n)
            a[k] = 1.0
            cols.append(self.d1_apply(np.zeros(shape), a.reshape(shape + (n,))).reshape(-1))
        return np.stack(cols, axis=1)

    def mass_matrices(self):
        """Quadrature Gram matrices of the function space and of (g, alpha) space."""
        w = (self.cx.sqrt_det * self.base.grid.weight).reshape(-1)
        size, n = self.base.grid.size, self.n
        hinv = self.cx.hinv.reshape(size, n, n)
        M1 = np.zeros((size * (n + 1), size * (n + 1)))
        M1[:size, :size] = np.diag(w)
        for k in range(size):
            sl = slice(size + k * n, size + (k + 1) * n)
            M1[sl, sl] = w[k] * hinv[k]
        return np.diag(w), M1

    def d1d1star_matrix(self):
        """Matrix of D1 D1* on node functions."""
        size = self.base.grid.size
        shape = self.base.grid.shape
        cols = []
        for k in range(size):
            h = np.zeros(size)
            h[k] = 1.0
            g, a = self.d1_adjoint(h.reshape(shape))
            cols.append(self.d1_apply(g, a).reshape(-1))
        return np.stack(cols, axis=1)

    def laplacian_identity_spectrum(self):
        """Sorted eigenvalues of D1 D1*, symmetrised by the quadrature weights."""
        A = self.d1d1star_matrix()
        w = np.sqrt((self.cx.sqrt_det * self.base.grid.weight).reshape(-1))
        S = (w[:, None] * A) / w[None, :]
        S = 0.5 * (S + S.T)
        return np.linalg.eigvalsh(S)

    # -- kernel -------------------------------------------------------------------
    def tangent_basis(self):
        """Basis {(-d* alpha/(n+1), alpha)} over the unit one-forms at the nodes."""
        size, n = self.base.grid.size, self.n
        shape = self.base.grid.shape
        out = []
        for k in range(size * n):
            a = np.zeros(size * n)
            a[k] = 1.0
            a = a.reshape(shape + (n,))
            out.append((-self.cx.codiff(a) / (n + 1), a))
        return out

    def kernel_direction(self, alpha):
        return -self.cx.codiff(alpha) / (self.n + 1), alpha


# -- encoding of normal fields --------------------------------------------------------

def decode(base, g, alpha):
    """(g, alpha) -> (f, Y) with Y in frame coefficients."""
    rho = base.frame.rho
    f = g / rho
    Ya = np.einsum("...ab,...b->...a", base.inverse_metric, alpha) / rho[..., None]
    return f, base.frame_components(Ya)


def encode(base, f, Y):
    """(f, Y) -> (g, alpha)."""
    rho = base.frame.rho
    Ya = base.coordinate_components(Y)
    alpha = rho[..., None] * np.einsum("...ab,...b->...a", base.induced_metric, Ya)
    return rho * f, alpha


def normal_field(base, g, alpha):
    f, Y = decode(base, g, alpha)
    Yv = base.pushforward(Y)
    return base.model.phi_of(base.values, Yv) + f[..., None] * base.frame.xi


def injectivity_bound(model):
    return np.pi / 2 if model.name == "sphere" else np.inf


def exp_normal(base, g, alpha):
    """Node-wise exponential of the decoded normal field."""
    v = normal_field(base, g, alpha)
    size = float(np.max(base.model.norm(base.values, v)))
    if size >= injectivity_bound(base.model):
        raise ContractError(f"normal field too large for the exponential chart (|v| = {size:.3f})")
    if size == 0.0:
        return base
    return base.with_values(base.model.exp(base.values, v))


def residual_field(base, g, alpha):
    """F(g, alpha) = Im psi on the coordinate partials of exp(v), over sqrt(det h) of the base."""
    imm = exp_normal(base, g, alpha)
    z = psi_form(imm.values, imm.partials)
    return np.imag(z) / base.sqrt_det_h


def real_part_positive(base, g, alpha):
    imm = exp_normal(base, g, alpha)
    return float(np.min(np.real(psi_form(imm.values, imm.partials))))


# -- Newton projection ------------------------------------------------------------------

def _split(vec, shape, n):
    size = int(np.prod(shape))
    return vec[:size].reshape(shape), vec[size:].reshape(shape + (n,))


def residual_jacobian(base, g, alpha, step=1e-6):
    """Central-difference Jacobian of F at (g, alpha), columns over the flattened vector."""
    shape, n = base.grid.shape, base.grid.n
    x = np.concatenate([g.reshape(-1), alpha.reshape(-1)])
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        fp = residual_field(base, *_split(x + e, shape, n)).reshape(-1)
        fm = residual_field(base, *_split(x - e, shape, n)).reshape(-1)
        cols.append((fp - fm) / (2 * step))
    return np.stack(cols, axis=1)


def newton_project(base, g0=None, alpha0=None, tol=1e-10, max_iter=50, jacobian="current",
                   ops=None):
    """Minimum-norm Newton iteration onto the zero set of F.

    Each step solves J dx = F in the least-norm sense for the quadrature inner
    products, dx = J* (J J*)^{-1} F.  With ``jacobian="current"`` J is the
    central-difference Jacobian at the current iterate (quadratic convergence);
    ``"frozen"`` uses the base-point operator D1 throughout (a chord method,
    linear convergence).
    """
    if base.grid.n != 1 and jacobian == "current":
        raise ContractError("the differenced Jacobian is only supported for curves")
    ops = ModuliOperators(base) if ops is None else ops
    shape, n = base.grid.shape, base.grid.n
    g = np.zeros(shape) if g0 is None else np.array(g0, float)
    alpha = np.zeros(shape + (n,)) if alpha0 is None else np.array(alpha0, float)
    MF, Mx = ops.mass_matrices()
    Mx_inv = np.linalg.inv(Mx)
    D1 = ops.d1_matrix() if jacobian == "frozen" else None
    state = ModuliState(base, g, alpha)

    def norm(F):
        return float(np.sqrt(F.reshape(-1) @ MF @ F.reshape(-1)))

    F = residual_field(base, g, alpha)
    state.history.append(norm(F))
    for _ in range(max_iter):
        if state.history[-1] < tol:
            break
        J = D1 if jacobian == "frozen" else residual_jacobian(base, g, alpha)
        Jstar = Mx_inv @ J.T @ MF
        y = np.linalg.solve(J @ Jstar, F.reshape(-1))
        dx = Jstar @ y
        x = np.concatenate([g.reshape(-1), alpha.reshape(-1)]) - dx
        g, alpha = _split(x, shape, n)
        try:
            F = residual_field(base, g, alpha)
        except ContractError as exc:
            raise ConvergenceError(f"Newton iterate left the exponential chart: {exc}") from exc
        state.history.append(norm(F))
        if not np.isfinite(state.history[-1]) or state.history[-1] > 1e3 * state.history[0] + 1:
            raise ConvergenceError("Newton iteration diverged")
    else:
        if state.history[-1] >= tol:
            raise ConvergenceError(
                f"Newton did not converge in {max_iter} iterations (|F| = {state.history[-1]:.2e})"
            )
    if real_part_positive(base, g, alpha) <= 0:
        raise ContractError("deformed immersion has Re psi <= 0 somewhere")
    state.g, state.alpha, state.residual = g, alpha, F
    state.orders = convergence_orders(state.history)
    return state


def convergence_orders(history, floor=1e-13):
    """Estimated orders log(r_{k+1}/r_k) / log(r_k/r_{k-1}) above a noise floor."""
    r = [x for x in history if x > floor]
    out = []
    for k in range(1, len(r) - 1):
        denom = np.log(r[k] / r[k - 1])
        if denom != 0:
            out.append(float(np.log(r[k + 1] / r[k]) / denom))
    return out


def hausdorff_distance(a, b):
    """Symmetric Hausdorff distance between two node clouds (Euclidean chart)."""
    A = a.reshape(-1, a.shape[-1])
    B = b.reshape(-1, b.shape[-1])
    d = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def moduli_walk(base, direction, steps=5, step_size=0.05, tol=1e-10):
    """Move along a kernel direction (g, alpha) in increments, Newton-correcting each time.

    Returns the list of converged states.
    """
    ops = ModuliOperators(base)
    g_dir, a_dir = direction
    states = []
    g = np.zeros(base.grid.shape)
    alpha = np.zeros(base.grid.shape + (base.grid.n,))
    for _ in range(steps):
        g = g + step_size * g_dir
        alpha = alpha + step_size * a_dir
        st = newton_project(base, g, alpha, tol=tol, ops=ops)
        g, alpha = st.g, st.alpha
        states.append(st)
    return states
