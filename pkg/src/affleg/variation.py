"""The phi-volume functional, its first and second variations, and FD oracles.

Variation fields are given as frame coefficients ``Y`` of shape (*grid, n)
(with respect to the Gram-Schmidt frame e_i) and a function ``f`` of shape
(*grid,).  The ambient variation is Z = phi(iota_* Y) + f xi.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegeneracyError

RHO_FLOOR = 1e-6


# -- basic quantities ---------------------------------------------------------

def volume_phi(imm):
    """Total phi-volume: integral of rho_phi against the induced area element."""
    return imm.integrate(imm.frame.rho * imm.sqrt_det_h)


def phi_volume_density(imm):
    """Coordinate density rho_phi * sqrt(det h) at every node."""
    return imm.frame.rho * imm.sqrt_det_h


def _check_rho(imm):
    rho = imm.frame.rho
    if np.min(rho) < RHO_FLOOR:
        node = tuple(int(i) for i in np.unravel_index(int(np.argmin(rho)), rho.shape))
        raise DegeneracyError(node, float(rho[node]))


def nabla_frame(imm, W):
    """Covariant derivatives along the frame: out[..., i, :] = nabla_{e_i} W."""
    p, t, C = imm.values, imm.partials, imm.frame.C
    n = imm.grid.n
    coord = []
    for a in range(n):
        coord.append(imm.diff(W, a) + imm.model.connection(p, t[..., a, :], W))
    coord = np.stack(coord, axis=-2)  # (*grid, n, m)
    return np.einsum("...ia,...am->...im", C, coord)


def inner(imm, X, Y):
    return imm.model.inner(imm.values, X, Y)


def variation_field(imm, Y, f):
    """Ambient field Z = phi(iota_* Y) + f xi."""
    Yv = imm.pushforward(Y)
    return imm.model.phi_of(imm.values, Yv) + np.asarray(f)[..., None] * imm.frame.xi


def _as_field(imm, Y, f):
    Y = np.asarray(Y, dtype=float)
    if Y.shape != imm.grid.shape + (imm.grid.n,):
        raise ContractError(f"Y must have shape {imm.grid.shape + (imm.grid.n,)}")
    f = np.zeros(imm.grid.shape) if f is None else np.broadcast_to(np.asarray(f, float), imm.grid.shape)
    return Y, f


# -- mean curvature -----------------------------------------------------------

@dataclass
class MeanCurvature:
    """H_phi at the nodes, as frame coefficients and as an ambient field."""

    coefficients: np.ndarray
    vector: np.ndarray

    def max_norm(self):
        return float(np.max(np.linalg.norm(self.coefficients, axis=-1)))


def phi_mean_curvature(imm):
    """H_phi from the transposed projectors.

    With (e^i)^sharp the metric dual of the coframe covector e^i, the frame
    coefficient of H_phi along e_j is

        eta(e_j) + sum_i g(phi e_j, nabla_{e_i} (e^i)^sharp).
    """
    _check_rho(imm)
    fr = imm.frame
    div_dual = 0.0
    for i in range(imm.grid.n):
        div_dual = div_dual + nabla_frame(imm, fr.e_dual_sharp[..., i, :])[..., i, :]
    G = imm.metric_at_nodes
    coeff = np.einsum("...jm,...m->...j", fr.e, imm.model.eta(imm.values))
    coeff = coeff + np.einsum("...ja,...ab,...b->...j", fr.phie, G, div_dual)
    return MeanCurvature(coeff, imm.pushforward(coeff))


def phi_mean_curvature_by_divergence(imm):
    """H_phi from the divergence identity applied to Y = e_j (independent route).

    sum_i e^i(nabla_{e_i} phi e_j) = -g(e_j, H_phi) + eta(e_j).
    """
    _check_rho(imm)
    fr = imm.frame
    coeff = []
    for j in range(imm.grid.n):
        nab = nabla_frame(imm, fr.phie[..., j, :])
        tr = np.einsum("...im,...im->...", fr.e_dual, nab)
        coeff.append(imm.model.eta_of(imm.values, fr.e[..., j, :]) - tr)
    coeff = np.stack(coeff, axis=-1)
    return MeanCurvature(coeff, imm.pushforward(coeff))


def legendrian_mean_curvature(imm, tol=1e-8):
    """Riemannian mean curvature vector of a Legendrian immersion.

    H is the normal part of sum_i nabla_{e_i} e_i.
    """
    if imm.legendrian_defect() > tol:
        raise ContractError("immersion is not Legendrian")
    fr = imm.frame
    total = 0.0
    for i in range(imm.grid.n):
        total = total + nabla_frame(imm, fr.e[..., i, :])[..., i, :]
    tang = np.einsum("...jm,...m->...j", fr.e, np.einsum("...ab,...b->...a", imm.metric_at_nodes, total))
    return total - imm.pushforward(tang)


# -- first variation ----------------------------------------------------------

def first_variation_analytic(imm, Y, f=None):
    """-integral of g(Y, H_phi) vol_phi."""
    Y, f = _as_field(imm, Y, f)
    H = phi_mean_curvature(imm).coefficients
    return -imm.integrate(phi_volume_density(imm) * np.sum(Y * H, axis=-1))


def deform(imm, Z, s):
    """Node-wise exponential deformation iota -> exp(s Z)."""
    return imm.with_values(imm.model.exp(imm.values, s * Z))


def first_variation_fd(imm, Y, f=None, h=1e-3):
    """Richardson-extrapolated central difference of Vol_phi along exp(s Z)."""
    Y, f = _as_field(imm, Y, f)
    Z = variation_field(imm, Y, f)

    def central(step):
        return (volume_phi(deform(imm, Z, step)) - volume_phi(deform(imm, Z, -step))) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


def weak_mean_curvature(imm, kmax=8, h=1e-3):
    """H_phi recovered from first-variation differences against Fourier test fields.

    For every frame direction j and trigonometric mode psi_k the derivative of
    Vol_phi along phi(psi_k e_j) is differenced; solving the quadrature mass
    system then gives the L^2 projection of the e_j coefficient of H_phi onto
    the modes.  Returns the projected coefficients at the nodes.
    """
    modes = imm.grid.fourier_modes(kmax)
    dens = phi_volume_density(imm)
    mass = _mass(imm, modes, dens)
    n = imm.grid.n
    coeff = np.zeros(imm.grid.shape + (n,))
    for j in range(n):
        rhs = np.zeros(len(modes))
        for k, mode in enumerate(modes):
            Y = np.zeros(imm.grid.shape + (n,))
            Y[..., j] = mode
            rhs[k] = first_variation_fd(imm, Y, None, h)
        c = np.linalg.solve(mass, -rhs)
        coeff[..., j] = np.tensordot(c, modes, axes=1)
    return coeff


def _mass(imm, modes, dens):
    flat = modes.reshape(len(modes), -1)
    return (flat * dens.reshape(-1)) @ flat.T * imm.grid.weight


def project_onto_modes(imm, field, kmax):
    """Weighted L^2 projection of a scalar field onto the trigonometric modes."""
    modes = imm.grid.fourier_modes(kmax)
    dens = phi_volume_density(imm)
    mass = _mass(imm, modes, dens)
    rhs = modes.reshape(len(modes), -1) @ (field * dens).reshape(-1) * imm.grid.weight
    return np.tensordot(np.linalg.solve(mass, rhs), modes, axes=1)


def divergence_identity_residual(imm, X, Y, f=None):
    """Pointwise residual of the trace identity for W = X + phi Y + f xi.

    sum_i e^i(nabla_{e_i} W) = div(rho X)/rho - g(Y, H_phi) + eta(Y).
    """
    X = np.asarray(X, float)
    Y, f = _as_field(imm, Y, f)
    fr = imm.frame
    W = imm.pushforward(X) + variation_field(imm, Y, f)
    lhs = np.einsum("...im,...im->...", fr.e_dual, nabla_frame(imm, W))
    rho = fr.rho
    div = imm.divergence(rho[..., None] * imm.coordinate_components(X)) / rho
    H = phi_mean_curvature(imm).coefficients
    rhs = div - np.sum(Y * H, axis=-1) + imm.model.eta_of(imm.values, imm.pushforward(Y))
    return float(np.max(np.abs(lhs - rhs)))


# -- geodesic families --------------------------------------------------------

@dataclass
class ImmersionFamily:
    """Samples of a one-parameter family of immersions iota_t."""

    base: object
    Y: np.ndarray
    f: np.ndarray
    times: np.ndarray
    states: list
    commutator: np.ndarray = field(default=None)

    def immersion(self, k):
        return self.base.with_values(self.states[k])

    def index_of(self, t, tol=1e-12):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol:
            raise ContractError(f"time {t} not sampled by this family")
        return k

    def volume_at(self, t):
        return volume_phi(self.immersion(self.index_of(t)))

    def volumes(self):
        return np.array([volume_phi(self.immersion(k)) for k in range(len(self.times))])


def _geodesic_rhs(imm, Ya, f, values):
    partials = imm.spectral_partials(values)
    tangent = np.einsum("...a,...am->...m", Ya, partials)
    model = imm.model
    return model.phi_of(values, tangent) + f[..., None] * model.xi(values)


def _project(model, values):
    nrm = model.normals(values)
    if nrm.shape[-1] == 0:
        return values
    return values / np.linalg.norm(values, axis=-1, keepdims=True)


def geodesic_evolve(imm, Y, f=None, T=0.01, dt=None, symmetric=False):
    """Integrate d iota_t/dt = phi (iota_t)_* Y + f xi with Y, f fixed on L.

    Method of lines: spectral derivatives in space, classical RK4 in time.
    With ``symmetric=True`` the family is integrated on [-T, T].
    The commutator [(iota_t)_* Y, Z_t] is monitored by a fourth-order time
    difference of (iota_t)_* Y against Y(Z_t) at interior samples.
    """
    Y, f = _as_field(imm, Y, f)
    Ya = imm.coordinate_components(Y)
    if dt is None:
        dt = min(1e-3, imm.grid.spacing / 4)
    steps = max(1, int(np.ceil(abs(T) / dt - 1e-9)))
    dt = T / steps

    def run(direction):
        x = imm.values.copy()
        out = [x]
        for _ in range(steps):
            h = direction * dt
            k1 = _geodesic_rhs(imm, Ya, f, x)
            k2 = _geodesic_rhs(imm, Ya, f, x + 0.5 * h * k1)
            k3 = _geodesic_rhs(imm, Ya, f, x + 0.5 * h * k2)
            k4 = _geodesic_rhs(imm, Ya, f, x + h * k3)
            x = _project(imm.model, x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
            out.append(x)
        return out

    fwd = run(1.0)
    if symmetric:
        bwd = run(-1.0)
        states = bwd[:0:-1] + fwd
        times = dt * np.arange(-steps, steps + 1)
    else:
        states = fwd
        times = dt * np.arange(steps + 1)
    fam = ImmersionFamily(imm, Y, f, times, states)
    fam.commutator = _commutator_monitor(imm, Ya, f, states, dt)
    return fam


def _commutator_monitor(imm, Ya, f, states, dt):
    """max |d/dt (iota_* Y) - Y(Z)| at interior samples (fourth-order in t)."""
    if len(states) < 5:
        return np.array([])

    def tangent(x):
        return np.einsum("...a,...am->...m", Ya, imm.spectral_partials(x))

    tv = [tangent(x) for x in states]
    out = []
    for k in range(2, len(states) - 2):
        dtY = (tv[k - 2] - 8 * tv[k - 1] + 8 * tv[k + 1] - tv[k + 2]) / (12 * dt)
        Z = _geodesic_rhs(imm, Ya, f, states[k])
        dZ = np.stack([imm.diff(Z, a) for a in range(imm.grid.n)], axis=-2)
        YZ = np.einsum("...a,...am->...m", Ya, dZ)
        out.append(np.max(np.linalg.norm(dtY - YZ, axis=-1)))
    return np.array(out)


# -- second variation ---------------------------------------------------------

def second_variation_integrand(imm, Y, f=None, bracket=None):
    """Pointwise integrand of the second-variation formula (without vol_phi).

    ``bracket`` is the ambient field [Z, Y] along L; None means zero, which is
    the case along geodesic families.
    """
    Y, f = _as_field(imm, Y, f)
    model, p = imm.model, imm.values
    n = imm.grid.n
    Yv = imm.pushforward(Y)
    etaY = model.eta_of(p, Yv)
    gYY = np.sum(Y**2, axis=-1)
    ric = model.ricci(p, Yv, Yv)
    H = phi_mean_curvature(imm)
    rho = imm.frame.rho
    div = imm.divergence(rho[..., None] * imm.coordinate_components(Y)) / rho
    out = (2 * n + 2) * etaY**2 - 2 * gYY - ric + np.sum(Y * H.coefficients, -1) ** 2 + div**2
    if bracket is not None:
        piL = np.einsum("...ab,...b->...a", imm.frame.projector_L(), bracket)
        out = out - inner(imm, piL, H.vector)
    return out


def second_variation_analytic(imm, Y, f=None, bracket_mode="zero", bracket=None):
    """Integral of :func:`second_variation_integrand` against vol_phi."""
    if bracket_mode == "zero":
        bracket = None
    elif bracket_mode == "supplied":
        if bracket is None:
            raise ContractError("bracket_mode='supplied' needs a bracket field")
    else:
        raise ContractError(f"unknown bracket_mode {bracket_mode!r}")
    dens = phi_volume_density(imm)
    return imm.integrate(second_variation_integrand(imm, Y, f, bracket) * dens)


def second_variation_fd(family, h):
    """Richardson-extrapolated central second difference of Vol_phi along ``family``.

    The family must sample times -h, -h/2, 0, h/2, h.
    """
    V = {t: family.volume_at(t) for t in (-h, -h / 2, 0.0, h / 2, h)}

    def second(step):
        return (V[step] - 2 * V[0.0] + V[-step]) / step**2

    return (4 * second(h / 2) - second(h)) / 3


def geodesic_family_for_fd(imm, Y, f=None, h=1e-2, dt=None):
    """Symmetric geodesic family on [-h, h] whose step divides h/2."""
    if dt is None:
        dt = min(1e-3, imm.grid.spacing / 4)
    steps_half = max(1, int(np.ceil((h / 2) / dt - 1e-9)))
    return geodesic_evolve(imm, Y, f, T=h, dt=h / (2 * steps_half), symmetric=True)


def nabla_Z_Z_geodesic(imm, Y, f=None):
    """nabla_Z Z at t=0 along a geodesic family.

    Using [Z, iota_* Y] = 0 and Z(f) = 0 this equals
    g(Z, iota_* Y) xi - eta(iota_* Y) Z + phi nabla_{iota_* Y} Z - f phi Z.
    """
    Y, f = _as_field(imm, Y, f)
    model, p = imm.model, imm.values
    Yv = imm.pushforward(Y)
    Z = variation_field(imm, Y, f)
    nab = nabla_frame(imm, Z)
    nabla_Y_Z = np.einsum("...i,...im->...m", Y, nab)
    return (
        inner(imm, Z, Yv)[..., None] * imm.frame.xi
        - model.eta_of(p, Yv)[..., None] * Z
        + model.phi_of(p, nabla_Y_Z)
        - f[..., None] * model.phi_of(p, Z)
    )


def second_variation_density(imm, Z, nablaZZ):
    """Pointwise second t-derivative of vol_phi divided by vol_phi, for general Z.

    Needs Z and nabla_Z Z along L as ambient fields at the nodes.
    """
    model, p = imm.model, imm.values
    fr = imm.frame
    n = imm.grid.n
    nab = nabla_frame(imm, Z)                              # nabla_{e_j} Z
    E = np.einsum("...im,...jm->...ij", fr.e_dual, nab)    # e^i(nabla_{e_j} Z)
    F = np.einsum("...im,...jm->...ij", fr.f_dual, nab)
    S = np.einsum("...ii->...", E)
    phiZ = model.phi_of(p, Z)
    etastar = lambda V: np.einsum("...m,...m->...", fr.eta_star, V)  # noqa: E731
    curv = 0.0
    for i in range(n):
        R = model.curvature(p, Z, fr.e[..., i, :], Z)
        curv = curv + np.einsum("...m,...m->...", fr.e_dual[..., i, :], R)
    nabla_nzz = nabla_frame(imm, nablaZZ)
    curv = curv + np.einsum("...im,...im->...", fr.e_dual, nabla_nzz)
    piLZ = np.einsum("...ab,...b->...a", fr.projector_L(), Z)
    piphiZ = np.einsum("...ab,...b->...a", fr.projector_phi(), Z)
    fZ = np.einsum("...im,...m->...i", fr.f_dual, Z)
    eZ = np.einsum("...im,...m->...i", fr.e_dual, Z)
    eta_star_nab = np.einsum("...m,...im->...i", fr.eta_star, nab)
    eta_star_phinab = np.einsum("...m,...im->...i", fr.eta_star,
                                np.einsum("...ab,...ib->...ia", fr.phi_matrix, nab))
    return (
        -2 * etastar(phiZ) * S
        - np.einsum("...ij,...ji->...", E, E)
        + np.einsum("...ij,...ji->...", F, F)
        + curv
        - model.eta_of(p, piLZ) * etastar(Z)
        - etastar(model.phi_of(p, nablaZZ))
        - inner(imm, Z, piphiZ)
        - 2 * np.sum(fZ * eta_star_nab, -1)
        + 2 * np.sum(eZ * eta_star_phinab, -1)
        + S**2
    )


def density_second_derivative_fd(family, h):
    """Node-wise Richardson second difference of rho_phi * sqrt(det h) along a family,
    divided by its value at t=0."""
    D = {t: phi_volume_density(family.immersion(family.index_of(t)))
         for t in (-h, -h / 2, 0.0, h / 2, h)}

    def second(step):
        return (D[step] - 2 * D[0.0] + D[-step]) / step**2

    return (4 * second(h / 2) - second(h)) / 3 / D[0.0]


def random_smooth_field(grid, rng, components=None, kmax=3, scale=1.0):
    """Random trigonometric polynomial of degree <= kmax, shape (*grid) or (*grid, components)."""
    modes = grid.fourier_modes(kmax)
    count = 1 if components is None else components
    coeff = rng.standard_normal((len(modes), count)) * scale / np.sqrt(len(modes))
    out = np.moveaxis(np.tensordot(coeff, modes, axes=(0, 0)), 0, -1)
    return out[..., 0] if components is None else out
