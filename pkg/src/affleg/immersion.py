"""Discretized immersions of tori into a Sasakian model and their affine frames.

An immersion of the n-torus is sampled on a :class:`PeriodicGrid`.  Values are
stored with the grid axes first and the chart coordinate last, tangent data
as ``(*grid, n, m)``.  For the Heisenberg quotient an immersion may carry a
linear drift: ``values(u) = periodic(u) + u @ drift``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ContractError, NotAffineLegendrian, OrientationError
from .spectral import PeriodicGrid

MAX_CONDITION = 1e8


@dataclass
class Immersion:
    """A sampled immersion of the torus T^n into ``model``."""

    model: object
    grid: PeriodicGrid
    values: np.ndarray
    partials: np.ndarray = None
    drift: np.ndarray = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n, m = self.grid.n, self.model.m
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape + (m,):
            raise ContractError(
                f"values must have shape {self.grid.shape + (m,)}, got {self.values.shape}"
            )
        if self.model.n != n:
            raise ContractError("torus dimension must equal the model's n")
        self.model.validate_point(self.values)
        if self.drift is not None:
            self.drift = np.asarray(self.drift, dtype=float).reshape(n, m)
        if self.partials is None:
            self.partials = self.spectral_partials(self.values)
        self.partials = np.asarray(self.partials, dtype=float)
        h = self.induced_metric
        if np.min(np.linalg.eigvalsh(h)) <= 1e-12:
            raise ContractError("map is not an immersion (degenerate induced metric)")

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_function(cls, model, fn, grid, drift=None, partials_fn=None, label="",
                      check_periodic=True):
        """Sample ``fn`` (mapping (..., n) parameters to (..., m) points) on ``grid``."""
        u = grid.nodes
        values = fn(u)
        if check_periodic:
            for a in range(grid.n):
                shift = np.zeros(grid.n)
                shift[a] = 2 * np.pi
                expected = values if drift is None else values + 2 * np.pi * np.asarray(drift)[a]
                err = np.max(np.abs(fn(u + shift) - expected))
                if err > 1e-9:
                    raise ContractError(f"map is not periodic along axis {a} (error {err:.2e})")
        partials = None if partials_fn is None else partials_fn(u)
        return cls(model, grid, values, partials, drift, label)

    def with_values(self, values, label=None):
        """A new immersion with the same grid and drift but new sampled values."""
        return Immersion(self.model, self.grid, values, None, self.drift,
                         self.label if label is None else label)

    def periodic_part(self, values):
        if self.drift is None:
            return values
        return values - np.einsum("...a,am->...m", self.grid.nodes, self.drift)

    def spectral_partials(self, values):
        per = self.periodic_part(values)
        parts = []
        for a in range(self.grid.n):
            d = self.grid.diff(per, a)
            if self.drift is not None:
                d = d + self.drift[a]
            parts.append(d)
        return np.stack(parts, axis=self.grid.n)

    def diff(self, f, axis):
        """Spectral derivative of a periodic field sampled on this grid."""
        return self.grid.diff(f, axis)

    def coordinate_gradient(self, f):
        """(*grid, n, ...) stack of coordinate partials of a periodic field."""
        return self.grid.gradient(f)

    # -- intrinsic geometry ---------------------------------------------------
    @cached_property
    def metric_at_nodes(self):
        return self.model.metric(self.values)

    @cached_property
    def induced_metric(self):
        return np.einsum("...am,...mk,...bk->...ab", self.partials, self.metric_at_nodes,
                         self.partials)

    @cached_property
    def sqrt_det_h(self):
        return np.sqrt(np.linalg.det(self.induced_metric))

    @cached_property
    def inverse_metric(self):
        return np.linalg.inv(self.induced_metric)

    def integrate(self, density):
        return self.grid.integrate(density)

    @cached_property
    def area(self):
        return self.integrate(self.sqrt_det_h)

    def legendrian_defect(self):
        """max over nodes and axes of |eta(d iota / d u_a)|."""
        eta = self.model.eta(self.values)
        return float(np.max(np.abs(np.einsum("...am,...m->...a", self.partials, eta))))

    @cached_property
    def frame(self):
        return AffineFrame(self)

    def reparametrize(self, diffeo, label=None):
        """Immersion u -> iota(diffeo(u)) by spectral interpolation.

        ``diffeo`` maps parameter points (..., n) to (..., n) and must be a
        degree-one diffeomorphism of the torus (diffeo(u) - u periodic).
        """
        new_u = diffeo(self.grid.nodes)
        per = self.periodic_part(self.values)
        values = self.grid.evaluate(per, np.mod(new_u, 2 * np.pi))
        if self.drift is not None:
            values = values + np.einsum("...a,am->...m", new_u, self.drift)
        if self.model.normals(values).shape[-1]:
            values = values / np.linalg.norm(values, axis=-1, keepdims=True)
        return Immersion(self.model, self.grid, values, None, self.drift,
                         self.label if label is None else label)

    # -- tangent fields -------------------------------------------------------
    def pushforward(self, Y):
        """Ambient vector sum_i Y^i e_i for frame coefficients Y of shape (*grid, n)."""
        return np.einsum("...i,...im->...m", Y, self.frame.e)

    def coordinate_components(self, Y):
        """Coordinate components Y^a of the tangent field with frame coefficients Y."""
        return np.einsum("...i,...ia->...a", Y, self.frame.C)

    def frame_components(self, Ya):
        """Inverse of :meth:`coordinate_components`."""
        return np.einsum("...a,...ai->...i", Ya, self.frame.Cinv)

    def divergence(self, Va):
        """Riemannian divergence of a tangent field given by coordinate components."""
        s = self.sqrt_det_h
        total = 0.0
        for a in range(self.grid.n):
            total = total + self.diff(s * Va[..., a], a)
        return total / s


class AffineFrame:
    """Gram-Schmidt frame of an immersion with its affine complement.

    Attributes (all arrays with the grid axes first):

    * ``C`` with e_i = sum_a C[i, a] d_a iota (lower triangular)
    * ``e``, ``phie`` of shape (n, m) and ``xi`` of shape (m,)
    * ``e_dual``, ``f_dual``, ``eta_star``: the dual coframe of the basis
      (e, phi e, xi), as covectors on the chart
    * ``rho``: the affine volume density rho_phi
    """

    def __init__(self, imm):
        model = imm.model
        p = imm.values
        G = imm.metric_at_nodes
        n = imm.grid.n
        t = imm.partials
        e = np.zeros_like(t)
        C = np.zeros(t.shape[:-2] + (n, n))
        for i in range(n):
            v = t[..., i, :].copy()
            c = np.zeros(t.shape[:-2] + (n,))
            c[..., i] = 1.0
            for j in range(i):
                proj = np.einsum("...a,...ab,...b->...", t[..., i, :], G, e[..., j, :])
                v -= proj[..., None] * e[..., j, :]
                c -= proj[..., None] * C[..., j, :]
            nv = np.sqrt(np.einsum("...a,...ab,...b->...", v, G, v))
            e[..., i, :] = v / nv[..., None]
            C[..., i, :] = c / nv[..., None]
        self.C = C
        self.Cinv = np.linalg.inv(C)
        self.e = e
        self.xi = model.xi(p)
        Phi = model.phi(p)
        self.phie = np.einsum("...ab,...ib->...ia", Phi, e)
        self.phi_matrix = Phi

        normals = model.normals(p)
        cols = np.concatenate([e, self.phie, self.xi[..., None, :]], axis=-2)
        basis = np.concatenate([np.swapaxes(cols, -1, -2), normals], axis=-1)
        L = np.linalg.cholesky(G)
        sv = np.linalg.svd(np.swapaxes(L, -1, -2) @ basis, compute_uv=False)
        cond = sv[..., 0] / np.maximum(sv[..., -1], 1e-300)
        self.min_singular_value = sv[..., -1]
        if np.max(cond) > MAX_CONDITION:
            node = tuple(int(i) for i in np.unravel_index(int(np.argmax(cond)), cond.shape))
            raise NotAffineLegendrian(node, float(sv[..., -1][node]))
        inv = np.linalg.inv(basis)
        self.e_dual = inv[..., :n, :]
        self.f_dual = inv[..., n:2 * n, :]
        self.eta_star = inv[..., 2 * n, :]

        vecs = model._rho_vectors(p, e)
        rho2 = model.volume(p, vecs)
        if np.min(rho2) < -1e-12:
            node = tuple(int(i) for i in np.unravel_index(int(np.argmin(rho2)), rho2.shape))
            raise OrientationError(
                f"negative affine volume {float(rho2[node]):.3e} at node {node}"
            )
        self.rho_squared = rho2
        self.rho = np.sqrt(np.maximum(rho2, 0.0))
        Ginv = np.linalg.inv(G)
        self.e_dual_sharp = np.einsum("...ab,...ib->...ia", Ginv, self.e_dual)

    def projector_L(self):
        """pi_L as a matrix field, sum_i e_i (x) e^i."""
        return np.einsum("...ia,...ib->...ab", self.e, self.e_dual)

    def projector_phi(self):
        return np.einsum("...ia,...ib->...ab", self.phie, self.f_dual)

    def projector_xi(self):
        return np.einsum("...a,...b->...ab", self.xi, self.eta_star)


def rho_by_gram(imm):
    """rho_phi from the Gram determinant of (e, phi e, xi): det Gram = rho^4.

    Independent of the oriented-volume route used by :class:`AffineFrame`;
    only the Gram-Schmidt frame is shared.
    """
    fr = imm.frame
    V = np.concatenate([fr.e, fr.phie, fr.xi[..., None, :]], axis=-2)
    gram = np.einsum("...im,...mk,...jk->...ij", V, imm.metric_at_nodes, V)
    return np.maximum(np.linalg.det(gram), 0.0) ** 0.25


# -- example immersions -------------------------------------------------------

def torus_curve(a, k, N=256):
    """T(a, k): t -> (cos a e^{it}, sin a e^{ikt}) in S^3."""
    from .models import SphereModel

    model = SphereModel(1)
    ca, sa = np.cos(a), np.sin(a)

    def fn(u):
        t = u[..., 0]
        return np.stack([ca * np.cos(t), ca * np.sin(t), sa * np.cos(k * t), sa * np.sin(k * t)], -1)

    def dfn(u):
        t = u[..., 0]
        d = np.stack([-ca * np.sin(t), ca * np.cos(t), -k * sa * np.sin(k * t), k * sa * np.cos(k * t)], -1)
        return d[..., None, :]

    return Immersion.from_function(model, fn, PeriodicGrid(1, N), partials_fn=dfn,
                                   label=f"T({a:.6g},{k:g})")


def hopf_fiber(N=256):
    """Reeb orbit t -> (e^{it}, 0) of S^3: tangent to xi, so not affine Legendrian."""
    return torus_curve(0.0, 1, N)


def great_circle(N=256, phase=0.0):
    """Real great circle of S^3 rotated by the unit complex number e^{i phase}."""
    from .models import SphereModel

    model = SphereModel(1)
    c, s = np.cos(phase), np.sin(phase)

    def fn(u):
        t = u[..., 0]
        return np.stack([c * np.cos(t), s * np.cos(t), c * np.sin(t), s * np.sin(t)], -1)

    def dfn(u):
        t = u[..., 0]
        return np.stack([-c * np.sin(t), -s * np.sin(t), c * np.cos(t), s * np.cos(t)], -1)[..., None, :]

    return Immersion.from_function(model, fn, PeriodicGrid(1, N), partials_fn=dfn,
                                   label=f"great circle (phase {phase:.6g})")


def perturbed_curve(N=256, eps=0.15, modes=((1, 0.3), (2, -0.2))):
    """A generic non-Legendrian curve in S^3: a torus knot with a radial wobble, normalised."""
    from .models import SphereModel

    model = SphereModel(1)

    def raw(t):
        a = 0.6 + eps * sum(c * np.sin(k * t) for k, c in modes)
        return np.stack([np.cos(a) * np.cos(t), np.cos(a) * np.sin(t),
                         np.sin(a) * np.cos(2 * t + 0.3 * np.sin(t)),
                         np.sin(a) * np.sin(2 * t + 0.3 * np.sin(t))], -1)

    def fn(u):
        x = raw(u[..., 0])
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    return Immersion.from_function(model, fn, PeriodicGrid(1, N), label="perturbed torus curve")


def clifford_torus(N=32, phase=0.0):
    """Legendrian Clifford torus (e^{iu}, e^{iv}, e^{-i(u+v)})/sqrt(3) in S^5."""
    from .models import SphereModel

    model = SphereModel(2)
    r = 1 / np.sqrt(3)

    def fn(u):
        a, b = u[..., 0], u[..., 1]
        angles = [a + phase, b + phase, -(a + b) + phase]
        return r * np.stack([f(x) for x in angles for f in (np.cos, np.sin)], -1)

    return Immersion.from_function(model, fn, PeriodicGrid(2, N), label="Clifford torus")


def deformed_clifford_torus(N=32, eps=0.1):
    """Non-Legendrian affine torus in S^5 obtained by a smooth radial/phase deformation."""
    from .models import SphereModel

    model = SphereModel(2)

    def fn(u):
        a, b = u[..., 0], u[..., 1]
        r = np.stack([1 + eps * np.sin(a), 1 + eps * np.cos(b), 1 + 0 * a], -1)
        angles = [a + eps * np.cos(b), b + 0.5 * eps * np.sin(a + b), -(a + b)]
        x = np.concatenate([
            np.stack([r[..., k] * np.cos(angles[k]), r[..., k] * np.sin(angles[k])], -1)
            for k in range(3)
        ], -1)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    return Immersion.from_function(model, fn, PeriodicGrid(2, N), label="deformed Clifford torus")


def heisenberg_line(n=1, N=64):
    """Legendrian plane/line through the origin along the x-axes, compact in the quotient."""
    from .models import HeisenbergModel

    model = HeisenbergModel(n)
    drift = np.zeros((n, model.m))
    for a in range(n):
        drift[a, 2 * a] = 1.0

    def fn(u):
        return np.einsum("...a,am->...m", u, drift)

    return Immersion.from_function(model, fn, PeriodicGrid(n, N), drift=drift,
                                   label="Heisenberg Legendrian line")


def heisenberg_wavy_curve(N=64, eps=0.2):
    """Non-Legendrian closed curve in the Heisenberg quotient (x drifts by 2pi)."""
    from .models import HeisenbergModel

    model = HeisenbergModel(1)
    drift = np.array([[1.0, 0.0, 0.0]])

    def fn(u):
        t = u[..., 0]
        return np.stack([t + eps * np.sin(t), eps * np.cos(2 * t), 0.5 * eps * np.sin(t)], -1)

    return Immersion.from_function(model, fn, PeriodicGrid(1, N), drift=drift,
                                   label="Heisenberg wavy curve")


def closed_form_rho_torus_curve(a, k, t=None):
    """Exact rho_phi of T(a, k) (constant along the curve)."""
    c2, s2 = np.cos(a) ** 2, np.sin(a) ** 2
    eta = (c2 + k * s2) / np.sqrt(c2 + k * k * s2)
    return np.sqrt(max(1.0 - eta**2, 0.0))
