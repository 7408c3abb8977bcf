"""Concrete Sasakian manifolds with their contact metric structure.

Every model works in a fixed ambient chart of dimension ``m``: the round
sphere S^{2n+1} sits inside R^{2n+2}, the Heisenberg group H^{2n+1} is its own
global chart R^{2n+1}.  All pointwise methods accept arrays of points of shape
``(..., m)`` and vectors of the same shape, and broadcast over leading axes.

Conventions (fixed once, used everywhere):

* ``eta`` returns the covector components, ``phi`` a matrix acting on column
  vectors, ``metric`` the Gram matrix of the chart coordinates.
* ``connection(p, X, Y)`` is the correction term so that the Levi-Civita
  derivative of a vector field Y along X is ``D_X Y + connection(p, X, Y)``,
  with ``D`` the flat chart derivative.
* ``curvature(p, X, Y, Z) = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``.
"""

from functools import cached_property

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DomainError, OrientationError

# offsets and weights of the fourth-order central difference
_FD4_OFFSETS = (-2, -1, 1, 2)
_FD4_WEIGHTS = (1 / 12, -8 / 12, 8 / 12, -1 / 12)


def fd4(fn, p, direction, h):
    """Fourth-order central difference of ``fn`` at ``p`` along ``direction``."""
    out = 0.0
    for s, w in zip(_FD4_OFFSETS, _FD4_WEIGHTS):
        out = out + w * fn(p + s * h * direction)
    return out / h


def _unit_vectors(m):
    return np.eye(m)


class SasakianModel:
    """Shared machinery; subclasses supply the structure tensors."""

    name = "abstract"
    closed_form = False
    expected_A = None

    def __init__(self, n):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n

    # -- structure tensors (overridden) ------------------------------------
    @property
    def m(self):
        raise NotImplementedError

    def metric(self, p):
        raise NotImplementedError

    def eta(self, p):
        raise NotImplementedError

    def xi(self, p):
        raise NotImplementedError

    def phi(self, p):
        raise NotImplementedError

    def connection(self, p, X, Y):
        raise NotImplementedError

    def normals(self, p):
        """Unit normal columns of the chart embedding, shape (..., m, k)."""
        raise NotImplementedError

    def raw_volume(self, p, vectors):
        """Signed Riemannian volume of 2n+1 vectors, before orientation fixing.

        ``vectors`` has shape (..., 2n+1, m).
        """
        raise NotImplementedError

    def exp(self, p, v):
        raise NotImplementedError

    def validate_point(self, p, tol=1e-9):
        return np.asarray(p, dtype=float)

    def validate_tangent(self, p, v, tol=1e-9):
        return np.asarray(v, dtype=float)

    def random_points(self, rng, count):
        raise NotImplementedError

    def reference_legendrian_frame(self):
        """A point and a Legendrian g-orthonormal n-frame used to fix orientation."""
        raise NotImplementedError

    # -- derived quantities --------------------------------------------------
    @property
    def dim(self):
        return 2 * self.n + 1

    def inner(self, p, X, Y):
        return np.einsum("...a,...ab,...b->...", X, self.metric(p), Y)

    def norm(self, p, X):
        return np.sqrt(np.maximum(self.inner(p, X, X), 0.0))

    def eta_of(self, p, X):
        return np.einsum("...a,...a->...", self.eta(p), X)

    def phi_of(self, p, X):
        return np.einsum("...ab,...b->...a", self.phi(p), X)

    def tangent_projector(self, p):
        nrm = self.normals(p)
        eye = np.broadcast_to(np.eye(self.m), nrm.shape[:-2] + (self.m, self.m))
        return eye - np.einsum("...ak,...bk->...ab", nrm, nrm)

    def covariant_derivative(self, field, p, X, h=1e-3):
        """nabla_X of the vector field ``field`` (callable on chart points) at p."""
        return fd4(field, p, X, h) + self.connection(p, X, field(p))

    def phi_derivative(self, p, X, Y, h=1e-3):
        """(nabla_X phi) Y computed from the phi matrix field by differencing.

        Y is extended to neighbouring chart points by tangential projection,
        which keeps the extension tangent for embedded models.
        """
        def ext(q):
            return np.einsum("...ab,...b->...a", self.tangent_projector(q), Y)

        def phi_ext(q):
            return np.einsum("...ab,...b->...a", self.phi(q), ext(q))

        nabla_phiY = fd4(phi_ext, p, X, h) + self.connection(p, X, self.phi_of(p, Y))
        nabla_Y = fd4(ext, p, X, h) + self.connection(p, X, Y)
        return nabla_phiY - self.phi_of(p, nabla_Y)

    def d_eta(self, p, X, Y, h=1e-3):
        """d eta(X, Y) from differencing the covector field."""
        m = self.m
        jac = np.stack(
            [fd4(self.eta, p, _unit_vectors(m)[a], h) for a in range(m)], axis=-2
        )  # jac[..., a, b] = d_a eta_b
        return np.einsum("...ab,...a,...b->...", jac - np.swapaxes(jac, -1, -2), X, Y)

    def curvature(self, p, X, Y, Z):
        raise NotImplementedError

    def ricci(self, p, X, Y):
        """Trace of V -> R(V, X) Y over the tangent space."""
        P = self.tangent_projector(p)
        total = 0.0
        for k in range(self.m):
            V = P[..., :, k]
            total = total + self.curvature(p, V, X, Y)[..., k]
        return total

    @cached_property
    def orientation_sign(self):
        p, E = self.reference_legendrian_frame()
        vecs = self._rho_vectors(p, E)
        raw = float(self.raw_volume(p, vecs))
        if abs(raw) < 1e-12:
            raise OrientationError("reference Legendrian frame is degenerate")
        return 1.0 if raw > 0 else -1.0

    def _rho_vectors(self, p, E):
        """Stack (e_1..e_n, -xi, phi e_1..phi e_n) for frames E of shape (..., n, m)."""
        xi = self.xi(p)
        phiE = np.einsum("...ab,...ib->...ia", self.phi(p), E)
        return np.concatenate([E, -xi[..., None, :], phiE], axis=-2)

    def volume(self, p, vectors):
        """Oriented Riemannian volume form on 2n+1 vectors."""
        return self.orientation_sign * self.raw_volume(p, vectors)

    def random_tangent(self, rng, p, unit=True):
        v = rng.standard_normal(np.shape(p))
        v = np.einsum("...ab,...b->...a", self.tangent_projector(p), v)
        if unit:
            v = v / self.norm(p, v)[..., None]
        return v

    def horizontal_part(self, p, X):
        return X - self.eta_of(p, X)[..., None] * self.xi(p)


class SphereModel(SasakianModel):
    """Round unit sphere S^{2n+1} in C^{n+1} = R^{2n+2}.

    Coordinates are (x1, y1, ..., x_{n+1}, y_{n+1}).  The complex structure used
    is J(a, b) = (b, -a) on each coordinate pair, and the Reeb field is
    xi(p) = -J p.  Holomorphic coordinates for the cone are w_k = x_k - i y_k.
    """

    name = "sphere"
    closed_form = True

    def __init__(self, n):
        super().__init__(n)
        self.expected_A = 2.0 * n

    @property
    def m(self):
        return 2 * self.n + 2

    @cached_property
    def J(self):
        block = np.array([[0.0, 1.0], [-1.0, 0.0]])
        return np.kron(np.eye(self.n + 1), block)

    @staticmethod
    def _unit(p):
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def validate_point(self, p, tol=1e-9):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.m:
            raise DomainError(f"expected points in R^{self.m}")
        err = np.max(np.abs(np.linalg.norm(p, axis=-1) - 1.0))
        if err > tol:
            raise DomainError(f"point off the unit sphere by {err:.3e}")
        return p

    def validate_tangent(self, p, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        err = np.max(np.abs(np.einsum("...a,...a->...", p, v)))
        if err > tol:
            raise DomainError(f"vector not tangent (normal part {err:.3e})")
        return v

    def metric(self, p):
        p = np.asarray(p)
        return np.broadcast_to(np.eye(self.m), p.shape[:-1] + (self.m, self.m))

    def xi(self, p):
        return -np.einsum("ab,...b->...a", self.J, self._unit(p))

    def eta(self, p):
        return self.xi(p)

    def phi(self, p):
        P = self.tangent_projector(p)
        return P @ self.J @ P

    def normals(self, p):
        return self._unit(p)[..., :, None]

    def connection(self, p, X, Y):
        return np.einsum("...a,...a->...", X, Y)[..., None] * p

    def raw_volume(self, p, vectors):
        mat = np.concatenate([vectors, p[..., None, :]], axis=-2)
        return np.linalg.det(np.swapaxes(mat, -1, -2))

    def curvature(self, p, X, Y, Z):
        yz = np.einsum("...a,...a->...", Y, Z)[..., None]
        xz = np.einsum("...a,...a->...", X, Z)[..., None]
        return yz * X - xz * Y

    def exp(self, p, v):
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(r > 0, r, 1.0)
        return np.cos(r) * p + np.where(r > 0, np.sin(r) / safe, 1.0) * v

    def random_points(self, rng, count):
        return self._unit(rng.standard_normal((count, self.m)))

    def reference_legendrian_frame(self):
        p = np.zeros(self.m)
        p[0] = 1.0
        E = np.zeros((self.n, self.m))
        for i in range(self.n):
            E[i, 2 * (i + 1)] = 1.0
        return p, E

    def total_volume(self):
        """Riemannian volume of S^{2n+1}."""
        k = 2 * self.n + 2
        return 2 * np.pi ** (k / 2) / gamma_fn(k / 2)


class HeisenbergModel(SasakianModel):
    """Heisenberg group H^{2n+1} with its standard Sasakian structure.

    Chart coordinates are ordered (x1, y1, ..., xn, yn, z) and

        eta = (dz - sum y_i dx_i) / 2,      xi = 2 d/dz,
        g   = (1/4) sum (dx_i^2 + dy_i^2) + eta (x) eta,
        phi(d/dx_i) = -d/dy_i,  phi(d/dy_i) = d/dx_i + y_i d/dz,  phi(xi) = 0.

    With this normalisation the Ricci tensor is -2 g + 4 eta (x) eta.

    ``conformal_bump`` multiplies the metric by 1 + bump * exp(-|p|^2) while
    keeping eta, xi and phi; that breaks the contact metric condition and is
    used as a negative control.
    """

    name = "heisenberg"
    closed_form = False

    def __init__(self, n, conformal_bump=0.0):
        super().__init__(n)
        self.bump = float(conformal_bump)
        self.expected_A = -2.0 if self.bump == 0.0 else None

    @property
    def m(self):
        return 2 * self.n + 1

    def _x_index(self, i):
        return 2 * i

    def _y_index(self, i):
        return 2 * i + 1

    @property
    def z_index(self):
        return 2 * self.n

    def eta(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        for i in range(self.n):
            out[..., 2 * i] = -0.5 * p[..., 2 * i + 1]
        out[..., self.z_index] = 0.5
        return out

    def xi(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        out[..., self.z_index] = 2.0
        return out

    def phi(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape + (self.m,))
        for i in range(self.n):
            xi_, yi_ = 2 * i, 2 * i + 1
            out[..., yi_, xi_] = -1.0
            out[..., xi_, yi_] = 1.0
            out[..., self.z_index, yi_] = p[..., yi_]
        return out

    def _conformal(self, p):
        return 1.0 + self.bump * np.exp(-np.sum(p**2, axis=-1))

    def _base_metric(self, p):
        e = self.eta(p)
        base = np.einsum("...a,...b->...ab", e, e)
        idx = np.arange(2 * self.n)
        base[..., idx, idx] += 0.25
        return base

    def metric(self, p):
        p = np.asarray(p, dtype=float)
        return self._conformal(p)[..., None, None] * self._base_metric(p)

    def dmetric(self, p):
        """Closed-form chart derivatives, out[..., c, a, b] = d_c g_ab."""
        p = np.asarray(p, dtype=float)
        e = self.eta(p)
        m = self.m
        dbase = np.zeros(p.shape + (m, m))
        for i in range(self.n):
            de = np.zeros(m)
            de[2 * i] = -0.5
            dbase[..., 2 * i + 1, :, :] = np.einsum("a,...b->...ab", de, e) + np.einsum(
                "...a,b->...ab", e, de
            )
        if self.bump == 0.0:
            return dbase
        sigma = self._conformal(p)
        dsigma = -2.0 * p * (sigma - 1.0)[..., None]
        return (
            dsigma[..., :, None, None] * self._base_metric(p)[..., None, :, :]
            + sigma[..., None, None, None] * dbase
        )

    def christoffel(self, p):
        """Gamma[..., a, b, c] from the closed-form metric derivatives."""
        return christoffel_symbols(self.metric(p), self.dmetric(p))

    def connection(self, p, X, Y):
        return np.einsum("...abc,...b,...c->...a", self.christoffel(p), X, Y)

    def normals(self, p):
        p = np.asarray(p)
        return np.zeros(p.shape + (0,))

    def tangent_projector(self, p):
        p = np.asarray(p)
        return np.broadcast_to(np.eye(self.m), p.shape[:-1] + (self.m, self.m))

    def raw_volume(self, p, vectors):
        sq = np.sqrt(np.linalg.det(self.metric(p)))
        return sq * np.linalg.det(np.swapaxes(vectors, -1, -2))

    def riemann(self, p, h=1e-3):
        """R[..., a, b, c, d] with R(d_c, d_d) d_b = R^a_{bcd} d_a.

        Derivatives of the Christoffel symbols are fourth-order differences.
        """
        p = np.asarray(p, dtype=float)
        m = self.m
        G = self.christoffel(p)
        dG = np.stack([fd4(self.christoffel, p, np.eye(m)[c], h) for c in range(m)], axis=-4)
        # dG[..., c, a, d, b] = d_c Gamma^a_{db}
        term1 = np.einsum("...cadb->...abcd", dG)
        term2 = np.einsum("...dacb->...abcd", dG)
        quad = np.einsum("...ace,...edb->...abcd", G, G)
        quad2 = np.einsum("...ade,...ecb->...abcd", G, G)
        return term1 - term2 + quad - quad2

    def curvature(self, p, X, Y, Z):
        return np.einsum("...abcd,...b,...c,...d->...a", self.riemann(p), Z, X, Y)

    def ricci_tensor(self, p):
        """Ric[..., b, d] = R^a_{bad}."""
        return np.einsum("...abad->...bd", self.riemann(p))

    def ricci(self, p, X, Y):
        return np.einsum("...bd,...b,...d->...", self.ricci_tensor(p), X, Y)

    def exp(self, p, v, steps=16):
        """Geodesic flow for unit time by classical RK4 on the geodesic equation."""
        x = np.asarray(p, dtype=float)
        u = np.asarray(v, dtype=float)
        dt = 1.0 / steps

        def acc(x, u):
            return -self.connection(x, u, u)

        for _ in range(steps):
            k1x, k1u = u, acc(x, u)
            k2x, k2u = u + 0.5 * dt * k1u, acc(x + 0.5 * dt * k1x, u + 0.5 * dt * k1u)
            k3x, k3u = u + 0.5 * dt * k2u, acc(x + 0.5 * dt * k2x, u + 0.5 * dt * k2u)
            k4x, k4u = u + dt * k3u, acc(x + dt * k3x, u + dt * k3u)
            x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            u = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        return x

    def random_points(self, rng, count):
        return rng.uniform(-1.0, 1.0, size=(count, self.m))

    def reference_legendrian_frame(self):
        p = np.zeros(self.m)
        E = np.zeros((self.n, self.m))
        for i in range(self.n):
            E[i, 2 * i] = 2.0
        return p, E

    # lattice used for compact quotients: (a, b, c) . (x, y, z) = (a+x, b+y, c+z+b x)
    def lattice_translate(self, p, shift):
        p = np.asarray(p, dtype=float)
        shift = np.asarray(shift, dtype=float)
        out = p + shift
        for i in range(self.n):
            out[..., self.z_index] += shift[2 * i + 1] * p[..., 2 * i]
        return out


def christoffel_symbols(G, dG):
    """Levi-Civita symbols Gamma^a_{bc} from g and its derivatives dG[c, a, b]."""
    Ginv = np.linalg.inv(G)
    # lowered[d, b, c] = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    lowered = 0.5 * (
        np.einsum("...bdc->...dbc", dG)
        + np.einsum("...cdb->...dbc", dG)
        - dG
    )
    return np.einsum("...ad,...dbc->...abc", Ginv, lowered)


def christoffel_by_differences(metric_fn, p, h=1e-3):
    """Christoffel symbols from differencing a metric callable (independent route)."""
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    dG = np.stack([fd4(metric_fn, p, np.eye(m)[c], h) for c in range(m)], axis=-3)
    return christoffel_symbols(metric_fn(p), dG)


def make_model(name, n, **kwargs):
    """Factory used by the command line and configs."""
    name = name.lower()
    if name in ("sphere", "s"):
        return SphereModel(n)
    if name in ("heisenberg", "h"):
        return HeisenbergModel(n, **kwargs)
    raise ValueError(f"unknown model {name!r}")


def structure_residuals(model, points, rng, h=1e-3):
    """Maximum residual of every defining Sasakian identity at ``points``.

    Random tangent vectors are drawn at each point.  The keys name the identity
    being tested; all values should be at round-off level for a true Sasakian
    structure.
    """
    p = np.asarray(points, dtype=float)
    X = model.random_tangent(rng, p)
    Y = model.random_tangent(rng, p)
    Z = model.random_tangent(rng, p)
    xi = model.xi(p)
    g = model.inner
    eta = model.eta_of
    phi = model.phi_of

    def vec_err(v):
        return float(np.max(model.norm(p, v)))

    def scal_err(s):
        return float(np.max(np.abs(s)))

    out = {}
    out["eta(xi)=1"] = scal_err(eta(p, xi) - 1.0)
    out["phi(xi)=0"] = vec_err(phi(p, xi))
    out["eta o phi=0"] = scal_err(eta(p, phi(p, X)))
    out["phi^2=-1+xi(x)eta"] = vec_err(phi(p, phi(p, X)) + X - eta(p, X)[..., None] * xi)
    out["g(phi,phi)=g-eta(x)eta"] = scal_err(
        g(p, phi(p, X), phi(p, Y)) - g(p, X, Y) + eta(p, X) * eta(p, Y)
    )
    out["eta=g(xi,.)"] = scal_err(eta(p, X) - g(p, xi, X))
    d_eta = model.d_eta(p, X, Y, h)
    out["d eta=2g(.,phi .)"] = scal_err(d_eta - 2.0 * g(p, X, phi(p, Y)))
    out["i(xi) d eta=0"] = scal_err(model.d_eta(p, xi, X, h))

    def nphi(A, B):
        return model.phi_derivative(p, A, B, h)

    nijenhuis = (
        nphi(phi(p, X), Y)
        - nphi(phi(p, Y), X)
        + phi(p, nphi(Y, X))
        - phi(p, nphi(X, Y))
    )
    out["[phi,phi]+d eta (x) xi=0"] = vec_err(nijenhuis + d_eta[..., None] * xi)
    nabla_xi = model.covariant_derivative(model.xi, p, X, h)
    out["nabla xi=-phi"] = vec_err(nabla_xi + phi(p, X))
    out["nabla phi"] = vec_err(
        nphi(X, Y) - g(p, X, Y)[..., None] * xi + eta(p, Y)[..., None] * X
    )
    out["R(X,Y)xi"] = vec_err(
        model.curvature(p, X, Y, xi) - eta(p, Y)[..., None] * X + eta(p, X)[..., None] * Y
    )
    lhs = model.curvature(p, X, Y, phi(p, Z))
    rhs = (
        phi(p, model.curvature(p, X, Y, Z))
        - g(p, Y, Z)[..., None] * phi(p, X)
        + g(p, phi(p, X), Z)[..., None] * Y
        + g(p, X, Z)[..., None] * phi(p, Y)
        - g(p, phi(p, Y), Z)[..., None] * X
    )
    out["R(X,Y)phi Z"] = vec_err(lhs - rhs)
    out["Ric(xi,xi)=2n"] = scal_err(model.ricci(p, xi, xi) - 2.0 * model.n)
    Xh = model.horizontal_part(p, X)
    out["Ric(xi,horizontal)=0"] = scal_err(model.ricci(p, xi, Xh))
    # metric compatibility of the connection evaluator
    def ext(q, V):
        return np.einsum("...ab,...b->...a", model.tangent_projector(q), V)

    def gYZ(q):
        return np.einsum("...a,...ab,...b->...", ext(q, Y), model.metric(q), ext(q, Z))

    nY = model.covariant_derivative(lambda q: ext(q, Y), p, X, h)
    nZ = model.covariant_derivative(lambda q: ext(q, Z), p, X, h)
    out["metric compatibility"] = scal_err(fd4(gYZ, p, X, h) - g(p, nY, Z) - g(p, Y, nZ))
    out["torsion free"] = vec_err(model.connection(p, X, Y) - model.connection(p, Y, X))
    return out


def eta_einstein_fit(model, points, rng, tol=1e-4):
    """Least-squares fit Ric = A g + B eta (x) eta on random vector pairs.

    Returns ``(A, B, residual)``; ``A`` and ``B`` are None if the residual
    exceeds ``tol`` (the structure is not eta-Einstein).
    """
    p = np.asarray(points, dtype=float)
    rows, rhs = [], []
    for _ in range(3):
        X = model.random_tangent(rng, p)
        Y = model.random_tangent(rng, p)
        rows.append(np.stack([model.inner(p, X, Y), model.eta_of(p, X) * model.eta_of(p, Y)], -1))
        rhs.append(model.ricci(p, X, Y))
    M = np.concatenate(rows, axis=0).reshape(-1, 2)
    b = np.concatenate(rhs, axis=0).reshape(-1)
    coef, *_ = np.linalg.lstsq(M, b, rcond=None)
    residual = float(np.max(np.abs(M @ coef - b)))
    if residual > tol:
        return None, None, residual
    return float(coef[0]), float(coef[1]), residual
