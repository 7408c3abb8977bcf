"""Spectral exterior calculus on a sampled torus with the induced metric.

Functions are arrays of shape (*grid,), one-forms (*grid, n) in coordinate
components, two-forms (n = 2 only) a single component (*grid,).  Inner
products are trapezoidal sums weighted by the Riemannian density.
"""

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConvergenceError


class DiscreteComplex:
    """d, its quadrature adjoint d*, and the Hodge split of one-forms."""

    def __init__(self, grid, metric):
        self.grid = grid
        self.h = np.asarray(metric, float)
        self.hinv = np.linalg.inv(self.h)
        self.sqrt_det = np.sqrt(np.linalg.det(self.h))

    @classmethod
    def of(cls, imm):
        return cls(imm.grid, imm.induced_metric)

    @property
    def n(self):
        return self.grid.n

    # -- operators --------------------------------------------------------------
    def d0(self, f):
        return np.stack([self.grid.diff(f, a) for a in range(self.n)], axis=-1)

    def d1(self, alpha):
        if self.n == 1:
            return np.zeros(self.grid.shape)
        return self.grid.diff(alpha[..., 1], 0) - self.grid.diff(alpha[..., 0], 1)

    def raise_index(self, alpha):
        return np.einsum("...ab,...b->...a", self.hinv, alpha)

    def lower_index(self, V):
        return np.einsum("...ab,...b->...a", self.h, V)

    def codiff(self, alpha):
        """d* alpha = -(1/sqrt h) d_a (sqrt h h^{ab} alpha_b)."""
        flux = self.sqrt_det[..., None] * self.raise_index(alpha)
        total = sum(self.grid.diff(flux[..., a], a) for a in range(self.n))
        return -total / self.sqrt_det

    def laplacian(self, f):
        """Non-negative Laplacian d* d on functions."""
        return self.codiff(self.d0(f))

    # -- inner products -----------------------------------------------------------
    def inner0(self, f, g):
        return float(np.sum(self.sqrt_det * f * g) * self.grid.weight)

    def inner1(self, alpha, beta):
        return float(
            np.sum(self.sqrt_det * np.einsum("...a,...ab,...b->...", alpha, self.hinv, beta))
            * self.grid.weight
        )

    # -- Hodge split ----------------------------------------------------------------
    def solve_poisson(self, rhs, tol=1e-13):
        """Mean-zero solution of d* d beta = rhs (rhs projected to mean zero)."""
        w = self.sqrt_det / np.sum(self.sqrt_det)
        rhs = rhs - np.sum(w * rhs)
        if self.n == 1:
            N = self.grid.N
            A = np.stack([self.laplacian(col) for col in np.eye(N)], axis=1)
            # pin the constant mode by adding the weighted mean constraint
            A = A + np.outer(np.ones(N), w)
            # lstsq: for even N the Nyquist mode is annihilated by d as well
            return np.linalg.lstsq(A, rhs, rcond=1e-12)[0]
        size = self.grid.size
        shape = self.grid.shape

        def matvec(x):
            x = x.reshape(shape)
            # symmetric form under the weighted inner product
            return (self.sqrt_det * (self.laplacian(x) + np.sum(w * x))).reshape(-1)

        op = LinearOperator((size, size), matvec=matvec, dtype=float)
        b = (self.sqrt_det * rhs).reshape(-1)
        sol, info = cg(op, b, rtol=tol, atol=0.0, maxiter=20 * size)
        if info != 0:
            raise ConvergenceError(f"conjugate gradient did not converge (info={info})")
        return sol.reshape(shape)

    def hodge_split(self, alpha):
        """alpha = coclosed + d beta; returns (coclosed, exact, beta)."""
        beta = self.solve_poisson(self.codiff(alpha))
        exact = self.d0(beta)
        return alpha - exact, exact, beta

    def coclosed_forms(self):
        """Basis of coclosed one-forms built from du_a minus their exact parts."""
        out = []
        for a in range(self.n):
            alpha = np.zeros(self.grid.shape + (self.n,))
            alpha[..., a] = 1.0
            out.append(self.hodge_split(alpha)[0])
        return out
