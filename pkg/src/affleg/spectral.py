"""Periodic grids, Fourier differentiation and trapezoidal quadrature."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the n-torus [0, 2pi)^n with N nodes per axis."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only curves (n=1) and surfaces (n=2) are supported")
        if self.N < 4:
            raise ValueError("need at least 4 nodes per axis")

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def size(self):
        return self.N**self.n

    @property
    def spacing(self):
        return 2 * np.pi / self.N

    @property
    def weight(self):
        """Trapezoidal weight of every node."""
        return self.spacing**self.n

    @cached_property
    def axis_nodes(self):
        return self.spacing * np.arange(self.N)

    @cached_property
    def nodes(self):
        """Parameter values, shape (*shape, n)."""
        mesh = np.meshgrid(*([self.axis_nodes] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def wavenumbers(self):
        """Integer wavenumbers with the Nyquist mode zeroed (first derivative)."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        if self.N % 2 == 0:
            k[self.N // 2] = 0.0
        return k

    @cached_property
    def wavenumbers_squared(self):
        """k^2 for every mode, Nyquist included (second derivative symbol)."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        return k**2

    def diff(self, field, axis):
        """Spectral derivative along grid axis ``axis`` of a periodic field.

        ``field`` has the grid axes first, then any number of component axes.
        """
        return _fourier_multiply(field, axis, 1j * self.wavenumbers)

    def diff2(self, field, axis):
        return _fourier_multiply(field, axis, -self.wavenumbers_squared)

    def gradient(self, field):
        """Stack of derivatives along every grid axis, new axis at position n."""
        return np.stack([self.diff(field, a) for a in range(self.n)], axis=self.n)

    def integrate(self, density):
        """Trapezoidal sum over the grid axes; trailing axes are kept."""
        total = np.sum(density, axis=tuple(range(self.n))) * self.weight
        return float(total) if np.ndim(total) == 0 and np.isrealobj(total) else total

    def differentiation_matrix(self):
        """Dense first-derivative matrix for n=1 grids."""
        if self.n != 1:
            raise ValueError("differentiation_matrix is only built for n=1")
        return self.diff(np.eye(self.N), 0).real

    def fourier_modes(self, kmax):
        """Real trigonometric basis 1, cos(ku), sin(ku), ... (tensor products for n=2).

        Returns an array of shape (n_modes, *shape).
        """
        one_d = [np.ones(self.N)]
        for k in range(1, kmax + 1):
            one_d.append(np.cos(k * self.axis_nodes))
            one_d.append(np.sin(k * self.axis_nodes))
        one_d = np.array(one_d)
        if self.n == 1:
            return one_d
        return np.einsum("ai,bj->abij", one_d, one_d).reshape(-1, self.N, self.N)

    def evaluate(self, field, points):
        """Trigonometric interpolant of a periodic ``field`` at arbitrary parameter points.

        ``field`` has shape (*shape, ...) and ``points`` (..., n); the Nyquist
        mode is split symmetrically so real data stays real.
        """
        field = np.asarray(field)
        spec = np.fft.fftn(field, axes=tuple(range(self.n))) / self.size
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        points = np.asarray(points, float)
        lead = points.shape[:-1]
        points = points.reshape(-1, self.n)
        phases = [np.exp(1j * np.multiply.outer(points[..., a], k)) for a in range(self.n)]
        if self.N % 2 == 0:
            # cos(N/2 u) instead of exp(-i N/2 u) for the unpaired Nyquist mode
            for ph, a in zip(phases, range(self.n)):
                ph[..., self.N // 2] = np.cos(self.N // 2 * points[..., a])
        if self.n == 1:
            out = np.tensordot(phases[0], spec, axes=1)
        else:
            flat = spec.reshape(self.N, self.N, -1)
            out = np.einsum("pi,pj,ijc->pc", phases[0], phases[1], flat)
        out = out.reshape(lead + field.shape[self.n:])
        return out.real if np.isrealobj(field) else out


def _fourier_multiply(field, axis, symbol):
    field = np.asarray(field)
    shape = [1] * field.ndim
    shape[axis] = symbol.shape[0]
    spec = np.fft.fft(field, axis=axis) * symbol.reshape(shape)
    out = np.fft.ifft(spec, axis=axis)
    if np.isrealobj(field):
        return out.real
    return out


def trapezoid_periodic(values, period=2 * np.pi):
    """Trapezoidal rule for samples of a periodic function on a uniform grid."""
    values = np.asarray(values)
    return period * np.mean(values, axis=0)
