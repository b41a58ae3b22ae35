"""
Trigonometric interpolation on the uniform θ-grid.

Every θ-periodic quantity of a forced orbit (x^γ, α, g_j, I_j, Z) is stored as
n_θ samples on θ_k = 2πk/n_θ and evaluated between samples by its
trigonometric interpolant. For even n_θ the Nyquist harmonic is represented
by a cosine so real samples give a real interpolant.
"""

from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


def theta_grid(n_theta: int) -> np.ndarray:
    """Uniform phases 2πk/n_θ, k = 0..n_θ-1."""
    return 2.0 * np.pi * np.arange(n_theta) / n_theta


def wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def fourier_coefficients(samples: np.ndarray) -> np.ndarray:
    """DFT coefficients c_k (axis 0) such that samples_j = Σ c_k e^{ikθ_j}."""
    return np.fft.fft(np.asarray(samples), axis=0) / np.shape(samples)[0]


def fourier_basis(theta: ArrayLike, n: int) -> np.ndarray:
    """
    Interpolation basis at θ, shape ``theta.shape + (n,)``.

    Contracting the last axis with ``fourier_coefficients`` evaluates the
    interpolant.
    """
    theta = np.asarray(theta, dtype=float)
    k = wavenumbers(n)
    basis = np.exp(1j * np.multiply.outer(theta, k))
    if n % 2 == 0:
        basis[..., n // 2] = np.cos(0.5 * n * theta)
    return basis


def evaluate_coefficients(coeffs: np.ndarray, theta: ArrayLike, real: bool = False) -> np.ndarray:
    """Evaluate coefficient arrays (harmonics on axis 0) at θ."""
    basis = fourier_basis(theta, coeffs.shape[0])
    value = np.tensordot(basis, coeffs, axes=(-1, 0))
    return value.real if real else value


class FourierSeries:
    """
    Trigonometric interpolant of uniformly sampled periodic data.

    Args:
        samples: array of shape (n_θ, ...) sampled at ``theta_grid(n_θ)``
        cutoff: harmonics whose magnitude stays below ``cutoff`` times the
            largest coefficient are skipped during evaluation; 0 keeps all

    Example:
        >>> series = FourierSeries(np.cos(theta_grid(16)))
        >>> float(series(np.pi / 3))
        0.5
    """

    def __init__(self, samples: np.ndarray, cutoff: float = 0.0):
        samples = np.asarray(samples)
        if samples.ndim == 0 or samples.shape[0] < 2:
            raise ValueError("FourierSeries needs at least two samples along axis 0")
        self.samples = samples
        self.n = samples.shape[0]
        self.is_real = not np.iscomplexobj(samples)
        self.coefficients = fourier_coefficients(samples)

        k = wavenumbers(self.n)
        if cutoff > 0.0:
            magnitude = np.abs(self.coefficients).reshape(self.n, -1).max(axis=1)
            keep = magnitude > cutoff * max(magnitude.max(), np.finfo(float).tiny)
            keep[0] = True
        else:
            keep = np.ones(self.n, dtype=bool)
        self._active = np.flatnonzero(keep)
        self._k = k[self._active]
        self._c = self.coefficients[self._active]
        self._nyquist = None
        if self.n % 2 == 0:
            hits = np.flatnonzero(self._active == self.n // 2)
            self._nyquist = int(hits[0]) if hits.size else None

    @property
    def shape(self):
        return self.samples.shape[1:]

    def __call__(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        basis = np.exp(1j * np.multiply.outer(theta, self._k))
        if self._nyquist is not None:
            basis[..., self._nyquist] = np.cos(0.5 * self.n * theta)
        value = np.tensordot(basis, self._c, axes=(-1, 0))
        return value.real if self.is_real else value

    def derivative(self) -> "FourierSeries":
        """Series of d/dθ, sampled on the same grid."""
        k = wavenumbers(self.n)
        factor = 1j * k
        if self.n % 2 == 0:
            factor[self.n // 2] = 0.0
        coeffs = self.coefficients * factor.reshape((-1,) + (1,) * (self.samples.ndim - 1))
        samples = np.fft.ifft(coeffs * self.n, axis=0)
        if self.is_real:
            samples = samples.real
        return FourierSeries(samples)

    def conj(self) -> "FourierSeries":
        return FourierSeries(np.conj(self.samples))

    def defect(self) -> float:
        """Largest jump between the interpolant at 2π and the first sample."""
        return float(np.max(np.abs(self(2.0 * np.pi) - self.samples[0])))
