"""Uniform periodic grids, complex wave fields, and spectral multipliers.

The grid places its M collocation points at x_j = a + j*(b-a)/M for
j = 1..M, so b is a grid point and a is not; with periodic boundary
conditions the sample at a would duplicate the one at b. All circular
convolutions are applied as diagonal multipliers in the discrete Fourier
basis, with wavenumbers k_j = 2*pi*j/(b-a) on the symmetric integer range
({-M/2..M/2-1} for even M, {-(M-1)/2..(M-1)/2} for odd M), stored in FFT
order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDomainError, LengthMismatchError, ZeroReferenceError


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [a, b] with M points, b included, a excluded."""

    a: float
    b: float
    M: int

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.M

    @property
    def points(self) -> np.ndarray:
        return self.a + self.dx * np.arange(1, self.M + 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.dx)


def make_grid(a: float, b: float, M: int) -> Grid1D:
    """Build a periodic grid; requires b > a and M >= 2."""
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise InvalidDomainError(f"need finite b > a, got a={a}, b={b}")
    if M < 2:
        raise InvalidDomainError(f"need M >= 2, got M={M}")
    return Grid1D(float(a), float(b), int(M))


@dataclass
class WaveField:
    """Complex samples of a wave function on a grid."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.M,):
            raise LengthMismatchError(
                f"field has {self.values.shape} values for M={self.grid.M}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy())


@dataclass(frozen=True)
class SpectralSymbol:
    """Diagonal Fourier-domain multiplier of a circular convolution operator.

    multipliers[j] acts on the DFT mode with wavenumber grid.wavenumbers[j].
    """

    multipliers: np.ndarray

    def __len__(self) -> int:
        return len(self.multipliers)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(np.abs(self.multipliers) - 1.0)) <= tol)


def forward_transform(values: np.ndarray) -> np.ndarray:
    return np.fft.fft(values)


def inverse_transform(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifft(coeffs)


def apply_symbol(f: WaveField, s: SpectralSymbol) -> WaveField:
    """Apply a circular convolution via its Fourier multiplier."""
    if len(s) != f.grid.M:
        raise LengthMismatchError(f"symbol length {len(s)} != M={f.grid.M}")
    out = inverse_transform(s.multipliers * forward_transform(f.values))
    return WaveField(f.grid, out)


def spectral_derivative(values: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    """order-th spatial derivative of periodic samples, computed spectrally."""
    k = grid.wavenumbers
    return inverse_transform((1j * k) ** order * forward_transform(values))


def rel_misfit(num: WaveField, exact: WaveField) -> float:
    """Half the squared relative l2 misfit: 0.5*||num-exact||^2 / ||exact||^2."""
    ref = np.linalg.norm(exact.values)
    if ref == 0.0:
        raise ZeroReferenceError("reference field has zero norm")
    return float(0.5 * np.linalg.norm(num.values - exact.values) ** 2 / ref**2)


def rel_err_vector(v_num: np.ndarray, v_exact: np.ndarray) -> float:
    """Relative l2 error ||num-exact|| / ||exact|| (unsquared, unhalved)."""
    v_num = np.asarray(v_num, dtype=float)
    v_exact = np.asarray(v_exact, dtype=float)
    if v_num.shape != v_exact.shape:
        raise LengthMismatchError(
            f"shape mismatch {v_num.shape} vs {v_exact.shape}")
    ref = np.linalg.norm(v_exact)
    if ref == 0.0:
        raise ZeroReferenceError("reference vector has zero norm")
    return float(np.linalg.norm(v_num - v_exact) / ref)
