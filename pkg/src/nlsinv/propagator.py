"""Layered Strang split-step propagator for the single 1D NLS equation

    i psi_t + beta psi_xx + gamma |psi|^2 psi + V(x) psi = 0

on a periodic grid. One layer advances dt as a half linear step, a full
nonlinear phase step, and a half linear step; the propagator runs N layers
and may merge the adjacent interior half steps into full linear steps
(exactly equivalent for diagonal spectral symbols). The linear step is a
Fourier multiplier exp(-i*eta*k^2); the nonlinear step is the pointwise
phase map u -> u*exp(i*(g|u|^2 + h)) which solves the potential/nonlinear
sub-flow exactly because it conserves |u|.

A module-level sign constant centralizes the phase convention of the
nonlinear/potential terms. Flipping it (see flipped_nonlinear_phase) is a
validation hook that simulates a sign bug: the residual and gradient
verification gates must then fail while unitarity still holds.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (LengthMismatchError, NonfiniteFieldError,
                     SingularKernelError)
from .grids import (Grid1D, SpectralSymbol, WaveField, apply_symbol,
                    forward_transform, inverse_transform)

# Sign of the (gamma|psi|^2 + V) terms in the single-equation form above.
# +1 is the physical convention; see flipped_nonlinear_phase().
_PHASE_SIGN = 1.0


def nonlinear_phase_sign() -> float:
    return _PHASE_SIGN


@contextlib.contextmanager
def flipped_nonlinear_phase():
    """Temporarily flip the nonlinear phase sign (validation hook only)."""
    global _PHASE_SIGN
    _PHASE_SIGN = -1.0
    try:
        yield
    finally:
        _PHASE_SIGN = 1.0


@dataclass
class ProblemParams:
    """Equation constants and discretization for one propagation.

    dt may be negative to run the time-reversed flow (used by the
    reversibility checks); it must be nonzero.
    """

    beta: float
    gamma: float
    V: np.ndarray
    dt: float
    N: int

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        if self.N < 1:
            raise ValueError(f"need N >= 1, got {self.N}")
        if self.dt == 0.0 or not np.isfinite(self.dt):
            raise ValueError(f"need finite nonzero dt, got {self.dt}")
        if not np.all(np.isfinite(self.V)):
            raise ValueError("potential samples must be finite")

    @property
    def T(self) -> float:
        return self.N * self.dt

    def reversed(self) -> "ProblemParams":
        return replace(self, dt=-self.dt)


@dataclass
class PropagationTape:
    """Recorded per-layer state for the reverse (gradient) sweep.

    pre_activation[n] is the field entering the n-th nonlinear step.
    """

    initial: np.ndarray
    pre_activation: list[np.ndarray] = field(default_factory=list)
    final: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.pre_activation)


def linear_symbol(eta: float, grid: Grid1D) -> SpectralSymbol:
    """Fourier multiplier exp(-i*eta*k^2) advancing i psi_t + beta psi_xx = 0
    one step with eta = beta*dt. Unit modulus for all real eta."""
    k = grid.wavenumbers
    return SpectralSymbol(np.exp(-1j * eta * k**2))


@dataclass(frozen=True)
class LinearStepSpec:
    """One dispersive step of weight eta, in spectral or direct-kernel form."""

    eta: float
    mode: str = "spectral"

    def __post_init__(self):
        if self.mode not in ("spectral", "direct"):
            raise ValueError(f"unknown linear-step mode {self.mode!r}")

    def apply(self, f: WaveField) -> WaveField:
        if self.mode == "spectral":
            return apply_symbol(f, linear_symbol(self.eta, f.grid))
        return WaveField(f.grid, _direct_step(f.values, direct_kernel(self.eta, f.grid)))


def direct_kernel(eta: float, grid: Grid1D) -> np.ndarray:
    """Sampled dispersive convolution kernel sqrt(i/(pi*eta)) *
    exp(-i*(j*dx)^2/(4*eta)) * dx at offsets j = 0..M-1.

    Kept only for comparison against the spectral step: under this
    normalization the continuous kernel integrates to 2, not 1, so the
    zero-padded direct mode is not an accurate propagator.
    """
    if eta == 0.0:
        raise SingularKernelError("direct kernel undefined for eta = 0")
    j = np.arange(grid.M)
    s = j * grid.dx
    amp = np.sqrt(1.0 / (np.pi * abs(eta))) * np.exp(1j * np.pi / 4 * np.sign(eta))
    return amp * np.exp(-1j * s**2 / (4.0 * eta)) * grid.dx


def _direct_step(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # zero-padded (non-circular) convolution truncated to the grid
    return np.convolve(kernel, values)[: len(values)]


def nonlinear_step(f: WaveField, g: float, h: np.ndarray) -> WaveField:
    """Pointwise phase map u -> u*exp(i*(g|u|^2 + h)); |u| is preserved."""
    h = np.asarray(h, dtype=float)
    if h.shape != (f.grid.M,):
        raise LengthMismatchError(f"h has shape {h.shape} for M={f.grid.M}")
    phase = _PHASE_SIGN * (g * np.abs(f.values) ** 2 + h)
    return WaveField(f.grid, f.values * np.exp(1j * phase))


def _nonlinear_values(values: np.ndarray, g: float, h: np.ndarray) -> np.ndarray:
    phase = _PHASE_SIGN * (g * np.abs(values) ** 2 + h)
    return values * np.exp(1j * phase)


def propagate(
    f0: WaveField,
    p: ProblemParams,
    record: bool = False,
    merge: bool = True,
    mode: str = "spectral",
    check_layers: bool = False,
) -> tuple[WaveField, PropagationTape | None]:
    """Run N Strang layers (C_h o G o C_h)^N from f0.

    With merge=True the interior adjacent half steps are combined into full
    linear steps, C_h o G o C o ... o C o G o C_h; both compositions agree
    to roundoff. record=True stores the input of every nonlinear step on a
    tape for the adjoint sweep. mode="direct" replaces the spectral linear
    step by the zero-padded direct kernel (comparison only).
    """
    grid = f0.grid
    if p.V.shape != (grid.M,):
        raise LengthMismatchError(f"V has shape {p.V.shape} for M={grid.M}")
    if mode not in ("spectral", "direct"):
        raise ValueError(f"unknown linear-step mode {mode!r}")

    g = p.gamma * p.dt
    h = p.V * p.dt
    tape = PropagationTape(initial=f0.values.copy()) if record else None

    if mode == "direct":
        khalf = direct_kernel(p.beta * p.dt / 2.0, grid)
        lin_half = lambda v: _direct_step(v, khalf)
        lin_full = lambda v: _direct_step(_direct_step(v, khalf), khalf)
    else:
        half = linear_symbol(p.beta * p.dt / 2.0, grid).multipliers
        full = linear_symbol(p.beta * p.dt, grid).multipliers
        lin_half = lambda v: inverse_transform(half * forward_transform(v))
        lin_full = lambda v: inverse_transform(full * forward_transform(v))

    u = f0.values
    if merge:
        u = lin_half(u)
        for n in range(p.N):
            if record:
                tape.pre_activation.append(u.copy())
            u = _nonlinear_values(u, g, h)
            u = lin_full(u) if n < p.N - 1 else lin_half(u)
            if check_layers and not np.all(np.isfinite(u)):
                raise NonfiniteFieldError(f"non-finite field after layer {n + 1}")
    else:
        for n in range(p.N):
            u = lin_half(u)
            if record:
                tape.pre_activation.append(u.copy())
            u = _nonlinear_values(u, g, h)
            u = lin_half(u)
            if check_layers and not np.all(np.isfinite(u)):
                raise NonfiniteFieldError(f"non-finite field after layer {n + 1}")

    if not np.all(np.isfinite(u)):
        raise NonfiniteFieldError("non-finite field at final layer")
    if record:
        tape.final = u.copy()
    return WaveField(grid, u), tape


def first_order_propagate(f0: WaveField, p: ProblemParams, mode: str = "spectral") -> WaveField:
    """Lie splitting: full linear step then full nonlinear step per layer.

    First-order in dt; exists to contrast with the second-order Strang
    composition.
    """
    grid = f0.grid
    if p.V.shape != (grid.M,):
        raise LengthMismatchError(f"V has shape {p.V.shape} for M={grid.M}")
    g = p.gamma * p.dt
    h = p.V * p.dt
    if mode == "direct":
        kfull = direct_kernel(p.beta * p.dt, grid)
        lin_full = lambda v: _direct_step(v, kfull)
    else:
        full = linear_symbol(p.beta * p.dt, grid).multipliers
        lin_full = lambda v: inverse_transform(full * forward_transform(v))
    u = f0.values
    for _ in range(p.N):
        u = lin_full(u)
        u = _nonlinear_values(u, g, h)
    if not np.all(np.isfinite(u)):
        raise NonfiniteFieldError("non-finite field at final layer")
    return WaveField(grid, u)
