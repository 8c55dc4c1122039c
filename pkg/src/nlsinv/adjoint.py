"""Reverse-mode gradients of the data misfit through the split-step layers.

The misfit is the normalized data term 0.5*||psi_N - d||^2 / ||d||^2.
Complex fields are treated as pairs of real fields; the backward sweep
applies the conjugate spectral multiplier for each linear layer and the
real-Jacobian transpose of the pointwise phase map for each nonlinear
layer, accumulating the per-layer sensitivity to the phase offsets h and
chaining dh/dV = dt. A central finite-difference oracle cross-checks every
gradient path.

The nonlinear-layer formulas here are derived for the physical phase
convention and intentionally do not consult the propagator's sign hook:
flipping that hook must make the gradient verification gate fail.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .coupled import (COUPLING_SIGN, CoupledDataset, coupled_linear_symbols,
                      coupled_propagate)
from .errors import (DimensionMismatchError, NonfiniteGradientError,
                     ZeroReferenceError)
from .grids import WaveField, forward_transform, inverse_transform, rel_misfit
from .propagator import ProblemParams, linear_symbol, propagate


@dataclass
class GradientReport:
    """Data-term value and its gradient for one parameter kind."""

    loss: float
    grad: np.ndarray
    param_kind: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.grad)):
            raise NonfiniteGradientError(f"non-finite {self.param_kind} gradient")


@dataclass(frozen=True)
class FDSpec:
    """Central-difference step and optional subset of probe indices."""

    step: float = 1e-5
    indices: Sequence[int] | None = None

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError(f"need step > 0, got {self.step}")


def misfit_grad_V(f0: WaveField, target: WaveField, p: ProblemParams) -> GradientReport:
    """Misfit and its exact gradient with respect to every potential sample."""
    dn2 = target.norm() ** 2
    if dn2 == 0.0:
        raise ZeroReferenceError("target field has zero norm")
    out, tape = propagate(f0, p, record=True)
    loss = rel_misfit(out, target)
    lam = (out.values - target.values) / dn2

    grid = f0.grid
    half = linear_symbol(p.beta * p.dt / 2.0, grid).multipliers
    full = linear_symbol(p.beta * p.dt, grid).multipliers
    g = p.gamma * p.dt
    h = p.V * p.dt

    grad_h = np.zeros(grid.M)
    lam = inverse_transform(np.conj(half) * forward_transform(lam))
    for n in range(p.N - 1, -1, -1):
        u = tape.pre_activation[n]
        phi = g * np.abs(u) ** 2 + h
        out_n = u * np.exp(1j * phi)
        grad_h += np.imag(lam * np.conj(out_n))
        w = np.exp(-1j * phi) * lam
        lam = w - 2.0 * g * np.imag(u * np.conj(w)) * u
        if n > 0:
            lam = inverse_transform(np.conj(full) * forward_transform(lam))
    return GradientReport(loss, grad_h * p.dt, "V-samples")


def misfit_grad_coeffs(f0: WaveField, target: WaveField, p: ProblemParams,
                       Phi: np.ndarray) -> GradientReport:
    """Chain the V-gradient through V = Phi c: grad_c = Phi^T grad_V."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[0] != f0.grid.M:
        raise DimensionMismatchError(
            f"dictionary shape {Phi.shape} incompatible with M={f0.grid.M}")
    rep = misfit_grad_V(f0, target, p)
    return GradientReport(rep.loss, Phi.T @ rep.grad, "coeffs")


def coupled_grad_zetas(data: CoupledDataset, zeta1: float, zeta2: float) -> GradientReport:
    """Gradient of J = e_psi1 + e_psi2 with respect to (zeta1, zeta2)."""
    p = data.params.with_zetas(zeta1, zeta2)
    out, tape = coupled_propagate(data.f0, p, record=True)
    d1, d2 = data.target.psi1, data.target.psi2
    loss = rel_misfit(out.psi1, d1) + rel_misfit(out.psi2, d2)
    l1 = (out.psi1.values - d1.values) / d1.norm() ** 2
    l2 = (out.psi2.values - d2.values) / d2.norm() ** 2

    grid = data.f0.grid
    h1, h2 = (s.multipliers for s in coupled_linear_symbols(p, grid, dt=p.dt / 2.0))
    f1s, f2s = (s.multipliers for s in coupled_linear_symbols(p, grid, dt=p.dt))
    sg = COUPLING_SIGN
    g1 = g2 = 0.0

    l1 = inverse_transform(np.conj(h1) * forward_transform(l1))
    l2 = inverse_transform(np.conj(h2) * forward_transform(l2))
    for n in range(p.N - 1, -1, -1):
        u1, u2 = tape.pre_activation[n]
        q1, q2 = np.abs(u1) ** 2, np.abs(u2) ** 2
        P1 = -(p.V1 + sg * (q1 + p.zeta1 * q2)) * p.dt
        P2 = -(p.V2 + sg * (p.zeta2 * q1 + q2)) * p.dt
        w1 = np.exp(-1j * P1) * l1
        w2 = np.exp(-1j * P2) * l2
        b1 = -np.imag(u1 * np.conj(w1))
        b2 = -np.imag(u2 * np.conj(w2))
        g1 += -sg * p.dt * float(np.sum(b1 * q2))
        g2 += -sg * p.dt * float(np.sum(b2 * q1))
        l1 = w1 - 2.0 * sg * p.dt * (b1 + p.zeta2 * b2) * u1
        l2 = w2 - 2.0 * sg * p.dt * (p.zeta1 * b1 + b2) * u2
        if n > 0:
            l1 = inverse_transform(np.conj(f1s) * forward_transform(l1))
            l2 = inverse_transform(np.conj(f2s) * forward_transform(l2))
    return GradientReport(loss, np.array([g1, g2]), "zetas")


def fd_gradient(loss_fn: Callable[[np.ndarray], float], x0: np.ndarray,
                spec: FDSpec = FDSpec()) -> np.ndarray:
    """Central differences (loss(x+h e_i) - loss(x-h e_i)) / (2h).

    Probes spec.indices (all indices when None) and returns one value per
    probe. The default step 1e-5 suits O(1)-scaled parameters; rescale it
    for badly scaled ones, since the truncation/roundoff balance shifts
    with the local curvature.
    """
    x0 = np.asarray(x0, dtype=float)
    idx = np.arange(x0.size) if spec.indices is None else np.asarray(spec.indices)
    out = np.empty(idx.size)
    h = spec.step
    for row, i in enumerate(idx):
        xp = x0.copy(); xp[i] += h
        xm = x0.copy(); xm[i] -= h
        out[row] = (loss_fn(xp) - loss_fn(xm)) / (2.0 * h)
    return out
