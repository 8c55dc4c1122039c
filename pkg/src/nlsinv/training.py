"""Training loops: evaluate the loss, test the tolerance trigger, update
parameters by (proximal) gradient descent under the decaying learning-rate
schedule, and record per-epoch history.

Objective: J = e_psi + lam_eff * ||c||_1, where e_psi is the normalized
data misfit. The L1 weight is interpreted in raw-misfit units by default
(lam_eff = lam / ||target||^2), i.e. against 0.5*||S psi0 - psi_T||^2
before normalization, which is the scale at which the bundled example2
protocol's weight of 20 operates; set l1_units="normalized" to apply lam
directly to e_psi.

Within one epoch the order is fixed: compute the loss, apply the
tolerance trigger for the post-tolerance decay, apply the periodic decay,
then step. Before the trigger fires, the learning rate at epoch e is
exactly init * decay_factor**(e // decay_period).

The optimizer is full-batch gradient descent: the data set is a single
wave pair, so there is nothing to subsample.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .adjoint import coupled_grad_zetas, misfit_grad_coeffs
from .coupled import CoupledDataset
from .errors import DivergenceError
from .grids import WaveField, rel_err_vector
from .library import DictionaryMatrix, soft_threshold, synthesize
from .propagator import ProblemParams


@dataclass(frozen=True)
class LRSchedule:
    """Learning-rate schedule: periodic decay plus a post-tolerance decay.

    Once the data misfit drops below tol, the rate is additionally
    multiplied by post_tol_factor on every remaining epoch (sticky
    trigger).
    """

    init: float
    decay_factor: float = 1.0
    decay_period: int = 1
    post_tol_factor: float = 1.0
    tol: float = 1e-10

    def __post_init__(self):
        if self.init <= 0.0:
            raise ValueError(f"need init > 0, got {self.init}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError(f"need 0 < decay_factor <= 1, got {self.decay_factor}")
        if not 0.0 < self.post_tol_factor <= 1.0:
            raise ValueError(f"need 0 < post_tol_factor <= 1, got {self.post_tol_factor}")
        if self.decay_period < 1:
            raise ValueError(f"need decay_period >= 1, got {self.decay_period}")

    def rate(self, epoch: int, post_mult: float = 1.0) -> float:
        return self.init * self.decay_factor ** (epoch // self.decay_period) * post_mult


@dataclass(frozen=True)
class TrainConfig:
    """Loss weights, epoch budget, schedule, and optimizer options."""

    schedule: LRSchedule
    max_epochs: int
    lam: float = 0.0
    l1_units: str = "raw"
    seed: int = 0
    halve_on_increase: bool = False
    stop_loss: float | None = None
    divergence_factor: float = 1e6

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError(f"need max_epochs >= 1, got {self.max_epochs}")
        if self.lam < 0.0:
            raise ValueError(f"need lam >= 0, got {self.lam}")
        if self.l1_units not in ("raw", "normalized"):
            raise ValueError(f"unknown l1_units {self.l1_units!r}")

    @property
    def tau(self) -> float:
        return self.schedule.tol


@dataclass
class TrainRecord:
    """Per-epoch history; always epochs-executed + 1 rows (initial row first)."""

    kind: str
    epochs: list[int] = field(default_factory=list)
    J: list[float] = field(default_factory=list)
    e_psi: list[float] = field(default_factory=list)
    errors: dict[str, list[float]] = field(default_factory=dict)
    lr: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)

    def append(self, epoch: int, J: float, e_psi: float, lr: float,
               snapshot: np.ndarray, **errs: float):
        self.epochs.append(epoch)
        self.J.append(J)
        self.e_psi.append(e_psi)
        self.lr.append(lr)
        self.snapshots.append(np.array(snapshot))
        for key, val in errs.items():
            self.errors.setdefault(key, []).append(val)

    def __len__(self) -> int:
        return len(self.epochs)


@dataclass
class CoeffProblem:
    """Inverse problem over dictionary coefficients: recover c in V = Phi c
    from the wave pair (f0, target)."""

    f0: WaveField
    target: WaveField
    params: ProblemParams
    Phi: DictionaryMatrix
    V_exact: np.ndarray | None = None
    truth_coeffs: np.ndarray | None = None


def initial_coeffs(Phi: DictionaryMatrix, mode: str = "zero", seed: int = 0) -> np.ndarray:
    """Zero by default; 'random' draws seeded uniform(-0.1, 0.1) entries."""
    if mode == "zero":
        return np.zeros(Phi.n_functions)
    if mode == "random":
        rng = np.random.default_rng(seed)
        return rng.uniform(-0.1, 0.1, size=Phi.n_functions)
    raise ValueError(f"unknown coefficient init mode {mode!r}")


def _effective_lam(cfg: TrainConfig, target: WaveField) -> float:
    if cfg.lam == 0.0:
        return 0.0
    if cfg.l1_units == "raw":
        return cfg.lam / target.norm() ** 2
    return cfg.lam


def train_coeffs(problem: CoeffProblem, c_init: np.ndarray, cfg: TrainConfig
                 ) -> tuple[np.ndarray, TrainRecord]:
    """Proximal gradient descent on the dictionary coefficients.

    Returns the best-loss iterate (lowest J seen) in the raw-column
    coefficient convention, plus the full history.
    """
    Phi = problem.Phi
    c = np.array(c_init, dtype=float)
    lam_eff = _effective_lam(cfg, problem.target)
    record = TrainRecord(kind="coeffs")
    sched = cfg.schedule
    post_mult, tripped, halve_mult = 1.0, False, 1.0
    best_J, best_c = np.inf, c.copy()
    J0 = None
    prev_J = np.inf

    for epoch in range(cfg.max_epochs + 1):
        rep = misfit_grad_coeffs(problem.f0, problem.target,
                                 replace(problem.params, V=synthesize(Phi, c)),
                                 Phi.matrix)
        e_psi = rep.loss
        J = e_psi + lam_eff * float(np.sum(np.abs(c)))
        if J0 is None:
            J0 = J
        if not np.isfinite(J) or J > cfg.divergence_factor * max(J0, 1e-300):
            raise DivergenceError(
                f"loss {J:.3e} at epoch {epoch} vs initial {J0:.3e}")

        if cfg.halve_on_increase and J > prev_J:
            halve_mult *= 0.5
        prev_J = J
        if e_psi <= sched.tol:
            tripped = True
        if tripped:
            post_mult *= sched.post_tol_factor
        lr = sched.rate(epoch, post_mult) * halve_mult

        errs = {}
        if problem.V_exact is not None:
            errs["e_V"] = rel_err_vector(synthesize(Phi, c), problem.V_exact)
        record.append(epoch, J, e_psi, lr, Phi.to_raw_coeffs(c), **errs)
        if J < best_J:
            best_J, best_c = J, c.copy()
        if epoch == cfg.max_epochs:
            break
        if cfg.stop_loss is not None and J <= cfg.stop_loss:
            break

        step = c - lr * rep.grad
        c = soft_threshold(step, lr * lam_eff) if lam_eff > 0.0 else step

    return Phi.to_raw_coeffs(best_c), record


def train_zetas(data: CoupledDataset, zeta_init: Sequence[float], cfg: TrainConfig
                ) -> tuple[np.ndarray, TrainRecord]:
    """Plain gradient descent on the two coupling scalars."""
    z = np.array(zeta_init, dtype=float)
    record = TrainRecord(kind="zetas")
    sched = cfg.schedule
    post_mult, tripped = 1.0, False
    best_J, best_z = np.inf, z.copy()
    J0 = None
    zt = data.zeta_true

    for epoch in range(cfg.max_epochs + 1):
        rep = coupled_grad_zetas(data, z[0], z[1])
        J = rep.loss
        if J0 is None:
            J0 = J
        if not np.isfinite(J) or J > cfg.divergence_factor * max(J0, 1e-300):
            raise DivergenceError(
                f"loss {J:.3e} at epoch {epoch} vs initial {J0:.3e}")
        if J <= sched.tol:
            tripped = True
        if tripped:
            post_mult *= sched.post_tol_factor
        lr = sched.rate(epoch, post_mult)
        record.append(epoch, J, J, lr, z,
                      e_zeta1=abs(z[0] - zt[0]) / abs(zt[0]),
                      e_zeta2=abs(z[1] - zt[1]) / abs(zt[1]))
        if J < best_J:
            best_J, best_z = J, z.copy()
        if epoch == cfg.max_epochs:
            break
        if cfg.stop_loss is not None and J <= cfg.stop_loss:
            break
        z = z - lr * rep.grad

    return best_z, record
