"""The bundled experiments as self-verifying problem definitions.

Each scenario carries its exact solution and analytic time derivative so
residual_check can certify the problem statement by substituting the
claimed solution into the PDE with spectral spatial derivatives before any
inverse experiment is trusted. Scenario-specific notes:

* example1: i psi_t - psi_xx + |psi|^2 psi + (4x^2 - exp(-2x^2)) psi = 0 on
  [-10, 10]; exact psi = exp(-x^2 + 2it).
* example2: the repulsive condensate case on [0, 2*pi] with V = -cos(x)^2
  and psi = sin(x) exp(-3it/2). The source text leaves the domain blank
  and one figure says [-10, 10], but sin(x) is only periodic on multiples
  of 2*pi and the spectral method needs periodicity, so [0, 2*pi] is the
  default and the domain stays configurable.
* example3: the coupled drift system on [-20, 80] with the sech soliton
  pair; envelope amplitude sqrt(2*alpha/(1+zeta)). The phase constant is
  (v^2 - delta^2)/2 - alpha and the coupling enters with the focusing
  sign; both choices are certified by the residual oracle (the
  alternatives leave O(1) residuals).

Boundary handling for example3: the stated conditions are homogeneous
Dirichlet, but sech decays below 1e-11 at x = -20 for these parameters,
so the periodic propagator on the large domain is used and documented as
an approximation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import propagator as _prop
from .coupled import (COUPLING_SIGN, CoupledDataset, CoupledField,
                      CoupledParams, coupled_loss, coupled_propagate)
from .errors import ZeroReferenceError
from .grids import (Grid1D, WaveField, make_grid, rel_misfit,
                    spectral_derivative)
from .propagator import ProblemParams, first_order_propagate, propagate


@dataclass
class SingleScenario:
    """Single-equation experiment with known exact solution."""

    name: str
    a: float
    b: float
    beta: float
    gamma: float
    potential: Callable[[np.ndarray], np.ndarray]
    initial: Callable[[np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray, float], np.ndarray]
    exact_dt: Callable[[np.ndarray, float], np.ndarray]
    truth_coeffs: dict[str, float]
    T: float = 1.0
    M_desk: int = 512
    M_paper: int = 4000
    N_forward: int = 200
    invert_defaults: dict = field(default_factory=dict)

    kind = "single"

    def grid(self, M: int | None = None, scale: str = "desk") -> Grid1D:
        if M is None:
            M = self.M_desk if scale == "desk" else self.M_paper
        return make_grid(self.a, self.b, M)

    def params(self, grid: Grid1D, N: int | None = None, T: float | None = None
               ) -> ProblemParams:
        N = self.N_forward if N is None else N
        T = self.T if T is None else T
        return ProblemParams(self.beta, self.gamma,
                             self.potential(grid.points), T / N, N)

    def initial_field(self, grid: Grid1D) -> WaveField:
        return WaveField(grid, self.initial(grid.points))

    def exact_field(self, grid: Grid1D, t: float) -> WaveField:
        return WaveField(grid, self.exact(grid.points, t))


@dataclass
class CoupledScenario:
    """Two-field drift-coupled experiment with the sech soliton pair."""

    name: str
    a: float
    b: float
    alpha1: float
    alpha2: float
    zeta_true: tuple[float, float]
    v: float
    delta: float
    alpha_amp: float
    T: float = 0.1
    M_default: int = 1024
    N_forward: int = 25
    invert_defaults: dict = field(default_factory=dict)

    kind = "coupled"

    @property
    def envelope_scale(self) -> float:
        return float(np.sqrt(2.0 * self.alpha_amp / (1.0 + self.zeta_true[0])))

    @property
    def phase_rate(self) -> float:
        return (self.v**2 - self.delta**2) / 2.0 - self.alpha_amp

    def _component(self, x: np.ndarray, t: float, sign: float) -> np.ndarray:
        s = np.sqrt(2.0 * self.alpha_amp)
        env = self.envelope_scale / np.cosh(s * (x - self.v * t))
        return env * np.exp(1j * ((self.v + sign * self.delta) * x - self.phase_rate * t))

    def exact1(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._component(x, t, -1.0)

    def exact2(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._component(x, t, +1.0)

    def exact_dt(self, x: np.ndarray, t: float, which: int) -> np.ndarray:
        s = np.sqrt(2.0 * self.alpha_amp)
        psi = self.exact1(x, t) if which == 1 else self.exact2(x, t)
        return (self.v * s * np.tanh(s * (x - self.v * t)) - 1j * self.phase_rate) * psi

    def grid(self, M: int | None = None, scale: str = "desk") -> Grid1D:
        return make_grid(self.a, self.b, self.M_default if M is None else M)

    def params(self, grid: Grid1D, N: int | None = None, T: float | None = None,
               zetas: tuple[float, float] | None = None) -> CoupledParams:
        N = self.N_forward if N is None else N
        T = self.T if T is None else T
        z = self.zeta_true if zetas is None else zetas
        zero = np.zeros(grid.M)
        return CoupledParams(self.alpha1, self.alpha2, z[0], z[1],
                             zero, zero, T / N, N,
                             v=self.v, delta=self.delta, alpha_amp=self.alpha_amp)

    def initial_fields(self, grid: Grid1D) -> CoupledField:
        x = grid.points
        return CoupledField(WaveField(grid, self.exact1(x, 0.0)),
                            WaveField(grid, self.exact2(x, 0.0)))

    def exact_fields(self, grid: Grid1D, t: float) -> CoupledField:
        x = grid.points
        return CoupledField(WaveField(grid, self.exact1(x, t)),
                            WaveField(grid, self.exact2(x, t)))


def scenario_example1() -> SingleScenario:
    return SingleScenario(
        name="example1",
        a=-10.0, b=10.0, beta=-1.0, gamma=1.0,
        potential=lambda x: 4.0 * x**2 - np.exp(-2.0 * x**2),
        initial=lambda x: np.exp(-x**2) + 0j,
        exact=lambda x, t: np.exp(-x**2 + 2j * t),
        exact_dt=lambda x, t: 2j * np.exp(-x**2 + 2j * t),
        truth_coeffs={"x^2": 4.0, "exp(-2*x^2)": -1.0},
        T=1.0, M_desk=512, M_paper=4000, N_forward=200,
        # lr 1.5 is unstable against the steep library directions for
        # T > ~0.4 (measured), so the inversion runs a shorter horizon.
        invert_defaults=dict(M=512, N=4, T=0.25, lam=0.0, lr=1.5,
                             decay=0.99, period=2000, post_tol=0.4,
                             tau=1e-10, epochs=6000, targets="self"),
    )


def scenario_example2() -> SingleScenario:
    return SingleScenario(
        name="example2",
        a=0.0, b=2.0 * np.pi, beta=0.5, gamma=-1.0,
        potential=lambda x: -np.cos(x) ** 2,
        initial=lambda x: np.sin(x) + 0j,
        exact=lambda x, t: np.sin(x) * np.exp(-1.5j * t),
        exact_dt=lambda x, t: -1.5j * np.sin(x) * np.exp(-1.5j * t),
        truth_coeffs={"cos(x)^2": -1.0},
        T=1.0, M_desk=512, M_paper=4000, N_forward=4,
        invert_defaults=dict(M=4096, N=4, T=1.0, lam=20.0, lr=5e-3,
                             decay=0.9, period=3000, post_tol=0.95,
                             tau=1e-10, epochs=30000, targets="self",
                             noreg_lr=5e-6),
    )


def scenario_example3() -> CoupledScenario:
    return CoupledScenario(
        name="example3",
        a=-20.0, b=80.0, alpha1=-0.5, alpha2=0.5,
        zeta_true=(2.0 / 3.0, 2.0 / 3.0),
        v=0.0, delta=0.5, alpha_amp=1.0,
        # T chosen so the fixed learning rate 100 sits inside the stable
        # region of the (zeta1, zeta2) descent (curvature scales like T^2).
        T=0.1, M_default=1024, N_forward=25,
        invert_defaults=dict(M=1024, N=25, T=0.1, lr=100.0, epochs=2000,
                             zeta_init=(1.0, 0.4), targets="analytic",
                             scan_M=512, scan_range=(0.0, 2.0), scan_n=41),
    )


_SCENARIOS = {
    "example1": scenario_example1,
    "example2": scenario_example2,
    "example3": scenario_example3,
}


def get_scenario(name: str):
    try:
        return _SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(_SCENARIOS)}")


def residual_check(s, t: float = 0.3, M: int = 512) -> float:
    """Max-norm PDE residual of the claimed exact solution at time t.

    The time derivative is analytic; the spatial derivatives are spectral.
    Shares the centralized sign conventions with the propagators, so a
    flipped phase sign shows up here as an O(1) residual.
    """
    grid = make_grid(s.a, s.b, M)
    x = grid.points
    if s.kind == "single":
        psi = s.exact(x, t)
        psit = s.exact_dt(x, t)
        pxx = spectral_derivative(psi, grid, order=2)
        V = s.potential(x)
        sign = _prop.nonlinear_phase_sign()
        R = 1j * psit + s.beta * pxx + sign * (s.gamma * np.abs(psi) ** 2 + V) * psi
        return float(np.max(np.abs(R)))
    worst = 0.0
    fields = (s.exact1(x, t), s.exact2(x, t))
    partners = (fields[1], fields[0])
    alphas = (s.alpha1, s.alpha2)
    zetas = s.zeta_true
    for j, (psi, other, alpha, zeta) in enumerate(zip(fields, partners, alphas, zetas)):
        psit = s.exact_dt(x, t, which=j + 1)
        pxx = spectral_derivative(psi, grid, order=2)
        px = spectral_derivative(psi, grid, order=1)
        fj = np.abs(psi) ** 2 + zeta * np.abs(other) ** 2
        R = 1j * psit + 0.5 * pxx - 1j * alpha * px - COUPLING_SIGN * fj * psi
        worst = max(worst, float(np.max(np.abs(R))))
    return worst


@dataclass
class ConvergenceTable:
    """Refinement-study rows plus the fitted method order.

    The slope is fitted on log(r) vs log(step), where r = sqrt(2*e_psi) is
    the unsquared relative error, so it reports the method order directly
    (e_psi itself decays at twice this slope).
    """

    vary: str
    values: list[int]
    e_psi: list[float]
    steps: list[float]
    scheme: str = "strang"

    @property
    def slope(self) -> float:
        r = np.sqrt(2.0 * np.asarray(self.e_psi))
        return float(np.polyfit(np.log(self.steps), np.log(r), 1)[0])


def convergence_study(s: SingleScenario, vary: str, values: Sequence[int],
                      M_fixed: int | None = None, N_fixed: int | None = None,
                      T: float | None = None, scheme: str = "strang") -> ConvergenceTable:
    """e_psi of the forward solve at the true potential under refinement.

    vary="M" sweeps the grid size at fixed layer count; vary="N" sweeps the
    layer count at fixed grid size. Errors are against the analytic
    solution at the final time.
    """
    values = sorted(int(v) for v in values)
    if len(values) < 4:
        raise ValueError("need at least 4 refinement values for a slope fit")
    if vary not in ("M", "N"):
        raise ValueError(f"vary must be 'M' or 'N', got {vary!r}")
    T = s.T if T is None else T
    errs, steps = [], []
    for val in values:
        M = val if vary == "M" else (M_fixed or s.M_desk)
        N = val if vary == "N" else (N_fixed or s.N_forward)
        grid = make_grid(s.a, s.b, M)
        p = s.params(grid, N=N, T=T)
        f0 = s.initial_field(grid)
        if scheme == "strang":
            out, _ = propagate(f0, p)
        elif scheme == "lie":
            out = first_order_propagate(f0, p)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        errs.append(rel_misfit(out, s.exact_field(grid, T)))
        steps.append(T / N if vary == "N" else grid.dx)
    return ConvergenceTable(vary, values, errs, steps, scheme)


def single_dataset(s: SingleScenario, M: int | None = None, N: int | None = None,
                   T: float | None = None, targets: str = "self"):
    """Observed data (f0, target) plus truth for the inverse problem.

    targets="self" generates the target by the forward model at the true
    potential on the same discretization (so the truth is an exact
    minimizer); "analytic" samples the exact solution instead, leaving the
    splitting error in the data.
    """
    defaults = s.invert_defaults
    M = defaults.get("M", s.M_desk) if M is None else M
    N = defaults.get("N", 4) if N is None else N
    T = defaults.get("T", s.T) if T is None else T
    grid = make_grid(s.a, s.b, M)
    p = s.params(grid, N=N, T=T)
    f0 = s.initial_field(grid)
    if targets == "self":
        target, _ = propagate(f0, p)
    elif targets == "analytic":
        target = s.exact_field(grid, T)
    else:
        raise ValueError(f"unknown target mode {targets!r}")
    if target.norm() == 0.0:
        raise ZeroReferenceError("target field has zero norm")
    return grid, p, f0, target


def coupled_dataset(s: CoupledScenario, M: int | None = None, N: int | None = None,
                    T: float | None = None, targets: str = "analytic") -> CoupledDataset:
    """Observed coupled data pair for the (zeta1, zeta2) inverse problem."""
    defaults = s.invert_defaults
    M = defaults.get("M", s.M_default) if M is None else M
    N = defaults.get("N", s.N_forward) if N is None else N
    T = defaults.get("T", s.T) if T is None else T
    grid = make_grid(s.a, s.b, M)
    p = s.params(grid, N=N, T=T)
    f0 = s.initial_fields(grid)
    if targets == "analytic":
        target = s.exact_fields(grid, T)
    elif targets == "self":
        target, _ = coupled_propagate(f0, p)
    else:
        raise ValueError(f"unknown target mode {targets!r}")
    return CoupledDataset(f0, target, p, zeta_true=s.zeta_true)


@dataclass
class LandscapeResult:
    """Tensor-grid scan of the coupled loss."""

    zeta1s: np.ndarray
    zeta2s: np.ndarray
    J: np.ndarray
    argmin: tuple[float, float]
    J_min: float
    swap_defect: float | None

    def rows(self):
        for i, z1 in enumerate(self.zeta1s):
            for j, z2 in enumerate(self.zeta2s):
                yield z1, z2, self.J[i, j]


def landscape_scan(data: CoupledDataset, range1=(0.0, 2.0), range2=(0.0, 2.0),
                   n1: int = 41, n2: int = 41, threads: int = 1) -> LandscapeResult:
    """Evaluate the coupled loss on a tensor grid of (zeta1, zeta2).

    Cells are independent; with threads > 1 they are evaluated in a thread
    pool, and results are keyed by index so the output is deterministic
    regardless of execution order.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError("need at least a 2x2 scan grid")
    z1s = np.linspace(range1[0], range1[1], n1)
    z2s = np.linspace(range2[0], range2[1], n2)
    J = np.empty((n1, n2))
    cells = [(i, j) for i in range(n1) for j in range(n2)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for (i, j), val in zip(cells, pool.map(
                    lambda ij: coupled_loss(z1s[ij[0]], z2s[ij[1]], data), cells)):
                J[i, j] = val
    else:
        for i, j in cells:
            J[i, j] = coupled_loss(z1s[i], z2s[j], data)
    imin = np.unravel_index(int(np.argmin(J)), J.shape)
    same_axes = n1 == n2 and np.allclose(z1s, z2s)
    defect = float(np.max(np.abs(J - J.T))) if same_axes else None
    return LandscapeResult(z1s, z2s, J, (float(z1s[imin[0]]), float(z2s[imin[1]])),
                           float(J[imin]), defect)
