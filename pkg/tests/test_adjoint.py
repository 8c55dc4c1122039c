from dataclasses import replace

import numpy as np
import pytest

from nlsinv.adjoint import (FDSpec, GradientReport, coupled_grad_zetas,
                            fd_gradient, misfit_grad_coeffs, misfit_grad_V)
from nlsinv.coupled import coupled_loss
from nlsinv.errors import (DimensionMismatchError, NonfiniteGradientError,
                           ZeroReferenceError)
from nlsinv.grids import WaveField, make_grid, rel_misfit
from nlsinv.library import assemble, default_library, synthesize
from nlsinv.propagator import ProblemParams, propagate
from nlsinv.scenarios import coupled_dataset, scenario_example3


def _instance(M=64, N=4, seed=0, domain=(-1.0, 1.0), dt=0.1):
    rng = np.random.default_rng(seed)
    grid = make_grid(*domain, M)
    Phi = assemble(default_library(), grid)
    c = rng.uniform(-0.5, 0.5, size=Phi.n_functions)
    f0 = WaveField(grid, rng.normal(size=M) + 1j * rng.normal(size=M))
    target = WaveField(grid, rng.normal(size=M) + 1j * rng.normal(size=M))
    p = ProblemParams(-1.0, 1.0, synthesize(Phi, c), dt, N)
    return grid, Phi, c, f0, target, p, rng


def _loss_V(f0, target, p):
    def fn(v):
        out, _ = propagate(f0, replace(p, V=v))
        return rel_misfit(out, target)
    return fn


def test_single_phase_layer_closed_form():
    # N=1, beta=0, gamma=0: the map is f0*exp(i V dt); the misfit gradient is
    # dt*Im(conj(d_j) f0_j e^{i V_j dt}) / ||d||^2, derived by expanding the
    # squared norm directly.
    rng = np.random.default_rng(1)
    M, dt = 48, 0.3
    grid = make_grid(-1, 1, M)
    V = rng.normal(size=M)
    f0 = WaveField(grid, rng.normal(size=M) + 1j * rng.normal(size=M))
    d = WaveField(grid, rng.normal(size=M) + 1j * rng.normal(size=M))
    p = ProblemParams(0.0, 0.0, V, dt, 1)
    rep = misfit_grad_V(f0, d, p)
    closed = dt * np.imag(np.conj(d.values) * f0.values * np.exp(1j * V * dt)) / d.norm() ** 2
    assert np.max(np.abs(rep.grad - closed)) <= 1e-10


def test_gradient_zero_at_exact_fit():
    grid, Phi, c, f0, _, p, _ = _instance(seed=2)
    target, _ = propagate(f0, p)
    rep = misfit_grad_V(f0, target, p)
    assert rep.loss <= 1e-12
    assert np.max(np.abs(rep.grad)) <= 1e-12


def test_grad_V_matches_fd():
    grid, Phi, c, f0, target, p, rng = _instance(seed=3)
    rep = misfit_grad_V(f0, target, p)
    idx = rng.choice(grid.M, 10, replace=False)
    fd = fd_gradient(_loss_V(f0, target, p), p.V, FDSpec(1e-5, idx))
    rel = np.abs(fd - rep.grad[idx]) / np.maximum(np.abs(fd), 1e-300)
    assert np.max(rel) <= 1e-6


def test_grad_V_fd_agreement_sweep():
    # property sweep across sizes, depths, and seeds
    for M in (32, 64):
        for N in (2, 4, 8):
            for seed in range(5):
                grid, Phi, c, f0, target, p, rng = _instance(M=M, N=N, seed=seed)
                rep = misfit_grad_V(f0, target, p)
                idx = rng.choice(M, 10, replace=False)
                fd = fd_gradient(_loss_V(f0, target, p), p.V, FDSpec(1e-5, idx))
                rel = np.abs(fd - rep.grad[idx]) / np.maximum(np.abs(fd), 1e-300)
                assert np.max(rel) <= 1e-6, (M, N, seed)


def test_grad_coeffs_identity_dictionary():
    grid, _, _, f0, target, p, _ = _instance(seed=4)
    eye = np.eye(grid.M)
    rep_c = misfit_grad_coeffs(f0, target, p, eye)
    rep_v = misfit_grad_V(f0, target, p)
    assert np.allclose(rep_c.grad, rep_v.grad)


def test_grad_coeffs_zero_when_grad_V_zero():
    grid, Phi, c, f0, _, p, _ = _instance(seed=5)
    target, _ = propagate(f0, p)
    rep = misfit_grad_coeffs(f0, target, p, Phi.matrix)
    assert np.max(np.abs(rep.grad)) <= 1e-9


def test_grad_coeffs_matches_fd():
    grid, Phi, c, f0, target, p, rng = _instance(seed=6)
    rep = misfit_grad_coeffs(f0, target, p, Phi.matrix)

    def loss_c(cv):
        out, _ = propagate(f0, replace(p, V=synthesize(Phi, cv)))
        return rel_misfit(out, target)

    fd = fd_gradient(loss_c, c, FDSpec(1e-5))
    rel = np.abs(fd - rep.grad) / np.maximum(np.abs(fd), 1e-300)
    assert np.max(rel) <= 1e-6


def test_grad_coeffs_dimension_check():
    grid, Phi, c, f0, target, p, _ = _instance(seed=7)
    with pytest.raises(DimensionMismatchError):
        misfit_grad_coeffs(f0, target, p, Phi.matrix[:-1])


def test_directional_derivative_consistency():
    grid, Phi, c, f0, target, p, rng = _instance(seed=8)
    rep = misfit_grad_coeffs(f0, target, p, Phi.matrix)
    d = rng.normal(size=Phi.n_functions)
    d /= np.linalg.norm(d)

    def loss_c(cv):
        out, _ = propagate(f0, replace(p, V=synthesize(Phi, cv)))
        return rel_misfit(out, target)

    h = 1e-5
    dd = (loss_c(c + h * d) - loss_c(c - h * d)) / (2 * h)
    assert abs(dd - rep.grad @ d) / abs(dd) <= 1e-6


def test_gradient_invariant_under_joint_global_phase():
    grid, Phi, c, f0, target, p, _ = _instance(seed=9)
    rep = misfit_grad_V(f0, target, p)
    theta = 1.234
    f0r = WaveField(grid, f0.values * np.exp(1j * theta))
    tr = WaveField(grid, target.values * np.exp(1j * theta))
    rep_r = misfit_grad_V(f0r, tr, p)
    assert rep_r.loss == pytest.approx(rep.loss, rel=1e-12)
    assert np.max(np.abs(rep_r.grad - rep.grad)) <= 1e-12 * max(1.0, np.max(np.abs(rep.grad)))


def test_zeta_gradient_zero_at_truth():
    s = scenario_example3()
    data = coupled_dataset(s, M=128, N=8, T=0.05, targets="self")
    rep = coupled_grad_zetas(data, *s.zeta_true)
    assert rep.loss <= 1e-14
    assert np.max(np.abs(rep.grad)) <= 1e-10


def test_zeta_gradient_matches_fd():
    s = scenario_example3()
    data = coupled_dataset(s, M=64, N=4, T=0.1, targets="analytic")
    rng = np.random.default_rng(10)
    for _ in range(3):
        z = rng.uniform(0.3, 1.0, size=2)
        rep = coupled_grad_zetas(data, z[0], z[1])
        fd = fd_gradient(lambda zz: coupled_loss(zz[0], zz[1], data), z, FDSpec(1e-5))
        rel = np.abs(fd - rep.grad) / np.maximum(np.abs(fd), 1e-300)
        assert np.max(rel) <= 1e-6


def test_zeta_gradient_swap_relation():
    s = scenario_example3()
    data = coupled_dataset(s, M=128, N=6, T=0.05, targets="analytic")
    a, b = 0.9, 0.45
    g_ab = coupled_grad_zetas(data, a, b).grad
    g_ba = coupled_grad_zetas(data, b, a).grad
    # the loss is symmetric to near machine level, so gradients swap
    assert np.max(np.abs(g_ab - g_ba[::-1])) <= 1e-8


def test_fd_gradient_quadratic_and_constant():
    x0 = np.array([1.0, -2.0, 0.5])
    g = fd_gradient(lambda x: float(x @ x), x0, FDSpec(1e-5))
    assert np.allclose(g, 2 * x0, atol=1e-9)
    g0 = fd_gradient(lambda x: 3.0, x0, FDSpec(1e-5))
    assert np.allclose(g0, 0.0)


def test_fd_spec_validation_and_subset():
    with pytest.raises(ValueError):
        FDSpec(step=0.0)
    g = fd_gradient(lambda x: float(x @ x), np.arange(4.0), FDSpec(1e-6, [1, 3]))
    assert g.shape == (2,)
    assert np.allclose(g, [2.0, 6.0], atol=1e-8)


def test_gradient_report_rejects_nonfinite():
    with pytest.raises(NonfiniteGradientError):
        GradientReport(0.0, np.array([np.nan]), "V-samples")


def test_zero_reference_target():
    grid = make_grid(-1, 1, 16)
    f0 = WaveField(grid, np.ones(16, dtype=complex))
    zero = WaveField(grid, np.zeros(16, dtype=complex))
    p = ProblemParams(-1.0, 0.0, np.zeros(16), 0.1, 1)
    with pytest.raises(ZeroReferenceError):
        misfit_grad_V(f0, zero, p)
