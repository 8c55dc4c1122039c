import numpy as np
import pytest

from nlsinv.errors import (LengthMismatchError, NonfiniteFieldError,
                           SingularKernelError)
from nlsinv.grids import WaveField, make_grid, rel_misfit
from nlsinv.propagator import (LinearStepSpec, ProblemParams,
                               direct_kernel, first_order_propagate,
                               flipped_nonlinear_phase, linear_symbol,
                               nonlinear_step, propagate)


def _random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return WaveField(grid, rng.normal(size=grid.M) + 1j * rng.normal(size=grid.M))


def test_linear_symbol_zero_eta_is_identity():
    g = make_grid(-1, 1, 32)
    s = linear_symbol(0.0, g)
    assert np.allclose(s.multipliers, 1.0)


def test_linear_symbol_zero_mode_stationary():
    g = make_grid(-1, 1, 32)
    s = linear_symbol(0.37, g)
    assert s.multipliers[0] == 1.0  # k = 0 sits first in FFT order
    assert s.is_unitary()


def test_linear_symbol_mode_two_value():
    g = make_grid(0.0, 2.0 * np.pi, 8)
    s = linear_symbol(0.1, g)
    idx = int(np.where(np.round(g.wavenumbers) == 2)[0][0])
    assert s.multipliers[idx] == pytest.approx(np.exp(-0.4j), abs=1e-15)


def test_linear_symbol_advances_plane_wave_exactly():
    g = make_grid(0.0, 2.0 * np.pi, 64)
    beta, dt, kmode = -1.0, 0.05, 3
    f = WaveField(g, np.exp(1j * kmode * g.points))
    out = nonlinear_step(f, 0.0, np.zeros(g.M))  # no-op, keeps types uniform
    from nlsinv.grids import apply_symbol
    out = apply_symbol(f, linear_symbol(beta * dt, g))
    expected = np.exp(1j * kmode * g.points) * np.exp(-1j * beta * kmode**2 * dt)
    assert np.max(np.abs(out.values - expected)) <= 1e-13


def test_direct_kernel_values():
    g = make_grid(0.0, 1.0, 10)  # dx = 0.1
    k = direct_kernel(0.5, g)
    amp = np.sqrt(1.0 / (np.pi * 0.5)) * np.exp(1j * np.pi / 4)
    assert k[0] == pytest.approx(amp * 0.1, abs=1e-15)
    assert k[3] == pytest.approx(amp * np.exp(-1j * 0.09 / 2.0) * 0.1, abs=1e-15)


def test_direct_kernel_singular_at_zero_eta():
    g = make_grid(0, 1, 8)
    with pytest.raises(SingularKernelError):
        direct_kernel(0.0, g)


def test_nonlinear_step_zero_field():
    g = make_grid(-1, 1, 16)
    f = WaveField(g, np.zeros(16, dtype=complex))
    out = nonlinear_step(f, 2.0, np.ones(16))
    assert np.all(out.values == 0)


def test_nonlinear_step_pi_phase():
    g = make_grid(-1, 1, 16)
    f = WaveField(g, np.ones(16, dtype=complex))
    out = nonlinear_step(f, np.pi, np.zeros(16))
    assert np.max(np.abs(out.values + 1.0)) <= 1e-14


def test_nonlinear_step_global_phase_and_modulus():
    g = make_grid(-1, 1, 32)
    f = _random_field(g, 7)
    c0 = 0.83
    out = nonlinear_step(f, 0.0, np.full(32, c0))
    assert np.max(np.abs(out.values - f.values * np.exp(1j * c0))) <= 1e-14
    out2 = nonlinear_step(f, 1.7, np.linspace(-1, 1, 32))
    assert np.max(np.abs(np.abs(out2.values) - np.abs(f.values))) == 0.0


def test_nonlinear_step_length_check():
    g = make_grid(-1, 1, 16)
    f = WaveField(g, np.ones(16, dtype=complex))
    with pytest.raises(LengthMismatchError):
        nonlinear_step(f, 1.0, np.zeros(8))


def test_propagate_pure_linear_plane_wave():
    g = make_grid(0.0, 2.0 * np.pi, 64)
    beta, kmode, N, T = -1.0, 3, 16, 0.8
    f0 = WaveField(g, np.exp(1j * kmode * g.points))
    p = ProblemParams(beta, 0.0, np.zeros(g.M), T / N, N)
    out, _ = propagate(f0, p)
    expected = np.exp(1j * kmode * g.points) * np.exp(-1j * beta * kmode**2 * T)
    assert np.max(np.abs(out.values - expected)) <= 1e-10


def test_propagate_constant_potential_global_phase():
    g = make_grid(-2, 2, 64)
    f0 = _random_field(g, 1)
    c0, N, T = 0.6, 8, 1.0
    p = ProblemParams(0.0, 0.0, np.full(g.M, c0), T / N, N)
    out, _ = propagate(f0, p)
    assert np.max(np.abs(out.values - f0.values * np.exp(1j * c0 * T))) <= 1e-12


def test_propagate_example1_accuracy():
    # exact solution exp(-x^2 + 2it) under beta=-1, gamma=1,
    # V = 4x^2 - exp(-2x^2) on [-10, 10]
    g = make_grid(-10, 10, 4000)
    x = g.points
    V = 4 * x**2 - np.exp(-2 * x**2)
    f0 = WaveField(g, np.exp(-x**2) + 0j)
    T, N = 1.0, 200
    out, _ = propagate(f0, ProblemParams(-1.0, 1.0, V, T / N, N))
    exact = WaveField(g, np.exp(-x**2 + 2j * T))
    assert rel_misfit(out, exact) <= 1e-6


def test_propagate_mass_conservation():
    rng = np.random.default_rng(9)
    g = make_grid(-5, 5, 256)
    f0 = _random_field(g, 9)
    p = ProblemParams(rng.uniform(-2, 2), rng.uniform(-2, 2),
                      rng.normal(size=g.M), 0.02, 50)
    out, _ = propagate(f0, p)
    assert abs(out.norm() - f0.norm()) / f0.norm() <= 1e-12


def test_propagate_merged_equals_unmerged():
    g = make_grid(-5, 5, 128)
    f0 = _random_field(g, 11)
    p = ProblemParams(-1.0, 1.0, np.random.default_rng(11).normal(size=g.M),
                      0.05, 12)
    merged, _ = propagate(f0, p, merge=True)
    naive, _ = propagate(f0, p, merge=False)
    assert np.linalg.norm(merged.values - naive.values) / naive.norm() <= 1e-12


def test_propagate_tape_contents():
    g = make_grid(-3, 3, 64)
    f0 = _random_field(g, 13)
    p = ProblemParams(-0.5, 0.8, np.random.default_rng(13).normal(size=g.M),
                      0.1, 5)
    _, tape_m = propagate(f0, p, record=True, merge=True)
    _, tape_u = propagate(f0, p, record=True, merge=False)
    assert len(tape_m) == p.N and len(tape_u) == p.N
    assert tape_m.final is not None
    for a, b in zip(tape_m.pre_activation, tape_u.pre_activation):
        assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-12


def test_propagate_time_reversal():
    g = make_grid(-5, 5, 256)
    f0 = _random_field(g, 17)
    p = ProblemParams(-1.0, 1.0, np.random.default_rng(17).normal(size=g.M),
                      0.02, 25)
    fwd, _ = propagate(f0, p)
    back, _ = propagate(fwd, p.reversed())
    assert np.max(np.abs(back.values - f0.values)) <= 1e-10


def test_propagate_detects_nonfinite():
    g = make_grid(-1, 1, 16)
    vals = np.ones(16, dtype=complex)
    vals[3] = np.nan
    f0 = WaveField(g, vals)
    p = ProblemParams(-1.0, 0.0, np.zeros(16), 0.1, 2)
    with pytest.raises(NonfiniteFieldError):
        propagate(f0, p)
    with pytest.raises(NonfiniteFieldError):
        propagate(f0, p, check_layers=True)


def test_first_order_matches_strang_for_pure_linear():
    g = make_grid(0.0, 2.0 * np.pi, 64)
    f0 = WaveField(g, np.exp(1j * 2 * g.points))
    p = ProblemParams(-1.0, 0.0, np.zeros(g.M), 0.3, 1)
    a, _ = propagate(f0, p)
    b = first_order_propagate(f0, p)
    assert np.max(np.abs(a.values - b.values)) <= 1e-13


def test_first_order_matches_strang_for_beta_zero():
    g = make_grid(-2, 2, 64)
    f0 = _random_field(g, 19)
    p = ProblemParams(0.0, 1.3, np.random.default_rng(19).normal(size=g.M),
                      0.1, 6)
    a, _ = propagate(f0, p)
    b = first_order_propagate(f0, p)
    assert np.max(np.abs(a.values - b.values)) <= 1e-12


def test_linear_step_spec_modes():
    g = make_grid(-4, 4, 64)
    f = _random_field(g, 23)
    spec = LinearStepSpec(eta=-0.05)
    from nlsinv.grids import apply_symbol
    ref = apply_symbol(f, linear_symbol(-0.05, g))
    assert np.allclose(spec.apply(f).values, ref.values)
    direct = LinearStepSpec(eta=-0.05, mode="direct").apply(f)
    assert direct.values.shape == (64,)
    with pytest.raises(ValueError):
        LinearStepSpec(eta=0.1, mode="bogus")


def test_flipped_phase_hook_restores():
    g = make_grid(-1, 1, 16)
    f = WaveField(g, np.ones(16, dtype=complex))
    h = np.full(16, 0.5)
    with flipped_nonlinear_phase():
        flipped = nonlinear_step(f, 0.0, h)
    normal = nonlinear_step(f, 0.0, h)
    assert np.allclose(flipped.values, np.exp(-0.5j))
    assert np.allclose(normal.values, np.exp(+0.5j))
