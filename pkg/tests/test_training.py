import numpy as np
import pytest

from nlsinv.errors import DivergenceError
from nlsinv.grids import make_grid, rel_misfit
from nlsinv.library import assemble, default_library, soft_threshold, synthesize
from nlsinv.propagator import ProblemParams, propagate
from nlsinv.scenarios import (coupled_dataset, scenario_example1,
                              scenario_example3, single_dataset)
from nlsinv.training import (CoeffProblem, LRSchedule, TrainConfig,
                             TrainRecord, initial_coeffs, train_coeffs,
                             train_zetas)


def _small_problem(M=128, N=4, T=0.25, targets="self"):
    s = scenario_example1()
    grid, p, f0, target = single_dataset(s, M=M, N=N, T=T, targets=targets)
    Phi = assemble(default_library(), grid)
    truth = np.zeros(10)
    truth[Phi.names.index("x^2")] = 4.0
    truth[Phi.names.index("exp(-2*x^2)")] = -1.0
    problem = CoeffProblem(f0, target, p, Phi,
                           V_exact=s.potential(grid.points),
                           truth_coeffs=truth)
    return problem, truth


def test_schedule_validation():
    with pytest.raises(ValueError):
        LRSchedule(init=0.0)
    with pytest.raises(ValueError):
        LRSchedule(init=1.0, decay_factor=1.5)
    with pytest.raises(ValueError):
        LRSchedule(init=1.0, post_tol_factor=0.0)
    with pytest.raises(ValueError):
        LRSchedule(init=1.0, decay_period=0)


def test_schedule_arithmetic_exact():
    problem, truth = _small_problem(M=64)
    sched = LRSchedule(init=0.05, decay_factor=0.9, decay_period=7, tol=1e-300)
    cfg = TrainConfig(schedule=sched, max_epochs=30, lam=0.0)
    _, record = train_coeffs(problem, np.zeros(10), cfg)
    for e, lr in zip(record.epochs, record.lr):
        assert lr == 0.05 * 0.9 ** (e // 7)  # exact float equality


def test_history_row_count():
    problem, _ = _small_problem(M=64)
    cfg = TrainConfig(schedule=LRSchedule(init=0.01), max_epochs=13)
    _, record = train_coeffs(problem, np.zeros(10), cfg)
    assert len(record) == 14
    assert record.epochs == list(range(14))


def test_stationary_start_at_truth():
    problem, truth = _small_problem(M=128, targets="self")
    cfg = TrainConfig(schedule=LRSchedule(init=1.0), max_epochs=5, lam=0.0)
    c, record = train_coeffs(problem, truth.copy(), cfg)
    assert record.J[0] <= 1e-12
    assert np.max(np.abs(c - truth)) <= 1e-10


def test_prox_shrinks_at_stationary_start():
    problem, truth = _small_problem(M=64, targets="self")
    lam = 0.5
    sched = LRSchedule(init=0.01)
    cfg = TrainConfig(schedule=sched, max_epochs=3, lam=lam, l1_units="normalized")
    _, record = train_coeffs(problem, truth.copy(), cfg)
    # zero gradient at the start, so each epoch is pure soft thresholding
    x2 = problem.Phi.names.index("x^2")
    expected = truth[x2] - 0.01 * lam
    assert record.snapshots[1][x2] == pytest.approx(expected, abs=1e-9)


def test_prox_dead_zone_keeps_zeros():
    problem, truth = _small_problem(M=64, targets="self")
    # enormous threshold: gradient magnitudes can never exceed it
    cfg = TrainConfig(schedule=LRSchedule(init=0.01), max_epochs=5,
                      lam=1e6, l1_units="normalized")
    c, record = train_coeffs(problem, np.zeros(10), cfg)
    assert np.all(c == 0.0)
    for snap in record.snapshots:
        assert np.all(snap == 0.0)


def test_objective_includes_l1_term():
    problem, truth = _small_problem(M=64, targets="self")
    cfg = TrainConfig(schedule=LRSchedule(init=0.01), max_epochs=2,
                      lam=3.0, l1_units="normalized")
    _, record = train_coeffs(problem, truth.copy(), cfg)
    assert record.J[0] == pytest.approx(
        record.e_psi[0] + 3.0 * np.sum(np.abs(truth)), rel=1e-12)


def test_l1_units_raw_vs_normalized():
    problem, truth = _small_problem(M=64, targets="self")
    lam = 2.0
    raw = TrainConfig(schedule=LRSchedule(init=0.01), max_epochs=1,
                      lam=lam, l1_units="raw")
    norm = TrainConfig(schedule=LRSchedule(init=0.01), max_epochs=1,
                       lam=lam / problem.target.norm() ** 2, l1_units="normalized")
    c_raw, _ = train_coeffs(problem, truth.copy(), raw)
    c_norm, _ = train_coeffs(problem, truth.copy(), norm)
    assert np.allclose(c_raw, c_norm, atol=1e-14)


def test_divergence_guard():
    problem, _ = _small_problem(M=64)
    cfg = TrainConfig(schedule=LRSchedule(init=1e9), max_epochs=300)
    with pytest.raises(DivergenceError):
        train_coeffs(problem, np.zeros(10), cfg)


def test_best_iterate_returned():
    problem, _ = _small_problem(M=64)
    # deliberately unstable rate so the loss oscillates
    cfg = TrainConfig(schedule=LRSchedule(init=8.0), max_epochs=40,
                      divergence_factor=1e30)
    c, record = train_coeffs(problem, np.zeros(10), cfg)
    best = int(np.argmin(record.J))
    assert np.allclose(c, record.snapshots[best])


def test_descent_at_small_rate():
    problem, _ = _small_problem(M=128)
    cfg = TrainConfig(schedule=LRSchedule(init=1e-2), max_epochs=150, lam=0.0)
    _, record = train_coeffs(problem, np.zeros(10), cfg)
    J = np.array(record.J)
    assert np.all(np.diff(J) <= 1e-15)


def test_halve_on_increase():
    problem, _ = _small_problem(M=64)
    cfg = TrainConfig(schedule=LRSchedule(init=8.0), max_epochs=60,
                      halve_on_increase=True, divergence_factor=1e30)
    _, record = train_coeffs(problem, np.zeros(10), cfg)
    J, lr = np.array(record.J), np.array(record.lr)
    increases = np.where(np.diff(J) > 0)[0]
    assert increases.size > 0
    for e in increases:
        assert lr[e + 1] <= lr[e] / 1.999


def test_stop_loss_early_exit():
    problem, truth = _small_problem(M=64, targets="self")
    cfg = TrainConfig(schedule=LRSchedule(init=0.01), max_epochs=500,
                      lam=0.0, stop_loss=1e-10)
    _, record = train_coeffs(problem, truth.copy(), cfg)
    assert len(record) < 501


def test_initial_coeffs_modes():
    grid = make_grid(-1, 1, 32)
    Phi = assemble(default_library(), grid)
    assert np.all(initial_coeffs(Phi, "zero") == 0.0)
    r1 = initial_coeffs(Phi, "random", seed=5)
    r2 = initial_coeffs(Phi, "random", seed=5)
    assert np.array_equal(r1, r2)
    assert np.all(np.abs(r1) <= 0.1)
    with pytest.raises(ValueError):
        initial_coeffs(Phi, "bogus")


def test_train_zetas_stationary_at_truth():
    s = scenario_example3()
    data = coupled_dataset(s, M=128, N=8, T=0.05, targets="self")
    cfg = TrainConfig(schedule=LRSchedule(init=100.0), max_epochs=10)
    z, record = train_zetas(data, s.zeta_true, cfg)
    assert np.max(np.abs(np.asarray(z) - np.asarray(s.zeta_true))) <= 1e-9
    assert record.errors["e_zeta1"][-1] <= 1e-9


def test_train_zetas_tiny_rate_keeps_iterates():
    # degenerate-rate check: a vanishing learning rate leaves the iterates
    # unchanged to machine precision
    s = scenario_example3()
    data = coupled_dataset(s, M=64, N=4, T=0.05, targets="analytic")
    cfg = TrainConfig(schedule=LRSchedule(init=1e-300), max_epochs=5)
    z, record = train_zetas(data, (1.0, 0.4), cfg)
    assert np.allclose(record.snapshots[-1], [1.0, 0.4], atol=1e-15)


def test_train_zetas_converges():
    s = scenario_example3()
    data = coupled_dataset(s, M=256, N=10, T=0.1, targets="analytic")
    cfg = TrainConfig(schedule=LRSchedule(init=100.0), max_epochs=400)
    z, record = train_zetas(data, (1.0, 0.4), cfg)
    assert record.errors["e_zeta1"][-1] <= 1e-3
    assert record.errors["e_zeta2"][-1] <= 1e-3
