"""Command-line entry points.

Subcommands: forward | invert | converge | landscape | verify. Every
command writes its CSV reports, companion PNG figures, and a copy of the
resolved configuration into the output directory. Exit codes: 0 success,
2 configuration error, 3 numeric failure, 4 training divergence, 5 failed
verification gates.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reporting
from .adjoint import FDSpec, coupled_grad_zetas, fd_gradient, misfit_grad_coeffs, misfit_grad_V
from .config import RunConfig, resolve_config
from .coupled import coupled_propagate
from .errors import (ConfigError, DivergenceError, NonfiniteFieldError,
                     NonfiniteGradientError)
from .grids import WaveField, make_grid, rel_misfit
from .library import (assemble, default_library, library_from_names,
                      library_from_pairs, synthesize)
from .propagator import (ProblemParams, flipped_nonlinear_phase, propagate)
from .scenarios import (convergence_study, coupled_dataset, get_scenario,
                        landscape_scan, residual_check, single_dataset)
from .training import (CoeffProblem, LRSchedule, TrainConfig, initial_coeffs,
                       train_coeffs, train_zetas)


def _scenario(cfg: RunConfig):
    s = get_scenario(cfg["scenario"])
    if cfg["a"] is not None or cfg["b"] is not None:
        s = replace(s, a=cfg.get("a", s.a), b=cfg.get("b", s.b))
    return s


def _resolve_nt(cfg: RunConfig, default_N: int, default_T: float) -> tuple[int, float]:
    N, T, dt = cfg["N"], cfg["T"], cfg["dt"]
    if dt is not None:
        if N is not None:
            T = dt * N
        elif T is not None:
            N = max(1, round(T / dt))
        else:
            raise ConfigError("dt override needs N or T alongside it")
    return (default_N if N is None else N), (default_T if T is None else T)


def _build_library(cfg: RunConfig):
    if cfg["custom_library"] is not None:
        pairs = [tuple(p) for p in cfg["custom_library"]]
        return library_from_pairs(pairs)
    if cfg["library"] is not None:
        return library_from_names(cfg["library"])
    return default_library()


def _dictionary(cfg: RunConfig, grid):
    Phi = assemble(_build_library(cfg), grid)
    if cfg["normalize_columns"]:
        Phi = Phi.normalized()
    return Phi


def _truth_vector(scenario, names: list[str]) -> np.ndarray:
    return np.array([scenario.truth_coeffs.get(n, 0.0) for n in names])


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.json")
    return out


def cmd_forward(cfg: RunConfig) -> int:
    s = _scenario(cfg)
    out = _outdir(cfg)
    if s.kind == "single":
        grid = s.grid(cfg["M"], scale=cfg["scale"])
        N, T = _resolve_nt(cfg, s.N_forward, s.T)
        p = s.params(grid, N=N, T=T)
        f0 = s.initial_field(grid)
        num, _ = propagate(f0, p, mode=cfg["mode"])
        exact = s.exact_field(grid, T)
        pairs = [(num, exact)]
        e = rel_misfit(num, exact)
        print(f"forward {s.name}: M={grid.M} N={N} T={T} e_psi = {e:.6e}")
    else:
        grid = s.grid(cfg["M"])
        N, T = _resolve_nt(cfg, s.N_forward, s.T)
        p = s.params(grid, N=N, T=T)
        num, _ = coupled_propagate(s.initial_fields(grid), p)
        exact = s.exact_fields(grid, T)
        pairs = [(num.psi1, exact.psi1), (num.psi2, exact.psi2)]
        e1 = rel_misfit(num.psi1, exact.psi1)
        e2 = rel_misfit(num.psi2, exact.psi2)
        print(f"forward {s.name}: M={grid.M} N={N} T={T} "
              f"e_psi1 = {e1:.6e} e_psi2 = {e2:.6e}")
    reporting.write_forward_csv(out / "forward.csv", pairs)
    reporting.plot_forward(out / "forward.png", pairs, f"forward {s.name}")
    return 0


def _schedule_from(cfg: RunConfig, d: dict) -> LRSchedule:
    return LRSchedule(
        init=cfg.get("lr_init", d.get("lr")),
        decay_factor=cfg.get("lr_decay_factor", d.get("decay", 1.0)),
        decay_period=cfg.get("lr_decay_period", d.get("period", 1)),
        post_tol_factor=cfg.get("lr_post_tol_factor", d.get("post_tol", 1.0)),
        tol=cfg.get("tau", d.get("tau", 1e-10)),
    )


def cmd_invert(cfg: RunConfig) -> int:
    s = _scenario(cfg)
    out = _outdir(cfg)
    d = s.invert_defaults
    targets = cfg.get("targets", d.get("targets"))
    M = cfg.get("M", d.get("M"))
    N, T = _resolve_nt(cfg, d.get("N"), d.get("T"))
    sched = _schedule_from(cfg, d)
    epochs = cfg.get("max_epochs", d.get("epochs"))

    if s.kind == "single":
        grid, p, f0, target = single_dataset(s, M=M, N=N, T=T, targets=targets)
        Phi = _dictionary(cfg, grid)
        lam = cfg.get("lambda", d.get("lam", 0.0))
        tc = TrainConfig(schedule=sched, max_epochs=epochs, lam=lam,
                         l1_units=cfg["l1_units"], seed=cfg["seed"],
                         halve_on_increase=cfg["halve_on_increase"],
                         stop_loss=cfg["stop_loss"])
        problem = CoeffProblem(f0, target, p, Phi,
                               V_exact=s.potential(grid.points),
                               truth_coeffs=_truth_vector(s, Phi.names))
        c0 = initial_coeffs(Phi, mode=cfg["c_init"], seed=cfg["seed"])
        c_best, record = train_coeffs(problem, c0, tc)
        reporting.write_history_csv(out / "history.csv", record)
        reporting.plot_history(out / "history.png", record, f"invert {s.name}")
        reporting.write_coeffs_csv(out / "coeffs.csv", Phi.names, c_best,
                                   problem.truth_coeffs)
        # c_best is in the raw-column convention regardless of normalization
        v_num = Phi.matrix @ (c_best * Phi.column_scales)
        reporting.write_potential_csv(out / "potential.csv", grid.points,
                                      v_num, problem.V_exact)
        reporting.plot_potential(out / "potential.png", grid.points, v_num,
                                 problem.V_exact, f"potential {s.name}")
        from .grids import rel_err_vector
        e_V = rel_err_vector(v_num, problem.V_exact)
        print(f"invert {s.name}: epochs={record.epochs[-1]} "
              f"final e_psi = {record.e_psi[-1]:.6e} best-iterate e_V = {e_V:.6e}")
        print(f"  condition number of dictionary: {Phi.condition_number():.3e}")
    else:
        data = coupled_dataset(s, M=M, N=N, T=T, targets=targets)
        tc = TrainConfig(schedule=sched, max_epochs=epochs, lam=0.0,
                         seed=cfg["seed"], stop_loss=cfg["stop_loss"])
        z0 = cfg.get("zeta_init", d.get("zeta_init"))
        z_best, record = train_zetas(data, z0, tc)
        reporting.write_history_csv(out / "history.csv", record)
        reporting.plot_history(out / "history.png", record, f"invert {s.name}")
        reporting.write_csv(out / "zetas.csv", ["name", "value", "truth"],
                            [("zeta1", z_best[0], s.zeta_true[0]),
                             ("zeta2", z_best[1], s.zeta_true[1])])
        ez = [abs(z_best[i] - s.zeta_true[i]) / abs(s.zeta_true[i]) for i in (0, 1)]
        print(f"invert {s.name}: epochs={record.epochs[-1]} final J = {record.J[-1]:.6e} "
              f"e_zeta1 = {ez[0]:.3e} e_zeta2 = {ez[1]:.3e}")
    return 0


def cmd_converge(cfg: RunConfig) -> int:
    s = _scenario(cfg)
    if s.kind != "single":
        raise ConfigError("converge supports the single-equation scenarios")
    out = _outdir(cfg)
    vary = cfg["vary"]
    if vary == "N":
        values = cfg.get("values", [25, 50, 100, 200, 400])
        table = convergence_study(s, "N", values, M_fixed=cfg.get("M", 1024),
                                  T=cfg["T"], scheme=cfg["scheme"])
    else:
        values = cfg.get("values", [8, 16, 32, 64, 128])
        table = convergence_study(s, "M", values, N_fixed=cfg.get("N", 200),
                                  T=cfg["T"], scheme=cfg["scheme"])
    reporting.write_convergence_csv(out / "convergence.csv", table)
    reporting.plot_convergence(out / "convergence.png", table,
                               f"{s.name} {cfg['scheme']} vs {vary}")
    print(f"converge {s.name} vary={vary} scheme={cfg['scheme']}: "
          f"slope = {table.slope:.3f} (fitted on sqrt(2 e_psi))")
    for v, e in zip(table.values, table.e_psi):
        print(f"  {vary}={v}: e_psi = {e:.6e}")
    return 0


def cmd_landscape(cfg: RunConfig) -> int:
    s = _scenario(cfg)
    if s.kind != "coupled":
        raise ConfigError("landscape requires the coupled scenario (example3)")
    out = _outdir(cfg)
    d = s.invert_defaults
    M = cfg.get("M", d.get("scan_M", 512))
    N, T = _resolve_nt(cfg, d.get("N"), d.get("T"))
    data = coupled_dataset(s, M=M, N=N, T=T, targets=cfg.get("targets", d.get("targets")))
    r1 = tuple(cfg.get("zeta1_range", d.get("scan_range")))
    r2 = tuple(cfg.get("zeta2_range", d.get("scan_range")))
    n1 = cfg.get("n1", d.get("scan_n"))
    n2 = cfg.get("n2", d.get("scan_n"))
    result = landscape_scan(data, r1, r2, n1, n2, threads=cfg.threads())
    reporting.write_landscape_csv(out / "landscape.csv", result)
    reporting.write_landscape_summary_csv(out / "landscape_summary.csv", result)
    reporting.plot_landscape(out / "landscape.png", result, f"loss landscape {s.name}")
    defect = "n/a" if result.swap_defect is None else f"{result.swap_defect:.3e}"
    print(f"landscape {s.name}: argmin = ({result.argmin[0]:.6g}, {result.argmin[1]:.6g}) "
          f"J_min = {result.J_min:.6e} swap defect = {defect}")
    return 0


# ---------------------------------------------------------------------------
# verification gates

def _gate_residual():
    checks = [
        ("residual example1 (M=512)", residual_check(get_scenario("example1"), 0.3, 512), 1e-8),
        ("residual example2 (M=64)", residual_check(get_scenario("example2"), 0.3, 64), 1e-10),
        ("residual example3 (M=1024)", residual_check(get_scenario("example3"), 0.3, 1024), 1e-8),
    ]
    return checks


def _gate_mass():
    rng = np.random.default_rng(7)
    worst = 0.0
    for M in (32, 256):
        for _ in range(3):
            grid = make_grid(-5.0, 5.0, M)
            f0 = WaveField(grid, rng.normal(size=M) + 1j * rng.normal(size=M))
            p = ProblemParams(rng.uniform(-2, 2), rng.uniform(-2, 2),
                              rng.normal(size=M), 0.01, 100)
            num, _ = propagate(f0, p)
            worst = max(worst, abs(num.norm() - f0.norm()) / f0.norm())
    return [("mass drift (100 layers)", worst, 1e-12)]


def _gate_gradient():
    rng = np.random.default_rng(11)
    grid = make_grid(-1.0, 1.0, 64)
    Phi = assemble(default_library(), grid)
    worst_V = worst_c = 0.0
    for _ in range(2):
        c = rng.uniform(-0.5, 0.5, size=Phi.n_functions)
        V = synthesize(Phi, c)
        f0 = WaveField(grid, rng.normal(size=64) + 1j * rng.normal(size=64))
        tgt = WaveField(grid, rng.normal(size=64) + 1j * rng.normal(size=64))
        p = ProblemParams(-1.0, 1.0, V, 0.1, 4)
        idx = rng.choice(64, 5, replace=False)
        rep = misfit_grad_V(f0, tgt, p)

        def loss_V(v):
            out, _ = propagate(f0, replace(p, V=v))
            return rel_misfit(out, tgt)

        fd = fd_gradient(loss_V, V, FDSpec(1e-5, idx))
        worst_V = max(worst_V, float(np.max(
            np.abs(fd - rep.grad[idx]) / np.maximum(np.abs(fd), 1e-300))))

        repc = misfit_grad_coeffs(f0, tgt, p, Phi.matrix)

        def loss_c(cv):
            out, _ = propagate(f0, replace(p, V=synthesize(Phi, cv)))
            return rel_misfit(out, tgt)

        idc = rng.choice(Phi.n_functions, 5, replace=False)
        fdc = fd_gradient(loss_c, c, FDSpec(1e-5, idc))
        worst_c = max(worst_c, float(np.max(
            np.abs(fdc - repc.grad[idc]) / np.maximum(np.abs(fdc), 1e-300))))

    s3 = get_scenario("example3")
    data = coupled_dataset(s3, M=64, N=4, T=0.1)
    from .coupled import coupled_loss
    rep3 = coupled_grad_zetas(data, 0.9, 0.5)
    fd3 = fd_gradient(lambda zz: coupled_loss(zz[0], zz[1], data),
                      np.array([0.9, 0.5]), FDSpec(1e-5))
    worst_z = float(np.max(np.abs(fd3 - rep3.grad) / np.maximum(np.abs(fd3), 1e-300)))
    return [("gradient vs FD: V samples", worst_V, 1e-6),
            ("gradient vs FD: coefficients", worst_c, 1e-6),
            ("gradient vs FD: zetas", worst_z, 1e-6)]


def _gate_composition():
    rng = np.random.default_rng(3)
    grid = make_grid(-5.0, 5.0, 128)
    f0 = WaveField(grid, rng.normal(size=128) + 1j * rng.normal(size=128))
    p = ProblemParams(-1.0, 1.0, rng.normal(size=128), 0.05, 16)
    merged, _ = propagate(f0, p, merge=True)
    naive, _ = propagate(f0, p, merge=False)
    rel = float(np.linalg.norm(merged.values - naive.values) / naive.norm())
    return [("merged vs unmerged composition", rel, 1e-12)]


_GATES = {
    "residual": _gate_residual,
    "mass": _gate_mass,
    "gradient": _gate_gradient,
    "composition": _gate_composition,
}


def cmd_verify(cfg: RunConfig, gates_arg: str | None = None) -> int:
    names = list(_GATES)
    if gates_arg:
        names = [g.strip() for g in gates_arg.split(",") if g.strip()]
    elif cfg["gates"] is not None:
        names = cfg["gates"]
    unknown = [g for g in names if g not in _GATES]
    if unknown:
        raise ConfigError(f"unknown verify gates {unknown}; known: {list(_GATES)}")

    def run_all():
        failed = []
        for name in names:
            for label, measured, threshold in _GATES[name]():
                ok = measured <= threshold
                print(f"  [{'PASS' if ok else 'FAIL'}] {label}: "
                      f"{measured:.3e} (threshold {threshold:.1e})")
                if not ok:
                    failed.append(label)
        return failed

    if cfg["debug_flip_phase"]:
        print("verify gates (nonlinear phase sign flipped):")
        with flipped_nonlinear_phase():
            failed = run_all()
    else:
        print("verify gates:")
        failed = run_all()
    if failed:
        print("failed gates: " + "; ".join(failed))
        return 5
    print("all gates passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsinv",
        description="Split-step spectral forward solver and dictionary-based "
                    "potential inversion for 1D nonlinear Schrodinger problems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("forward", "propagate the scenario at its true parameters"),
        ("invert", "run the scenario's training protocol"),
        ("converge", "refinement study of the forward error"),
        ("landscape", "scan the coupled loss over (zeta1, zeta2)"),
        ("verify", "run the pre-flight verification gates"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--scenario", help="example1|example2|example3")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        if name == "verify":
            p.add_argument("--gates", help="comma-separated subset of gates")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.config, args.scenario, args.out, args.set)
        if args.command == "forward":
            return cmd_forward(cfg)
        if args.command == "invert":
            return cmd_invert(cfg)
        if args.command == "converge":
            return cmd_converge(cfg)
        if args.command == "landscape":
            return cmd_landscape(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, getattr(args, "gates", None))
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4
    except (NonfiniteFieldError, NonfiniteGradientError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
