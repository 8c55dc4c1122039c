"""CSV emitters and figure renderers for the command-line reports.

Numbers are serialized with 17 significant digits so doubles round-trip
exactly; identical runs produce byte-identical files. Figures are rendered
with the Agg backend straight to PNG next to the delimited output.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .grids import WaveField
from .scenarios import ConvergenceTable, LandscapeResult
from .training import TrainRecord


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_forward_csv(path: Path, fields: list[tuple[WaveField, WaveField]]) -> Path:
    """Field samples vs the reference; one block per field for coupled runs."""
    if len(fields) == 1:
        num, exact = fields[0]
        x = num.grid.points
        rows = zip(x, num.values.real, num.values.imag, np.abs(num.values),
                   exact.values.real, exact.values.imag)
        return write_csv(path, ["x", "re_psi", "im_psi", "abs_psi",
                                "re_psi_exact", "im_psi_exact"], rows)
    rows = []
    for j, (num, exact) in enumerate(fields, start=1):
        x = num.grid.points
        rows.extend(zip([j] * len(x), x, num.values.real, num.values.imag,
                        np.abs(num.values), exact.values.real, exact.values.imag))
    return write_csv(path, ["field", "x", "re_psi", "im_psi", "abs_psi",
                            "re_psi_exact", "im_psi_exact"], rows)


def write_history_csv(path: Path, record: TrainRecord) -> Path:
    err_keys = sorted(record.errors)
    header = ["epoch", "J", "e_psi", *err_keys, "lr"]
    rows = (
        (record.epochs[i], record.J[i], record.e_psi[i],
         *(record.errors[k][i] for k in err_keys), record.lr[i])
        for i in range(len(record))
    )
    return write_csv(path, header, rows)


def write_coeffs_csv(path: Path, names: list[str], c: np.ndarray,
                     truth: np.ndarray) -> Path:
    return write_csv(path, ["name", "c", "truth"],
                     zip(names, c, truth))


def write_potential_csv(path: Path, x: np.ndarray, v_num: np.ndarray,
                        v_exact: np.ndarray) -> Path:
    return write_csv(path, ["x", "V_num", "V_exact"], zip(x, v_num, v_exact))


def write_convergence_csv(path: Path, table: ConvergenceTable) -> Path:
    return write_csv(path, ["value", "e_psi"], zip(table.values, table.e_psi))


def write_landscape_csv(path: Path, result: LandscapeResult) -> Path:
    return write_csv(path, ["zeta1", "zeta2", "J"], result.rows())


def write_landscape_summary_csv(path: Path, result: LandscapeResult) -> Path:
    defect = result.swap_defect if result.swap_defect is not None else float("nan")
    return write_csv(path, ["argmin_zeta1", "argmin_zeta2", "J_min", "swap_defect"],
                     [(result.argmin[0], result.argmin[1], result.J_min, defect)])


# ---------------------------------------------------------------------------
# figures

def plot_forward(path: Path, fields: list[tuple[WaveField, WaveField]],
                 title: str) -> Path:
    fig, axes = plt.subplots(1, len(fields), figsize=(6 * len(fields), 4),
                             squeeze=False)
    for ax, (num, exact) in zip(axes[0], fields):
        x = num.grid.points
        ax.plot(x, np.abs(exact.values), "k-", lw=1.0, label="|psi| exact")
        ax.plot(x, np.abs(num.values), "r--", lw=1.0, label="|psi| numerical")
        ax.set_xlabel("x")
        ax.set_ylabel("|psi|")
        ax.legend(frameon=False)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_history(path: Path, record: TrainRecord, title: str) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    ax1.semilogy(record.epochs, np.maximum(record.e_psi, 1e-300), lw=1.0)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("data misfit e_psi")
    ax1.grid(alpha=0.3)
    for key, vals in sorted(record.errors.items()):
        ax2.semilogy(record.epochs, np.maximum(vals, 1e-300), lw=1.0, label=key)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("parameter error")
    ax2.grid(alpha=0.3)
    if record.errors:
        ax2.legend(frameon=False)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_potential(path: Path, x: np.ndarray, v_num: np.ndarray,
                   v_exact: np.ndarray, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, v_exact, "k-", lw=1.0, label="V exact")
    ax.plot(x, v_num, "r--", lw=1.0, label="V recovered")
    ax.set_xlabel("x")
    ax.set_ylabel("V(x)")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_convergence(path: Path, table: ConvergenceTable, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(table.steps, table.e_psi, "o-", lw=1.0)
    xlabel = "dt" if table.vary == "N" else "dx"
    ax.set_xlabel(xlabel)
    ax.set_ylabel("e_psi")
    ax.grid(alpha=0.3, which="both")
    ax.set_title(f"{title} (order {table.slope:.2f})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_landscape(path: Path, result: LandscapeResult, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 5))
    Z1, Z2 = np.meshgrid(result.zeta1s, result.zeta2s, indexing="ij")
    pcm = ax.contourf(Z1, Z2, np.log10(np.maximum(result.J, 1e-300)), levels=30)
    fig.colorbar(pcm, ax=ax, label="log10 J")
    ax.plot(*result.argmin, "r*", ms=12, label="argmin")
    ax.set_xlabel("zeta1")
    ax.set_ylabel("zeta2")
    ax.legend(frameon=False)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
