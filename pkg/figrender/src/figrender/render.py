"""Build the standard figure set from sweep CSVs.

These renderers only read CSV columns; no physics is recomputed.  The input
contract is the fixed header written by the qfilock pipelines:

    protocol,N,K,L,t,tau,sample,realization,seed,qfi,qfi_ratio,entropy_bits,schmidt_rank

Rendering is deterministic: fixed style, no timestamps in the output files.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

REQUIRED_COLUMNS = [
    "protocol", "N", "K", "L", "t", "tau", "sample", "realization", "seed",
    "qfi", "qfi_ratio", "entropy_bits", "schmidt_rank",
]

FIGURE_IDS = ("1", "2a", "2b", "2c", "2d", "3a", "3b", "3c")

plt.rcParams.update({
    "figure.figsize": (4.4, 3.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
    "svg.hashsalt": "figrender",
})


class RenderInputError(ValueError):
    """Malformed input CSV (missing column, no rows, bad figure id)."""


@dataclass
class FigureSpec:
    figure_id: str
    csv_paths: list
    output_path: str
    dpi: int = 150

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise RenderInputError(
                f"unknown figure id {self.figure_id!r}; expected one of {FIGURE_IDS}"
            )
        if not self.csv_paths:
            raise RenderInputError("at least one CSV path is required")


def load_rows(csv_paths) -> pd.DataFrame:
    frames = []
    for path in csv_paths:
        df = pd.read_csv(path)
        for col in REQUIRED_COLUMNS:
            if col not in df.columns:
                raise RenderInputError(f"{path}: missing column {col!r}")
        frames.append(df[REQUIRED_COLUMNS])
    out = pd.concat(frames, ignore_index=True)
    if out.empty:
        raise RenderInputError("no data rows in the input CSVs")
    return out


def _require(df: pd.DataFrame, mask, what: str) -> pd.DataFrame:
    sub = df[mask]
    if sub.empty:
        raise RenderInputError(f"no rows usable for {what}")
    return sub


# ---------------------------------------------------------------------------
# figure builders (return the Figure so tests can inspect structure)


def _fig_loss_curve(df: pd.DataFrame):
    fig, ax = plt.subplots()
    samples = _require(df, df["sample"] >= 0, "sampled loss curve")
    analytic = df[df["sample"] == -1]
    for n, group in analytic.groupby("N"):
        # larger-kept branch (realization -1) first, smaller-kept at/after the
        # half cut (realization -2); sorted this way the line drops once
        ordered = group.sort_values(["K", "realization"], ascending=[True, False])
        ax.plot(ordered["K"], ordered["qfi_ratio"], "-", label=f"N={n} (ensemble)")
    for s, group in samples.groupby("sample"):
        ordered = group.sort_values("K")
        ax.scatter(ordered["K"], ordered["qfi_ratio"], s=14, alpha=0.7,
                   label=f"sample {s}" if s < 2 else None)
    ax.set_xlabel("lost qubits K")
    ax.set_ylabel("QFI fraction retained")
    ax.legend(fontsize=7)
    return fig


def _fig_entropy_scaling(df: pd.DataFrame, axis_col: str):
    fig, ax = plt.subplots()
    rows = _require(df, df[axis_col].notna(), f"entropy vs size per {axis_col}")
    for val, group in rows.groupby(axis_col):
        mean = group.groupby("N")["entropy_bits"].mean()
        label = f"L={int(val)}" if axis_col == "L" else f"t={val:g}"
        ax.plot(mean.index, mean.values, "o-", label=label)
    sizes = np.array(sorted(rows["N"].unique()))
    ax.plot(sizes, sizes / 2, "k--", label="maximal (N/2)")
    ax.set_xlabel("system size N")
    ax.set_ylabel("mid-cut entropy [bits]")
    ax.legend(fontsize=7)
    return fig


def _fig_phase_heatmap(df: pd.DataFrame, axis_col: str):
    rows = _require(df, df[axis_col].notna(), f"ratio heatmap over ({axis_col}, K)")
    grid = rows.groupby(["K", axis_col])["qfi_ratio"].mean().unstack()
    xs, ys = grid.columns.to_numpy(dtype=float), grid.index.to_numpy(dtype=float)
    fig, ax = plt.subplots()
    img = ax.imshow(
        grid.to_numpy(), origin="lower", aspect="auto", vmin=0.0, vmax=1.0,
        extent=(xs.min() - 0.5, xs.max() + 0.5, ys.min() - 0.5, ys.max() + 0.5),
        cmap="viridis",
    )
    ax.set_xticks(xs)
    ax.set_yticks(ys)
    ax.set_xlabel("circuit depth L" if axis_col == "L" else "evolution time t")
    ax.set_ylabel("lost qubits K")
    fig.colorbar(img, ax=ax, label="QFI fraction retained")
    return fig


def _fig_twist_sweep(df: pd.DataFrame, scrambled: bool):
    fig, ax = plt.subplots()
    mask = df["tau"].notna() & ((df["t"] > 0) if scrambled else (df["t"] == 0))
    rows = _require(df, mask, "twisting sweep")
    for k, group in rows.groupby("K"):
        mean = group.groupby("tau")["qfi"].mean()
        ax.plot(mean.index, mean.values, "o-", label=f"K={int(k)}")
    ax.set_xlabel("twisting time tau")
    ax.set_ylabel("QFI")
    ax.set_title("after scrambling" if scrambled else "no scrambling")
    ax.legend(fontsize=7)
    return fig


def _fig_loss_fraction_cut(df: pd.DataFrame):
    rows = _require(df, df["tau"].notna(), "loss-fraction cut")
    tau_max = rows["tau"].max()
    cut = rows[rows["tau"] == tau_max]
    fig, ax = plt.subplots()
    for scrambled, label, style in ((False, "bare probe", "s--"), (True, "scrambled", "o-")):
        sel = cut[(cut["t"] > 0) if scrambled else (cut["t"] == 0)]
        if sel.empty:
            continue
        mean = sel.groupby("K")["qfi_ratio"].mean()
        frac = mean.index.to_numpy(dtype=float) / sel["N"].iloc[0]
        ax.plot(frac, mean.values, style, label=label)
    ax.set_xlabel("fraction of qubits lost K/N")
    ax.set_ylabel("QFI fraction retained")
    ax.legend(fontsize=7)
    return fig


_BUILDERS = {
    "1": _fig_loss_curve,
    "2a": lambda df: _fig_entropy_scaling(df, "L"),
    "2b": lambda df: _fig_entropy_scaling(df, "t"),
    "2c": lambda df: _fig_phase_heatmap(df, "L"),
    "2d": lambda df: _fig_phase_heatmap(df, "t"),
    "3a": lambda df: _fig_twist_sweep(df, scrambled=False),
    "3b": lambda df: _fig_twist_sweep(df, scrambled=True),
    "3c": _fig_loss_fraction_cut,
}


def build_figure(figure_id: str, df: pd.DataFrame):
    if figure_id not in _BUILDERS:
        raise RenderInputError(f"unknown figure id {figure_id!r}")
    return _BUILDERS[figure_id](df)


def render(spec: FigureSpec):
    """Load CSVs, build the figure, and write the image file."""
    df = load_rows(spec.csv_paths)
    fig = build_figure(spec.figure_id, df)
    try:
        # strip volatile metadata so identical inputs give identical bytes
        metadata = {"Date": None} if spec.output_path.endswith(".svg") else None
        fig.savefig(spec.output_path, dpi=spec.dpi, metadata=metadata,
                    bbox_inches="tight")
    finally:
        plt.close(fig)
