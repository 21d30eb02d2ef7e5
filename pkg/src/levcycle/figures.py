"""Figure rendering for the CLI report path.

Every subcommand drops a ``figure.png`` next to its delimited output. The Agg
backend and pinned savefig options keep renders byte-reproducible for the
determinism contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE = dict(dpi=110, metadata={"Software": None})


def _finish(fig, path: Path) -> Path:
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def render_full_run(result, out_dir: Path) -> Path:
    """Seven stacked panels: dividends, dividend-price ratio, weights, prices,
    leverage, perceived risk, equities."""
    t = np.arange(result.n_rows)
    fig, axes = plt.subplots(7, 1, figsize=(8, 14), sharex=True)
    panels = [
        ("dividends", result.dividends),
        ("dividend-price ratio", result.rhat),
        ("bank weights", result.weights),
        ("stock prices", result.prices),
        ("bank leverage", result.leverage),
        ("perceived risk $\\sigma_P^2$", result.sigma_p2),
        ("equity", None),
    ]
    for ax, (label, series) in zip(axes, panels):
        if label == "equity":
            ax.plot(t, result.equity_bank, lw=0.8, label="bank")
            ax.plot(t, result.equity_nt, lw=0.8, label="noise trader")
            ax.legend(loc="upper left", fontsize=7)
        elif series.ndim == 2:
            for i in range(series.shape[1]):
                ax.plot(t, series[:, i], lw=0.8, label=f"stock {i + 1}")
            if label == "dividends":
                ax.legend(loc="upper left", fontsize=7)
        else:
            ax.plot(t, series, lw=0.8)
        ax.set_ylabel(label, fontsize=8)
    axes[-1].set_xlabel("t")
    fig.align_ylabels(axes)
    fig.tight_layout()
    return _finish(fig, out_dir / "figure.png")


def render_map2d_run(result, out_dir: Path) -> Path:
    """Price series extract next to the phase plot of (z1, z2)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    window = min(result.n_rows, 400)
    t = np.arange(window)
    ax1.plot(t, result.price[:window], lw=0.8)
    ax1.set_xlabel("t")
    ax1.set_ylabel("price")
    ax1.set_title("price (first %d steps)" % window, fontsize=9)
    ax2.plot(result.z1, result.z2, ",", ms=1, alpha=0.6)
    ax2.set_xlabel("$z_1$")
    ax2.set_ylabel("$z_2$")
    ax2.set_title("phase plot", fontsize=9)
    fig.tight_layout()
    return _finish(fig, out_dir / "figure.png")


def render_var_run(result, out_dir: Path) -> Path:
    """Price/leverage window, leverage-price phase plot, asset/leverage scatter."""
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(13, 4))
    n = result.n_rows
    window = min(n, 500)
    t = np.arange(n - window, n)
    ax1.plot(t, result.p[-window:], lw=0.8, color="tab:blue", label="price")
    ax1.set_xlabel("t")
    ax1.set_ylabel("price", color="tab:blue")
    twin = ax1.twinx()
    twin.plot(t, result.leverage[-window:], lw=0.8, color="tab:red",
              label="leverage")
    twin.set_ylabel("leverage", color="tab:red")
    ax1.set_title("price and leverage", fontsize=9)

    ax2.plot(result.p, result.leverage, lw=0.3, alpha=0.7)
    ax2.set_xlabel("price")
    ax2.set_ylabel("leverage")
    ax2.set_title("phase plot", fontsize=9)

    ok = (result.assets[:-1] > 0) & (result.assets[1:] > 0)
    ok &= (result.leverage[:-1] > 0) & (result.leverage[1:] > 0)
    if ok.any():
        d_log_a = np.diff(np.log(result.assets))[ok]
        d_log_l = np.diff(np.log(result.leverage))[ok]
        ax3.plot(d_log_a, d_log_l, ".", ms=2, alpha=0.5)
    ax3.set_xlabel("$\\Delta$ log assets")
    ax3.set_ylabel("$\\Delta$ log leverage")
    ax3.set_title("asset vs leverage changes", fontsize=9)
    fig.tight_layout()
    return _finish(fig, out_dir / "figure.png")


def render_sweep(result, out_dir: Path) -> Path:
    """Heatmap of log10 mean CV for 2D grids; dual-axis line plot for 1D sweeps."""
    spec = result.spec
    if result.y_values.shape[0] > 1:
        fig, ax = plt.subplots(figsize=(6.5, 5))
        img = np.log10(np.maximum(result.mean_cv, 1e-300))
        mesh = ax.pcolormesh(result.x_values, result.y_values, img.T,
                             shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="log10 mean CV")
        ax.set_xlabel(spec.axis_x.name)
        ax.set_ylabel(spec.axis_y.name)
        ax.set_title(f"{spec.model}, {spec.seeds} seeds, T={spec.T}", fontsize=9)
    else:
        fig, ax = plt.subplots(figsize=(6.5, 4))
        cv = result.mean_cv[:, 0]
        ax.plot(result.x_values, cv, "o-", lw=1, color="tab:blue")
        ax.set_xlabel(spec.axis_x.name)
        ax.set_ylabel("mean CV", color="tab:blue")
        ax.set_xscale("log" if _is_log_spaced(result.x_values) else "linear")
        ax.set_yscale("log")
        twin = ax.twinx()
        twin.plot(result.x_values, result.mean_max_leverage[:, 0], "s--", lw=1,
                  color="tab:red")
        twin.set_ylabel("mean max leverage", color="tab:red")
        ax.set_title(f"{spec.model}, {spec.seeds} seeds, T={spec.T}", fontsize=9)
    fig.tight_layout()
    return _finish(fig, out_dir / "figure.png")


def _is_log_spaced(values: np.ndarray) -> bool:
    if values.shape[0] < 3 or np.any(values <= 0):
        return False
    ratios = values[1:] / values[:-1]
    return float(ratios.std()) < 0.5 * float(ratios.mean() - 1.0 + 1e-12) + 1e-9
