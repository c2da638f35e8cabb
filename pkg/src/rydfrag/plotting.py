"""Figure rendering for the CLI report path (files only, never interactive)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spectral import goe_spacing_pdf, poisson_spacing_pdf

DPI = 150


def _save(fig, path: Path, config_hash: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Software": "rydfrag"}
    if config_hash:
        meta["Description"] = f"config-sha256:{config_hash}"
    fig.savefig(path, dpi=DPI, bbox_inches="tight", metadata=meta)
    plt.close(fig)
    return path


def sector_sizes_figure(sizes, length, path, config_hash=None):
    """Bar chart of the largest sector dimensions."""
    top = sorted(sizes.items(), key=lambda kv: -kv[1])[:20]
    labels = [k.label() for k, _ in top]
    values = [v for _, v in top]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=70, fontsize=7)
    ax.set_ylabel(r"$D_s$")
    ax.set_yscale("log")
    ax.set_title(f"sector dimensions, L={length} (top {len(values)})")
    return _save(fig, path, config_hash)


def fragment_sizes_figure(sizes, stats, path, config_hash=None):
    """Histogram of fragment dimensions within one sector."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.geomspace(1, max(sizes.max(), 2), 30)
    ax.hist(sizes, bins=bins, color="tab:orange")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("fragment dimension")
    ax.set_ylabel("count")
    ax.set_title(
        f"L={stats.length} {stats.sector.label()}: "
        f"$D_s$={stats.d_s}, $D_{{max}}$={stats.d_max}, frozen={stats.n_frozen}"
    )
    return _save(fig, path, config_hash)


def scaling_figure(lengths, ratios, fit, path, ylabel, config_hash=None):
    """Exponential-decay scaling with its log-linear fit."""
    base, prefactor = fit
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(lengths, ratios, "o", color="tab:blue", label="data")
    xs = np.linspace(min(lengths), max(lengths), 100)
    ax.semilogy(xs, prefactor * base**xs, "--", color="tab:red",
                label=f"{prefactor:.3g} x {base:.3f}^L")
    ax.set_xlabel("L")
    ax.set_ylabel(ylabel)
    ax.legend()
    return _save(fig, path, config_hash)


def spectrum_figure(eps, entropies, path, title="", config_hash=None):
    """Eigenstate entanglement entropy against energy density."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(eps, entropies, ".", ms=2, color="tab:blue", alpha=0.6)
    ax.set_xlabel(r"$\epsilon_n$")
    ax.set_ylabel(r"$S_n$ (nats)")
    ax.set_title(title)
    return _save(fig, path, config_hash)


def spacing_figure(edges, density, mean_r, path, config_hash=None):
    """Normalized spacing histogram with the two reference curves."""
    centers = 0.5 * (edges[:-1] + edges[1:])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(centers, density, width=edges[1] - edges[0], color="tab:gray",
           alpha=0.6, label=f"data, <r>={mean_r:.3f}")
    s = np.linspace(0, edges[-1], 200)
    ax.plot(s, poisson_spacing_pdf(s), "-", color="tab:green", label="Poisson")
    ax.plot(s, goe_spacing_pdf(s), "-", color="tab:red", label="GOE")
    ax.set_xlabel("s")
    ax.set_ylabel("P(s)")
    ax.legend()
    return _save(fig, path, config_hash)


def quench_figure(result, path, title="", config_hash=None):
    """Imbalance/QFI/entropy traces plus the density heat map."""
    fig, axes = plt.subplots(2, 1, figsize=(7, 7), height_ratios=[1, 1])
    t = result.times
    axes[0].plot(t, result.imbalance, label="imbalance")
    axes[0].plot(t, result.fisher / 4.0, label=r"$F_Q/4$")
    axes[0].plot(t, result.entropy, label="S (nats)")
    if t[-1] > 0 and t[0] == 0 and len(t) > 2:
        axes[0].set_xscale("symlog", linthresh=max(t[1], 1e-3))
    axes[0].set_xlabel("t")
    axes[0].legend()
    axes[0].set_title(title)
    im = axes[1].imshow(
        result.densities.T,
        aspect="auto",
        origin="lower",
        interpolation="nearest",
        extent=(0, len(t), 0.5, result.length + 0.5),
        vmin=0.0, vmax=1.0,
        cmap="viridis",
    )
    axes[1].set_xlabel("time index")
    axes[1].set_ylabel("site")
    fig.colorbar(im, ax=axes[1], label=r"$\langle n_i \rangle$")
    return _save(fig, path, config_hash)


def sweep_figure(result, path, config_hash=None):
    """Mean gap ratio against disorder width, one curve per size."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for length in result.lengths():
        cells = sorted(
            (c for c in result.cells if c.length == length), key=lambda c: c.dr
        )
        drs = [c.dr for c in cells]
        rs = [c.mean_r for c in cells]
        es = [c.se_r for c in cells]
        ax.errorbar(drs, rs, yerr=es, marker="o", ms=4, label=f"L={length}")
    ax.axhline(0.386, ls="--", color="tab:green", lw=1, label="Poisson")
    ax.axhline(0.53, ls="--", color="tab:red", lw=1, label="GOE")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\delta R / R_0$")
    ax.set_ylabel(r"$\langle r \rangle$")
    ax.legend(fontsize=8)
    return _save(fig, path, config_hash)


def sweep_entropy_figure(result, path, config_hash=None):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for length in result.lengths():
        cells = sorted(
            (c for c in result.cells if c.length == length), key=lambda c: c.dr
        )
        drs = [c.dr for c in cells]
        axes[0].errorbar(
            drs, [c.mean_entropy for c in cells],
            yerr=[c.se_entropy for c in cells], marker="o", ms=4, label=f"L={length}",
        )
        axes[1].plot(drs, [c.var_entropy for c in cells], marker="o", ms=4,
                     label=f"L={length}")
    for ax, ylabel in zip(axes, ("S (nats)", r"$\delta S^2$")):
        ax.set_xscale("log")
        ax.set_xlabel(r"$\delta R / R_0$")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
    return _save(fig, path, config_hash)


def collapse_figure(points, result, path, config_hash=None):
    """Rescaled collapse and the cost landscape."""
    from .disorder import _rescaled_x

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    x = _rescaled_x(points, result.dr_c, result.nu, result.form)
    for length in sorted({int(p) for p in points[:, 0]}):
        sel = points[:, 0] == length
        axes[0].plot(x[sel], points[sel, 2], "o-", ms=4, label=f"L={length}")
    axes[0].set_xlabel("rescaled distance")
    axes[0].set_ylabel("S")
    axes[0].set_title(
        rf"$\delta R_c$={result.dr_c:.4f}, $\nu$={result.nu:.3f}"
    )
    axes[0].legend(fontsize=8)
    im = axes[1].imshow(
        np.log10(result.cost_surface.T),
        origin="lower",
        aspect="auto",
        extent=(
            result.grid_dr_c[0], result.grid_dr_c[-1],
            result.grid_nu[0], result.grid_nu[-1],
        ),
        cmap="magma",
    )
    axes[1].plot([result.dr_c], [result.nu], "c*", ms=12)
    axes[1].set_xlabel(r"$\delta R_c$")
    axes[1].set_ylabel(r"$\nu$")
    fig.colorbar(im, ax=axes[1], label="log10 cost")
    return _save(fig, path, config_hash)
