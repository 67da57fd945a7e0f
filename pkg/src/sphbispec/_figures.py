"""File-only matplotlib renderings for the Monte Carlo report paths.

Imported lazily by the CLI so that library users never pay the matplotlib
import cost; every renderer forces the Agg backend and writes a PNG.
"""

from __future__ import annotations

import math

import numpy as np

from .montecarlo import CltReport, ExperimentConfig, RateRow, _second_moment_scale


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _standard_normal_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def render_histograms(cfg: ExperimentConfig, values: np.ndarray, path: str) -> str:
    """One histogram per triple of the standardized statistic, N(0,1) overlay."""
    plt = _pyplot()
    n = len(cfg.triples)
    fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 3.4), squeeze=False)
    grid = np.linspace(-4.5, 4.5, 400)
    for j, (ax, t) in enumerate(zip(axes[0], cfg.triples)):
        x = values[:, j] / math.sqrt(_second_moment_scale(t, cfg.mode))
        ax.hist(x, bins=min(80, max(12, values.shape[0] // 25)), density=True, alpha=0.7)
        ax.plot(grid, _standard_normal_pdf(grid), lw=1.2)
        ax.set_title(f"l = {t.astuple()}", fontsize=10)
        ax.set_xlabel("standardized statistic")
    axes[0][0].set_ylabel("density")
    fig.suptitle(f"{cfg.mode}, N = {cfg.replications}, seed = {cfg.seed}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_cdf_comparison(report: CltReport, values: np.ndarray, path: str) -> str:
    """Empirical CDF of the standardized statistic against the normal CDF."""
    plt = _pyplot()
    cfg = report.config
    n = len(cfg.triples)
    fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 3.4), squeeze=False)
    for j, (ax, t, row) in enumerate(zip(axes[0], cfg.triples, report.rows)):
        x = np.sort(values[:, j] / math.sqrt(_second_moment_scale(t, cfg.mode)))
        ecdf = np.arange(1, x.size + 1) / x.size
        ax.plot(x, ecdf, lw=1.0, label="empirical")
        ax.plot(x, 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0))), lw=1.0, label="normal")
        ax.set_title(f"l = {t.astuple()}   KS = {row.ks_statistic:.4f}", fontsize=10)
        ax.set_xlabel("standardized statistic")
    axes[0][0].set_ylabel("CDF")
    axes[0][0].legend(fontsize=8)
    fig.suptitle(
        f"N = {cfg.replications}, 1% critical KS = {report.ks_critical_1pct:.4f}", fontsize=10
    )
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_rate_sweep(rows: tuple[RateRow, ...], p: int, path: str) -> str:
    """Scaled moment deviations against l, with the measured bracket marked."""
    plt = _pyplot()
    ls = [r.l for r in rows]
    known = [float(r.known_scaled_deviation) for r in rows]
    est = [float(r.estimated_scaled_deviation) for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(ls, known, marker="o", ms=3, lw=1.0, label="known $C_l$")
    ax.plot(ls, est, marker="s", ms=3, lw=1.0, label="estimated $C_l$")
    if any(v > 0 for v in known):
        ax.axhline(min(known), color="gray", lw=0.7, ls="--")
        ax.axhline(max(known), color="gray", lw=0.7, ls="--")
    ax.set_xlabel("l  (triple (l, l+1, l+2))")
    ax.set_ylabel(f"(2l+1) |moment deviation|, p = {p}")
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
