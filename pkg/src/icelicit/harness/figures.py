"""Matplotlib figures written next to the CSV/JSON reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no software/date stamps so identical data gives identical bytes
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def error_histogram(errors, eps: float, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(np.asarray(errors, dtype=float), bins=30, color="0.4")
    ax.axvline(eps, color="C3", ls="--", label=f"eps = {eps:g}")
    ax.set_xlabel("error d(theta, hypothesis)")
    ax.set_ylabel("trials")
    ax.legend()
    return _save(fig, path)


def gain_bars(labels, gains, se, bound: float, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    x = np.arange(len(gains))
    ax.bar(x, gains, yerr=3 * np.asarray(se), color="0.5", ecolor="0.2")
    ax.axhline(bound, color="C3", ls="--", label="lambda^2 / 2")
    ax.axhline(0, color="k", lw=0.8)
    ax.set_xticks(x[:: max(1, len(x) // 10)])
    ax.set_xticklabels([labels[i] for i in x[:: max(1, len(x) // 10)]], rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("gain over truthful")
    ax.legend()
    return _save(fig, path)


def budgets_curve(ratios, gains, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ratios, gains, "o-", ms=3)
    ax.axhline(0, color="k", lw=0.8)
    ax.axvline(0.25, color="0.6", ls=":")
    ax.set_xlabel("alpha_1 / alpha_2")
    ax.set_ylabel("manipulation gain")
    return _save(fig, path)


def mpl_report(ce, report, truthful, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.step(ce, truthful, where="post", label="truthful stop")
    if report is not None:
        ax.plot(ce, report, "o", ms=4, label="best response")
    ax.set_xlabel("certainty equivalent")
    ax.set_ylabel("stop index")
    ax.legend()
    return _save(fig, path)


def sweep_lines(table, path: Path) -> Path:
    fig, ax = plt.subplots(1, 2, figsize=(8, 3.5))
    for eps in sorted({r["eps"] for r in table}):
        sub = [r for r in table if r["eps"] == eps]
        ns = [r["n"] for r in sub]
        ax[0].plot(ns, [r["success_rate"] for r in sub], "o-", label=f"eps = {eps:g}")
        ax[1].plot(ns, [r["mean_queries"] for r in sub], "o-", label=f"eps = {eps:g}")
    ax[0].set_xlabel("n")
    ax[0].set_ylabel("success rate")
    ax[1].set_xlabel("n")
    ax[1].set_ylabel("mean queries")
    ax[0].legend()
    return _save(fig, path)


def render(figs: dict, outdir: Path) -> list[Path]:
    """Render whatever figure data an experiment produced."""
    out = []
    outdir = Path(outdir)
    if "errors" in figs:
        out.append(error_histogram(figs["errors"]["errors"], figs["errors"]["eps"], outdir / "errors.png"))
    if "gains" in figs:
        g = figs["gains"]
        out.append(gain_bars(g["labels"], g["gains"], g["se"], g["bound"], outdir / "gains.png"))
    if "budgets" in figs:
        out.append(budgets_curve(figs["budgets"]["ratios"], figs["budgets"]["gains"], outdir / "budgets.png"))
    if "mpl_report" in figs:
        m = figs["mpl_report"]
        out.append(mpl_report(m["ce"], m["report"], m["truthful"], outdir / "mpl_report.png"))
    if "sweep" in figs:
        out.append(sweep_lines(figs["sweep"], outdir / "sweep.png"))
    return out
