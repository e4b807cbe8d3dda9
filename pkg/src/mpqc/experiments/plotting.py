"""SVG line charts of experiment results (matplotlib, Agg backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "mpqc",      # stable element ids, so reruns give identical files
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 7,
})

FIGSIZE = (5.0, 3.2)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_fidelity(path, series, title=""):
    """``series``: list of ``(label, fidelity array)``; plots infidelity on a log axis."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, fid in series:
        infid = np.maximum(1.0 - np.asarray(fid), 1e-16)
        ax.semilogy(np.arange(len(infid)), infid, label=label, lw=1.2)
    ax.set_xlabel("step t")
    ax.set_ylabel("1 - fidelity")
    ax.set_title(title)
    if series:
        ax.legend(loc="best")
    _save(fig, path)


def plot_inputs(path, inputs, box_lo, box_hi, title=""):
    """Piecewise-constant inputs against time step, with the box drawn dashed."""
    inputs = np.atleast_2d(inputs)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    t = np.arange(inputs.shape[0] + 1)
    for j in range(inputs.shape[1]):
        ax.step(t, np.append(inputs[:, j], inputs[-1, j]), where="post", label=f"u_{j + 1}", lw=1.2)
    for b in np.unique(np.concatenate([box_lo, box_hi])):
        if np.isfinite(b):
            ax.axhline(b, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("step t")
    ax.set_ylabel("input")
    ax.set_title(title)
    ax.legend(loc="best")
    _save(fig, path)


def plot_cost_vs_L(path, rows, title=""):
    """``rows`` from :func:`compare_qoc_vs_mpqc`; one panel for cost, one for time."""
    Ls = [r["L"] for r in rows]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(FIGSIZE[0] * 1.6, FIGSIZE[1]))
    a1.plot(Ls, [r["mpqc_cost"] for r in rows], "s-", label="MPQC", lw=1.2)
    a1.axhline(rows[0]["qoc_cost"], color="k", ls="--", lw=1.0, label="QOC")
    a1.set_xscale("log")
    a1.set_xlabel("prediction horizon L")
    a1.set_ylabel("total cost")
    a1.legend(loc="best")
    a2.plot(Ls, [r["mpqc_time"] for r in rows], "s-", label="MPQC", lw=1.2)
    a2.axhline(rows[0]["qoc_time"], color="k", ls="--", lw=1.0, label="QOC")
    a2.set_xscale("log")
    a2.set_yscale("log")
    a2.set_xlabel("prediction horizon L")
    a2.set_ylabel("solver time [s]")
    a2.legend(loc="best")
    fig.suptitle(title)
    _save(fig, path)


def plot_fidelity_vs_eps(path, series, title=""):
    """``series``: list of ``(label, eps array, final fidelity array)``."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, eps, fid in series:
        ax.plot(eps, fid, "o-", label=label, ms=3, lw=1.2)
    ax.set_xlabel("drift error eps")
    ax.set_ylabel("final fidelity")
    ax.set_title(title)
    ax.legend(loc="best")
    _save(fig, path)
