"""Figure rendering for the CLI report path. All figures are written to files
next to the delimited output; nothing is shown interactively."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_accuracy_matrix(A, path, title="accuracy matrix"):
    fig, ax = plt.subplots(figsize=(5, 4))
    masked = np.ma.masked_invalid(np.tril(np.full_like(A, np.nan), -1) + np.triu(A))
    im = ax.imshow(masked, vmin=0, vmax=1, cmap="viridis")
    ax.set_xlabel("after task")
    ax.set_ylabel("evaluated task")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="top-1 accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_spectrum(eigenvalues, path, title="Gram spectrum"):
    eig = np.asarray(eigenvalues)
    fig, ax = plt.subplots(figsize=(5, 4))
    positive = eig > 0
    ax.semilogy(np.arange(1, len(eig) + 1)[positive], eig[positive], ".-")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ledger(rows, path):
    """Per-task accumulative error and eigengap ratio."""
    tasks = [r["task"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].plot(tasks, [r["a"] for r in rows], "o-")
    axes[0].set_xlabel("task")
    axes[0].set_ylabel("accumulative error")
    gammas = [r["gamma"] for r in rows]
    finite = [g if np.isfinite(g) else np.nan for g in gammas]
    axes[1].semilogy(tasks, finite, "o-")
    axes[1].set_xlabel("task")
    axes[1].set_ylabel("eigengap ratio")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
