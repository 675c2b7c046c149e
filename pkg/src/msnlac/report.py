"""Matplotlib figures summarizing a run, rendered straight to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["save_convergence_figure"]


def save_convergence_figure(traces, path) -> Path:
    """Energy (and RFE, when traced) against the global iteration count,
    with pyramid levels concatenated coarse to fine."""
    traces = list(traces)
    has_rfe = any(r.rfe is not None for tr in traces for r in tr.records)
    nrows = 2 if has_rfe else 1
    fig, axes = plt.subplots(nrows, 1, figsize=(7, 3.0 * nrows), sharex=True, squeeze=False)
    ax_e = axes[0][0]
    ax_r = axes[-1][0] if has_rfe else None
    offset = 0
    for tr in traces:
        it = [offset + r.iteration for r in tr.records]
        label = f"level {tr.level} ({tr.stop_reason})"
        ax_e.plot(it, [r.energy for r in tr.records], label=label)
        if ax_r is not None:
            rfes = [(i, r.rfe) for i, r in zip(it, tr.records) if r.rfe is not None]
            if rfes:
                ax_r.plot([i for i, _ in rfes], [v for _, v in rfes])
        offset = it[-1]
    ax_e.set_ylabel("energy")
    ax_e.legend(fontsize=8)
    ax_e.grid(alpha=0.3)
    if ax_r is not None:
        ax_r.set_ylabel("region fitting error")
        ax_r.grid(alpha=0.3)
    axes[-1][0].set_xlabel("iteration (levels concatenated)")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out
