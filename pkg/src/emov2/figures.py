"""Figure rendering for CLI reports.

Each renderer writes a standalone PNG next to the delimited output the
command already produces. The CSV/PGM files remain the primary,
tested interface; figures are a convenience for eyeballing results.
Matplotlib is imported lazily with the Agg backend so headless use
never touches a display.
"""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_cost_figure(report, path: str) -> None:
    """Horizontal bars of multiply-accumulate totals per operation kind."""
    plt = _pyplot()
    by_kind = report.macs_by_kind()
    kinds = sorted(by_kind, key=by_kind.get)
    values = [by_kind[k] / 1e6 for k in kinds]
    fig, ax = plt.subplots(figsize=(6.4, 0.6 * max(len(kinds), 3) + 1.2))
    ax.barh(kinds, values, color="#4878d0")
    ax.set_xlabel("mult-adds (M)")
    ax.set_title(
        f"{report.total_params / 1e6:.2f}M params, "
        f"{report.total_macs / 1e6:.0f}M mult-adds"
    )
    for i, v in enumerate(values):
        ax.text(v, i, f" {v:.1f}", va="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_erf_figure(maps, coverage, path: str) -> None:
    """Per-depth center-pixel reach maps with coverage fractions."""
    plt = _pyplot()
    n = len(maps)
    assert n == len(coverage) and n > 0
    cols = min(n, 6)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.4 * rows), squeeze=False)
    for i in range(rows * cols):
        ax = axes[i // cols][i % cols]
        ax.set_xticks([])
        ax.set_yticks([])
        if i < n:
            ax.imshow(maps[i], cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
            ax.set_title(f"depth {i + 1}: {coverage[i]:.3f}", fontsize=9)
        else:
            ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_loss_figure(losses, path: str) -> None:
    """Training loss curve on a linear axis."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(range(1, len(losses) + 1), losses, color="#d65f5f", linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("cross-entropy")
    ax.set_title(f"toy training: {losses[0]:.3f} to {losses[-1]:.3f}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
