"""Figure rendering for sampled frames (headless backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evolution import FieldFrame

__all__ = ["render_frame_figures"]


def _display(values: np.ndarray) -> tuple[np.ndarray, str]:
    """Real part when the field is essentially real, magnitude otherwise."""
    if np.nanmax(np.abs(values.imag)) <= 1e-12 * (np.nanmax(np.abs(values)) + 1.0):
        return values.real, "re"
    return np.abs(values), "abs"


def render_frame_figures(frame: FieldFrame, base: str) -> list[str]:
    """Write a heatmap and a few t-row profiles of the leading field.

    Files land next to `base`: <base>_<field>_map.png and
    <base>_<field>_profiles.png.  Masked nodes render as gaps.
    """
    name = frame.field_order[0]
    raw = frame.fields[name].copy()
    raw[frame.mask] = np.nan
    vals, kind = _display(raw)
    label = name if kind == "re" else f"|{name}|"
    paths = []

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    extent = (frame.x_grid[0], frame.x_grid[-1], frame.t_grid[0], frame.t_grid[-1])
    im = ax.imshow(vals, origin="lower", aspect="auto", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(f"{label}(x, t)")
    path = f"{base}_{name}_map.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(path)

    nt = len(frame.t_grid)
    rows = sorted(set([0, nt // 2, nt - 1]))
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for i in rows:
        ax.plot(frame.x_grid, vals[i], label=f"t = {frame.t_grid[i]:.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel(label)
    ax.legend()
    ax.set_title(f"{label} profiles")
    fig.tight_layout()
    path = f"{base}_{name}_profiles.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(path)
    return paths
