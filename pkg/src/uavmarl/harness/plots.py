"""Reward curves and top-down trajectory views rendered to SVG."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from uavmarl.errors import DomainError  # noqa: E402

# fixed salt so identical inputs give byte-identical SVG files
SVG_RC = {"svg.hashsalt": "uavmarl", "svg.fonttype": "none"}


def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` points; the first entries average what is available."""
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise DomainError("window must be >= 1")
    if window == 1 or x.size == 0:
        return x.copy()
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def reward_curves(series: Mapping[str, np.ndarray]):
    """Figure with one line per labelled series. Each line carries its label as ``gid``."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, y in series.items():
        y = np.asarray(y, dtype=float)
        (line,) = ax.plot(np.arange(y.size), y, label=label, linewidth=1.2)
        line.set_gid(label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean episode reward")
    ax.grid(alpha=0.3)
    if series:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def trajectory_figure(trace: Mapping[str, np.ndarray], last_k: int):
    """Top-down view of the final ``last_k`` steps of a trace.

    Draws one path per UAV, one marker per GU at its final position and one
    text note per GU giving its serving UAV at the window start and end.
    """
    M = sum(1 for k in trace if k.startswith("uav") and k.endswith("_x"))
    N = sum(1 for k in trace if k.startswith("gu") and k.endswith("_x"))
    T_ = len(trace["t"])
    if last_k < 1:
        raise DomainError("last_k must be >= 1")
    if T_ < last_k:
        raise DomainError(f"trajectory has {T_} steps, fewer than last_k={last_k}")
    sl = slice(T_ - last_k, T_)
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    for m in range(M):
        x, y = trace[f"uav{m}_x"][sl], trace[f"uav{m}_y"][sl]
        (line,) = ax.plot(x, y, "-", linewidth=1.5, label=f"UAV {m}")
        line.set_gid(f"uav-path-{m}")
        ax.plot([x[-1]], [y[-1]], "^", color=line.get_color(), markersize=8)[0].set_gid(f"uav-end-{m}")

    def server(n, row):
        col = [trace[f"sigma_{m}_{n}"][row] for m in range(M)]
        return int(np.argmax(col)) if max(col) > 0 else -1

    for n in range(N):
        gx, gy = trace[f"gu{n}_x"][T_ - 1], trace[f"gu{n}_y"][T_ - 1]
        ax.plot([gx], [gy], "o", color="0.3", markersize=5)[0].set_gid(f"gu-{n}")
        start, end = server(n, T_ - last_k), server(n, T_ - 1)
        ax.annotate(f"GU{n}: U{start}→U{end}", (gx, gy), textcoords="offset points", xytext=(4, 4),
                    fontsize=7, gid=f"gu-note-{n}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=7, loc="best")
    ax.set_title(f"last {last_k} steps")
    fig.tight_layout()
    return fig


def save_svg(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def reward_series(metrics_by_label: Mapping[str, Sequence[Mapping[str, np.ndarray]]], window: int,
                  column: str = "mean_episode_reward") -> dict[str, np.ndarray]:
    """Seed-averaged, smoothed per-agent curves keyed ``"<label> agent <m>"``."""
    out: dict[str, np.ndarray] = {}
    for label, runs in metrics_by_label.items():
        if not runs:
            continue
        M = int(max(r["agent"].max() for r in runs)) + 1
        for m in range(M):
            curves = [r[column][r["agent"] == m] for r in runs]
            n = min(len(c) for c in curves)
            if n == 0:
                raise DomainError(f"{label}: no records for agent {m}")
            y = np.mean([c[:n] for c in curves], axis=0)
            out[f"{label} agent {m}"] = moving_average(y, window)
    if not out:
        raise DomainError("no metric records to plot")
    return out
