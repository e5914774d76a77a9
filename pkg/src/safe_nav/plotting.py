"""Figures for a finished run: the plane view and the time signals.

Figures are built on ``matplotlib.figure.Figure`` directly (no pyplot state),
so rendering is safe inside batch worker processes.
"""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .cbf import obstacle_state
from .sim import SimResult

FONT_SIZE = 10
STYLE = {
    "font.size": FONT_SIZE,
    "axes.titlesize": FONT_SIZE,
    "axes.labelsize": FONT_SIZE,
    "legend.fontsize": FONT_SIZE - 2,
    "xtick.labelsize": FONT_SIZE - 1,
    "ytick.labelsize": FONT_SIZE - 1,
}


def _new_figure(width: float, height: float | None = None) -> Figure:
    if height is None:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    fig = Figure(figsize=(width, height), facecolor="w")
    FigureCanvasAgg(fig)
    return fig


def _png(fig: Figure) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, bbox_inches="tight")
    return buf.getvalue()


def plane_figure(result: SimResult) -> Figure:
    import matplotlib as mpl

    sc = result.scenario
    robot = sc.robot
    t = result.column("t")
    xy = np.array([(r.state.x_p, r.state.y_p) for r in result.records])
    centers = np.array([r.center for r in result.records])

    with mpl.rc_context(STYLE):
        fig = _new_figure(6, 6)
        ax = fig.add_subplot(111)
        t_end = float(t[-1])
        for i, o in enumerate(sc.obstacles):
            pos, _ = obstacle_state(o, t_end)
            ax.add_patch(Circle((pos.x, pos.y), o.radius, color="k", alpha=0.8,
                                label="obstacle" if i == 0 else None))
            if not o.is_static:
                path = np.array([(p.x, p.y) for p, _ in (obstacle_state(o, tk) for tk in t)])
                ax.plot(path[:, 0], path[:, 1], "k-", lw=0.8)
        marks = {"start": (sc.start.x_p, sc.start.y_p), "goal": (sc.goal.x_g, sc.goal.y_g)}
        for label, (x, y) in marks.items():
            ax.add_patch(Circle((x, y), robot.r_r, color="silver", alpha=0.7))
            ax.annotate(label, (x, y), ha="center", va="center", fontsize=FONT_SIZE - 2)
        ax.plot(xy[:, 0], xy[:, 1], "b-", lw=1.2, label="rear axle")
        ax.plot(centers[:, 0], centers[:, 1], "c--", lw=0.8, label="body center")
        ax.add_patch(Circle(tuple(centers[-1]), robot.r_r, fill=False, color="r", lw=1.5))
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_title(f"{sc.name}: {result.outcome.value} ({sc.controller.cbf.mode.value} CBF)")
        ax.grid(alpha=0.3)
        ax.legend(loc="upper left")
    return fig


def signals_figure(result: SimResult) -> Figure:
    import matplotlib as mpl

    sc = result.scenario
    t = result.column("t")
    v_max, w_max = sc.controller.u_bounds
    with mpl.rc_context(STYLE):
        fig = _new_figure(10, 7)
        axes = fig.subplots(2, 2, sharex=True)
        ax = axes[0, 0]
        ax.plot(t, result.column("v"), "b-", label="v [m/s]")
        ax.plot(t, result.column("omega"), "r-", label="ω [rad/s]")
        for bound, color in ((v_max, "b"), (w_max, "r")):
            ax.axhline(bound, color=color, ls="--", lw=0.8)
            ax.axhline(-bound, color=color, ls="--", lw=0.8)
        ax.set_ylabel("control")
        ax.legend()

        ax = axes[0, 1]
        ax.semilogy(t, np.maximum(result.column("V"), 1e-12), "k-")
        ax.set_ylabel("V")

        ax = axes[1, 0]
        ax.plot(t, result.column("delta"), "m-")
        ax.set_ylabel("δ")

        ax = axes[1, 1]
        H = result.h_matrix()
        for i in range(H.shape[1]):
            ax.plot(t, H[:, i], label=f"h_{i}")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_ylabel("h (body center)")
        if H.shape[1]:
            ax.legend()
        for ax in axes[1]:
            ax.set_xlabel("t [s]")
        for ax in axes.flat:
            ax.grid(alpha=0.3)
        fig.tight_layout()
    return fig


def render_figures(result: SimResult, out_dir: str | Path) -> dict[str, Path]:
    from .scenario_io import atomic_write

    out = Path(out_dir)
    paths = {"plane": out / "trajectory.png", "signals": out / "signals.png"}
    atomic_write(paths["plane"], _png(plane_figure(result)))
    atomic_write(paths["signals"], _png(signals_figure(result)))
    return paths
