"""Figure rendering for synthesized tubes and simulated traces.

Renders to SVG with a fixed hash salt and no date metadata so repeated
runs on identical inputs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Rectangle

from .geometry import Ball2, Rect
from .scenario import Scenario, segment_environment
from .sim import SimTrace
from .tube import Tube, eval_center, eval_radius

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _configure() -> None:
    plt.rcParams["svg.hashsalt"] = "stt-toolkit"
    plt.rcParams["svg.fonttype"] = "none"


def _draw_shape(ax, shape, **kw) -> None:
    if isinstance(shape, Ball2):
        ax.add_patch(Circle(shape.center, shape.radius, **kw))
    else:
        ax.add_patch(Rectangle(shape.lo, shape.hi[0] - shape.lo[0],
                               shape.hi[1] - shape.lo[1], **kw))


def plot_trajectory(scenario: Scenario, tubes: list[Tube], traces: list[SimTrace],
                    path) -> None:
    """Workspace, obstacles, tube cross-sections, and robot paths."""
    _configure()
    fig, ax = plt.subplots(figsize=(7.2, 7.2))
    ws = scenario.workspace
    _draw_shape(ax, ws, fill=False, ec="black", lw=1.4)
    if isinstance(ws, Ball2):
        pad = 0.06 * ws.radius
        ax.set_xlim(ws.center[0] - ws.radius - pad, ws.center[0] + ws.radius + pad)
        ax.set_ylim(ws.center[1] - ws.radius - pad, ws.center[1] + ws.radius + pad)
    else:
        pad = 0.05 * max(ws.hi[0] - ws.lo[0], ws.hi[1] - ws.lo[1])
        ax.set_xlim(ws.lo[0] - pad, ws.hi[0] + pad)
        ax.set_ylim(ws.lo[1] - pad, ws.hi[1] + pad)

    total = sum(seg.t_c for seg in scenario.mission)
    moving = [obs for obs in scenario.obstacles if not _is_static(obs)]
    static = [obs for obs in scenario.obstacles if _is_static(obs)]
    for obs in static:
        _draw_shape(ax, obs.shape, fc="0.45", ec="0.25", lw=0.8)
    for obs in moving:
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            alpha = 0.15 + 0.55 * frac
            _draw_shape(ax, obs.shape_at(frac * total), fill=False,
                        ec="firebrick", lw=1.0, alpha=alpha)

    for k, tube in enumerate(tubes):
        t_c = tube.basis.t_c
        for i in range(121):
            t = t_c * i / 120.0
            c = eval_center(tube, t)
            ax.add_patch(Circle(c, eval_radius(tube, t), fc="tab:blue",
                                ec="none", alpha=0.035))
        cs = [eval_center(tube, t_c * i / 200.0) for i in range(201)]
        ax.plot([p[0] for p in cs], [p[1] for p in cs], "--", color="tab:blue",
                lw=1.0, alpha=0.8)

    _draw_shape(ax, scenario.start, fill=False, ec="seagreen", lw=1.6)
    for seg in scenario.mission:
        _draw_shape(ax, seg.target, fill=False, ec="darkorange", lw=1.6)

    for i, trace in enumerate(traces):
        ax.plot(trace.column("x1"), trace.column("x2"), lw=1.1,
                color=plt.cm.viridis(0.15 + 0.7 * (i / max(1, len(traces) - 1))
                                     if len(traces) > 1 else 0.4),
                label=f"trace {i}")
    if traces:
        ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(scenario.name)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def _is_static(obs) -> bool:
    from .geometry import Static
    return isinstance(obs.motion, Static)


def plot_errors(scenario: Scenario, trace: SimTrace, path) -> None:
    """Normalized errors against their funnels over the mission timeline."""
    _configure()
    fig, (ax_d, ax_t) = plt.subplots(2, 1, figsize=(7.2, 5.4), sharex=True)
    t = trace.column("t")
    ax_d.plot(t, trace.column("e_d"), color="tab:blue", lw=1.1, label="e_d")
    ax_d.plot(t, trace.column("rho_d"), color="black", lw=1.0, ls="--", label="funnel")
    ax_d.axhline(1.0, color="firebrick", lw=0.8, ls=":", label="tube boundary")
    ax_d.set_ylabel("radial error")
    ax_d.legend(loc="upper right", fontsize=8)
    rho_t = trace.column("rho_theta")
    ax_t.plot(t, trace.column("e_theta"), color="tab:green", lw=1.1, label="e_theta")
    ax_t.plot(t, rho_t, color="black", lw=1.0, ls="--", label="funnel")
    ax_t.plot(t, [-v for v in rho_t], color="black", lw=1.0, ls="--")
    ax_t.set_ylabel("heading error")
    ax_t.set_xlabel("t")
    ax_t.legend(loc="upper right", fontsize=8)
    for ax in (ax_d, ax_t):
        offset = 0.0
        for seg in scenario.mission[:-1]:
            offset += seg.t_c
            ax.axvline(offset, color="0.7", lw=0.8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
