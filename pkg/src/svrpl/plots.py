"""Figure rendering for trace files: objective and stationarity vs samples.

Figures are written next to the delimited output; rendering is optional and
never touches the optimization path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_trace_figures(traces, labels, out_prefix, phi_star=None):
    """Render two figures from parallel trace lists.

    traces: list of record sequences (TraceRecord-like, needing samples_g,
    objective, grad_map_sq); labels: one legend label per trace. Files are
    written as <out_prefix>_objective.png and <out_prefix>_gradmap.png;
    returns the written paths. When phi_star is given the objective panel
    shows the gap objective - phi_star on a log scale.
    """
    prefix = Path(out_prefix)
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for recs, label in zip(traces, labels):
        xs = [r.samples_g for r in recs]
        if phi_star is None:
            ys = [r.objective for r in recs]
        else:
            ys = [max(r.objective - phi_star, 1e-16) for r in recs]
        ax.plot(xs, ys, label=label)
    if phi_star is not None:
        ax.set_yscale("log")
        ax.set_ylabel("objective gap")
    else:
        ax.set_ylabel("objective")
    ax.set_xlabel("component map evaluations")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    obj_path = prefix.with_name(prefix.name + "_objective.png")
    fig.savefig(obj_path, dpi=130)
    plt.close(fig)
    written.append(obj_path)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for recs, label in zip(traces, labels):
        xs = [r.samples_g for r in recs]
        ys = [max(r.grad_map_sq, 1e-16) for r in recs]
        ax.plot(xs, ys, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("component map evaluations")
    ax.set_ylabel("squared gradient-mapping norm")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    gm_path = prefix.with_name(prefix.name + "_gradmap.png")
    fig.savefig(gm_path, dpi=130)
    plt.close(fig)
    written.append(gm_path)
    return written
