"""Report rendering: delimited outputs with matplotlib figures alongside.

Every CLI report path writes machine-readable CSV first and then a figure
of the same data, so results can be diffed and eyeballed from one run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from PIL import Image

from .io import render_model_maps
from .metrics import METRIC_NAMES, MetricSummary


def save_loss_trace_csv(path, state) -> None:
    """Per-iteration trace of one optimizer stage: iteration, loss, |grad|."""
    lines = ["iteration,loss,grad_norm"]
    for k, (loss, gnorm) in enumerate(zip(state.losses, state.grad_norms)):
        lines.append(f"{k},{loss:.12g},{gnorm:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def plot_loss_traces(path, stages: dict) -> None:
    """Loss-vs-iteration curves for the training stages, one panel each."""
    fig, axes = plt.subplots(1, len(stages), figsize=(4.5 * len(stages), 3.2))
    if len(stages) == 1:
        axes = [axes]
    for ax, (name, state) in zip(axes, stages.items()):
        ax.plot(range(len(state.losses)), state.losses, marker=".", lw=1.2)
        ax.set_title(name)
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_csv(path, summary: MetricSummary, eo_error: float | None = None) -> None:
    names = list(METRIC_NAMES)
    values = [getattr(summary, m) for m in names]
    if eo_error is not None:
        names.append("eo_error")
        values.append(eo_error)
    lines = [",".join(names), ",".join(f"{v:.12g}" for v in values)]
    Path(path).write_text("\n".join(lines) + "\n")


def format_metrics_table(summary: MetricSummary, eo_error: float | None = None) -> str:
    """Aligned text table of the error statistics, in degrees."""
    rows = [(name, getattr(summary, name)) for name in METRIC_NAMES]
    if eo_error is not None:
        rows.append(("eo_error", eo_error))
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value:8.4f}" for name, value in rows)


def save_predictions_csv(path, predictions) -> None:
    lines = ["image,error_deg,mu_u,mu_v,s_uu,s_uv,s_vv,entropy,r,g,b"]
    for p in predictions:
        est = p.estimate
        mu, sig = est.posterior.mu, est.posterior.sigma
        vals = [p.error_deg, mu[0], mu[1], sig[0, 0], sig[0, 1], sig[1, 1], est.entropy, *est.rgb]
        lines.append(p.name + "," + ",".join(f"{v:.12g}" for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def plot_entropy_curve(path, errors, entropies) -> None:
    """Cumulative error ordered by ascending entropy vs the no-skill diagonal."""
    order = np.argsort(np.asarray(entropies), kind="stable")
    cum = np.concatenate([[0.0], np.cumsum(np.asarray(errors, dtype=float)[order])])
    frac = np.linspace(0.0, 1.0, cum.size)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.fill_between(frac, cum, color="0.8")
    ax.plot(frac, cum, color="0.2", lw=1.5, label="entropy-ordered")
    ax.plot([0, 1], [0, cum[-1]], "k--", lw=1.0, label="uninformative")
    ax.set_xlabel("fraction of images, ascending entropy")
    ax.set_ylabel("cumulative error (deg)")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_model_map_images(out_dir, params) -> list[Path]:
    """Write the learned-grid maps both as PNGs and as one labeled figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    maps = render_model_maps(params)
    written = []
    for name, image in maps.items():
        path = out_dir / f"{name}.png"
        Image.fromarray(image, mode="L").save(path)
        written.append(path)
    fig, axes = plt.subplots(1, len(maps), figsize=(2.6 * len(maps), 2.9))
    if len(maps) == 1:
        axes = [axes]
    for ax, (name, image) in zip(axes, maps.items()):
        ax.imshow(image, cmap="gray", interpolation="nearest")
        ax.set_title(name, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    combined = out_dir / "model_maps.png"
    fig.savefig(combined, dpi=120)
    plt.close(fig)
    written.append(combined)
    return written
