"""Command-line surface: train, predict, eval, smooth, render-model, search.

Outputs are deterministic for fixed inputs.  Reports are CSV plus a figure
rendered next to them; FFCC_THREADS caps per-image concurrency in predict
and eval.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io, reports
from .bvm import BvmPosterior
from .chroma import linear_image
from .metrics import entropy_ordered_error, summarize
from .model import DEALIAS_MODES, estimate
from .smoothing import SmootherState, init_state, smooth_update
from .training import (
    LAMBDA_KEYS,
    TrainConfig,
    cross_validate,
    evaluate_model,
    hyperparam_search,
    train,
)

CONFIG_KEYS = {
    "n": int,
    "h": float,
    "pretrain_iters": int,
    "refine_iters": int,
    "lbfgs_history": int,
    "dealias_mode": str,
    **{key: float for key in LAMBDA_KEYS},
}


def read_config(path) -> TrainConfig:
    """Key-value text config: one `key: value` per line, # comments."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in CONFIG_KEYS:
            raise SystemExit(f"{path}:{lineno}: unknown config line {raw.strip()!r}")
        values[key] = CONFIG_KEYS[key](value.strip())
    return TrainConfig(**values)


def write_config(path, config: TrainConfig) -> None:
    lines = [f"{key}: {getattr(config, key)}" for key in CONFIG_KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def read_search_grid(path) -> dict[str, list[float]]:
    """Candidate values per lambda: `lambda0_filter: 1e-4 1e-2 1.0` lines."""
    grid = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, values = line.partition(":")
        key = key.strip()
        if not sep or key not in LAMBDA_KEYS:
            raise SystemExit(f"{path}:{lineno}: unknown search key {raw.strip()!r}")
        grid[key] = [float(v) for v in values.replace(",", " ").split()]
    if not grid:
        raise SystemExit(f"{path}: no candidate values found")
    return grid


def _thread_count() -> int:
    raw = os.environ.get("FFCC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    threads = _thread_count()
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------- commands


def cmd_train(args) -> int:
    config = read_config(args.config) if args.config else TrainConfig()
    data = io.materialize(io.load_dataset(args.data_dir))
    if not data:
        print("error: dataset is empty", file=sys.stderr)
        return 1
    result = train(data, config)
    out = Path(args.output)
    io.save_model(out, result.params, config.dealias_mode, config=asdict(config))
    stem = out.parent / out.stem
    reports.save_loss_trace_csv(f"{stem}.pretrain_trace.csv", result.pretrain)
    reports.save_loss_trace_csv(f"{stem}.refine_trace.csv", result.refine)
    reports.plot_loss_traces(
        f"{stem}.loss_curves.png", {"pretrain": result.pretrain, "refine": result.refine}
    )
    print(f"wrote {out}")
    return 0


def cmd_predict(args) -> int:
    mf = io.load_model(args.model)
    mode = args.dealias or mf.dealias_mode
    missing = [p for p in args.images if not Path(p).is_file()]
    if missing:
        for p in missing:
            print(f"error: no such image: {p}", file=sys.stderr)
        return 1

    def one(path):
        img = linear_image(io.load_image(path, assume_srgb=args.assume_srgb))
        est = estimate(img, mf.params, dealias_mode=mode)
        mu, sig = est.posterior.mu, est.posterior.sigma
        vals = [mu[0], mu[1], sig[0, 0], sig[0, 1], sig[1, 1], est.entropy, *est.rgb]
        return path + "," + ",".join(f"{v:.12g}" for v in vals)

    rows = _map_ordered(one, list(args.images))
    print("image,mu_u,mu_v,s_uu,s_uv,s_vv,entropy,r,g,b")
    for row in rows:
        print(row)
    return 0


def cmd_eval(args) -> int:
    mf = io.load_model(args.model)
    data = io.materialize(io.load_dataset(args.data_dir))
    if not data:
        print("error: dataset is empty", file=sys.stderr)
        return 1
    if args.folds:
        config = TrainConfig(**mf.config) if mf.config else TrainConfig()
        cv = cross_validate(data, args.folds, config)
        predictions = cv.predictions
        pooled, eo = cv.pooled, cv.eo_error
    else:
        chunks = _map_ordered(
            lambda rec: evaluate_model([rec], mf.params, mf.dealias_mode)[0], data
        )
        predictions = list(chunks)
        pooled = summarize([p.error_deg for p in predictions])
        eo = entropy_ordered_error(
            [(p.error_deg, p.estimate.entropy) for p in predictions]
        )
    print(reports.format_metrics_table(pooled, eo))
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        reports.save_metrics_csv(out / "metrics.csv", pooled, eo)
        reports.save_predictions_csv(out / "predictions.csv", predictions)
        reports.plot_entropy_curve(
            out / "entropy_curve.png",
            [p.error_deg for p in predictions],
            [p.estimate.entropy for p in predictions],
        )
        print(f"wrote {out}/metrics.csv, predictions.csv, entropy_curve.png")
    return 0


def cmd_smooth(args) -> int:
    rows = io.read_posterior_csv(args.posteriors)
    state: SmootherState | None = None
    out_rows = []
    for frame, mu_u, mu_v, s_uu, s_uv, s_vv, _ in rows:
        obs = BvmPosterior(
            mu=np.array([mu_u, mu_v]), sigma=np.array([[s_uu, s_uv], [s_uv, s_vv]])
        )
        if state is None:
            state = init_state(obs, alpha=args.alpha)
        else:
            state = smooth_update(state, obs, period=args.period)
        det = float(np.linalg.det(state.sigma))
        out_rows.append(
            (
                frame,
                state.mu[0],
                state.mu[1],
                state.sigma[0, 0],
                state.sigma[0, 1],
                state.sigma[1, 1],
                0.5 * np.log(det),
            )
        )
    if args.output:
        io.write_posterior_csv(args.output, out_rows)
        print(f"wrote {args.output}")
    else:
        print(",".join(io.POSTERIOR_FIELDS))
        for frame, *vals in out_rows:
            print(str(frame) + "," + ",".join(f"{v:.12g}" for v in vals))
    return 0


def cmd_render_model(args) -> int:
    mf = io.load_model(args.model)
    written = reports.save_model_map_images(args.output, mf.params)
    print("\n".join(str(p) for p in written))
    return 0


def cmd_search(args) -> int:
    grid = read_search_grid(args.grid)
    config = read_config(args.config) if args.config else TrainConfig()
    data = io.materialize(io.load_dataset(args.data_dir))
    best, trace = hyperparam_search(data, grid, config=config, folds=args.folds)
    for lambdas, err in trace:
        print(json.dumps(lambdas) + f"  avg={err:.4f}")
    print(f"best avg error: {min(err for _, err in trace):.4f}")
    if args.output:
        write_config(args.output, best)
        print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffcc",
        description="FFT-domain color constancy: train and run illuminant "
        "estimation models with posterior covariance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a labeled dataset")
    p.add_argument("data_dir")
    p.add_argument("--config", help="key-value training config file")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="estimate illuminants for images")
    p.add_argument("model")
    p.add_argument("images", nargs="+")
    p.add_argument("--dealias", choices=DEALIAS_MODES, help="override the model's mode")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument(
        "--assume-srgb",
        action="store_true",
        help="linearize 8-bit inputs through the inverse sRGB curve",
    )
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a model (or cross-validate its config)")
    p.add_argument("model")
    p.add_argument("data_dir")
    p.add_argument("--folds", type=int, help="run k-fold cross-validation instead")
    p.add_argument("-o", "--output", help="directory for metrics.csv and figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("smooth", help="temporally smooth a posterior CSV")
    p.add_argument("posteriors", help="CSV with frame,mu_u,mu_v,s_uu,s_uv,s_vv,entropy")
    p.add_argument("--alpha", type=float, required=True, help="per-frame transition variance")
    p.add_argument(
        "--period",
        type=float,
        default=2.0,
        help="torus period for observation remapping; <= 0 disables",
    )
    p.add_argument("-o", "--output", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("render-model", help="render the learned grids as images")
    p.add_argument("model")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_render_model)

    p = sub.add_parser("search", help="cyclic coordinate descent over lambdas")
    p.add_argument("data_dir")
    p.add_argument("--grid", required=True, help="candidate values per lambda key")
    p.add_argument("--config", help="starting config file")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("-o", "--output", help="write the best config here")
    p.set_defaults(func=cmd_search)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (io.DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
