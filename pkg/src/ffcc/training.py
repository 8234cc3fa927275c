"""Two-stage batch training over preconditioned parameters.

Stage 1 minimizes a convex logistic loss against the delta histogram of
each ground-truth illuminant; stage 2 refines with the Gaussian NLL of the
fitted posterior.  All learned grids are parameterized as regularizer-
rescaled FFT vectors, so the smoothness penalty is plain L2 in the
optimization variables and the problem is far better conditioned.

Everything here is deterministic: parameters start at zero, histograms are
precomputed once, and L-BFGS with backtracking has no randomness, so two
runs on the same inputs produce bit-identical models.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import bvm, model
from .chroma import HistogramGeometry, LinearImage, build_stack, compute_uv
from .metrics import angular_error, entropy_ordered_error, summarize
from .precond import RegWeights, build_weights, from_preconditioned, grad_to_preconditioned

NUM_CHANNELS = 2
GRID_NAMES = ("filter", "filter", "gain", "bias")
LAMBDA_KEYS = (
    "lambda0_filter",
    "lambda1_filter",
    "lambda0_gain",
    "lambda1_gain",
    "lambda0_bias",
    "lambda1_bias",
)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters: one (lambda0, lambda1) pair per learned grid kind,
    iteration budgets, and the histogram geometry scale."""

    n: int = 64
    h: float = 1.0 / 32.0
    lambda0_filter: float = 1e-4
    lambda1_filter: float = 1e-2
    lambda0_gain: float = 1e-4
    lambda1_gain: float = 1e-2
    lambda0_bias: float = 1e-4
    lambda1_bias: float = 1e-2
    pretrain_iters: int = 16
    refine_iters: int = 64
    lbfgs_history: int = 10
    dealias_mode: str = "gray-light"

    def __post_init__(self):
        if self.pretrain_iters < 1 or self.refine_iters < 1:
            raise ValueError("iteration counts must be >= 1")
        for key in ("lambda0_filter", "lambda0_gain", "lambda0_bias"):
            if getattr(self, key) <= 0:
                raise ValueError(f"{key} must be > 0")
        if self.dealias_mode not in model.DEALIAS_MODES:
            raise ValueError(f"unknown de-alias mode {self.dealias_mode!r}")

    def lambdas(self) -> dict[str, float]:
        return {key: getattr(self, key) for key in LAMBDA_KEYS}


@dataclass
class OptState:
    """Optimizer trace: final flat parameters plus per-iteration history."""

    x: np.ndarray
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    line_search_failed: bool = False


@dataclass(frozen=True)
class LabeledImage:
    """In-memory training record: image, unit ground-truth illuminant, name."""

    name: str
    image: LinearImage
    label_rgb: np.ndarray


@dataclass(frozen=True)
class TrainingSample:
    """Per-image precomputation: histogram-stack FFT and label coordinates."""

    name: str
    stack_fft: np.ndarray  # (K, n, n) complex
    label_uv: np.ndarray  # (2,)
    label_bin: tuple[int, int]


@dataclass(frozen=True)
class TrainResult:
    params: model.ModelParams
    config: TrainConfig
    pretrain: OptState
    refine: OptState


class GridWeights:
    """The three regularizer weight vectors and flat pack/unpack helpers."""

    def __init__(self, config: TrainConfig):
        self.n = config.n
        self.filter = build_weights(config.n, config.lambda0_filter, config.lambda1_filter)
        self.gain = build_weights(config.n, config.lambda0_gain, config.lambda1_gain)
        self.bias = build_weights(config.n, config.lambda0_bias, config.lambda1_bias)

    @property
    def per_grid(self) -> tuple[RegWeights, ...]:
        return (self.filter, self.filter, self.gain, self.bias)

    @property
    def flat_size(self) -> int:
        return (NUM_CHANNELS + 2) * self.n**2

    def unpack(self, z: np.ndarray, geometry: HistogramGeometry) -> model.ModelParams:
        if z.size != self.flat_size:
            raise ValueError(f"parameter vector has length {z.size}, want {self.flat_size}")
        n2 = self.n**2
        grids = [
            from_preconditioned(z[k * n2 : (k + 1) * n2], w)
            for k, w in enumerate(self.per_grid)
        ]
        return model.ModelParams(
            geometry=geometry,
            filters=np.stack(grids[:NUM_CHANNELS]),
            gain_log=grids[NUM_CHANNELS],
            bias=grids[NUM_CHANNELS + 1],
        )

    def pack_grad(self, grid_grads) -> np.ndarray:
        return np.concatenate(
            [grad_to_preconditioned(g, w) for g, w in zip(grid_grads, self.per_grid)]
        )


def span_from_labels(labels_uv: np.ndarray, n: int, h: float) -> tuple[float, float]:
    """Histogram origin centering the label bounding box in the torus span."""
    lo = labels_uv.min(axis=0)
    hi = labels_uv.max(axis=0)
    period = n * h
    if np.any(hi - lo >= period):
        raise ValueError("ground-truth illuminants span more than the torus period")
    center = (lo + hi) / 2.0
    return float(center[0] - period / 2.0), float(center[1] - period / 2.0)


def prepare_samples(data: list[LabeledImage], geometry: HistogramGeometry) -> list[TrainingSample]:
    """Histograms are computed once per image; the optimizer never sees pixels."""
    samples = []
    for rec in data:
        stack = build_stack(rec.image, geometry)
        u, v = compute_uv(rec.label_rgb)
        i, j = geometry.bin_of(u, v)
        samples.append(
            TrainingSample(
                name=rec.name,
                stack_fft=np.fft.fft2(stack.channels),
                label_uv=np.array([u, v]),
                label_bin=(int(i), int(j)),
            )
        )
    return samples


def logistic_loss(pdf: bvm.TorusPdf, truth_uv, geom: HistogramGeometry):
    """Cross-entropy against the delta histogram of the true illuminant.

    Returns the loss and its gradient with respect to the pre-softmax
    logits, which for softmax + cross-entropy is simply P - P*.
    """
    truth_uv = np.asarray(truth_uv, dtype=np.float64)
    if not np.all(np.isfinite(truth_uv)):
        raise ValueError("ground-truth chroma must be finite")
    i, j = geom.bin_of(truth_uv[0], truth_uv[1])
    # a zero target bin means an infinite loss, which a line search rejects
    with np.errstate(divide="ignore"):
        loss = -float(np.log(pdf.p[i, j]))
    grad = pdf.p.copy()
    grad[i, j] -= 1.0
    return loss, grad


def _softmax_batch(Z: np.ndarray) -> np.ndarray:
    e = np.exp(Z - Z.max(axis=(1, 2), keepdims=True))
    return e / e.sum(axis=(1, 2), keepdims=True)


def data_loss(
    samples: list[TrainingSample],
    z: np.ndarray,
    geometry: HistogramGeometry,
    weights: GridWeights,
    stage: str,
) -> tuple[float, np.ndarray]:
    """Summed per-sample loss and its gradient w.r.t. the flat parameters.

    ``stage`` selects the logistic pretraining loss or the BVM refinement
    loss; both backpropagate through the softmax, the gain/bias maps, the
    FFT convolution, and the preconditioner.  Samples whose refined PDF is
    too diffuse for a BVM fit are skipped with a warning.
    """
    if stage not in ("pretrain", "refine"):
        raise ValueError(f"unknown stage {stage!r}")
    params = weights.unpack(z, geometry)
    gain = np.exp(params.gain_log)
    stack_fft = np.stack([s.stack_fft for s in samples])  # (S, K, n, n)
    conv = np.fft.ifft2(
        np.einsum("skij,kij->sij", stack_fft, np.fft.fft2(params.filters))
    ).real
    P = _softmax_batch(params.bias + gain * conv)

    total = 0.0
    dZ = np.empty_like(P)
    if stage == "pretrain":
        dZ[:] = P
        with np.errstate(divide="ignore"):
            for s, sample in enumerate(samples):
                i, j = sample.label_bin
                total -= float(np.log(P[s, i, j]))
                dZ[s, i, j] -= 1.0
    else:
        for s, sample in enumerate(samples):
            pdf = bvm.TorusPdf(p=P[s], geometry=geometry)
            try:
                loss_s, dP = bvm.loss_backward(pdf, sample.label_uv)
            except bvm.DegenerateConcentrationError:
                warnings.warn(
                    f"sample {sample.name!r}: PDF too diffuse for a BVM fit; skipped",
                    stacklevel=2,
                )
                dZ[s] = 0.0
                continue
            total += loss_s
            dZ[s] = P[s] * (dP - np.sum(dP * P[s]))

    d_bias = dZ.sum(axis=0)
    d_gain_log = (dZ * conv).sum(axis=0) * gain
    dH_fft = np.fft.fft2(dZ * gain)
    dF = np.fft.ifft2(np.einsum("sij,skij->kij", dH_fft, np.conj(stack_fft))).real
    grad = weights.pack_grad([dF[0], dF[1], d_gain_log, d_bias])
    return total, grad


def lbfgs_minimize(
    objective,
    x0: np.ndarray,
    iters: int,
    history: int = 10,
    c1: float = 1e-4,
    backtrack: float = 0.5,
    max_backtracks: int = 50,
    grad_tol: float = 1e-12,
) -> tuple[np.ndarray, OptState]:
    """Two-loop-recursion L-BFGS with an Armijo backtracking line search.

    ``objective(x)`` returns (loss, gradient).  Accepted losses are
    monotone non-increasing; curvature pairs with non-positive s.y are
    discarded.  On line-search failure the best iterate so far is returned
    with the failure flagged in the trace.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = objective(x)
    best_x, best_f = x.copy(), f
    state = OptState(x=x, losses=[f], grad_norms=[float(np.linalg.norm(g))])
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    for _ in range(iters):
        gnorm = np.linalg.norm(g)
        if gnorm <= grad_tol:
            break
        # two-loop recursion for the search direction
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if s_hist:
            gamma = np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        d = -q
        slope = np.dot(g, d)
        if slope >= 0.0:
            d = -g
            slope = -gnorm**2

        t = 1.0 if s_hist else min(1.0, 1.0 / gnorm)
        accepted = False
        for _ in range(max_backtracks):
            f_new, g_new = objective(x + t * d)
            if np.isfinite(f_new) and f_new <= f + c1 * t * slope:
                accepted = True
                break
            t *= backtrack
        if not accepted:
            state.line_search_failed = True
            break

        x_new = x + t * d
        s = x_new - x
        y = g_new - g
        sy = np.dot(s, y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        state.losses.append(f)
        state.grad_norms.append(float(np.linalg.norm(g)))
        if f < best_f:
            best_f, best_x = f, x.copy()

    state.x = best_x
    return best_x, state


def _stage_objective(samples, geometry, weights, stage):
    def objective(z):
        loss, grad = data_loss(samples, z, geometry, weights, stage)
        return loss + float(np.dot(z, z)), grad + 2.0 * z

    return objective


def train(data: list[LabeledImage], config: TrainConfig) -> TrainResult:
    """Zero-initialize, pretrain on the convex logistic objective, then
    refine on the BVM loss; deterministic end to end."""
    if not data:
        raise ValueError("cannot train on an empty dataset")
    labels_uv = np.array([compute_uv(rec.label_rgb) for rec in data])
    u_lo, v_lo = span_from_labels(labels_uv, config.n, config.h)
    geometry = HistogramGeometry(n=config.n, h=config.h, u_lo=u_lo, v_lo=v_lo)
    samples = prepare_samples(data, geometry)
    weights = GridWeights(config)

    z0 = np.zeros(weights.flat_size)
    z_pre, pre_state = lbfgs_minimize(
        _stage_objective(samples, geometry, weights, "pretrain"),
        z0,
        iters=config.pretrain_iters,
        history=config.lbfgs_history,
    )
    z_fin, fin_state = lbfgs_minimize(
        _stage_objective(samples, geometry, weights, "refine"),
        z_pre,
        iters=config.refine_iters,
        history=config.lbfgs_history,
    )
    return TrainResult(
        params=weights.unpack(z_fin, geometry),
        config=config,
        pretrain=pre_state,
        refine=fin_state,
    )


def fold_assignment(names: list[str], folds: int) -> list[list[int]]:
    """Contiguous blocks over the name-sorted order; deterministic."""
    order = np.argsort(np.asarray(names, dtype=object), kind="stable")
    return [list(chunk) for chunk in np.array_split(order, folds)]


@dataclass(frozen=True)
class Prediction:
    name: str
    estimate: model.IlluminantEstimate
    error_deg: float


@dataclass(frozen=True)
class CvResult:
    fold_summaries: list
    pooled: object
    eo_error: float
    predictions: list[Prediction]


def evaluate_model(
    data: list[LabeledImage], params: model.ModelParams, dealias_mode: str
) -> list[Prediction]:
    preds = []
    for rec in data:
        est = model.estimate(rec.image, params, dealias_mode=dealias_mode)
        preds.append(
            Prediction(
                name=rec.name,
                estimate=est,
                error_deg=angular_error(est.rgb, rec.label_rgb),
            )
        )
    return preds


def cross_validate(data: list[LabeledImage], folds: int, config: TrainConfig) -> CvResult:
    """Train on k-1 folds, evaluate on the held-out fold, pool the results."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(data):
        raise ValueError(f"{folds} folds exceed the {len(data)} available samples")
    assignment = fold_assignment([rec.name for rec in data], folds)
    fold_summaries = []
    predictions: list[Prediction] = []
    for held_out in assignment:
        held_set = set(held_out)
        train_data = [rec for k, rec in enumerate(data) if k not in held_set]
        test_data = [data[k] for k in held_out]
        result = train(train_data, config)
        preds = evaluate_model(test_data, result.params, config.dealias_mode)
        predictions.extend(preds)
        fold_summaries.append(summarize([p.error_deg for p in preds]))
    pooled = summarize([p.error_deg for p in predictions])
    eo = entropy_ordered_error([(p.error_deg, p.estimate.entropy) for p in predictions])
    return CvResult(
        fold_summaries=fold_summaries, pooled=pooled, eo_error=eo, predictions=predictions
    )


def hyperparam_search(
    data: list[LabeledImage],
    candidates: dict[str, list[float]],
    config: TrainConfig | None = None,
    folds: int = 3,
    max_sweeps: int = 4,
):
    """Cyclic coordinate descent over the regularizer strengths.

    One lambda is varied at a time against the cross-validated "avg" error
    (geometric mean of the five metrics); the incumbent is kept on ties, so
    the best error never increases.  Returns (best config, trace rows).
    """
    unknown = set(candidates) - set(LAMBDA_KEYS)
    if unknown:
        raise ValueError(f"unknown hyperparameter keys: {sorted(unknown)}")
    incumbent = config if config is not None else TrainConfig()
    cache: dict[tuple, float] = {}

    def score(cfg: TrainConfig) -> float:
        key = tuple(cfg.lambdas()[k] for k in LAMBDA_KEYS)
        if key not in cache:
            cache[key] = cross_validate(data, folds, cfg).pooled.avg
        return cache[key]

    best = score(incumbent)
    trace = [(incumbent.lambdas(), best)]
    for _ in range(max_sweeps):
        improved = False
        for key in LAMBDA_KEYS:
            if key not in candidates:
                continue
            for value in candidates[key]:
                trial = replace(incumbent, **{key: float(value)})
                err = score(trial)
                trace.append((trial.lambdas(), err))
                if err < best:
                    best = err
                    incumbent = trial
                    improved = True
        if not improved:
            break
    return incumbent, trace
