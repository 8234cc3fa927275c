"""FFT-domain color constancy: illuminant estimation on a chroma torus.

Linear images become toroidal log-chroma histograms, a learned filter
stack plus gain/bias map turns them into a posterior PDF, and a bivariate
von Mises fit reads off the illuminant mean and covariance.  Training is
two-stage L-BFGS over frequency-preconditioned parameters; per-frame
posteriors can be fused over time Kalman-style.
"""

from .bvm import BvmPosterior, DegenerateConcentrationError, TorusPdf, fit, nll_loss
from .chroma import (
    HistogramGeometry,
    HistogramStack,
    LinearImage,
    build_histogram,
    build_stack,
    compute_uv,
    edge_image,
    linear_image,
)
from .metrics import MetricSummary, angular_error, entropy_ordered_error, summarize
from .model import IlluminantEstimate, ModelParams, estimate, illuminant_rgb
from .smoothing import SmootherState, init_state, smooth_update
from .training import LabeledImage, TrainConfig, cross_validate, hyperparam_search, train

__all__ = [
    "BvmPosterior",
    "DegenerateConcentrationError",
    "HistogramGeometry",
    "HistogramStack",
    "IlluminantEstimate",
    "LabeledImage",
    "LinearImage",
    "MetricSummary",
    "ModelParams",
    "SmootherState",
    "TorusPdf",
    "TrainConfig",
    "angular_error",
    "build_histogram",
    "build_stack",
    "compute_uv",
    "cross_validate",
    "edge_image",
    "entropy_ordered_error",
    "estimate",
    "fit",
    "hyperparam_search",
    "illuminant_rgb",
    "init_state",
    "linear_image",
    "nll_loss",
    "smooth_update",
    "summarize",
    "train",
]

__version__ = "0.1.0"
