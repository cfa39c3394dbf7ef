"""Score-distillation baseline: optimize one 3D motion through a 2D denoiser.

Each iteration projects the current 3D motion into one random camera, noises
the projection to a random timestep, asks the denoiser for the clean version,
and takes a single gradient step pulling the projection toward it:

    X <- X - step_size * grad ||P(X) - x0_hat||^2       (x0_hat held constant)

The residual has a closed form: with x_t = sqrt(abar) P(X) + sqrt(1-abar) eps,

    P(X) - x0_hat = (sqrt(1-abar)/sqrt(abar)) (eps_hat - eps),

so the gradient is 2 (sqrt(1-abar)/sqrt(abar)) J^T (eps_hat - eps) with
J = dP/dX, the usual score-distillation update. Unlike the ancestral sampler
there is no per-step multi-view agreement, which is exactly why it serves as
the baseline: each step sees a single view and the timesteps arrive in random
order rather than as one coherent denoising trajectory.

The objective lives in the denoiser's standardized model space; projections
are converted with the denoiser's input_mean/input_scale before comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffusion as dfn
from .errors import BadConfig, NonFiniteState, NonPositiveDepth
from .geometry import (
    DEFAULT_ELEVATION,
    camera_from_angles,
    perspective_jacobian,
    perspective_project,
)
from .mas import _check_schedule_match, _model_views

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SdsConfig:
    iterations: int = 200
    step_size: float = 0.05
    elevation: float = DEFAULT_ELEVATION
    camera_distance: float = 7.0
    focal: float | None = None
    T: int = 100
    init_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise BadConfig(f"iterations must be >= 1, got {self.iterations}")
        if not self.step_size > 0:
            raise BadConfig(f"step_size must be > 0, got {self.step_size}")
        if not self.camera_distance > 1.0:
            raise BadConfig("camera_distance must exceed the unit bounding sphere")
        if self.T < 2:
            raise BadConfig(f"T must be >= 2, got {self.T}")
        if not self.init_scale > 0:
            raise BadConfig("init_scale must be > 0")


def sds_gradient(X, view, t, eps, denoiser, sched) -> np.ndarray:
    """Analytic gradient of ||(P(X) - mean)/scale - x0_hat||^2 over X.

    x0_hat is treated as a constant (no gradient through the denoiser), the
    score-distillation convention. eps is the model-space noise used to form
    x_t from the projection.
    """
    X = np.asarray(X, np.float64)
    mean, scale = _model_views(denoiser)
    p_geo = perspective_project(X, view)
    p_model = (p_geo - mean) / scale
    eps = np.asarray(eps, np.float64)
    ab = sched.alpha_bar[t - 1]
    x_t = math.sqrt(ab) * p_model + math.sqrt(1.0 - ab) * eps
    eps_hat = np.asarray(denoiser.evaluate(x_t, t), np.float64)
    if not np.isfinite(eps_hat).all():
        raise NonFiniteState(f"denoiser produced non-finite output at t={t}")
    x0_hat = dfn.predict_x0(x_t, t, eps_hat, sched)
    residual = p_model - x0_hat
    jac = perspective_jacobian(X, view)          # (L, J, 2, 3), geometric units
    return (2.0 / scale) * np.einsum("ljik,lji->ljk", jac, residual)


def sds_generate(denoiser, L: int, cfg: SdsConfig | None = None) -> np.ndarray:
    """Run the full score-distillation loop; returns the final Motion3D."""
    cfg = cfg or SdsConfig()
    if L < 1:
        raise BadConfig(f"L must be >= 1, got {L}")
    sched = dfn.cosine_schedule(cfg.T)
    _check_schedule_match(denoiser, sched)
    J = denoiser.J
    rng = np.random.default_rng(cfg.seed)
    X = cfg.init_scale * rng.standard_normal((L, J, 3))
    for i in range(cfg.iterations):
        azimuth = rng.uniform(0.0, TWO_PI)
        t = int(rng.integers(1, cfg.T + 1))
        eps = rng.standard_normal((L, J, 2))
        view = camera_from_angles(azimuth, cfg.elevation, cfg.camera_distance,
                                  cfg.focal)
        try:
            grad = sds_gradient(X, view, t, eps, denoiser, sched)
        except NonPositiveDepth as e:
            raise NonFiniteState(
                f"motion drifted behind a camera at iteration {i} "
                f"(step_size too large?): {e}") from e
        X = X - cfg.step_size * grad
        if not np.isfinite(X).all():
            raise NonFiniteState("score-distillation state became non-finite")
    return X
