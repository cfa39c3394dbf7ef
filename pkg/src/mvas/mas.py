"""Multi-view ancestral sampling: V coupled 2D denoising chains, one 3D output.

One sampling step at timestep t:

    eps_hat^v = denoiser(x_t^v, t)                     per view
    x0_hat^v  = predict_x0(x_t^v, t, eps_hat^v)
    X         = triangulate(x0_hat^{1:V})              warm-started from last X
    x0_tilde^v = perspective_project(X, v)             the consistent targets
    eps_3d    ~ N(0, I) over (L, J, 3)
    x_{t-1}^v = posterior_step(x_t^v, x0_tilde^v, t, orthographic(eps_3d, v))

All V chains stay at the same timestep; the injected noises are projections of
one shared 3D draw, so each view's noise is marginally standard normal while
staying geometrically consistent across views. The final output is the
triangulation of the V clean samples.

The per-view chains run in the denoiser's standardized model space; 2D
positions convert to camera-plane units (x * scale + mean) only around the
triangulation. Because the scale is a single scalar, the shared-noise story
survives the unit change: scale * R_xy eps = R_xy (scale * eps).

Early steps divide by sqrt(abar_t) ~ 1e-3, so a half-trained denoiser can emit
clean-sample predictions far outside the camera rig, where back-projection is
undefined. x0 predictions are therefore clamped to a generous model-space box
(MasConfig.x0_clamp, well beyond the standardized data range) before
triangulation; the trace counts how often the clamp actually fired.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diffusion as dfn
from .errors import (
    BadConfig,
    DegenerateGeometry,
    DivergedTriangulation,
    MissingTrace,
    NonFiniteState,
    VersionMismatch,
)
from .geometry import CameraView, camera_from_angles, make_camera_ring

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TriangulationConfig:
    max_iterations: int = 50
    convergence_tol: float = 1e-10
    damping: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise BadConfig(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.convergence_tol > 0 or not self.damping > 0:
            raise BadConfig("convergence_tol and damping must be > 0")


@dataclass(frozen=True)
class MasConfig:
    n_views: int = 5
    elevation: float = 0.2
    camera_distance: float = 7.0
    focal: float | None = None
    T: int = 100
    seed: int = 0
    triangulation: TriangulationConfig = field(default_factory=TriangulationConfig)
    x0_clamp: float | None = 8.0
    keep_history: bool = False
    shared_noise: bool = True

    def __post_init__(self):
        if self.n_views < 2:
            raise BadConfig(f"n_views must be >= 2, got {self.n_views}")
        if not self.camera_distance > 1.0:
            raise BadConfig("camera_distance must exceed the unit bounding sphere")
        if self.T < 2:
            raise BadConfig(f"T must be >= 2, got {self.T}")
        if self.x0_clamp is not None and not self.x0_clamp > 0:
            raise BadConfig("x0_clamp must be positive or None")
        if self.keep_history and not self.shared_noise:
            raise BadConfig("replay histories require shared 3D noise")


@dataclass
class MasTrace:
    """Per-step diagnostics; histories are populated when keep_history is on.

    In dynamic-view runs whose view count differs from the original ring, the
    per-view diagnostic rows for those steps stay NaN; the 3D histories
    (xs, eps3d_*) are view-independent and always complete.
    """

    xs: list                      # T+1 triangulated motions (one per step + final)
    residual_rms: np.ndarray      # (T, V) model-space RMS of x0_hat - x0_tilde
    triang_iters: np.ndarray      # (T+1,) damped Gauss-Newton iterations
    fallback_points: np.ndarray   # (T+1,) points that fell back to warm start
    clamp_counts: np.ndarray      # (T,) clamped x0 prediction entries
    eps3d_init: np.ndarray | None = None
    eps3d_steps: np.ndarray | None = None   # (T, L, J, 3); zeros at t = 1
    injected_noise: np.ndarray | None = None  # (T, V, L, J, 2) as used in steps
    view_states: np.ndarray | None = None   # (T+1, V, L, J, 2): x_T ... x_0
    x0_hat: np.ndarray | None = None        # (T, V, L, J, 2) model space
    x0_tilde: np.ndarray | None = None      # (T, V, L, J, 2) model space


# --- triangulation -----------------------------------------------------------

_MIN_DEPTH = 1e-6
_LAMBDA_MAX = 1e10


def _project_views(X: np.ndarray, views: list[CameraView]):
    """Perspective uv and depth per view without raising on bad depth.

    X: (N, 3) -> uv (V, N, 2), depth (V, N).
    """
    uv = np.empty((len(views), X.shape[0], 2))
    z = np.empty((len(views), X.shape[0]))
    for i, v in enumerate(views):
        c = X @ v.rotation.T + v.translation
        z[i] = c[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv[i] = v.focal_length * c[:, :2] / c[:, 2:]
    return uv, z


def _objective(X, views, targets):
    """Sum of squared reprojection residuals per point; inf where any view
    sees the point at or behind its camera plane."""
    uv, z = _project_views(X, views)
    f = ((uv - targets) ** 2).sum(axis=(0, 2))
    bad = (z <= _MIN_DEPTH).any(axis=0)
    f = np.where(bad, np.inf, f)
    return f, uv, z


def triangulate_info(targets, views: list[CameraView], X_init, cfg: TriangulationConfig | None = None):
    """Damped per-point Gauss-Newton triangulation; returns (X, info).

    Each joint-frame is an independent 3-unknown least-squares problem over the
    V views. Steps that increase a point's objective are rejected and retried
    with more damping; points whose damping exhausts fall back to their
    warm-start value (logged), which keeps a sampling chain alive when a point
    is momentarily unobservable.
    """
    cfg = cfg or TriangulationConfig()
    if len(views) < 2:
        raise DegenerateGeometry(f"triangulation needs >= 2 views, got {len(views)}")
    tg = np.stack([np.asarray(t, np.float64) for t in targets])
    if tg.shape[0] != len(views) or tg.shape[-1] != 2:
        raise DegenerateGeometry(f"targets must be (V, L, J, 2), got {tg.shape}")
    if not np.isfinite(tg).all():
        raise DivergedTriangulation("non-finite triangulation targets")
    shape3 = tg.shape[1:-1] + (3,)
    X0 = np.asarray(X_init, np.float64)
    if X0.shape != shape3:
        raise DegenerateGeometry(f"X_init must have shape {shape3}, got {X0.shape}")
    if not np.isfinite(X0).all():
        raise DivergedTriangulation("non-finite X_init")

    N = int(np.prod(tg.shape[1:-1]))
    T2 = tg.reshape(len(views), N, 2)
    Xw = X0.reshape(N, 3)
    X = Xw.copy()
    R_xy = np.stack([v.rotation[:2] for v in views])     # (V, 2, 3)
    R_z = np.stack([v.rotation[2] for v in views])       # (V, 3)
    focal = np.array([v.focal_length for v in views])

    f, uv, z = _objective(X, views, T2)
    # warm start already invalid for some point (behind a camera): such points
    # have no usable gradient; they sit out the solve and fall back at the end
    bad0 = np.isinf(f)
    stagnant = np.zeros(N, bool)   # damping exhausted at a finite objective:
    lam = np.full(N, cfg.damping)  # converged as far as float64 will carry
    gnorm = np.zeros(N)
    iters = 0
    eye = np.eye(3)

    for _ in range(cfg.max_iterations):
        if not np.isfinite(f[~bad0]).all():
            raise DivergedTriangulation("triangulation objective became non-finite")
        # residuals r = uv - target, Jacobian J = f/z (R_xy - (uv/f) outer R_z)
        r = uv - T2                                        # (V, N, 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = (focal[:, None] / z)                   # (V, N)
            Jac = scale[..., None, None] * (
                R_xy[:, None] - (uv / focal[:, None, None])[..., None] * R_z[:, None, None, :])
        J2 = Jac.transpose(1, 0, 2, 3).reshape(N, -1, 3)   # (N, 2V, 3)
        r2 = r.transpose(1, 0, 2).reshape(N, -1, 1)        # (N, 2V, 1)
        Jt = J2.transpose(0, 2, 1)
        g = (Jt @ r2)[..., 0]                              # (N, 3)
        H = Jt @ J2                                        # (N, 3, 3)
        gnorm = 2.0 * np.linalg.norm(np.where(np.isfinite(g), g, 0.0), axis=1)
        active = (gnorm > cfg.convergence_tol) & (f > 1e-24) & ~bad0 & ~stagnant
        if not active.any():
            break
        iters += 1
        # inactive points get an identity system so the batched solve stays sane
        H_safe = np.where(active[:, None, None],
                          np.where(np.isfinite(H), H, 0.0) + lam[:, None, None] * eye,
                          eye)
        g_safe = np.where(active[:, None], np.where(np.isfinite(g), g, 0.0), 0.0)
        delta = np.linalg.solve(H_safe, -g_safe[..., None])[..., 0]
        X_try = X + np.where(active[:, None], delta, 0.0)
        f_try, uv_try, z_try = _objective(X_try, views, T2)
        accept = active & np.isfinite(f_try) & (f_try <= f)
        # a step too small to move X is convergence, not grounds for rejection
        tiny = active & (np.linalg.norm(delta, axis=1)
                         <= 1e-12 * (np.linalg.norm(X, axis=1) + 1e-12))
        X[accept] = X_try[accept]
        upd = accept[None, :, None] & np.ones_like(uv, bool)
        uv = np.where(upd, uv_try, uv)
        z = np.where(accept[None, :], z_try, z)
        f = np.where(accept, f_try, f)
        lam[accept] = np.maximum(lam[accept] / 3.0, 1e-12)
        rejected = active & ~accept & ~tiny
        lam[rejected] = lam[rejected] * 10.0
        stagnant |= tiny | (lam > _LAMBDA_MAX)

    fallback = bad0
    if fallback.any():
        X[fallback] = Xw[fallback]
        log.warning("triangulation fell back to warm start for %d/%d points",
                    int(fallback.sum()), N)
    if fallback.all():
        raise DegenerateGeometry("every point degenerate beyond damping rescue")
    info = {"iterations": iters,
            "fallback_points": int(fallback.sum()),
            "objective": f,
            "grad_norm": gnorm}
    return X.reshape(shape3), info


def triangulate(targets, views, X_init, cfg: TriangulationConfig | None = None) -> np.ndarray:
    """argmin_X sum_v ||P(X, v) - target_v||^2, solved per joint-frame."""
    X, _ = triangulate_info(targets, views, X_init, cfg)
    return X


# --- the sampler -------------------------------------------------------------

def _model_views(denoiser):
    mean = np.asarray(getattr(denoiser, "input_mean", 0.0), np.float64)
    scale = float(getattr(denoiser, "input_scale", 1.0))
    return mean, scale


def _check_schedule_match(denoiser, sched):
    fp = getattr(denoiser, "schedule_fingerprint", None)
    if fp is not None and fp != sched.fingerprint:
        raise VersionMismatch(
            f"denoiser was trained on schedule {fp} "
            f"(T={getattr(denoiser, 'schedule_T', '?')}), sampler built T={sched.T}")


def _denoise_views(denoiser, x, t):
    """eps_hat for the stacked views (V, L, J, 2), preserving view order."""
    fn = getattr(denoiser, "evaluate_many", None)
    if fn is not None:
        return np.asarray(fn(x, t))
    return np.stack([denoiser.evaluate(x[v], t) for v in range(x.shape[0])])


def replay_view(trace: MasTrace, cfg: MasConfig, sched, azimuth: float,
                mean, scale, down_to_t: int) -> np.ndarray:
    """Synthesize x_{down_to_t} for a camera at `azimuth` from stored history.

    Runs the same per-view recurrence the live chains ran, using the stored
    triangulations X^(i) as clean targets and the stored 3D noise draws,
    projected into the new view. With the history of an existing view this
    reproduces its live state; with a new azimuth it manufactures a state that
    is consistent with the shared trajectory.
    """
    if trace.eps3d_init is None or trace.eps3d_steps is None:
        raise MissingTrace("replay needs a trace recorded with keep_history=True")
    cam = camera_from_angles(azimuth, cfg.elevation, cfg.camera_distance,
                             cfg.focal if cfg.focal is not None else cfg.camera_distance)
    x = trace.eps3d_init @ cam.rotation[:2].T
    for i, t in enumerate(range(sched.T, down_to_t, -1)):
        x0_geo = trace.xs[i] @ cam.rotation.T + cam.translation
        if (x0_geo[..., 2] <= 0).any():
            raise NonFiniteState(
                f"stored trajectory crosses the replay camera plane at t={t}")
        x0_uv = cam.focal_length * x0_geo[..., :2] / x0_geo[..., 2:]
        x0_tilde = (x0_uv - mean) / scale
        noise = trace.eps3d_steps[i] @ cam.rotation[:2].T
        x = dfn.posterior_step(x, x0_tilde, t, noise, sched)
    return x


def _run(denoiser, L: int, cfg: MasConfig, resample_schedule=None):
    sched = dfn.cosine_schedule(cfg.T)
    _check_schedule_match(denoiser, sched)
    J = denoiser.J
    mean, scale = _model_views(denoiser)
    views = make_camera_ring(cfg.n_views, cfg.elevation, cfg.camera_distance, cfg.focal)
    resample = dict(resample_schedule or {})
    keep = cfg.keep_history
    rng = np.random.default_rng(cfg.seed)

    if cfg.shared_noise:
        eps3d = rng.standard_normal((L, J, 3))
        x = np.stack([eps3d @ v.rotation[:2].T for v in views])   # (V, L, J, 2)
    else:
        # ablation: each view gets its own initial noise and its own injected
        # noise below, so the chains are coupled only through triangulation
        eps3d = None
        x = rng.standard_normal((cfg.n_views, L, J, 2))

    T = sched.T
    xs = []
    residual_rms = np.full((T, cfg.n_views), np.nan)
    triang_iters = np.zeros(T + 1, int)
    fallbacks = np.zeros(T + 1, int)
    clamps = np.zeros(T, int)
    trace = MasTrace(xs, residual_rms, triang_iters, fallbacks, clamps)
    if keep:
        trace.eps3d_init = eps3d
        trace.eps3d_steps = np.zeros((T, L, J, 3))
        trace.injected_noise = np.full((T, len(views), L, J, 2), np.nan)
        trace.view_states = np.full((T + 1, len(views), L, J, 2), np.nan)
        trace.x0_hat = np.full_like(trace.injected_noise, np.nan)
        trace.x0_tilde = np.full_like(trace.injected_noise, np.nan)
        trace.view_states[0] = x

    X_prev = np.zeros((L, J, 3))
    for i, t in enumerate(range(T, 0, -1)):
        if t in resample:
            azimuths = list(resample[t])
            if len(azimuths) < 2:
                raise BadConfig(f"resample at t={t} must keep >= 2 views")
            views = [camera_from_angles(a, cfg.elevation, cfg.camera_distance,
                                        cfg.focal if cfg.focal is not None
                                        else cfg.camera_distance) for a in azimuths]
            x = np.stack([replay_view(trace, cfg, sched, a, mean, scale, t)
                          for a in azimuths])

        eps_hat = _denoise_views(denoiser, x, t)
        if not np.isfinite(eps_hat).all():
            err = NonFiniteState(f"denoiser produced non-finite output at t={t}")
            err.trace = trace
            raise err
        x0_hat = np.stack([dfn.predict_x0(x[v], t, eps_hat[v], sched)
                           for v in range(len(views))])
        if cfg.x0_clamp is not None:
            clipped = np.clip(x0_hat, -cfg.x0_clamp, cfg.x0_clamp)
            clamps[i] = int((clipped != x0_hat).sum())
            x0_hat = clipped

        targets_geo = x0_hat * scale + mean
        X, info = triangulate_info(targets_geo, views, X_prev, cfg.triangulation)
        triang_iters[i] = info["iterations"]
        fallbacks[i] = info["fallback_points"]
        xs.append(X)

        # perspective back-projection into every view, then back to model space
        uv, z = _project_views(X.reshape(-1, 3), views)
        if (z <= 0).any():
            err = NonFiniteState("triangulated motion crossed a camera plane")
            err.trace = trace
            raise err
        x0_tilde = (uv.reshape(len(views), L, J, 2) - mean) / scale
        rms = np.sqrt(((x0_hat - x0_tilde) ** 2).mean(axis=(1, 2, 3)))
        k = min(len(views), residual_rms.shape[1])
        residual_rms[i, :k] = rms[:k]

        if not cfg.shared_noise:
            noise = (rng.standard_normal((len(views), L, J, 2)) if t > 1
                     else np.zeros((len(views), L, J, 2)))
        elif t > 1:
            eps3d = rng.standard_normal((L, J, 3))
            noise = np.stack([eps3d @ v.rotation[:2].T for v in views])
        else:
            eps3d = np.zeros((L, J, 3))
            noise = np.stack([eps3d @ v.rotation[:2].T for v in views])
        x_next = np.stack([dfn.posterior_step(x[v], x0_tilde[v], t, noise[v], sched)
                           for v in range(len(views))])
        if not np.isfinite(x_next).all():
            err = NonFiniteState(f"sampler state non-finite at t={t}")
            err.trace = trace
            raise err

        if keep:
            trace.eps3d_steps[i] = eps3d
            # per-view diagnostics only fit while the view count is unchanged
            if len(views) == trace.injected_noise.shape[1]:
                trace.injected_noise[i] = noise
                trace.x0_hat[i] = x0_hat
                trace.x0_tilde[i] = x0_tilde
                trace.view_states[i + 1] = x_next
        x = x_next
        X_prev = X

    final_geo = x * scale + mean
    X_final, info = triangulate_info(final_geo, views, X_prev, cfg.triangulation)
    triang_iters[T] = info["iterations"]
    fallbacks[T] = info["fallback_points"]
    xs.append(X_final)
    return X_final, trace


def mas_sample(denoiser, L: int, cfg: MasConfig | None = None):
    """Run the full multi-view ancestral sampler; returns (Motion3D, MasTrace)."""
    cfg = cfg or MasConfig()
    if L < 1:
        raise BadConfig(f"L must be >= 1, got {L}")
    return _run(denoiser, L, cfg)


def mas_sample_dynamic_views(denoiser, L: int, cfg: MasConfig,
                             resample_schedule) -> np.ndarray:
    """mas_sample with mid-run view re-sampling.

    resample_schedule maps timestep t -> list of azimuths; when the loop
    reaches t, the camera set is rebuilt at those azimuths and each camera's
    chain state x_t is synthesized by replaying the stored trajectory/noise
    history into the new view. An empty schedule reproduces mas_sample
    exactly. Requires cfg.keep_history so the histories exist to replay.
    """
    if not cfg.keep_history:
        raise MissingTrace("dynamic view re-sampling requires cfg.keep_history=True")
    for t in dict(resample_schedule or {}):
        if not 1 <= t <= cfg.T:
            raise BadConfig(f"resample timestep {t} outside 1..{cfg.T}")
    X, _ = _run(denoiser, L, cfg, resample_schedule)
    return X
