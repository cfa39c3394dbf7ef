"""DDPM core: cosine schedule, forward/reverse steps, 2D ancestral sampling.

Conventions
-----------
Timesteps are 1-based: t runs over {1, ..., T}; schedule arrays are indexed
``[t - 1]``. The boundary convention is ``abar_0 := 1``, which closes the
algebra at the final step: sigma_1 = 0 and the t = 1 posterior step returns the
clean target exactly.

Forward process   x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps
Posterior step    x_{t-1} = c0(t) x_0 + ct(t) x_t + sigma_t z
    c0(t) = sqrt(abar_{t-1}) beta_t / (1 - abar_t)
    ct(t) = sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t)
    sigma_t^2 = beta_t (1 - abar_{t-1}) / (1 - abar_t)

The denoiser passed to the sampling/loss entry points is duck-typed: it needs
``J``, ``evaluate(x_t, t) -> eps_hat`` and optionally ``input_mean`` /
``input_scale`` (the standardization it was trained under; motions entering
the model are (x - mean) / scale and samples leave in original units).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatch, ShapeMismatch, StepOutOfRange


def _as_motion2d(x, name: str = "motion") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise ShapeMismatch(f"{name} must have shape (L, J, 2), got {a.shape}")
    if not np.isfinite(a).all():
        raise ShapeMismatch(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed DDPM schedule arrays, all of length T (index = t - 1)."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.T < 2:
            raise StepOutOfRange(f"schedule needs T >= 2, got {self.T}")
        for name in ("beta", "alpha", "alpha_bar", "sigma"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != (self.T,):
                raise ShapeMismatch(f"{name} must have shape ({self.T},)")
            object.__setattr__(self, name, a)
            a.setflags(write=False)
        if not ((self.beta > 0).all() and (self.beta <= 0.999).all()):
            raise StepOutOfRange("beta out of (0, 0.999]")
        if not (np.diff(self.alpha_bar) < 0).all() or not self.alpha_bar[0] < 1:
            raise StepOutOfRange("alpha_bar must be strictly decreasing from below 1")

    def abar(self, t: int) -> float:
        return float(self.alpha_bar[t - 1])

    def abar_prev(self, t: int) -> float:
        """abar_{t-1} with the abar_0 = 1 boundary convention."""
        return 1.0 if t == 1 else float(self.alpha_bar[t - 2])

    @property
    def fingerprint(self) -> str:
        """Content hash tying checkpoints to the schedule they were trained on."""
        h = hashlib.sha256()
        h.update(str(self.T).encode())
        h.update(np.ascontiguousarray(self.beta).tobytes())
        return h.hexdigest()[:16]


def cosine_schedule(T: int) -> NoiseSchedule:
    """Cosine schedule: abar_t = g(t/T)/g(0), g(u) = cos^2((u+s)/(1+s) * pi/2).

    s = 0.008. beta_t = 1 - abar_t/abar_{t-1}, clipped to <= 0.999 (the
    endpoint g(1) = 0 would give beta_T = 1); alpha_bar is then rebuilt as
    cumprod(1 - beta) so the stored arrays stay mutually consistent.
    """
    if T < 2:
        raise StepOutOfRange(f"cosine_schedule needs T >= 2, got {T}")
    s = 0.008
    u = np.arange(T + 1) / T
    g = np.cos((u + s) / (1 + s) * (math.pi / 2)) ** 2
    abar = g / g[0]
    beta = np.minimum(1.0 - abar[1:] / abar[:-1], 0.999)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    abar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    sigma = np.sqrt(beta * (1.0 - abar_prev) / (1.0 - alpha_bar))
    return NoiseSchedule(T, beta, alpha, alpha_bar, sigma)


def _check_step(t: int, sched: NoiseSchedule):
    if not (isinstance(t, (int, np.integer)) and 1 <= t <= sched.T):
        raise StepOutOfRange(f"t must be an integer in [1, {sched.T}], got {t!r}")


def forward_sample(x0, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """q(x_t | x_0) sample: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    _check_step(t, sched)
    x0 = _as_motion2d(x0, "x0")
    eps = _as_motion2d(eps, "eps")
    if eps.shape != x0.shape:
        raise ShapeMismatch(f"eps shape {eps.shape} != x0 shape {x0.shape}")
    ab = sched.abar(t)
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps


def predict_x0(x_t, t: int, eps_hat, sched: NoiseSchedule) -> np.ndarray:
    """Invert the forward map at the predicted noise:
    x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)."""
    _check_step(t, sched)
    x_t = _as_motion2d(x_t, "x_t")
    eps_hat = _as_motion2d(eps_hat, "eps_hat")
    if eps_hat.shape != x_t.shape:
        raise ShapeMismatch(f"eps_hat shape {eps_hat.shape} != x_t shape {x_t.shape}")
    ab = sched.abar(t)
    return (x_t - math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(ab)


def posterior_coefficients(t: int, sched: NoiseSchedule) -> tuple[float, float]:
    """(c0, ct) of the q(x_{t-1} | x_t, x_0) mean."""
    _check_step(t, sched)
    ab_t = sched.abar(t)
    ab_prev = sched.abar_prev(t)
    beta_t = float(sched.beta[t - 1])
    alpha_t = float(sched.alpha[t - 1])
    c0 = math.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
    ct = math.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)
    return c0, ct


def posterior_step(x_t, x0_target, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """One reverse-diffusion step toward x0_target; noise is dropped at t = 1."""
    _check_step(t, sched)
    x_t = _as_motion2d(x_t, "x_t")
    x0_target = _as_motion2d(x0_target, "x0_target")
    c0, ct = posterior_coefficients(t, sched)
    out = c0 * x0_target + ct * x_t
    if t > 1:
        noise = _as_motion2d(noise, "noise")
        if noise.shape != x_t.shape:
            raise ShapeMismatch(f"noise shape {noise.shape} != x_t shape {x_t.shape}")
        out += float(sched.sigma[t - 1]) * noise
    return out


def ancestral_sample_2d(denoiser, L: int, sched: NoiseSchedule, rng_seed) -> np.ndarray:
    """Plain single-view DDPM ancestral sampling.

    Runs the chain in the denoiser's standardized model space and returns the
    final x_0 mapped back to input units. Deterministic given rng_seed.
    """
    if L < 1:
        raise ShapeMismatch(f"L must be >= 1, got {L}")
    rng = np.random.default_rng(rng_seed)
    J = denoiser.J
    x = rng.standard_normal((L, J, 2))
    zeros = np.zeros_like(x)
    for t in range(sched.T, 0, -1):
        eps_hat = denoiser.evaluate(x, t)
        x0_hat = predict_x0(x, t, eps_hat, sched)
        noise = rng.standard_normal(x.shape) if t > 1 else zeros
        x = posterior_step(x, x0_hat, t, noise, sched)
    mean = getattr(denoiser, "input_mean", 0.0)
    scale = getattr(denoiser, "input_scale", 1.0)
    return x * scale + mean


# --- training loss -----------------------------------------------------------

@dataclass(frozen=True)
class TrainingBatch:
    """Motions with per-joint-frame confidence weights in [0, 1].

    Weight 0 excludes a joint-frame from the loss entirely; weights scale the
    contribution of the rest. Lengths may vary between motions.
    """

    motions: tuple
    confidence_masks: tuple

    def __post_init__(self):
        motions = tuple(_as_motion2d(m, f"motions[{i}]")
                        for i, m in enumerate(self.motions))
        masks = []
        for i, (m, c) in enumerate(zip(motions, self.confidence_masks, strict=True)):
            c = np.asarray(c, dtype=np.float64)
            if c.shape != m.shape[:2]:
                raise ShapeMismatch(
                    f"confidence_masks[{i}] shape {c.shape} != (L, J) {m.shape[:2]}")
            if not np.isfinite(c).all() or c.min() < 0 or c.max() > 1:
                raise ShapeMismatch(f"confidence_masks[{i}] must lie in [0, 1]")
            masks.append(c)
        object.__setattr__(self, "motions", motions)
        object.__setattr__(self, "confidence_masks", tuple(masks))

    @property
    def lengths(self) -> tuple:
        return tuple(m.shape[0] for m in self.motions)

    def __len__(self) -> int:
        return len(self.motions)


def _content_key(motion: np.ndarray, mask: np.ndarray) -> int:
    """Stable per-motion key so a motion's training draws do not depend on
    which other motions share the batch. Masked entries are zeroed before
    hashing: their positions carry zero loss weight, so they must not be able
    to perturb the (t, eps) draw either."""
    h = hashlib.blake2b(digest_size=8)
    # np.where, not multiplication: x * 0.0 would leave a signed -0.0 whose
    # byte pattern differs from the +0.0 of a tampered masked entry
    visible = np.ascontiguousarray(np.where(mask[..., None] != 0, motion, 0.0))
    h.update(visible.tobytes())
    h.update(np.ascontiguousarray(mask).tobytes())
    return int.from_bytes(h.digest(), "little")


def draw_training_targets(batch: TrainingBatch, sched: NoiseSchedule, rng_seed):
    """Per-motion (t, eps) draws, t ~ U{1..T}, eps ~ N(0, I).

    Each motion's stream is keyed by (rng_seed, content hash), so removing or
    reordering other motions leaves its draws unchanged.
    """
    out = []
    for m, c in zip(batch.motions, batch.confidence_masks):
        rng = np.random.default_rng([int(rng_seed), _content_key(m, c)])
        t = int(rng.integers(1, sched.T + 1))
        eps = rng.standard_normal(m.shape)
        out.append((t, eps))
    return out


def training_loss(denoiser, batch: TrainingBatch, sched: NoiseSchedule, rng_seed) -> float:
    """Confidence-weighted eps-prediction loss.

    Samples (t, eps) per motion, noises the standardized motion, and returns
    the weighted mean over joint-frames of ||eps_hat - eps||^2 (both
    coordinates of a joint-frame summed; uniform loss weight across t).
    """
    if len(batch) == 0:
        raise EmptyBatch("training batch has no motions")
    mean = getattr(denoiser, "input_mean", 0.0)
    scale = getattr(denoiser, "input_scale", 1.0)
    total = 0.0
    weight = 0.0
    for (m, c), (t, eps) in zip(zip(batch.motions, batch.confidence_masks),
                                draw_training_targets(batch, sched, rng_seed)):
        if not c.any():
            continue
        x0 = (m - mean) / scale
        x_t = forward_sample(x0, t, eps, sched)
        eps_hat = denoiser.evaluate(x_t, t)
        sq = ((eps_hat - eps) ** 2).sum(axis=-1)
        total += float((c * sq).sum())
        weight += float(c.sum())
    if weight == 0.0:
        raise EmptyBatch("training batch has no unmasked joint-frames")
    return total / weight
