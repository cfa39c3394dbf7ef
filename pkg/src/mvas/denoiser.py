"""Trainable noise-prediction network eps_phi(x_t, t) for 2D motions.

Architecture (all weights shared across time):

    h   = x @ W_in + b_in + temb(t) @ W_t        per-frame linear encoder
    h   = h + tanh(conv_k(h * frame_mask))       k = 1..layers, temporal mixing
    out = h @ W_out + b_out                      per-frame decoder, zero-init

Each mixing layer is a length-preserving temporal convolution with kernel size
2 * context_radius + 1 over zero-padded neighborhoods, so a frame's output
depends only on frames within `layers * context_radius` of it, and an L-frame
motion embedded in a longer zero-padded batch (with a matching frame mask)
evaluates identically on its own frames. Masked frames are zeroed before every
convolution precisely to keep that equivalence.

Forward and backward passes are hand-written numpy; gradients follow the chain
rule layer by layer and are validated against finite differences in tests.
Computation runs in float64, but parameters are kept float32-representable at
rest (initialization and the end of train() round-trip them through float32)
so checkpoints, which store float32, reload bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadArchitecture,
    BadConfig,
    CorruptChecksum,
    DataEmpty,
    NonFiniteLoss,
    ShapeMismatch,
    StepOutOfRange,
    VersionMismatch,
)

CHECKPOINT_MAGIC = b"MVASCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    """Size descriptor; the default is the desk-scale configuration."""

    hidden: int = 192
    layers: int = 4
    context_radius: int = 4
    temb_dim: int = 16

    def __post_init__(self):
        if self.hidden < 1:
            raise BadArchitecture(f"hidden must be >= 1, got {self.hidden}")
        if self.layers < 0:
            raise BadArchitecture(f"layers must be >= 0, got {self.layers}")
        if self.context_radius < 0:
            raise BadArchitecture(f"context_radius must be >= 0, got {self.context_radius}")
        if self.temb_dim < 2 or self.temb_dim % 2:
            raise BadArchitecture(f"temb_dim must be even and >= 2, got {self.temb_dim}")

    @property
    def kernel(self) -> int:
        return 2 * self.context_radius + 1

    def param_count(self, J: int) -> int:
        D, H, E, K = 2 * J, self.hidden, self.temb_dim, self.kernel
        return D * H + H + E * H + self.layers * (K * H * H + H) + H * D + D


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    steps: int = 1000
    batch_size: int = 16
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise BadConfig(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.steps < 1:
            raise BadConfig(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise BadConfig(f"batch_size must be >= 1, got {self.batch_size}")


def _f32_representable(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float32).astype(np.float64)


def timestep_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps; shape (len(t), dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


@dataclass(frozen=True)
class Denoiser:
    """Parameter vector plus everything needed to use it consistently.

    input_mean/input_scale record the standardization the model was trained
    under; schedule_T and schedule_fingerprint pin the noise schedule.
    """

    params: np.ndarray
    arch: Architecture
    J: int
    input_mean: np.ndarray
    input_scale: float
    schedule_T: int | None = None
    schedule_fingerprint: str | None = None
    trained_steps: int = 0

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64)
        want = self.arch.param_count(self.J)
        if p.shape != (want,):
            raise BadArchitecture(f"parameter vector has {p.shape}, descriptor needs ({want},)")
        mean = np.asarray(self.input_mean, dtype=np.float64)
        if mean.shape != (self.J, 2):
            raise ShapeMismatch(f"input_mean must be (J, 2), got {mean.shape}")
        # params stays writable: train() updates it in place through the views
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "input_mean", mean)
        object.__setattr__(self, "input_scale", float(self.input_scale))

    # --- parameter views -----------------------------------------------------

    def _views(self, params: np.ndarray | None = None) -> dict:
        """Slice the flat vector into named tensors (views, no copies)."""
        a, J = self.arch, self.J
        D, H, E, K = 2 * J, a.hidden, a.temb_dim, a.kernel
        p = self.params if params is None else params
        out, i = {}, 0

        def take(shape):
            nonlocal i
            n = int(np.prod(shape))
            v = p[i:i + n].reshape(shape)
            i += n
            return v

        out["W_in"] = take((D, H))
        out["b_in"] = take((H,))
        out["W_t"] = take((E, H))
        for l in range(a.layers):
            out[f"W_conv{l}"] = take((K * H, H))
            out[f"b_conv{l}"] = take((H,))
        out["W_out"] = take((H, D))
        out["b_out"] = take((D,))
        assert i == p.size
        return out

    def evaluate(self, x_t, t: int, frame_mask=None) -> np.ndarray:
        """Predict the noise in one motion (L, J, 2)."""
        x = np.asarray(x_t, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (self.J, 2):
            raise ShapeMismatch(f"x_t must be (L, {self.J}, 2), got {x.shape}")
        mask = None if frame_mask is None else np.asarray(frame_mask, float)[None]
        return self.evaluate_many(x[None], t, mask)[0]

    def evaluate_many(self, x_t, t, frame_mask=None) -> np.ndarray:
        """Predict noise in a batch (B, L, J, 2); t is an int or (B,) ints."""
        out, _ = self._forward(x_t, t, frame_mask)
        return out

    def _forward(self, x_t, t, frame_mask=None, want_cache: bool = False):
        x = np.asarray(x_t, dtype=np.float64)
        if x.ndim != 4 or x.shape[2:] != (self.J, 2):
            raise ShapeMismatch(f"batch must be (B, L, {self.J}, 2), got {x.shape}")
        B, L = x.shape[:2]
        ts = np.broadcast_to(np.asarray(t, dtype=np.int64), (B,))
        if ts.min() < 1:
            raise StepOutOfRange(f"t must be >= 1, got {ts.min()}")
        if self.schedule_T is not None and ts.max() > self.schedule_T:
            raise StepOutOfRange(
                f"t={ts.max()} beyond the trained schedule T={self.schedule_T}")
        mask = None
        if frame_mask is not None:
            mask = np.asarray(frame_mask, dtype=np.float64)
            if mask.shape != (B, L):
                raise ShapeMismatch(f"frame_mask must be ({B}, {L}), got {mask.shape}")

        v = self._views()
        a = self.arch
        xf = x.reshape(B, L, 2 * self.J)
        temb = timestep_embedding(ts, a.temb_dim)
        h = xf @ v["W_in"] + v["b_in"] + (temb @ v["W_t"])[:, None, :]
        cache = {"xf": xf, "temb": temb, "mask": mask, "hm": [], "act": []} if want_cache else None
        for l in range(a.layers):
            hm = h if mask is None else h * mask[:, :, None]
            c = _conv_im2col(hm, a.context_radius) @ v[f"W_conv{l}"] + v[f"b_conv{l}"]
            act = np.tanh(c)
            if want_cache:
                cache["hm"].append(hm)
                cache["act"].append(act)
            h = h + act
        if want_cache:
            cache["h_final"] = h
        out = (h @ v["W_out"] + v["b_out"]).reshape(B, L, self.J, 2)
        return out, cache

    def _backward(self, d_out, cache) -> np.ndarray:
        """Gradient of a scalar loss wrt the flat parameter vector, given
        d loss / d output and the forward cache."""
        a = self.arch
        v = self._views()
        grads = np.zeros_like(self.params)
        gv = self._views(grads)
        B, L = d_out.shape[:2]
        g = d_out.reshape(B, L, 2 * self.J)
        mask = cache["mask"]

        h_final = cache["h_final"]
        gv["W_out"][...] = h_final.reshape(-1, a.hidden).T @ g.reshape(-1, 2 * self.J)
        gv["b_out"][...] = g.sum(axis=(0, 1))
        dh = g @ v["W_out"].T

        for l in reversed(range(a.layers)):
            act = cache["act"][l]
            hm = cache["hm"][l]
            dc = dh * (1.0 - act * act)
            U = _conv_im2col(hm, a.context_radius)
            K_H = U.shape[-1]
            gv[f"W_conv{l}"][...] = U.reshape(-1, K_H).T @ dc.reshape(-1, a.hidden)
            gv[f"b_conv{l}"][...] = dc.sum(axis=(0, 1))
            dU = (dc @ v[f"W_conv{l}"].T).reshape(B, L, a.kernel, a.hidden)
            dhm = _conv_im2col_adjoint(dU, a.context_radius)
            dh = dh + (dhm if mask is None else dhm * mask[:, :, None])

        gv["W_in"][...] = cache["xf"].reshape(-1, 2 * self.J).T @ dh.reshape(-1, a.hidden)
        gv["b_in"][...] = dh.sum(axis=(0, 1))
        gv["W_t"][...] = cache["temb"].T @ dh.sum(axis=1)
        return grads


def _conv_im2col(h: np.ndarray, radius: int) -> np.ndarray:
    """Stack zero-padded temporal neighborhoods: (B, L, H) -> (B, L, K*H)."""
    B, L, H = h.shape
    K = 2 * radius + 1
    U = np.zeros((B, L, K, H))
    for k in range(K):
        off = k - radius
        lo, hi = max(0, -off), L - max(0, off)
        if lo < hi:
            U[:, lo:hi, k] = h[:, lo + off:hi + off]
    return U.reshape(B, L, K * H)


def _conv_im2col_adjoint(dU: np.ndarray, radius: int) -> np.ndarray:
    """Adjoint of _conv_im2col: scatter neighborhood grads back to frames."""
    B, L, K, H = dU.shape
    dh = np.zeros((B, L, H))
    for k in range(K):
        off = k - radius
        lo, hi = max(0, -off), L - max(0, off)
        if lo < hi:
            dh[:, lo + off:hi + off] += dU[:, lo:hi, k]
    return dh


def build_denoiser(J: int, arch: Architecture | None = None, seed: int = 0) -> Denoiser:
    """Deterministic initialization: 1/fan_in normal weights, zero biases,
    zero-initialized decoder (a fresh denoiser predicts exactly 0)."""
    if J < 1:
        raise BadArchitecture(f"J must be >= 1, got {J}")
    arch = arch or Architecture()
    D, H, E, K = 2 * J, arch.hidden, arch.temb_dim, arch.kernel
    rng = np.random.default_rng(seed)
    parts = [rng.standard_normal((D, H)).ravel() / math.sqrt(D),
             np.zeros(H),
             rng.standard_normal((E, H)).ravel() / math.sqrt(E)]
    for _ in range(arch.layers):
        parts.append(rng.standard_normal((K * H, H)).ravel() / math.sqrt(K * H))
        parts.append(np.zeros(H))
    parts.append(np.zeros(H * D))
    parts.append(np.zeros(D))
    params = _f32_representable(np.concatenate(parts))
    return Denoiser(params, arch, J, np.zeros((J, 2)), 1.0)


# --- training ----------------------------------------------------------------

def _dataset_records(data):
    """Accept a dataset object (with .motions/.confidences and normalization)
    or a bare sequence of (motion, confidence) pairs."""
    if hasattr(data, "motions"):
        motions = [np.asarray(m, np.float64) for m in data.motions]
        confs = [np.asarray(c, np.float64) for c in data.confidences]
        mean = np.asarray(data.norm_mean, np.float64)
        scale = float(data.norm_scale)
        return motions, confs, mean, scale
    pairs = list(data)
    if not pairs:
        raise DataEmpty("dataset holds no records")
    motions = [np.asarray(m, np.float64) for m, _ in pairs]
    confs = [np.asarray(c, np.float64) for _, c in pairs]
    stacked = np.concatenate([m.reshape(-1, m.shape[1], 2) for m in motions])
    mean = stacked.mean(axis=0)
    scale = float(stacked.std()) or 1.0
    return motions, confs, mean, scale


def train(d: Denoiser, data, cfg: TrainConfig, sched) -> tuple[Denoiser, np.ndarray]:
    """Adam on the confidence-weighted eps-prediction loss.

    Variable-length motions are zero-padded into batches; the frame mask keeps
    padded frames out of both the mixing layers and the loss. Returns the
    trained denoiser (with the dataset normalization attached) and the
    per-step loss curve. Deterministic for a fixed config.
    """
    motions, confs, mean, scale = _dataset_records(data)
    if not motions:
        raise DataEmpty("dataset holds no records")
    for i, (m, c) in enumerate(zip(motions, confs)):
        if m.ndim != 3 or m.shape[1:] != (d.J, 2):
            raise ShapeMismatch(f"record {i} must be (L, {d.J}, 2), got {m.shape}")
        if c.shape != m.shape[:2]:
            raise ShapeMismatch(f"record {i} confidence shape {c.shape} != {m.shape[:2]}")
    n = len(motions)
    std_motions = [(m - mean) / scale for m in motions]

    rng = np.random.default_rng(cfg.seed)
    params = d.params.copy()
    model = replace(d, params=params, input_mean=mean, input_scale=scale,
                    schedule_T=sched.T, schedule_fingerprint=sched.fingerprint)
    m1 = np.zeros_like(params)
    m2 = np.zeros_like(params)
    losses = np.empty(cfg.steps)
    sqrt_ab = np.sqrt(sched.alpha_bar)
    sqrt_1mab = np.sqrt(1.0 - sched.alpha_bar)

    for step in range(cfg.steps):
        idx = rng.choice(n, size=min(cfg.batch_size, n), replace=False)
        ts = rng.integers(1, sched.T + 1, size=len(idx))
        Lmax = max(std_motions[i].shape[0] for i in idx)
        B = len(idx)
        x_t = np.zeros((B, Lmax, d.J, 2))
        eps = np.zeros_like(x_t)
        w = np.zeros((B, Lmax, d.J))
        fmask = np.zeros((B, Lmax))
        for b, i in enumerate(idx):
            x0 = std_motions[i]
            L = x0.shape[0]
            e = rng.standard_normal((L, d.J, 2))
            t = int(ts[b])
            x_t[b, :L] = sqrt_ab[t - 1] * x0 + sqrt_1mab[t - 1] * e
            eps[b, :L] = e
            w[b, :L] = confs[i]
            fmask[b, :L] = 1.0

        out, cache = model._forward(x_t, ts, fmask, want_cache=True)
        diff = out - eps
        wsum = w.sum()
        if wsum == 0.0:
            raise DataEmpty("batch has no unmasked joint-frames")
        loss = float((w * (diff ** 2).sum(axis=-1)).sum() / wsum)
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"loss diverged at step {step}")
        losses[step] = loss

        grads = model._backward(2.0 * w[..., None] * diff / wsum, cache)
        k = d.trained_steps + step + 1
        # a diverging run may overflow the moments before the loss guard fires
        with np.errstate(over="ignore", invalid="ignore"):
            m1 += (1 - cfg.beta1) * (grads - m1)
            m2 += (1 - cfg.beta2) * (grads * grads - m2)
            mhat = m1 / (1 - cfg.beta1 ** k)
            vhat = m2 / (1 - cfg.beta2 ** k)
            params -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.adam_eps)

    final = replace(model, params=_f32_representable(params),
                    trained_steps=d.trained_steps + cfg.steps)
    return final, losses


# --- persistence -------------------------------------------------------------

def save_checkpoint(d: Denoiser, path):
    """magic | version | header-length | JSON header | float32 params | sha256."""
    header = json.dumps({
        "arch": {"hidden": d.arch.hidden, "layers": d.arch.layers,
                 "context_radius": d.arch.context_radius, "temb_dim": d.arch.temb_dim},
        "joints": d.J,
        "input_mean": d.input_mean.tolist(),
        "input_scale": d.input_scale,
        "schedule_T": d.schedule_T,
        "schedule_fingerprint": d.schedule_fingerprint,
        "trained_steps": d.trained_steps,
        "param_count": int(d.params.size),
    }).encode()
    body = (CHECKPOINT_MAGIC
            + np.array([CHECKPOINT_VERSION, len(header)], "<u4").tobytes()
            + header
            + d.params.astype("<f4").tobytes())
    with open(path, "wb") as f:
        f.write(body + hashlib.sha256(body).digest())


def load_checkpoint(path, sched=None) -> Denoiser:
    """Inverse of save_checkpoint; verifies integrity and, when a schedule is
    supplied, that the checkpoint was trained against it."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(CHECKPOINT_MAGIC) + 8 + 32:
        raise CorruptChecksum(f"{path}: file shorter than any valid checkpoint")
    if raw[:8] != CHECKPOINT_MAGIC:
        raise VersionMismatch(f"{path}: not a denoiser checkpoint")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptChecksum(f"{path}: checksum mismatch (truncated or altered)")
    version = int(np.frombuffer(raw[8:12], "<u4")[0])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    hlen = int(np.frombuffer(raw[12:16], "<u4")[0])
    try:
        meta = json.loads(raw[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptChecksum(f"{path}: unreadable header ({e})") from e
    params = np.frombuffer(raw[16 + hlen:len(body)], "<f4").astype(np.float64)
    if params.size != meta["param_count"]:
        raise CorruptChecksum(
            f"{path}: {params.size} parameters on disk, header says {meta['param_count']}")
    d = Denoiser(params, Architecture(**meta["arch"]), meta["joints"],
                 np.asarray(meta["input_mean"], np.float64), meta["input_scale"],
                 meta["schedule_T"], meta["schedule_fingerprint"], meta["trained_steps"])
    if sched is not None and d.schedule_fingerprint is not None \
            and sched.fingerprint != d.schedule_fingerprint:
        raise VersionMismatch(
            f"{path}: trained on schedule {d.schedule_fingerprint} "
            f"(T={d.schedule_T}), requested {sched.fingerprint} (T={sched.T})")
    return d
