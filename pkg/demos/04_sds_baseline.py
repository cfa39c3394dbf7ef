"""
The score-distillation baseline, side by side
=============================================

Score distillation optimizes a single 3D motion by repeatedly projecting it
into one random camera, noising the projection to a random timestep, and
stepping toward whatever the denoiser says the clean version should be. No
per-step multi-view agreement, no coherent timestep ladder — which is exactly
why it serves as the baseline the ancestral sampler is measured against.

Reuses the quick model from demo 03 if MVAS_DEMO_CKPT is set.
"""

import os

import numpy as np

from mvas import (
    Architecture,
    MasConfig,
    SdsConfig,
    TrainConfig,
    bone_length_consistency,
    build_dataset,
    build_denoiser,
    cosine_schedule,
    default_skeleton,
    family_params,
    load_checkpoint,
    mas_sample,
    sds_generate,
    train,
)

CHECKPOINT = os.environ.get("MVAS_DEMO_CKPT", "")

skel = default_skeleton()
if CHECKPOINT:
    model = load_checkpoint(CHECKPOINT)
    print(f"loaded {CHECKPOINT}")
else:
    print("no MVAS_DEMO_CKPT set; training a quick model on 500 records ...")
    built = build_dataset(skel, family_params("mixed"), 500, seed=42)
    model = build_denoiser(skel.J, Architecture(), seed=0)
    model, _ = train(model, built,
                     TrainConfig(learning_rate=2e-3, steps=600,
                                 batch_size=16, seed=0), cosine_schedule(100))

# The residual the gradient follows is (sqrt(1-abar)/sqrt(abar)) (eps_hat-eps),
# which is enormous at early timesteps, so the stable fixed step is small;
# large-t draws then dominate and small-t draws barely move the motion. That
# asymmetry — not a tuning accident — is what makes the baseline weak.
sds_cfg = SdsConfig(iterations=200, step_size=1e-5, seed=3)
X_sds = sds_generate(model, 64, sds_cfg)
print(f"\nSDS output: {X_sds.shape}, finite: {np.isfinite(X_sds).all()}")

X_mas, _ = mas_sample(model, 64, MasConfig(T=100, seed=3))

for name, X in (("MAS", X_mas), ("SDS", X_sds)):
    cv = bone_length_consistency(X, skel)
    spread = np.linalg.norm(X - X.mean(axis=(0, 1)), axis=-1).max()
    print(f"{name}: bone-length CV median {np.median(cv):.4f}, "
          f"spatial extent {spread:.3f}")

print("\nthe ancestral sampler's fused, warm-started chain keeps bones nearly")
print("rigid; score distillation leaves them wobbling — one number that")
print("summarizes why per-step consistency matters.")
