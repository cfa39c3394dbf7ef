"""
Re-sampling camera views mid-run
================================

The sampler's per-view chain state is fully determined by view-independent
history: the per-step triangulations and the shared 3D noise draws. Project
that history into any new camera and replay the per-view recurrence, and you
get the chain state that camera *would* have had — so views can be swapped
mid-run without restarting.

Uses an oracle denoiser (it always steers toward one known motion), which
makes correctness visible: whatever the cameras do, the sampler must land on
the oracle's target.
"""

import numpy as np

from mvas import (
    MasConfig,
    camera_from_angles,
    cosine_schedule,
    make_camera_ring,
    mas_sample,
    mas_sample_dynamic_views,
    perspective_project,
    replay_view,
)

rng = np.random.default_rng(5)
L, J, T = 16, 4, 30
X_star = 0.4 * rng.standard_normal((L, J, 3))
cfg = MasConfig(T=T, seed=8, keep_history=True)
sched = cosine_schedule(T)


class ConsistencyOracle:
    """Predicts exactly the noise that makes every view's clean prediction
    the projection of X_star — the 'perfectly multiview-consistent' model."""

    J, input_mean, input_scale = J, 0.0, 1.0

    def __init__(self, views_fn):
        self.views_fn = views_fn

    def evaluate_many(self, x_t, t):
        ab = sched.alpha_bar[t - 1]
        out = np.empty_like(x_t)
        for v, cam in enumerate(self.views_fn(t)):
            target = perspective_project(X_star, cam)
            out[v] = (x_t[v] - np.sqrt(ab) * target) / np.sqrt(1.0 - ab)
        return out


ring = make_camera_ring(cfg.n_views, cfg.elevation, cfg.camera_distance)
oracle = ConsistencyOracle(lambda t: ring)
X, trace = mas_sample(oracle, L, cfg)
print(f"static ring:   recovery RMS {np.sqrt(((X - X_star) ** 2).mean()):.2e}")

# Replay an *existing* view's history: must reproduce its live state exactly.
live = trace.view_states[T - 10, 0]          # view 0's state at t = 10
synth = replay_view(trace, cfg, sched, azimuth=0.0, mean=0.0, scale=1.0,
                    down_to_t=10)
print(f"replay of view 0 at t=10: max deviation {np.abs(synth - live).max():.2e}")

# Now actually swap the cameras mid-run: at t = 15, rotate the whole ring.
new_az = [0.3 + v * 2 * np.pi / 4 for v in range(4)]
swapped = {15: new_az}


def views_at(t):
    if t <= 15:
        return [camera_from_angles(a, cfg.elevation, cfg.camera_distance,
                                   cfg.camera_distance) for a in new_az]
    return ring


oracle2 = ConsistencyOracle(views_at)
X2 = mas_sample_dynamic_views(oracle2, L, cfg, swapped)
print(f"ring swapped at t=15 (5 cameras -> 4 rotated): "
      f"recovery RMS {np.sqrt(((X2 - X_star) ** 2).mean()):.2e}")
print("\nsame target recovered either way: the stored trajectory really is")
print("view-independent, and any camera can join the chain late.")
