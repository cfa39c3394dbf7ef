"""Tests for triangulation and the multi-view ancestral sampler.

The main instrument is the consistency oracle: a denoiser whose per-view noise
predictions already agree with the projections of one fixed 3D motion X*.
Every predicted clean sample is then a projection of X*, triangulation has a
zero-residual optimum at X*, and the sampler must return X* no matter what
noise it injects along the way. Any drift away from X* is a sampler bug.
"""

import logging
import math

import numpy as np
import pytest

from mvas.diffusion import cosine_schedule
from mvas.errors import (
    BadConfig,
    DegenerateGeometry,
    DivergedTriangulation,
    MissingTrace,
    NonFiniteState,
    VersionMismatch,
)
from mvas.geometry import camera_from_angles, make_camera_ring, perspective_project
from mvas.mas import (
    MasConfig,
    MasTrace,
    TriangulationConfig,
    mas_sample,
    mas_sample_dynamic_views,
    replay_view,
    triangulate,
    triangulate_info,
)

from oracles import ConsistencyOracle, ShrinkDenoiser, ZeroDenoiser, posterior_mean_oracle

RING = make_camera_ring(5, elevation=0.2, distance=7.0)


def ball_motion(rng, L, J, radius=0.9):
    """Random 3D motion inside the unit bounding sphere."""
    X = rng.standard_normal((L, J, 3))
    X *= radius * rng.uniform(0.1, 1.0, (L, J, 1)) / np.linalg.norm(X, axis=-1, keepdims=True)
    return X


def oracle_objective(p, views, targets):
    """Scalar reprojection objective for a single 3D point, written longhand."""
    f = 0.0
    for v, uv in zip(views, targets):
        c = v.rotation @ p + v.translation
        f += (v.focal_length * c[0] / c[2] - uv[0]) ** 2
        f += (v.focal_length * c[1] / c[2] - uv[1]) ** 2
    return f


def numeric_gradient(p, views, targets, h=1e-6):
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (oracle_objective(p + e, views, targets)
                - oracle_objective(p - e, views, targets)) / (2 * h)
    return g


class TestTriangulate:
    def test_recovers_ground_truth_from_perturbed_start(self):
        """Exact projections of X* as targets, warm start X* + N(0, 0.1):
        the zero-residual optimum is X*, so the solver must land there."""
        rng = np.random.default_rng(0)
        X_star = ball_motion(rng, 8, 4)
        targets = [perspective_project(X_star, v) for v in RING]
        X_init = X_star + 0.1 * rng.standard_normal(X_star.shape)
        X = triangulate(targets, RING, X_init)
        rms = np.sqrt(((X - X_star) ** 2).mean())
        assert rms < 1e-4

    def test_consistent_targets_exact_start_is_a_fixed_point(self):
        """Already at the optimum: the gradient check trips immediately, so
        the solver spends at most one iteration and the objective is ~ 0."""
        rng = np.random.default_rng(1)
        X_star = ball_motion(rng, 5, 3)
        targets = [perspective_project(X_star, v) for v in RING]
        X, info = triangulate_info(targets, RING, X_star)
        assert info["iterations"] <= 1
        assert info["objective"].max() < 1e-12
        np.testing.assert_allclose(X, X_star, atol=1e-9)

    def test_two_views_suffice(self):
        rng = np.random.default_rng(2)
        X_star = ball_motion(rng, 6, 2)
        views = [camera_from_angles(0.0, 0.2, 7.0), camera_from_angles(2.0, 0.2, 7.0)]
        targets = [perspective_project(X_star, v) for v in views]
        X = triangulate(targets, views, np.zeros_like(X_star))
        assert np.sqrt(((X - X_star) ** 2).mean()) < 1e-6

    def test_single_view_rejected(self):
        rng = np.random.default_rng(3)
        X_star = ball_motion(rng, 4, 2)
        with pytest.raises(DegenerateGeometry):
            triangulate([perspective_project(X_star, RING[0])], RING[:1],
                        np.zeros_like(X_star))

    def test_noisy_targets_reach_first_order_optimality(self):
        """With noisy targets the optimum is unknown, but the solution must be
        stationary: the finite-difference gradient of an independently coded
        scalar objective vanishes at the returned points."""
        rng = np.random.default_rng(4)
        X_star = ball_motion(rng, 4, 3)
        targets = [perspective_project(X_star, v) + 0.2 * rng.standard_normal((4, 3, 2))
                   for v in RING]
        X = triangulate(targets, RING, np.zeros_like(X_star))
        flat = X.reshape(-1, 3)
        tg = np.stack(targets).reshape(5, -1, 2)
        for n in range(flat.shape[0]):
            g = numeric_gradient(flat[n], RING, tg[:, n])
            assert np.linalg.norm(g) < 1e-6

    def test_objective_never_higher_than_warm_start(self):
        rng = np.random.default_rng(5)
        X_star = ball_motion(rng, 4, 3)
        targets = [perspective_project(X_star, v) + 0.3 * rng.standard_normal((4, 3, 2))
                   for v in RING]
        X_init = 0.5 * rng.standard_normal((4, 3, 3))
        X, info = triangulate_info(targets, RING, X_init)
        tg = np.stack(targets).reshape(5, -1, 2)
        for n, p in enumerate(X_init.reshape(-1, 3)):
            f0 = oracle_objective(p, RING, tg[:, n])
            assert info["objective"][n] <= f0 + 1e-12

    def test_point_behind_camera_falls_back_to_warm_start(self, caplog):
        """A warm start at (20, 0, 0) sits behind the azimuth-0 camera (depth
        R[2].p + 7 = -19.6 + 7 < 0), so its objective is undefined there; the
        solver keeps the warm-start value, warns, and solves the rest."""
        rng = np.random.default_rng(6)
        X_star = ball_motion(rng, 3, 2)
        targets = [perspective_project(X_star, v) for v in RING]
        X_init = X_star.copy()
        X_init[0, 0] = [20.0, 0.0, 0.0]
        with caplog.at_level(logging.WARNING, logger="mvas.mas"):
            X, info = triangulate_info(targets, RING, X_init)
        assert info["fallback_points"] == 1
        assert "fell back" in caplog.text
        np.testing.assert_allclose(X[0, 0], [20.0, 0.0, 0.0])
        rest = np.delete(X.reshape(-1, 3), 0, axis=0)
        rest_star = np.delete(X_star.reshape(-1, 3), 0, axis=0)
        assert np.sqrt(((rest - rest_star) ** 2).mean()) < 1e-4

    def test_everything_degenerate_raises(self):
        rng = np.random.default_rng(7)
        X_star = ball_motion(rng, 2, 2)
        targets = [perspective_project(X_star, v) for v in RING]
        X_init = np.full((2, 2, 3), [20.0, 0.0, 0.0])
        with pytest.raises(DegenerateGeometry):
            triangulate(targets, RING, X_init)

    def test_nonfinite_targets_diverged(self):
        targets = [np.full((2, 2, 2), np.nan)] * 5
        with pytest.raises(DivergedTriangulation):
            triangulate(targets, RING, np.zeros((2, 2, 3)))

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(8)
        X_star = ball_motion(rng, 2, 2)
        targets = [perspective_project(X_star, v) for v in RING]
        with pytest.raises(DegenerateGeometry):
            triangulate(targets, RING, np.zeros((3, 2, 3)))

    def test_config_validation(self):
        with pytest.raises(BadConfig):
            TriangulationConfig(max_iterations=0)
        with pytest.raises(BadConfig):
            TriangulationConfig(damping=0.0)


class TestMasWithConsistencyOracle:
    def test_recovers_fixed_motion(self):
        """All per-view predictions agree on X*, so the sampler must output
        X* exactly (up to solver tolerance) despite injecting fresh noise at
        every one of the T steps."""
        rng = np.random.default_rng(10)
        X_star = ball_motion(rng, 10, 4)
        cfg = MasConfig(T=20, seed=3)
        sched = cosine_schedule(cfg.T)
        oracle = ConsistencyOracle(X_star, sched, lambda t: RING)
        X, trace = mas_sample(oracle, 10, cfg)
        assert np.sqrt(((X - X_star) ** 2).mean()) < 1e-3
        assert len(trace.xs) == cfg.T + 1
        assert trace.xs[-1] is X
        # consistent predictions mean back-projection changes nothing
        assert np.nanmax(trace.residual_rms) < 1e-6
        assert trace.clamp_counts.sum() == 0

    def test_standardized_model_space_round_trip(self):
        """Non-trivial input_mean/input_scale must cancel: the oracle serves
        targets in model units and the sampler converts around triangulation."""
        rng = np.random.default_rng(11)
        X_star = ball_motion(rng, 6, 3)
        mean = 0.5 * rng.standard_normal((3, 2))
        cfg = MasConfig(T=20, seed=5)
        sched = cosine_schedule(cfg.T)
        oracle = ConsistencyOracle(X_star, sched, lambda t: RING, mean=mean, scale=0.37)
        X, _ = mas_sample(oracle, 6, cfg)
        assert np.sqrt(((X - X_star) ** 2).mean()) < 1e-3


class TestMasSampling:
    def test_deterministic_given_seed(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(3, sched)
        cfg = MasConfig(T=20, seed=9)
        X1, t1 = mas_sample(d, 8, cfg)
        X2, t2 = mas_sample(d, 8, cfg)
        assert np.array_equal(X1, X2)
        for a, b in zip(t1.xs, t2.xs):
            assert np.array_equal(a, b)

    def test_seed_changes_output(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(3, sched)
        X1, _ = mas_sample(d, 8, MasConfig(T=20, seed=9))
        X2, _ = mas_sample(d, 8, MasConfig(T=20, seed=10))
        assert not np.allclose(X1, X2)

    def test_wild_predictions_survive_through_clamp(self):
        """An all-zero noise prediction makes x0_hat = x_t / sqrt(abar_t),
        about 1e3 times too large at t = T; the model-space clamp keeps the
        geometry serviceable and the run must finish finite."""
        d = ZeroDenoiser(3)
        X, trace = mas_sample(d, 6, MasConfig(T=20, seed=0))
        assert np.isfinite(X).all()
        assert trace.clamp_counts[0] > 0

    def test_nan_denoiser_aborts_with_trace(self):
        class NanDenoiser(ZeroDenoiser):
            def evaluate(self, x_t, t):
                return np.full_like(x_t, np.nan)

        with pytest.raises(NonFiniteState) as exc:
            mas_sample(NanDenoiser(2), 4, MasConfig(T=20))
        assert isinstance(exc.value.trace, MasTrace)

    def test_schedule_fingerprint_guard(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(2, sched)
        d.schedule_fingerprint = "0" * 16
        with pytest.raises(VersionMismatch):
            mas_sample(d, 4, MasConfig(T=20))

    def test_config_validation(self):
        with pytest.raises(BadConfig):
            MasConfig(n_views=1)
        with pytest.raises(BadConfig):
            MasConfig(T=1)
        with pytest.raises(BadConfig):
            MasConfig(camera_distance=0.5)
        with pytest.raises(BadConfig):
            MasConfig(x0_clamp=-1.0)
        sched = cosine_schedule(20)
        with pytest.raises(BadConfig):
            mas_sample(ShrinkDenoiser(2, sched), 0, MasConfig(T=20))

    def test_independent_noise_variant(self):
        """With shared_noise off each view draws its own noise; the run must
        stay finite and deterministic but diverge from the shared-noise run."""
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(3, sched)
        cfg = MasConfig(T=20, seed=5, shared_noise=False)
        Xa, tr = mas_sample(d, 6, cfg)
        Xb, _ = mas_sample(d, 6, cfg)
        Xs, _ = mas_sample(d, 6, MasConfig(T=20, seed=5))
        assert np.isfinite(Xa).all()
        np.testing.assert_array_equal(Xa, Xb)
        assert np.abs(Xa - Xs).max() > 1e-3
        assert tr.eps3d_steps is None

    def test_independent_noise_forbids_history(self):
        with pytest.raises(BadConfig):
            MasConfig(keep_history=True, shared_noise=False)


@pytest.fixture(scope="module")
def traced_run():
    """One history-keeping run shared by the trace-invariant tests."""
    cfg = MasConfig(T=20, seed=4, keep_history=True)
    sched = cosine_schedule(cfg.T)
    d = ShrinkDenoiser(3, sched)
    X, trace = mas_sample(d, 8, cfg)
    return cfg, sched, d, X, trace


class TestTraceInvariants:
    def test_shapes(self, traced_run):
        cfg, _, _, _, tr = traced_run
        T, V, L, J = cfg.T, cfg.n_views, 8, 3
        assert tr.eps3d_init.shape == (L, J, 3)
        assert tr.eps3d_steps.shape == (T, L, J, 3)
        assert tr.injected_noise.shape == (T, V, L, J, 2)
        assert tr.view_states.shape == (T + 1, V, L, J, 2)
        assert tr.residual_rms.shape == (T, V)
        assert tr.triang_iters.shape == (T + 1,)
        assert np.isfinite(tr.view_states).all()

    def test_initial_states_are_orthographic_noise(self, traced_run):
        cfg, _, _, _, tr = traced_run
        ring = make_camera_ring(cfg.n_views, cfg.elevation, cfg.camera_distance)
        for v, cam in enumerate(ring):
            expect = tr.eps3d_init @ cam.rotation[:2].T
            np.testing.assert_array_equal(tr.view_states[0, v], expect)

    def test_last_step_injects_no_noise(self, traced_run):
        _, _, _, _, tr = traced_run
        assert np.all(tr.eps3d_steps[-1] == 0.0)
        assert np.all(tr.injected_noise[-1] == 0.0)

    def test_noise_sharing_reconstructs_from_two_views(self, traced_run):
        """Two views give four linear equations for the three components of
        the shared 3D draw; the least-squares solution must reproduce the
        stored draw and predict every other view's injected noise."""
        cfg, _, _, _, tr = traced_run
        ring = make_camera_ring(cfg.n_views, cfg.elevation, cfg.camera_distance)
        A = np.vstack([ring[0].rotation[:2], ring[1].rotation[:2]])
        for i in range(cfg.T - 1):  # final step injects nothing
            b = np.concatenate([tr.injected_noise[i, 0], tr.injected_noise[i, 1]],
                               axis=-1)
            eps_rec = np.linalg.lstsq(A, b.reshape(-1, 4).T, rcond=None)[0].T
            eps_rec = eps_rec.reshape(tr.eps3d_steps[i].shape)
            np.testing.assert_allclose(eps_rec, tr.eps3d_steps[i], atol=1e-10)
            for v in range(2, cfg.n_views):
                np.testing.assert_allclose(eps_rec @ ring[v].rotation[:2].T,
                                           tr.injected_noise[i, v], atol=1e-10)

    def test_posterior_step_reconstruction(self, traced_run):
        """Rebuild every stored transition x_{t-1} = c0 x0~ + ct x_t + sigma e
        with coefficients from the independent Gaussian-product oracle."""
        cfg, sched, _, _, tr = traced_run
        for i, t in enumerate(range(cfg.T, 0, -1)):
            c0, ct, sig = posterior_mean_oracle(t, sched.beta, sched.alpha,
                                                sched.alpha_bar)
            rebuilt = (c0 * tr.x0_tilde[i] + ct * tr.view_states[i]
                       + sig * tr.injected_noise[i])
            np.testing.assert_allclose(rebuilt, tr.view_states[i + 1], atol=1e-12)

    def test_per_step_back_projections_consistent(self, traced_run):
        """The stored per-view targets are projections of one 3D motion."""
        cfg, _, _, _, tr = traced_run
        ring = make_camera_ring(cfg.n_views, cfg.elevation, cfg.camera_distance)
        for i in range(cfg.T):
            for v, cam in enumerate(ring):
                expect = perspective_project(tr.xs[i], cam)
                np.testing.assert_allclose(tr.x0_tilde[i, v], expect, atol=1e-10)

    def test_histories_absent_without_keep(self):
        sched = cosine_schedule(20)
        _, tr = mas_sample(ShrinkDenoiser(2, sched), 4, MasConfig(T=20, seed=0))
        assert tr.eps3d_init is None and tr.view_states is None
        assert len(tr.xs) == 21  # triangulations are always kept


class TestDynamicViews:
    def test_empty_schedule_bit_identical(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(3, sched)
        cfg = MasConfig(T=20, seed=2, keep_history=True)
        X_plain, _ = mas_sample(d, 6, cfg)
        X_dyn = mas_sample_dynamic_views(d, 6, cfg, {})
        assert np.array_equal(X_plain, X_dyn)

    def test_requires_history(self):
        sched = cosine_schedule(20)
        with pytest.raises(MissingTrace):
            mas_sample_dynamic_views(ShrinkDenoiser(2, sched), 4,
                                     MasConfig(T=20), {10: [0.0, 1.0]})

    def test_schedule_validation(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(2, sched)
        cfg = MasConfig(T=20, keep_history=True)
        with pytest.raises(BadConfig):
            mas_sample_dynamic_views(d, 4, cfg, {0: [0.0, 1.0]})
        with pytest.raises(BadConfig):
            mas_sample_dynamic_views(d, 4, cfg, {40: [0.0, 1.0]})
        with pytest.raises(BadConfig):
            mas_sample_dynamic_views(d, 4, cfg, {10: [0.0]})

    def test_replay_matches_live_view_state(self, traced_run):
        """Re-synthesizing an existing ring camera's chain from the stored 3D
        history must land on the state the live chain actually had."""
        cfg, sched, _, _, tr = traced_run
        azimuth = 2 * math.pi / cfg.n_views  # ring view 1
        for t_mid in (15, 10, 1):
            x_rep = replay_view(tr, cfg, sched, azimuth, 0.0, 1.0, t_mid)
            live = tr.view_states[cfg.T - t_mid, 1]
            np.testing.assert_allclose(x_rep, live, atol=1e-8)

    def test_replay_requires_history(self):
        sched = cosine_schedule(20)
        cfg = MasConfig(T=20, seed=0)
        _, tr = mas_sample(ShrinkDenoiser(2, sched), 4, cfg)
        with pytest.raises(MissingTrace):
            replay_view(tr, cfg, sched, 0.5, 0.0, 1.0, 10)

    def test_midway_view_swap_preserves_oracle_motion(self):
        """Swap to a rotated 4-camera ring at t = 10. With the consistency
        oracle the fixed motion must survive the swap: the synthesized states
        for the new cameras are consistent with the same X*."""
        rng = np.random.default_rng(12)
        X_star = ball_motion(rng, 6, 3)
        cfg = MasConfig(T=20, seed=7, keep_history=True)
        sched = cosine_schedule(cfg.T)
        new_az = [math.pi / 7 + 2 * math.pi * k / 4 for k in range(4)]
        new_ring = [camera_from_angles(a, cfg.elevation, cfg.camera_distance)
                    for a in new_az]

        def views_fn(t):
            return new_ring if t <= 10 else RING

        oracle = ConsistencyOracle(X_star, sched, views_fn)
        X = mas_sample_dynamic_views(oracle, 6, cfg, {10: new_az})
        assert np.sqrt(((X - X_star) ** 2).mean()) < 1e-3
