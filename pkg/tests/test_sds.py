"""Tests for the score-distillation baseline.

The gradient has two independent oracles: central finite differences of the
reprojection objective (the denoiser is a fixed-target oracle, so the clean
prediction really is a constant and the objective is a plain function of X),
and the closed-form identity grad = 2 sqrt((1-abar)/abar) J^T (eps_hat - eps),
which falls out of substituting the forward-noising expression for x_t.
"""

import math

import numpy as np
import pytest

from mvas.diffusion import cosine_schedule, predict_x0
from mvas.errors import BadConfig, NonFiniteState
from mvas.geometry import camera_from_angles, perspective_jacobian, perspective_project
from mvas.sds import SdsConfig, sds_generate, sds_gradient

from oracles import FixedTargetDenoiser, ShrinkDenoiser, ZeroDenoiser

VIEW = camera_from_angles(0.7, 0.2, 7.0)


def ball_motion(rng, L, J, radius=0.8):
    X = rng.standard_normal((L, J, 3))
    return radius * X / np.linalg.norm(X, axis=-1, keepdims=True)


class TestSdsGradient:
    def test_zero_when_projection_matches_prediction(self):
        """A denoiser that echoes back the exact noise used to form x_t makes
        x0_hat equal the projection, so the residual and gradient vanish."""
        rng = np.random.default_rng(0)
        X = ball_motion(rng, 5, 3)
        sched = cosine_schedule(50)
        eps = rng.standard_normal((5, 3, 2))

        class EchoNoise:
            J, input_mean, input_scale = 3, 0.0, 1.0

            def evaluate(self, x_t, t):
                return eps

        g = sds_gradient(X, VIEW, 17, eps, EchoNoise(), sched)
        assert np.abs(g).max() < 1e-12

    def test_closed_form_identity(self):
        """grad == 2 sqrt((1-abar)/abar) J^T (eps_hat - eps) for any denoiser,
        because P(X) - x0_hat collapses to sqrt((1-abar)/abar)(eps_hat - eps)
        when x_t is formed by forward-noising the projection itself."""
        rng = np.random.default_rng(1)
        X = ball_motion(rng, 6, 2)
        sched = cosine_schedule(50)
        d = ShrinkDenoiser(2, sched)
        for t in (1, 7, 25, 50):
            eps = rng.standard_normal((6, 2, 2))
            g = sds_gradient(X, VIEW, t, eps, d, sched)
            ab = sched.alpha_bar[t - 1]
            p = perspective_project(X, VIEW)
            x_t = math.sqrt(ab) * p + math.sqrt(1 - ab) * eps
            eps_hat = d.evaluate(x_t, t)
            jac = perspective_jacobian(X, VIEW)
            closed = 2.0 * math.sqrt((1 - ab) / ab) * np.einsum(
                "ljik,lji->ljk", jac, eps_hat - eps)
            np.testing.assert_allclose(g, closed, atol=1e-10)

    def test_matches_finite_differences_of_objective(self):
        """With the fixed-target oracle x0_hat == x0* for every input, so the
        objective ||P(X) - x0*||^2 is an ordinary function of X and central
        differences give an independent gradient."""
        rng = np.random.default_rng(2)
        X = ball_motion(rng, 3, 2)
        sched = cosine_schedule(50)
        x0_star = 0.3 * rng.standard_normal((3, 2, 2))
        d = FixedTargetDenoiser(x0_star, sched)
        eps = rng.standard_normal((3, 2, 2))
        g = sds_gradient(X, VIEW, 11, eps, d, sched)

        def objective(Xf):
            return float(((perspective_project(Xf, VIEW) - x0_star) ** 2).sum())

        h = 1e-6
        fd = np.zeros_like(X)
        for idx in np.ndindex(X.shape):
            e = np.zeros_like(X)
            e[idx] = h
            fd[idx] = (objective(X + e) - objective(X - e)) / (2 * h)
        assert np.abs(g - fd).max() / np.abs(fd).max() < 1e-4

    def test_standardized_space_finite_differences(self):
        """Same check with non-trivial input_mean/input_scale: the objective
        and its gradient both live in model units."""
        rng = np.random.default_rng(3)
        X = ball_motion(rng, 3, 2)
        sched = cosine_schedule(50)
        x0_star = 0.3 * rng.standard_normal((3, 2, 2))
        d = FixedTargetDenoiser(x0_star, sched)
        d.input_mean = 0.2 * rng.standard_normal((2, 2))
        d.input_scale = 0.41
        eps = rng.standard_normal((3, 2, 2))
        g = sds_gradient(X, VIEW, 11, eps, d, sched)

        def objective(Xf):
            p = (perspective_project(Xf, VIEW) - d.input_mean) / d.input_scale
            return float(((p - x0_star) ** 2).sum())

        h = 1e-6
        fd = np.zeros_like(X)
        for idx in np.ndindex(X.shape):
            e = np.zeros_like(X)
            e[idx] = h
            fd[idx] = (objective(X + e) - objective(X - e)) / (2 * h)
        assert np.abs(g - fd).max() / np.abs(fd).max() < 1e-4


class TestSdsGenerate:
    def test_deterministic_given_seed(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(3, sched)
        cfg = SdsConfig(iterations=40, T=20, seed=5)
        X1 = sds_generate(d, 6, cfg)
        X2 = sds_generate(d, 6, cfg)
        assert np.array_equal(X1, X2)
        X3 = sds_generate(d, 6, SdsConfig(iterations=40, T=20, seed=6))
        assert not np.allclose(X1, X3)

    def test_finite_output(self):
        sched = cosine_schedule(20)
        d = ShrinkDenoiser(2, sched)
        X = sds_generate(d, 8, SdsConfig(iterations=60, T=20, seed=0))
        assert X.shape == (8, 2, 3)
        assert np.isfinite(X).all()

    def test_nonfinite_state_detected(self):
        sched = cosine_schedule(20)

        class InfDenoiser:
            J, input_mean, input_scale = 2, 0.0, 1.0

            def evaluate(self, x_t, t):
                return np.full_like(x_t, np.inf)

        with pytest.raises(NonFiniteState):
            sds_generate(InfDenoiser(), 4, SdsConfig(iterations=3, T=20))

    def test_divergence_past_camera_reports_nonfinite_state(self):
        """An oversized step drives the motion behind a camera; the loop must
        report that as a sampler-state failure, not a raw geometry error."""
        d = ZeroDenoiser(3)
        with pytest.raises(NonFiniteState, match="drifted behind"):
            sds_generate(d, 4, SdsConfig(iterations=50, step_size=10.0, T=20,
                                         seed=0))

    def test_config_validation(self):
        with pytest.raises(BadConfig):
            SdsConfig(step_size=0.0)
        with pytest.raises(BadConfig):
            SdsConfig(iterations=0)
        with pytest.raises(BadConfig):
            SdsConfig(init_scale=0.0)
        with pytest.raises(BadConfig):
            SdsConfig(T=1)
        sched = cosine_schedule(20)
        with pytest.raises(BadConfig):
            sds_generate(ShrinkDenoiser(2, sched), 0, SdsConfig(T=20))
