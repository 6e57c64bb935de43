"""Tests for out-of-sample encoding and pre-image denoising."""

import numpy as np
import pytest

from drkm.datasets import add_noise, generate_shape, square
from drkm.encoder import (
    PreimageSettings,
    TrainedModel,
    drkm_denoise,
    drkm_denoise_batch,
    encode,
    encode_batch,
    kpca_denoise,
    kpca_denoise_batch,
    reconstruction_error,
)
from drkm.errors import InvalidArgument, PreimageCollapse
from drkm.kernels import KernelSpec, kernel_matrix
from drkm.model import LayerConfig, ModelConfig, ModelState
from drkm.optimizer import PenaltySchedule, init_layerwise_kpca, train

RBF_03 = KernelSpec("rbf", sigma2=0.3)


def square_boundary_sqdist(points):
    """Exact squared distance from each point to the square outline."""
    ax = np.abs(points[:, 0])
    ay = np.abs(points[:, 1])
    outside_x = np.maximum(ax - 1.0, 0.0)
    outside_y = np.maximum(ay - 1.0, 0.0)
    outside = outside_x**2 + outside_y**2
    inside = (1.0 - np.maximum(ax, ay)) ** 2
    return np.where((ax <= 1.0) & (ay <= 1.0), inside, outside)


def single_point_model(h_value=1.0, x_point=(0.3, -0.2), sigma2=0.7):
    config = ModelConfig(
        (LayerConfig(1, 1.0, 1.0, KernelSpec("rbf", sigma2=sigma2)),)
    )
    state = ModelState(config, np.array([x_point]), (np.array([[h_value]]),))
    return TrainedModel(state)


def random_two_layer_model(seed=0, n=30):
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = rng.standard_normal((n, 2)) * 0.5
    config = ModelConfig(
        (
            LayerConfig(2, 1.0, 1.0, KernelSpec("rbf", sigma2=0.4)),
            LayerConfig(1, 0.5, 2.0, KernelSpec("rbf", sigma2=0.1)),
        )
    )
    h = (rng.standard_normal((2, n)) / np.sqrt(n), rng.standard_normal((1, n)) / np.sqrt(n))
    return TrainedModel(ModelState(config, x, h))


@pytest.fixture(scope="module")
def square_fit():
    """A trained model on the noisy square, with its clean points.

    The first-layer bandwidth sits where the quotient reaches past the
    noise displacement but stays local to the curve; the second-layer
    bandwidth matches the scale of distances between layer-1 code
    columns, which shrink like s/N under the orthogonality constraint.
    """
    clean = generate_shape(square(400, seed=0))
    noisy = add_noise(clean, 0.1, seed=1)
    config = ModelConfig(
        (
            LayerConfig(2, 1.0, 1.0, KernelSpec("rbf", sigma2=2e-3)),
            LayerConfig(1, 1.0, 1.0, KernelSpec("rbf", sigma2=0.01)),
        )
    )
    h = init_layerwise_kpca(config, noisy)
    state = ModelState(config, noisy, tuple(h))
    final_state, _ = train(state, PenaltySchedule())
    return TrainedModel(final_state), clean, noisy


class TestTrainedModel:
    def test_centering_statistics_per_layer(self):
        model = random_two_layer_model()
        state = model.state
        k0 = state.k0
        assert np.array_equal(model.kernel_col_means[0], k0.mean(axis=0))
        assert model.kernel_grand_means[0] == pytest.approx(float(k0.mean()))
        k1 = kernel_matrix(state.config.layers[1].kernel, state.h[0].T)
        assert np.array_equal(model.kernel_col_means[1], k1.mean(axis=0))
        assert model.kernel_grand_means[1] == pytest.approx(float(k1.mean()))

    def test_statistics_read_only(self):
        model = random_two_layer_model()
        with pytest.raises(ValueError):
            model.kernel_col_means[0][0] = 0.0

    def test_requires_model_state(self):
        with pytest.raises(InvalidArgument):
            TrainedModel(np.zeros((2, 2)))


class TestEncode:
    def test_single_training_point_identity(self):
        model = single_point_model(h_value=1.0)
        (h1,) = encode(model, np.array([0.3, -0.2]))
        assert h1.shape == (1,)
        assert h1[0] == 1.0

    def test_linear_in_codes(self):
        base = single_point_model(h_value=1.0)
        doubled = single_point_model(h_value=2.0)
        x = np.array([0.1, 0.5])
        (h_base,) = encode(base, x)
        (h_doubled,) = encode(doubled, x)
        assert np.allclose(h_doubled, 2.0 * h_base, rtol=0.0, atol=0.0)

    def test_matches_manual_stack_computation(self):
        model = random_two_layer_model(seed=3)
        state = model.state
        rng = np.random.Generator(np.random.Philox(key=9))
        x_new = rng.standard_normal((5, 2)) * 0.3
        got = encode_batch(model, x_new)

        l1, l2 = state.config.layers
        expect1 = np.zeros((5, l1.s))
        for t in range(5):
            kvec = np.array(
                [
                    np.exp(-np.sum((x_new[t] - xi) ** 2) / (2.0 * l1.kernel.sigma2))
                    for xi in state.x
                ]
            )
            expect1[t] = state.h[0] @ kvec / (l1.lam * l1.eta)
        assert np.allclose(got[0], expect1, atol=1e-12)

        expect2 = np.zeros((5, l2.s))
        for t in range(5):
            kvec = np.array(
                [
                    np.exp(
                        -np.sum((expect1[t] - hi) ** 2) / (2.0 * l2.kernel.sigma2)
                    )
                    for hi in state.h[1 - 1].T
                ]
            )
            expect2[t] = state.h[1] @ kvec / (l2.lam * l2.eta)
        assert np.allclose(got[1], expect2, atol=1e-12)

    def test_deterministic_on_trained_model(self, square_fit):
        model, clean, _ = square_fit
        first = encode_batch(model, clean)
        second = encode_batch(model, clean)
        for a, b in zip(first, second):
            assert np.array_equal(a, b)

    def test_dimension_mismatch(self):
        model = single_point_model()
        with pytest.raises(InvalidArgument):
            encode(model, np.array([1.0, 2.0, 3.0]))
        with pytest.raises(InvalidArgument):
            encode_batch(model, np.zeros((4, 3)))
        with pytest.raises(InvalidArgument):
            encode(model, np.zeros((2, 2)))


class TestPreimageSettings:
    def test_defaults(self):
        settings = PreimageSettings()
        assert settings.max_iters == 10000
        assert settings.tol == 1e-8
        assert settings.restart_on_collapse is True

    def test_validation(self):
        with pytest.raises(InvalidArgument):
            PreimageSettings(max_iters=0)
        with pytest.raises(InvalidArgument):
            PreimageSettings(tol=0.0)
        with pytest.raises(InvalidArgument):
            PreimageSettings(tol=float("nan"))


class TestDenoiseTrivial:
    def test_single_point_drkm_one_iteration(self):
        model = single_point_model(h_value=0.37, x_point=(0.4, 0.1))
        settings = PreimageSettings(max_iters=1)
        out = drkm_denoise(model, np.array([5.0, -3.0]), s_keep=1, settings=settings)
        assert np.array_equal(out, np.array([0.4, 0.1]))

    def test_single_point_kpca_one_iteration(self):
        x_train = np.array([[0.4, 0.1]])
        settings = PreimageSettings(max_iters=1)
        out = kpca_denoise(x_train, RBF_03, 1, np.array([-2.0, 7.0]), settings=settings)
        assert np.array_equal(out, np.array([0.4, 0.1]))


class TestDrkmDenoise:
    def test_full_layer_one_equals_explicit_components(self, square_fit):
        model, clean, noisy = square_fit
        batch = noisy[:8]
        by_count = drkm_denoise_batch(model, batch, s_keep=2)
        by_rows = drkm_denoise_batch(model, batch, components=[0, 1])
        assert np.array_equal(by_count, by_rows)

    def test_second_layer_component_runs(self, square_fit):
        model, clean, noisy = square_fit
        out = drkm_denoise_batch(model, noisy[:6], components=[2])
        assert out.shape == (6, 2)
        assert np.all(np.isfinite(out))

    def test_batch_matches_single_calls(self, square_fit):
        # matrix products round differently for different batch shapes,
        # so agreement is up to floating point, not bitwise
        model, clean, noisy = square_fit
        batch = noisy[:5]
        together = drkm_denoise_batch(model, batch, s_keep=2)
        alone = np.stack([drkm_denoise(model, p, s_keep=2) for p in batch])
        assert np.allclose(together, alone, rtol=0.0, atol=1e-6)

    def test_deterministic(self, square_fit):
        model, clean, noisy = square_fit
        a = drkm_denoise_batch(model, noisy[:10], s_keep=2)
        b = drkm_denoise_batch(model, noisy[:10], s_keep=2)
        assert np.array_equal(a, b)

    def test_denoising_beats_the_noise(self, square_fit):
        # error against the generating curve itself: denoising must land
        # the points nearer the clean outline than the noise left them
        model, clean, noisy = square_fit
        denoised = drkm_denoise_batch(model, noisy, s_keep=2)
        assert np.mean(square_boundary_sqdist(denoised)) < np.mean(
            square_boundary_sqdist(noisy)
        )

    def test_stability_on_clean_manifold_points(self):
        # light noise and a bandwidth well below the smallest training
        # point gap: a point on the clean curve must not move past its
        # nearest training point (the quotient cannot blend distinct
        # points at this bandwidth, and every probe stays in reach)
        clean = generate_shape(square(60, seed=0))
        noisy = add_noise(clean, 0.02, seed=1)
        config = ModelConfig(
            (
                LayerConfig(2, 1.0, 1.0, KernelSpec("rbf", sigma2=2e-5)),
                LayerConfig(1, 1.0, 1.0, KernelSpec("rbf", sigma2=0.05)),
            )
        )
        h = init_layerwise_kpca(config, noisy)
        state = ModelState(config, noisy, tuple(h))
        final_state, _ = train(state, PenaltySchedule(max_outer=2, max_inner=150))
        model = TrainedModel(final_state)
        probes = generate_shape(square(20, seed=5))
        settings = PreimageSettings()
        out = drkm_denoise_batch(model, probes, s_keep=2, settings=settings)
        for probe, result in zip(probes, out):
            moved = np.linalg.norm(result - probe)
            nearest = np.min(np.linalg.norm(model.state.x - probe, axis=1))
            assert moved <= nearest + settings.tol

    def test_validation(self, square_fit):
        model, clean, noisy = square_fit
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2], s_keep=0)
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2], s_keep=3)
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2], components=[])
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2], components=[0, 0])
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2], components=[3])
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2], s_keep=1, components=[0])
        with pytest.raises(InvalidArgument):
            drkm_denoise_batch(model, noisy[:2, :1], s_keep=1)

    def test_linear_first_layer_rejected(self):
        config = ModelConfig((LayerConfig(1, 1.0, 1.0, KernelSpec("linear")),))
        state = ModelState(config, np.eye(2), (np.array([[0.5, 0.5]]),))
        model = TrainedModel(state)
        with pytest.raises(InvalidArgument):
            drkm_denoise(model, np.zeros(2), s_keep=1)


class TestConvexHull:
    def test_zero_coefficients_stay_in_the_hull(self):
        # all-zero codes make every quotient weight positive, so each
        # iterate is a convex combination of the training points
        rng = np.random.Generator(np.random.Philox(key=21))
        x = rng.uniform(-1.0, 1.0, (40, 2))
        config = ModelConfig((LayerConfig(1, 1.0, 1.0, RBF_03),))
        model = TrainedModel(ModelState(config, x, (np.zeros((1, 40)),)))
        probes = rng.uniform(-1.5, 1.5, (12, 2))
        out = drkm_denoise_batch(model, probes, s_keep=1)
        lo, hi = x.min(axis=0), x.max(axis=0)
        assert np.all(out >= lo - 1e-12)
        assert np.all(out <= hi + 1e-12)


class TestKpcaDenoise:
    def test_full_rank_reprojects_clean_data(self):
        clean = generate_shape(square(50, seed=2))
        denoised = kpca_denoise_batch(clean, RBF_03, 50, clean)
        assert reconstruction_error(clean, denoised) < 1e-4

    def test_pulls_noisy_points_onto_the_curve(self):
        clean = generate_shape(square(200, seed=3))
        noisy = add_noise(clean, 0.1, seed=4)
        spec = KernelSpec("rbf", sigma2=2e-3)
        denoised = kpca_denoise_batch(noisy, spec, 3, noisy)
        assert np.mean(square_boundary_sqdist(denoised)) < np.mean(
            square_boundary_sqdist(noisy)
        )

    def test_batch_matches_single(self):
        clean = generate_shape(square(30, seed=6))
        noisy = add_noise(clean, 0.1, seed=7)
        together = kpca_denoise_batch(noisy, RBF_03, 3, noisy[:4])
        alone = np.stack([kpca_denoise(noisy, RBF_03, 3, p) for p in noisy[:4]])
        assert np.allclose(together, alone, rtol=0.0, atol=1e-6)

    def test_validation(self):
        x = np.zeros((5, 2))
        with pytest.raises(InvalidArgument):
            kpca_denoise_batch(x, KernelSpec("linear"), 2, x)
        with pytest.raises(InvalidArgument):
            kpca_denoise_batch(x, RBF_03, 0, x)
        with pytest.raises(InvalidArgument):
            kpca_denoise_batch(x, RBF_03, 6, x)
        with pytest.raises(InvalidArgument):
            kpca_denoise_batch(x, RBF_03, 2, np.zeros((3, 4)))


class TestCollapse:
    def test_error_without_restart(self):
        model = single_point_model(x_point=(0.0, 0.0), sigma2=1.0)
        settings = PreimageSettings(restart_on_collapse=False)
        with pytest.raises(PreimageCollapse):
            drkm_denoise(model, np.array([1e5, 0.0]), s_keep=1, settings=settings)

    def test_error_after_exhausted_restarts(self):
        model = single_point_model(x_point=(0.0, 0.0), sigma2=1.0)
        settings = PreimageSettings(restart_on_collapse=True)
        with pytest.raises(PreimageCollapse):
            drkm_denoise(model, np.array([1e5, 0.0]), s_keep=1, settings=settings)


class TestReconstructionError:
    def test_identical_inputs(self):
        x = np.arange(6.0).reshape(3, 2)
        assert reconstruction_error(x, x) == 0.0

    def test_single_offset_point(self):
        clean = np.array([[1.0, 2.0]])
        moved = np.array([[4.0, 6.0]])
        assert reconstruction_error(clean, moved) == 25.0

    def test_mean_over_points(self):
        clean = np.zeros((2, 2))
        moved = np.array([[3.0, 4.0], [0.0, 0.0]])
        assert reconstruction_error(clean, moved) == 12.5

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgument):
            reconstruction_error(np.zeros((2, 2)), np.zeros((3, 2)))
        with pytest.raises(InvalidArgument):
            reconstruction_error(np.zeros(4), np.zeros(4))
