"""Tests for kernel evaluation, matrix assembly, and centering."""

import numpy as np
import pytest

from drkm.errors import InvalidArgument
from drkm.kernels import (
    KernelSpec,
    center_cross_kernel,
    center_kernel_matrix,
    kernel_eval,
    kernel_matrix,
    pairwise_sqdist,
)
from drkm.linalg import sym_eig_topk

RBF1 = KernelSpec("rbf", sigma2=1.0)
LIN = KernelSpec("linear")


class TestKernelSpec:
    def test_rbf_requires_positive_sigma2(self):
        with pytest.raises(InvalidArgument):
            KernelSpec("rbf")
        with pytest.raises(InvalidArgument):
            KernelSpec("rbf", sigma2=0.0)
        with pytest.raises(InvalidArgument):
            KernelSpec("rbf", sigma2=-2.0)
        with pytest.raises(InvalidArgument):
            KernelSpec("rbf", sigma2=float("nan"))

    def test_linear_rejects_bandwidth(self):
        with pytest.raises(InvalidArgument):
            KernelSpec("linear", sigma2=1.0)
        with pytest.raises(InvalidArgument):
            KernelSpec("linear", trainable_bandwidth=True)

    def test_unknown_family(self):
        with pytest.raises(InvalidArgument):
            KernelSpec("poly")


class TestKernelEval:
    def test_rbf_zero_distance(self):
        x = np.array([0.3, -1.2, 4.0])
        assert kernel_eval(RBF1, x, x) == 1.0

    def test_rbf_analytic_value(self):
        x = np.array([1.0, 0.0])
        y = np.array([0.0, 1.0])
        # squared distance 2, sigma2 = 1 -> exp(-1)
        assert kernel_eval(RBF1, x, y) == pytest.approx(np.exp(-1.0), rel=1e-12)
        assert kernel_eval(RBF1, x, y) == pytest.approx(0.367879441, abs=1e-9)

    def test_linear_analytic_value(self):
        assert kernel_eval(LIN, [1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_symmetry_exact(self):
        rng = np.random.Generator(np.random.Philox(key=40))
        for _ in range(10):
            x = rng.normal(size=4)
            y = rng.normal(size=4)
            for spec in (RBF1, KernelSpec("rbf", sigma2=0.37), LIN):
                assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            kernel_eval(RBF1, [1.0, 2.0], [1.0, 2.0, 3.0])


class TestPairwiseSqdist:
    def test_matches_loop(self):
        rng = np.random.Generator(np.random.Philox(key=41))
        x = rng.normal(size=(5, 3))
        y = rng.normal(size=(4, 3))
        d2 = pairwise_sqdist(x, y)
        for i in range(5):
            for j in range(4):
                ref = float(np.sum((x[i] - y[j]) ** 2))
                assert d2[i, j] == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_self_distances(self):
        rng = np.random.Generator(np.random.Philox(key=42))
        x = rng.normal(size=(6, 2))
        d2 = pairwise_sqdist(x)
        assert np.all(np.diag(d2) == 0.0)
        assert np.all(d2 >= 0.0)

    def test_shape_errors(self):
        with pytest.raises(InvalidArgument):
            pairwise_sqdist(np.zeros(3))
        with pytest.raises(InvalidArgument):
            pairwise_sqdist(np.zeros((2, 3)), np.zeros((2, 4)))


class TestKernelMatrix:
    def test_single_point_rbf(self):
        x = np.array([[2.0, -1.0]])
        k = kernel_matrix(RBF1, x)
        assert k.shape == (1, 1)
        assert k[0, 0] == 1.0

    def test_linear_identity_points(self):
        k = kernel_matrix(LIN, np.eye(2))
        assert np.array_equal(k, np.eye(2))

    def test_matches_entrywise_eval(self):
        rng = np.random.Generator(np.random.Philox(key=43))
        x = rng.normal(size=(5, 3))
        for spec in (KernelSpec("rbf", sigma2=0.8), LIN):
            k = kernel_matrix(spec, x)
            for i in range(5):
                for j in range(5):
                    ref = kernel_eval(spec, x[i], x[j])
                    assert k[i, j] == pytest.approx(ref, rel=1e-12, abs=1e-14)

    def test_cross_matrix(self):
        rng = np.random.Generator(np.random.Philox(key=44))
        x = rng.normal(size=(4, 2))
        y = rng.normal(size=(3, 2))
        k = kernel_matrix(RBF1, x, y)
        assert k.shape == (4, 3)
        for i in range(4):
            for j in range(3):
                assert k[i, j] == pytest.approx(
                    kernel_eval(RBF1, x[i], y[j]), rel=1e-12
                )

    def test_symmetric_and_psd(self):
        rng = np.random.Generator(np.random.Philox(key=45))
        x = rng.normal(size=(12, 2))
        k = kernel_matrix(KernelSpec("rbf", sigma2=0.5), x)
        assert np.array_equal(k, k.T)
        out = sym_eig_topk(k, 12)
        assert out.values[-1] >= -1e-10

    def test_rbf_range_and_diagonal(self):
        rng = np.random.Generator(np.random.Philox(key=46))
        x = rng.normal(size=(8, 3)) * 2.0
        k = kernel_matrix(RBF1, x)
        assert np.all(k > 0.0)
        assert np.all(k <= 1.0)
        assert np.all(np.diag(k) == 1.0)
        off = k[~np.eye(8, dtype=bool)]
        assert np.all(off < 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            kernel_matrix(RBF1, np.zeros((2, 3)), np.zeros((2, 4)))
        with pytest.raises(InvalidArgument):
            kernel_matrix(LIN, np.zeros((2, 3)), np.zeros((2, 4)))


class TestCentering:
    def test_constant_matrix_centers_to_zero(self):
        kc = center_kernel_matrix(np.ones((3, 3)))
        assert np.max(np.abs(kc)) < 1e-15

    def test_idempotent(self):
        rng = np.random.Generator(np.random.Philox(key=47))
        m = rng.normal(size=(6, 6))
        k = 0.5 * (m + m.T)
        kc = center_kernel_matrix(k)
        kcc = center_kernel_matrix(kc)
        assert np.max(np.abs(kcc - kc)) < 1e-12

    def test_row_and_column_sums_vanish(self):
        rng = np.random.Generator(np.random.Philox(key=48))
        m = rng.normal(size=(6, 6))
        k = 0.5 * (m + m.T)
        kc = center_kernel_matrix(k)
        assert np.max(np.abs(kc.sum(axis=0))) < 1e-10
        assert np.max(np.abs(kc.sum(axis=1))) < 1e-10
        # direct formula check
        n = 6
        one = np.ones((n, n)) / n
        ref = k - one @ k - k @ one + one @ k @ one
        assert np.max(np.abs(kc - ref)) < 1e-12

    def test_preserves_symmetry(self):
        rng = np.random.Generator(np.random.Philox(key=49))
        x = rng.normal(size=(7, 2))
        k = kernel_matrix(RBF1, x)
        kc = center_kernel_matrix(k)
        assert np.max(np.abs(kc - kc.T)) < 1e-14

    def test_non_square_rejected(self):
        with pytest.raises(InvalidArgument):
            center_kernel_matrix(np.ones((2, 3)))

    def test_cross_centering_consistent_with_train(self):
        # Feeding the training kernel itself through the cross-centering
        # path must reproduce double centering of the training kernel.
        rng = np.random.Generator(np.random.Philox(key=50))
        x = rng.normal(size=(9, 3))
        k = kernel_matrix(RBF1, x)
        kc = center_cross_kernel(k, k.mean(axis=0), float(k.mean()))
        ref = center_kernel_matrix(k)
        assert np.max(np.abs(kc - ref)) < 1e-12

    def test_cross_centering_matches_feature_space(self):
        # Linear kernel: centering in feature space is just subtracting
        # the training mean, which gives an exact reference.
        rng = np.random.Generator(np.random.Philox(key=51))
        xtr = rng.normal(size=(8, 3))
        xte = rng.normal(size=(5, 3))
        mu = xtr.mean(axis=0)
        ref = (xte - mu) @ (xtr - mu).T
        k_cross = kernel_matrix(LIN, xte, xtr)
        ktr = kernel_matrix(LIN, xtr)
        out = center_cross_kernel(k_cross, ktr.mean(axis=0), float(ktr.mean()))
        assert np.max(np.abs(out - ref)) < 1e-10

    def test_cross_shape_error(self):
        with pytest.raises(InvalidArgument):
            center_cross_kernel(np.ones((2, 3)), np.ones(4), 0.0)
