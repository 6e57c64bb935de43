"""Kernel functions, kernel-matrix assembly, and centering.

Two kernel families are supported: the Gaussian RBF kernel
k(x, y) = exp(-||x - y||^2 / (2 sigma^2)) and the linear kernel
k(x, y) = x.T y.  Matrices are assembled from data stored one point
per row.  Double centering follows the usual kernel PCA construction
(Schölkopf, Smola, Müller, 1998): subtract row means, column means,
and add back the grand mean, which corresponds to centering the
mapped points in feature space.

Training code consumes raw (uncentered) kernel matrices; centering is
used only by the denoising path and by layer-wise KPCA initialization.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

RBF = "rbf"
LINEAR = "linear"
_FAMILIES = (RBF, LINEAR)


@dataclass(frozen=True)
class KernelSpec:
    """Description of one kernel: family plus bandwidth for RBF.

    sigma2 is the squared bandwidth and must be a positive real for the
    RBF family; the linear kernel takes no parameter and sigma2 must be
    left as None.  trainable_bandwidth marks sigma2 as an optimization
    variable (handled by the model layer, not here).
    """

    family: str
    sigma2: float | None = None
    trainable_bandwidth: bool = False

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidArgument(
                f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}"
            )
        if self.family == RBF:
            if self.sigma2 is None:
                raise InvalidArgument("RBF kernel requires sigma2")
            s = float(self.sigma2)
            if not np.isfinite(s) or s <= 0.0:
                raise InvalidArgument(f"sigma2 must be a positive real, got {self.sigma2!r}")
            object.__setattr__(self, "sigma2", s)
        else:
            if self.sigma2 is not None:
                raise InvalidArgument("linear kernel takes no sigma2")
            if self.trainable_bandwidth:
                raise InvalidArgument("linear kernel has no bandwidth to train")


def _as_2d(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise InvalidArgument(f"{name} must be 2-D (points in rows), got shape {arr.shape}")
    return arr


def pairwise_sqdist(x, y=None):
    """Matrix of squared euclidean distances between rows of x and rows of y.

    With y omitted the distances are taken within x and the diagonal is
    exactly zero.  Computed through the expanded form
    ||a||^2 + ||b||^2 - 2 a.T b with a clip at zero, which loses a few
    digits for nearly coincident points but never goes negative.
    """
    x = _as_2d(x, "x")
    same = y is None
    y = x if same else _as_2d(y, "y")
    if x.shape[1] != y.shape[1]:
        raise InvalidArgument(
            f"feature dimensions differ: {x.shape[1]} vs {y.shape[1]}"
        )
    xx = np.sum(x * x, axis=1)
    yy = xx if same else np.sum(y * y, axis=1)
    d2 = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    if same:
        np.fill_diagonal(d2, 0.0)
    return d2


def kernel_eval(spec, x, y):
    """Scalar kernel value between two vectors."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise InvalidArgument(
            f"vector dimensions differ: {x.shape[0]} vs {y.shape[0]}"
        )
    if spec.family == RBF:
        diff = x - y
        return float(np.exp(-float(diff @ diff) / (2.0 * spec.sigma2)))
    return float(x @ y)


def kernel_matrix(spec, x, y=None):
    """Kernel matrix with entry (i, j) = k(x_i, y_j).

    With y omitted the matrix is built within x and symmetrized by
    averaging with its transpose, so downstream eigensolves see an
    exactly symmetric input.
    """
    x = _as_2d(x, "x")
    same = y is None
    if spec.family == RBF:
        k = np.exp(pairwise_sqdist(x, y) / (-2.0 * spec.sigma2))
    else:
        y_arr = x if same else _as_2d(y, "y")
        if x.shape[1] != y_arr.shape[1]:
            raise InvalidArgument(
                f"feature dimensions differ: {x.shape[1]} vs {y_arr.shape[1]}"
            )
        k = x @ y_arr.T
    if same:
        k = 0.5 * (k + k.T)
    return k


def center_kernel_matrix(k):
    """Double centering: K - 1K/N - K1/N + 1K1/N^2.

    Equivalent to centering the mapped points in feature space.  Row and
    column sums of the result vanish up to roundoff.
    """
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise InvalidArgument(f"kernel matrix must be square, got shape {k.shape}")
    col_means = k.mean(axis=0)
    grand = float(col_means.mean())
    return k - col_means[None, :] - k.mean(axis=1)[:, None] + grand


def center_cross_kernel(k_cross, train_col_means, train_grand_mean):
    """Center test-versus-train kernel rows against training statistics.

    k_cross holds k(x_t, x_i) for test points t in rows and training
    points i in columns.  train_col_means are the column means of the
    raw training kernel matrix and train_grand_mean its overall mean.
    Row t of the result contains the centered evaluations of test point
    t against the centered training feature map.
    """
    k_cross = _as_2d(k_cross, "k_cross")
    means = np.asarray(train_col_means, dtype=float).reshape(-1)
    if k_cross.shape[1] != means.shape[0]:
        raise InvalidArgument(
            f"k_cross has {k_cross.shape[1]} columns but {means.shape[0]} "
            "training means were given"
        )
    return (
        k_cross
        - k_cross.mean(axis=1)[:, None]
        - means[None, :]
        + float(train_grand_mean)
    )
