"""Out-of-sample projection and RBF kernel pre-image denoising.

Projection follows the kernel PCA out-of-sample rule: a new point's code
at layer l is the kernel vector against that layer's training inputs,
weighted by the trained codes and scaled by 1/(lambda_l eta_l).  Codes
are computed sequentially through the stack, so layer 2 sees the layer-1
code of the new point against the trained layer-1 codes.

Denoising keeps a subset of code components, reconstructs the matching
projection in the first layer's feature space, and inverts the RBF
feature map with the normalized fixed-point iteration of Mika et al.
(1999).  Projections are taken in the centered feature space, matching
how codes are initialized from centered kernel matrices; the feature
map's training mean is then restored before inversion, which folds into
quotient weights that sum to one exactly.  The weights are computed once
from the observed point and held fixed while the iterate moves, so the
iteration minimizes the feature-space distance to one fixed projection
target.  A shallow kernel PCA denoiser (Scholkopf, Smola, and Muller,
1998) built on the same iteration is the comparison baseline.

The iteration is run batched: each point's update depends only on its
own iterate and weights, so converged rows are frozen while the rest
continue, and a batch run matches one-at-a-time runs up to floating
point rounding of the underlying matrix products.
"""

import dataclasses
import math

import numpy as np

from .errors import InvalidArgument, PreimageCollapse
from .kernels import RBF, center_cross_kernel, center_kernel_matrix, kernel_matrix, pairwise_sqdist
from .linalg import sym_eig_topk
from .model import ModelState, _layer_inputs, stack_h

# A quotient this close to zero means the iterate has lost contact with
# the training set (all weights cancelled or underflowed).
_COLLAPSE_EPS = 1e-300
_MAX_RESTARTS = 3
_RESTART_SCALE = 1e-2

# Eigenvalues at or below this fraction of the largest are treated as
# numerically zero and their components are skipped: their coefficient
# vectors are dominated by rounding noise after the 1/sqrt(value) scaling.
_DEGENERATE_REL = 1e-12


@dataclasses.dataclass(frozen=True)
class PreimageSettings:
    """Stopping rules for the pre-image fixed-point iteration.

    The iteration stops a point once its update moves less than tol in
    Euclidean norm, or after max_iters iterations in total; restarts
    after a collapsed quotient draw from the same iteration budget.
    """

    max_iters: int = 10000
    tol: float = 1e-8
    restart_on_collapse: bool = True

    def __post_init__(self):
        if not isinstance(self.max_iters, (int, np.integer)) or self.max_iters < 1:
            raise InvalidArgument("max_iters must be a positive integer")
        object.__setattr__(self, "max_iters", int(self.max_iters))
        tol = float(self.tol)
        if not math.isfinite(tol) or tol <= 0.0:
            raise InvalidArgument("tol must be positive and finite")
        object.__setattr__(self, "tol", tol)
        object.__setattr__(self, "restart_on_collapse", bool(self.restart_on_collapse))


@dataclasses.dataclass(frozen=True, eq=False)
class TrainedModel:
    """A trained state plus the kernel centering statistics per layer.

    The statistics (column means and grand mean of each layer's training
    kernel matrix) let out-of-sample kernel rows be centered consistently
    with how the codes were initialized.  Instances are read-only.
    """

    state: ModelState
    kernel_col_means: tuple = dataclasses.field(init=False)
    kernel_grand_means: tuple = dataclasses.field(init=False)

    def __post_init__(self):
        if not isinstance(self.state, ModelState):
            raise InvalidArgument("state must be a ModelState")
        kmats = _layer_inputs(self.state.config, self.state.k0, self.state.h)
        col_means = []
        grand_means = []
        for k in kmats:
            means = k.mean(axis=0)
            means.flags.writeable = False
            col_means.append(means)
            grand_means.append(float(k.mean()))
        object.__setattr__(self, "kernel_col_means", tuple(col_means))
        object.__setattr__(self, "kernel_grand_means", tuple(grand_means))


def encode_batch(model, x_stars):
    """Codes for a batch of new points, one (m, s_l) block per layer."""
    if not isinstance(model, TrainedModel):
        raise InvalidArgument("model must be a TrainedModel")
    state = model.state
    x_stars = np.asarray(x_stars, dtype=float)
    if x_stars.ndim != 2 or x_stars.shape[1] != state.x.shape[1]:
        raise InvalidArgument(
            f"expected points of dimension {state.x.shape[1]}, got shape {x_stars.shape}"
        )
    if not np.all(np.isfinite(x_stars)):
        raise InvalidArgument("points contain non-finite entries")
    codes = []
    train_points = state.x
    current = x_stars
    for l, layer in enumerate(state.config.layers):
        k_cross = kernel_matrix(layer.kernel, current, train_points)
        h_star = k_cross @ state.h[l].T / (layer.lam * layer.eta)
        codes.append(h_star)
        train_points = state.h[l].T
        current = h_star
    return tuple(codes)


def encode(model, x_star):
    """Per-layer codes of one point, as a tuple of (s_l,) vectors."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim != 1:
        raise InvalidArgument(f"x_star must be a vector, got shape {x_star.shape}")
    return tuple(block[0] for block in encode_batch(model, x_star[None, :]))


def _restart_offset(attempt, row, dim, sigma2):
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([attempt, row]))
    )
    return rng.standard_normal(dim) * (_RESTART_SCALE * attempt * math.sqrt(sigma2))


def _quotient_weights(k_cross, coeffs, col_means, grand_mean):
    """Per-point quotient weights from a raw cross-kernel block.

    Centering the cross kernel and contracting it with the retained
    coefficient rows twice gives the projection expressed as one weight
    per training point; restoring the training mean then tops each row
    up by a uniform share so it sums to one exactly.
    """
    n = k_cross.shape[1]
    kc = center_cross_kernel(k_cross, col_means, grand_mean)
    b = (kc @ coeffs.T) @ coeffs
    return b + ((1.0 - b.sum(axis=1)) / n)[:, None]


def _fixed_point_denoise(x_train, sigma2, gamma, starts, settings):
    """Batched Mika-style pre-image iteration under an RBF kernel.

    gamma holds one fixed weight row per point, computed from the
    observed position; each update is the gamma-weighted RBF average of
    the training points, normalized by the summed weights.  Collapsed
    points restart from a perturbed start (the perturbation is seeded
    by restart attempt and row position, so results are deterministic
    for a given batch).
    """
    x_hat = np.array(starts, dtype=float)
    active = np.ones(x_hat.shape[0], dtype=bool)
    restarts = np.zeros(x_hat.shape[0], dtype=np.int64)
    for _ in range(settings.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        kraw = np.exp(pairwise_sqdist(x_hat[idx], x_train) / (-2.0 * sigma2))
        w = gamma[idx] * kraw
        den = w.sum(axis=1)
        dead = np.abs(den) < _COLLAPSE_EPS
        if np.any(dead):
            for j in idx[dead]:
                restarts[j] += 1
                if not settings.restart_on_collapse or restarts[j] > _MAX_RESTARTS:
                    raise PreimageCollapse(
                        f"denoising quotient vanished for point {int(j)}"
                    )
                x_hat[j] = starts[j] + _restart_offset(
                    int(restarts[j]), int(j), x_train.shape[1], sigma2
                )
        rows = idx[~dead]
        if rows.size:
            share = w[~dead] / den[~dead][:, None]
            x_new = share @ x_train
            step = x_new - x_hat[rows]
            x_hat[rows] = x_new
            done = np.sqrt(np.sum(step * step, axis=1)) <= settings.tol
            active[rows[done]] = False
    return x_hat


def _check_rbf(spec, who):
    if spec.family != RBF:
        raise InvalidArgument(f"{who} requires an RBF kernel, got {spec.family!r}")


def drkm_denoise_batch(model, x_stars, s_keep=None, settings=None, components=None):
    """Denoise a batch of points through the trained deep model.

    By default the first s_keep layer-1 components are retained (all of
    layer 1 when s_keep is None).  components instead names explicit rows
    of the stacked code matrix, which allows per-component studies
    including components of deeper layers.
    """
    if not isinstance(model, TrainedModel):
        raise InvalidArgument("model must be a TrainedModel")
    state = model.state
    layer1 = state.config.layers[0]
    _check_rbf(layer1.kernel, "pre-image denoising")
    settings = settings or PreimageSettings()
    if not isinstance(settings, PreimageSettings):
        raise InvalidArgument("settings must be a PreimageSettings")
    x_stars = np.asarray(x_stars, dtype=float)
    if x_stars.ndim != 2 or x_stars.shape[1] != state.x.shape[1]:
        raise InvalidArgument(
            f"expected points of dimension {state.x.shape[1]}, got shape {x_stars.shape}"
        )
    stacked = stack_h(state.h)
    if components is not None:
        if s_keep is not None:
            raise InvalidArgument("pass either s_keep or components, not both")
        rows = [int(c) for c in components]
        if not rows:
            raise InvalidArgument("components must select at least one row")
        if len(set(rows)) != len(rows):
            raise InvalidArgument("components must be distinct")
        if min(rows) < 0 or max(rows) >= stacked.shape[0]:
            raise InvalidArgument(
                f"components must lie in [0, {stacked.shape[0]})"
            )
        coeffs = stacked[rows]
    else:
        s_keep = layer1.s if s_keep is None else s_keep
        if not isinstance(s_keep, (int, np.integer)) or isinstance(s_keep, bool):
            raise InvalidArgument("s_keep must be an integer")
        if not 1 <= s_keep <= layer1.s:
            raise InvalidArgument(
                f"s_keep={s_keep} out of range for a layer with {layer1.s} components"
            )
        coeffs = stacked[: int(s_keep)]
    k_cross = kernel_matrix(layer1.kernel, x_stars, state.x)
    gamma = _quotient_weights(
        k_cross, coeffs, model.kernel_col_means[0], model.kernel_grand_means[0]
    )
    return _fixed_point_denoise(
        state.x, layer1.kernel.sigma2, gamma, x_stars, settings
    )


def drkm_denoise(model, x_star, s_keep=None, settings=None, components=None):
    """Denoise one point; see drkm_denoise_batch."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim != 1:
        raise InvalidArgument(f"x_star must be a vector, got shape {x_star.shape}")
    out = drkm_denoise_batch(
        model, x_star[None, :], s_keep=s_keep, settings=settings, components=components
    )
    return out[0]


def _kpca_coefficients(x_train, kernel, s):
    """Coefficient rows of the leading centered kernel PCA components.

    Component k's coefficient vector is its unit eigenvector scaled by
    1/sqrt(eigenvalue), so the corresponding feature-space direction has
    unit norm.  Numerically zero eigenvalues are skipped.
    """
    k_train = kernel_matrix(kernel, x_train)
    centered = center_kernel_matrix(k_train)
    pairs = sym_eig_topk(centered, s)
    floor = max(pairs.values[0], 0.0) * _DEGENERATE_REL
    kept = pairs.values > floor
    vectors = pairs.vectors[:, kept]
    values = pairs.values[kept]
    coeffs = (vectors / np.sqrt(values)[None, :]).T
    return coeffs, k_train


def kpca_denoise_batch(x_train, kernel, s, x_stars, settings=None):
    """Shallow kernel PCA denoising of a batch with s components."""
    _check_rbf(kernel, "pre-image denoising")
    settings = settings or PreimageSettings()
    if not isinstance(settings, PreimageSettings):
        raise InvalidArgument("settings must be a PreimageSettings")
    x_train = np.asarray(x_train, dtype=float)
    if x_train.ndim != 2 or x_train.shape[0] < 1:
        raise InvalidArgument("x_train must be a non-empty 2-d matrix")
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
        raise InvalidArgument("s must be an integer")
    if not 1 <= s <= x_train.shape[0]:
        raise InvalidArgument(f"s={s} out of range for {x_train.shape[0]} points")
    x_stars = np.asarray(x_stars, dtype=float)
    if x_stars.ndim != 2 or x_stars.shape[1] != x_train.shape[1]:
        raise InvalidArgument(
            f"expected points of dimension {x_train.shape[1]}, got shape {x_stars.shape}"
        )
    coeffs, k_train = _kpca_coefficients(x_train, kernel, int(s))
    k_cross = kernel_matrix(kernel, x_stars, x_train)
    gamma = _quotient_weights(k_cross, coeffs, k_train.mean(axis=0), float(k_train.mean()))
    return _fixed_point_denoise(x_train, kernel.sigma2, gamma, x_stars, settings)


def kpca_denoise(x_train, kernel, s, x_star, settings=None):
    """Shallow kernel PCA denoising of one point; see kpca_denoise_batch."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim != 1:
        raise InvalidArgument(f"x_star must be a vector, got shape {x_star.shape}")
    return kpca_denoise_batch(x_train, kernel, s, x_star[None, :], settings=settings)[0]


def reconstruction_error(clean, denoised):
    """Mean squared Euclidean distance between matched point sets."""
    clean = np.asarray(clean, dtype=float)
    denoised = np.asarray(denoised, dtype=float)
    if clean.shape != denoised.shape or clean.ndim != 2:
        raise InvalidArgument(
            f"shapes must match and be 2-d, got {clean.shape} and {denoised.shape}"
        )
    diff = clean - denoised
    return float(np.mean(np.sum(diff * diff, axis=1)))
