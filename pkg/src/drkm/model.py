"""Objective, constraints, and gradients for a deep kernel PCA stack.

The model is a stack of kernel PCA layers trained jointly.  After
eliminating the interconnection weights at their stationary point, the
training variables are the hidden codes H^(l), one matrix of shape
(s_l, N) per layer, holding one latent dimension per row and one
training point per column.  The eliminated objective is

    J(H) = sum_l [ -1/(2 eta_l) tr(H^(l) K^(l-1) H^(l)^T)
                   + lambda_l/2 tr(H^(l)^T H^(l)) ]

where K^(0) is the kernel matrix of the training data under the first
layer's kernel and, for l >= 2, K^(l-1) is the kernel matrix of the
previous layer's codes (columns of H^(l-1)) under layer l's kernel.
K^(0) is cached; deeper kernel matrices are recomputed from the current
codes on every evaluation so they are never stale.

Feasible points satisfy S S^T = I where S stacks all H^(l) vertically.
Training approaches feasibility through the quadratic penalty function

    Q(H; mu) = J(H) + mu/2 * || S S^T - I ||_F^2

(see Nocedal and Wright, Numerical Optimization, ch. 17).  Gradients of
Q are analytic, including the chain through K^(l-1)(H^(l-1)) and,
optionally, through a trainable RBF bandwidth parameterized as
log sigma^2 to keep sigma^2 positive.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidMatrix
from .kernels import RBF, KernelSpec, kernel_matrix, pairwise_sqdist


@dataclass(frozen=True)
class LayerConfig:
    """One kernel PCA layer: component count and objective coefficients.

    lam is the quadratic regularization coefficient (written lambda in
    the math; renamed because of the Python keyword).
    """

    s: int
    eta: float
    lam: float
    kernel: KernelSpec

    def __post_init__(self):
        if not isinstance(self.s, (int, np.integer)) or isinstance(self.s, bool):
            raise InvalidArgument(f"s must be an integer, got {self.s!r}")
        if self.s < 1:
            raise InvalidArgument(f"s must be >= 1, got {self.s}")
        object.__setattr__(self, "s", int(self.s))
        for name in ("eta", "lam"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0.0:
                raise InvalidArgument(f"{name} must be a positive real, got {v!r}")
            object.__setattr__(self, name, v)
        if not isinstance(self.kernel, KernelSpec):
            raise InvalidArgument("kernel must be a KernelSpec")


@dataclass(frozen=True)
class ModelConfig:
    """Ordered stack of layers, first layer reading the data."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InvalidArgument("a model needs at least one layer")
        for layer in layers:
            if not isinstance(layer, LayerConfig):
                raise InvalidArgument("layers must be LayerConfig instances")
        object.__setattr__(self, "layers", layers)

    @property
    def total_s(self):
        return sum(layer.s for layer in self.layers)


def stack_h(h_list):
    """Vertical stack of per-layer code matrices."""
    return np.concatenate(list(h_list), axis=0)


def _rbf_from_sqdist(d2, sigma2):
    """RBF matrix from cached squared distances, symmetrized like kernel_matrix."""
    k = np.exp(d2 / (-2.0 * sigma2))
    return 0.5 * (k + k.T)


@dataclass(frozen=True, eq=False)
class ModelState:
    """Training snapshot: configuration, clamped data, codes, cached K^(0).

    Value type by convention: hold the arrays exclusively while an
    evaluation may read them.  k0 is derived from (config, x) during
    construction and must not be supplied.  For an RBF first layer the
    pairwise squared distances of x are cached as d0 so the kernel can
    be rematerialized cheaply when the bandwidth moves.
    """

    config: ModelConfig
    x: np.ndarray
    h: tuple
    k0: np.ndarray = None
    d0: np.ndarray = None

    def __post_init__(self):
        if not isinstance(self.config, ModelConfig):
            raise InvalidArgument("config must be a ModelConfig")
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise InvalidArgument(f"x must be 2-D (points in rows), got shape {x.shape}")
        if x.shape[0] < 1:
            raise InvalidArgument("x must contain at least one point")
        if not np.all(np.isfinite(x)):
            raise InvalidMatrix("x contains non-finite entries")
        n = x.shape[0]
        layers = self.config.layers
        h_in = tuple(self.h)
        if len(h_in) != len(layers):
            raise InvalidArgument(
                f"expected {len(layers)} code matrices, got {len(h_in)}"
            )
        h_clean = []
        for idx, (layer, mat) in enumerate(zip(layers, h_in)):
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (layer.s, n):
                raise InvalidArgument(
                    f"layer {idx + 1} codes must have shape {(layer.s, n)}, "
                    f"got {mat.shape}"
                )
            if not np.all(np.isfinite(mat)):
                raise InvalidMatrix(f"layer {idx + 1} codes contain non-finite entries")
            h_clean.append(mat)
        if self.k0 is not None or self.d0 is not None:
            raise InvalidArgument("k0 and d0 are derived; do not pass them")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", tuple(h_clean))
        first = layers[0].kernel
        if first.family == RBF:
            d0 = pairwise_sqdist(x)
            object.__setattr__(self, "d0", d0)
            object.__setattr__(self, "k0", _rbf_from_sqdist(d0, first.sigma2))
        else:
            object.__setattr__(self, "k0", kernel_matrix(first, x))

    @property
    def n_points(self):
        return self.x.shape[0]


def replace_bandwidth(state, layer_index, sigma2):
    """New state with layer_index's RBF bandwidth set to sigma2.

    The first layer's cached kernel matrix is rebuilt from the cached
    distances; deeper kernels are recomputed on evaluation anyway.
    """
    layers = state.config.layers
    if not 0 <= layer_index < len(layers):
        raise InvalidArgument(f"no layer {layer_index} in a {len(layers)}-layer model")
    old = layers[layer_index]
    if old.kernel.family != RBF:
        raise InvalidArgument(f"layer {layer_index} has no bandwidth")
    spec = KernelSpec(RBF, sigma2=sigma2,
                      trainable_bandwidth=old.kernel.trainable_bandwidth)
    layer = LayerConfig(old.s, old.eta, old.lam, spec)
    config = ModelConfig(layers[:layer_index] + (layer,) + layers[layer_index + 1:])
    return ModelState(config, state.x, state.h)


def _layer_inputs(config, k0, h_list):
    """Per-layer input kernel matrices K^(l-1), deeper ones recomputed."""
    kernels = [k0]
    for l in range(1, len(config.layers)):
        spec = config.layers[l].kernel
        kernels.append(kernel_matrix(spec, h_list[l - 1].T))
    return kernels


def _evaluate(config, k0, h_list, mu, want_grads, d0=None):
    """Shared core: objective, constraint, penalty, optional gradients.

    Returns (objective, c, res_norm, q, grads_h, grads_theta); the two
    gradient entries are None when want_grads is false, and grads_theta
    entries are None for layers without a trainable bandwidth.
    """
    layers = config.layers
    n_layers = len(layers)
    # Overflow here means the iterate diverged; the caller detects that
    # from the non-finite result, so the intermediate warnings are noise.
    with np.errstate(over="ignore", invalid="ignore"):
        return _evaluate_core(layers, n_layers, config, k0, h_list, mu,
                              want_grads, d0)


def _evaluate_core(layers, n_layers, config, k0, h_list, mu, want_grads, d0):
    kmats = _layer_inputs(config, k0, h_list)
    obj = 0.0
    for l, layer in enumerate(layers):
        h = h_list[l]
        hk = h @ kmats[l]
        obj += -0.5 / layer.eta * float(np.einsum("ij,ij->", hk, h))
        obj += 0.5 * layer.lam * float(np.sum(h * h))
    s_mat = stack_h(h_list)
    c = s_mat @ s_mat.T
    idx = np.arange(c.shape[0])
    c[idx, idx] -= 1.0
    res_sq = float(np.sum(c * c))
    res_norm = float(np.sqrt(res_sq))
    q = obj + 0.5 * mu * res_sq
    if not want_grads:
        return obj, c, res_norm, q, None, None

    # G^(l) = -1/(2 eta_l) H^(l)^T H^(l) turns the first trace into
    # tr(G^(l) K^(l-1)), the form the kernel derivatives chain through.
    # Needed for the chain to the previous layer (l >= 1) and for the
    # bandwidth derivative of layer l itself.
    gmats = [None] * n_layers
    for l, layer in enumerate(layers):
        if l > 0 or layer.kernel.trainable_bandwidth:
            h = h_list[l]
            gmats[l] = (-0.5 / layer.eta) * (h.T @ h)

    pen_grad = (2.0 * mu) * (c @ s_mat)
    grads_h = []
    offset = 0
    for l, layer in enumerate(layers):
        h = h_list[l]
        g = (-1.0 / layer.eta) * (h @ kmats[l]) + layer.lam * h
        g += pen_grad[offset:offset + layer.s]
        offset += layer.s
        grads_h.append(g)
    # Chain from layer l+1's kernel matrix back to layer l's codes.
    for l in range(n_layers - 1):
        spec = layers[l + 1].kernel
        z = h_list[l]
        g_next = gmats[l + 1]
        if spec.family == RBF:
            m = g_next * kmats[l + 1]
            grads_h[l] += (2.0 / spec.sigma2) * (
                z @ m - z * np.sum(m, axis=1)[None, :]
            )
        else:
            grads_h[l] += 2.0 * (z @ g_next)

    grads_theta = [None] * n_layers
    for l, layer in enumerate(layers):
        spec = layer.kernel
        if not spec.trainable_bandwidth:
            continue
        if l == 0:
            if d0 is None:
                raise InvalidArgument(
                    "trainable first-layer bandwidth needs cached distances"
                )
            d2 = d0
        else:
            d2 = pairwise_sqdist(h_list[l - 1].T)
        grads_theta[l] = float(
            np.einsum("ij,ij->", gmats[l] * kmats[l], d2) / (2.0 * spec.sigma2)
        )
    return obj, c, res_norm, q, grads_h, grads_theta


def objective(state):
    """Eliminated training objective at the current codes."""
    obj, _, _, _, _, _ = _evaluate(state.config, state.k0, state.h, 1.0, False)
    return obj


def constraint_residual(state):
    """Constraint matrix C = S S^T - I and its Frobenius norm.

    Diagonal blocks of C measure orthonormality within each layer,
    off-diagonal blocks orthogonality between layers.
    """
    _, c, res_norm, _, _, _ = _evaluate(state.config, state.k0, state.h, 1.0, False)
    return c, res_norm


def _check_mu(mu):
    mu = float(mu)
    if not np.isfinite(mu) or mu <= 0.0:
        raise InvalidArgument(f"mu must be a positive real, got {mu!r}")
    return mu


def penalty(state, mu):
    """Quadratic penalty Q = objective + mu/2 * residual^2."""
    mu = _check_mu(mu)
    _, _, _, q, _, _ = _evaluate(state.config, state.k0, state.h, mu, False)
    return q


def penalty_gradient(state, mu):
    """Analytic gradient of the penalty with respect to every code matrix.

    Returns the list of per-layer gradients, each shaped like the
    corresponding H^(l).  When any layer has a trainable bandwidth the
    return value is instead a pair (grads_h, grads_theta) where
    grads_theta[l] is dQ/d(log sigma_l^2), or None for layers without a
    trainable bandwidth.
    """
    mu = _check_mu(mu)
    _, _, _, _, grads_h, grads_theta = _evaluate(
        state.config, state.k0, state.h, mu, True, d0=state.d0
    )
    if any(layer.kernel.trainable_bandwidth for layer in state.config.layers):
        return grads_h, grads_theta
    return grads_h
