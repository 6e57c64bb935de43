"""Experiment configuration: strict YAML loading, defaults, hashing.

A configuration file is one YAML document with nested sections:

  dataset   what to generate (a 2-d shape or the factor toy) and with
            which seed and noise level
  model     the layer stack: s, eta, lam, kernel per layer
  training  init mode, seed, and the penalty schedule
  denoise   pre-image iteration settings, component mask, baseline, and
            the bandwidth selection grid
  metrics   estimator knobs for the disentanglement scores
  output    artifact directory
  sweep     value grids for the sweep command

Every key has a fixed spelling; unknown keys raise ConfigError so typos
cannot silently fall back to defaults.  Layer-1 RBF kernels may declare
sigma2: select, resolved on the validation split at training time;
deeper RBF layers may declare sigma2: auto, resolved to 4 * s_prev / n
(codes of an orthonormal-row layer have squared column norms near
s_prev / n, so this keeps the kernel responsive across the code cloud).

The configuration hash is the SHA-256 of the canonical JSON form of the
fully normalized document, so two files that mean the same thing hash
identically and every default is pinned into the hash.
"""

import dataclasses
import hashlib
import json

import yaml

from .errors import ConfigError

SHAPE_NAMES = (
    "square",
    "half_circle",
    "spiral",
    "ring",
    "square_and_spiral",
    "two_squares_spiral_ring",
)
INIT_MODES = ("layerwise_kpca", "random")
KERNEL_FAMILIES = ("rbf", "linear")


def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _check_keys(mapping, allowed, path):
    if not isinstance(mapping, dict):
        _fail(path, f"expected a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        _fail(path, f"unknown keys {unknown}; allowed keys are {sorted(allowed)}")


def _get_int(mapping, key, path, default=None, minimum=None):
    value = mapping.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{path}.{key}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(f"{path}.{key}", f"must be at least {minimum}, got {value}")
    return int(value)


def _get_float(mapping, key, path, default=None, positive=False, nonnegative=False):
    value = mapping.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        _fail(f"{path}.{key}", "must be finite")
    if positive and value <= 0.0:
        _fail(f"{path}.{key}", f"must be positive, got {value}")
    if nonnegative and value < 0.0:
        _fail(f"{path}.{key}", f"must be non-negative, got {value}")
    return value


def _get_bool(mapping, key, path, default):
    value = mapping.get(key, default)
    if not isinstance(value, bool):
        _fail(f"{path}.{key}", f"expected true or false, got {value!r}")
    return value


def _get_choice(mapping, key, path, choices, default=None):
    value = mapping.get(key, default)
    if value not in choices:
        _fail(f"{path}.{key}", f"expected one of {list(choices)}, got {value!r}")
    return value


def _parse_dataset(section):
    path = "dataset"
    if section is None:
        _fail(path, "section is required")
    _check_keys(
        section,
        (
            "kind",
            "shape",
            "n_train",
            "n_validation",
            "sigma_n",
            "seed",
            "cardinalities",
            "embedding_dim",
            "n_samples",
        ),
        path,
    )
    kind = _get_choice(section, "kind", path, ("shape", "factor_toy"), default="shape")
    out = {
        "kind": kind,
        "sigma_n": _get_float(section, "sigma_n", path, default=0.0, nonnegative=True),
        "seed": _get_int(section, "seed", path, default=0, minimum=0),
    }
    if kind == "shape":
        for key in ("cardinalities", "embedding_dim", "n_samples"):
            if key in section:
                _fail(f"{path}.{key}", "only valid for kind: factor_toy")
        out["shape"] = _get_choice(section, "shape", path, SHAPE_NAMES)
        out["n_train"] = _get_int(section, "n_train", path, minimum=1)
        if out["n_train"] is None:
            _fail(f"{path}.n_train", "is required for kind: shape")
        out["n_validation"] = _get_int(section, "n_validation", path, default=0, minimum=0)
    else:
        for key in ("shape", "n_train", "n_validation"):
            if key in section:
                _fail(f"{path}.{key}", "only valid for kind: shape")
        cards = section.get("cardinalities")
        if not isinstance(cards, list) or not cards:
            _fail(f"{path}.cardinalities", "expected a non-empty list of integers")
        for c in cards:
            if isinstance(c, bool) or not isinstance(c, int) or c < 2:
                _fail(f"{path}.cardinalities", f"each cardinality must be an integer >= 2, got {c!r}")
        out["cardinalities"] = [int(c) for c in cards]
        dim = _get_int(section, "embedding_dim", path, minimum=1)
        if dim is None:
            _fail(f"{path}.embedding_dim", "is required for kind: factor_toy")
        if dim < len(cards):
            _fail(f"{path}.embedding_dim", "must be at least the factor count")
        out["embedding_dim"] = dim
        out["n_samples"] = _get_int(section, "n_samples", path, default=None, minimum=1)
    return out


def _parse_kernel(section, path, first_layer):
    if section is None:
        _fail(path, "kernel is required")
    _check_keys(section, ("family", "sigma2", "trainable_bandwidth"), path)
    family = _get_choice(section, "family", path, KERNEL_FAMILIES)
    out = {
        "family": family,
        "trainable_bandwidth": _get_bool(section, "trainable_bandwidth", path, False),
    }
    sigma2 = section.get("sigma2")
    if family == "linear":
        if sigma2 is not None:
            _fail(f"{path}.sigma2", "linear kernel takes no sigma2")
        if out["trainable_bandwidth"]:
            _fail(f"{path}.trainable_bandwidth", "linear kernel has no bandwidth")
        out["sigma2"] = None
        return out
    if sigma2 == "select":
        if not first_layer:
            _fail(f"{path}.sigma2", "select applies to the first layer only")
        out["sigma2"] = "select"
    elif sigma2 == "auto":
        if first_layer:
            _fail(f"{path}.sigma2", "auto applies to layers after the first")
        out["sigma2"] = "auto"
    else:
        out["sigma2"] = _get_float(section, "sigma2", path, positive=True)
        if out["sigma2"] is None:
            _fail(f"{path}.sigma2", "is required for RBF kernels (a number, select, or auto)")
    return out


def _parse_model(section):
    path = "model"
    if section is None:
        _fail(path, "section is required")
    _check_keys(section, ("layers",), path)
    layers = section.get("layers")
    if not isinstance(layers, list) or not layers:
        _fail(f"{path}.layers", "expected a non-empty list of layer mappings")
    out = []
    for idx, layer in enumerate(layers):
        lpath = f"{path}.layers[{idx}]"
        _check_keys(layer, ("s", "eta", "lam", "kernel"), lpath)
        s = _get_int(layer, "s", lpath, minimum=1)
        if s is None:
            _fail(f"{lpath}.s", "is required")
        out.append(
            {
                "s": s,
                "eta": _get_float(layer, "eta", lpath, default=1.0, positive=True),
                "lam": _get_float(layer, "lam", lpath, default=1.0, positive=True),
                "kernel": _parse_kernel(layer.get("kernel"), f"{lpath}.kernel", idx == 0),
            }
        )
    return {"layers": out}


def _parse_penalty(section):
    path = "training.penalty"
    section = {} if section is None else section
    _check_keys(
        section,
        ("mu0", "p", "tau0", "max_outer", "max_inner", "adam_lr", "adam_beta1", "adam_beta2", "adam_eps"),
        path,
    )
    return {
        "mu0": _get_float(section, "mu0", path, default=1.0, positive=True),
        "p": _get_float(section, "p", path, default=8.0, positive=True),
        "tau0": _get_float(section, "tau0", path, default=0.1, positive=True),
        "max_outer": _get_int(section, "max_outer", path, default=None, minimum=1),
        "max_inner": _get_int(section, "max_inner", path, default=500, minimum=1),
        "adam_lr": _get_float(section, "adam_lr", path, default=1e-3, positive=True),
        "adam_beta1": _get_float(section, "adam_beta1", path, default=0.9, nonnegative=True),
        "adam_beta2": _get_float(section, "adam_beta2", path, default=0.999, nonnegative=True),
        "adam_eps": _get_float(section, "adam_eps", path, default=1e-8, positive=True),
    }


def _parse_training(section):
    path = "training"
    section = {} if section is None else section
    _check_keys(section, ("init", "seed", "penalty"), path)
    return {
        "init": _get_choice(section, "init", path, INIT_MODES, default="layerwise_kpca"),
        "seed": _get_int(section, "seed", path, default=0, minimum=0),
        "penalty": _parse_penalty(section.get("penalty")),
    }


def _parse_selection_grid(section):
    path = "denoise.selection_grid"
    section = {} if section is None else section
    _check_keys(section, ("low", "high", "count"), path)
    out = {
        "low": _get_float(section, "low", path, default=1e-4, positive=True),
        "high": _get_float(section, "high", path, default=5e-2, positive=True),
        "count": _get_int(section, "count", path, default=8, minimum=2),
    }
    if out["low"] >= out["high"]:
        _fail(path, f"low must be below high, got {out['low']} >= {out['high']}")
    return out


def _parse_denoise(section):
    path = "denoise"
    section = {} if section is None else section
    _check_keys(
        section,
        (
            "max_iters",
            "tol",
            "restart_on_collapse",
            "component_mask",
            "s_keep",
            "baseline",
            "baseline_components",
            "selection_grid",
        ),
        path,
    )
    mask = section.get("component_mask")
    if mask is not None:
        if not isinstance(mask, list) or not mask:
            _fail(f"{path}.component_mask", "expected a non-empty list of component indices")
        for c in mask:
            if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                _fail(f"{path}.component_mask", f"indices must be integers >= 0, got {c!r}")
        mask = [int(c) for c in mask]
    return {
        "max_iters": _get_int(section, "max_iters", path, default=10000, minimum=1),
        "tol": _get_float(section, "tol", path, default=1e-8, positive=True),
        "restart_on_collapse": _get_bool(section, "restart_on_collapse", path, True),
        "component_mask": mask,
        "s_keep": _get_int(section, "s_keep", path, default=None, minimum=1),
        "baseline": _get_bool(section, "baseline", path, False),
        "baseline_components": _get_int(section, "baseline_components", path, default=3, minimum=1),
        "selection_grid": _parse_selection_grid(section.get("selection_grid")),
    }


def _parse_metrics(section):
    path = "metrics"
    section = {} if section is None else section
    _check_keys(
        section, ("bins", "train_fraction", "seed", "n_eval", "target_latent_dim"), path
    )
    frac = _get_float(section, "train_fraction", path, default=0.8, positive=True)
    if frac >= 1.0:
        _fail(f"{path}.train_fraction", "must be strictly below 1")
    return {
        "bins": _get_int(section, "bins", path, default=20, minimum=2),
        "train_fraction": frac,
        "seed": _get_int(section, "seed", path, default=0, minimum=0),
        "n_eval": _get_int(section, "n_eval", path, default=4000, minimum=2),
        "target_latent_dim": _get_int(section, "target_latent_dim", path, default=None, minimum=1),
    }


def _parse_output(section):
    path = "output"
    section = {} if section is None else section
    _check_keys(section, ("directory",), path)
    directory = section.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        _fail(f"{path}.directory", f"expected a non-empty string, got {directory!r}")
    return {"directory": directory}


def _parse_sweep(section):
    if section is None:
        return None
    path = "sweep"
    _check_keys(section, ("gamma", "n_train", "seeds", "architectures", "sigma2"), path)

    def number_list(key, default, positive=False, integer=False, minimum=None):
        values = section.get(key, default)
        if not isinstance(values, list) or not values:
            _fail(f"{path}.{key}", "expected a non-empty list")
        out = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                _fail(f"{path}.{key}", f"expected numbers, got {v!r}")
            if integer and not isinstance(v, int):
                _fail(f"{path}.{key}", f"expected integers, got {v!r}")
            v = int(v) if integer else float(v)
            if positive and v <= 0:
                _fail(f"{path}.{key}", f"values must be positive, got {v}")
            if minimum is not None and v < minimum:
                _fail(f"{path}.{key}", f"values must be at least {minimum}, got {v}")
            out.append(v)
        return out

    architectures = section.get("architectures", [[2, 1]])
    if not isinstance(architectures, list) or not architectures:
        _fail(f"{path}.architectures", "expected a non-empty list of layer-size lists")
    arch_out = []
    for arch in architectures:
        if not isinstance(arch, list) or not arch:
            _fail(f"{path}.architectures", f"each architecture is a non-empty list, got {arch!r}")
        for s in arch:
            if isinstance(s, bool) or not isinstance(s, int) or s < 1:
                _fail(f"{path}.architectures", f"layer sizes must be integers >= 1, got {s!r}")
        arch_out.append([int(s) for s in arch])
    return {
        "gamma": number_list("gamma", [1.0], positive=True),
        "n_train": number_list("n_train", [100], integer=True, minimum=2),
        "seeds": number_list("seeds", [0], integer=True, minimum=0),
        "architectures": arch_out,
        "sigma2": _get_float(section, "sigma2", path, default=1.0, positive=True),
    }


_SECTIONS = ("dataset", "model", "training", "denoise", "metrics", "output", "sweep")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """A fully normalized experiment description.

    normalized holds the plain nested-dict form with every default made
    explicit; the section attributes expose its parts.  hash_hex is the
    SHA-256 of the canonical JSON encoding of normalized.
    """

    normalized: dict

    @property
    def dataset(self):
        return self.normalized["dataset"]

    @property
    def model(self):
        return self.normalized["model"]

    @property
    def training(self):
        return self.normalized["training"]

    @property
    def denoise(self):
        return self.normalized["denoise"]

    @property
    def metrics(self):
        return self.normalized["metrics"]

    @property
    def output_dir(self):
        return self.normalized["output"]["directory"]

    @property
    def sweep(self):
        return self.normalized["sweep"]

    @property
    def hash_hex(self):
        # the artifact directory does not change any computed value, so it
        # stays out of the identity hash
        hashed = {k: v for k, v in self.normalized.items() if k != "output"}
        return hashlib.sha256(canonical_json(hashed).encode("utf-8")).hexdigest()

    def with_overrides(self, seed=None, out_dir=None):
        """Copy with the master seed and/or output directory replaced.

        The master seed drives both dataset generation and training
        initialization, which is what the --seed flag means.
        """
        raw = json.loads(canonical_json(self.normalized))
        if seed is not None:
            seed = int(seed)
            if seed < 0:
                raise ConfigError("seed override must be non-negative")
            raw["dataset"]["seed"] = seed
            raw["training"]["seed"] = seed
        if out_dir is not None:
            if not out_dir:
                raise ConfigError("output directory override must be non-empty")
            raw["output"]["directory"] = str(out_dir)
        return ExperimentConfig(raw)


def canonical_json(obj):
    """Deterministic JSON: sorted keys, no whitespace, plain floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def parse_config(document):
    """Validate a mapping into an ExperimentConfig, filling defaults."""
    if not isinstance(document, dict):
        raise ConfigError(f"configuration must be a mapping, got {type(document).__name__}")
    unknown = sorted(set(document) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections {unknown}; allowed sections are {list(_SECTIONS)}")
    normalized = {
        "dataset": _parse_dataset(document.get("dataset")),
        "model": _parse_model(document.get("model")),
        "training": _parse_training(document.get("training")),
        "denoise": _parse_denoise(document.get("denoise")),
        "metrics": _parse_metrics(document.get("metrics")),
        "output": _parse_output(document.get("output")),
        "sweep": _parse_sweep(document.get("sweep")),
    }
    return ExperimentConfig(normalized)


def load_config(path):
    """Parse a YAML experiment file into an ExperimentConfig."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: not valid YAML: {err}") from None
    if document is None:
        raise ConfigError(f"{path}: file is empty")
    return parse_config(document)
