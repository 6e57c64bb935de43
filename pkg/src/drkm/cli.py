"""Experiment command line: generate | train | denoise | metrics | sweep.

Every command takes --config PATH (a YAML experiment file, see config),
plus --seed to override the master seed and --out to override the
artifact directory.  Artifacts are CSV tables (RFC 4180 quoting, LF
endings, leading '# key: value' provenance lines) and SVG scatter plots;
every artifact embeds the configuration hash and the seeds, and rerunning
a command with an unchanged configuration hash rewrites byte-identical
files.

Exit codes: 0 success, 2 configuration error, 3 numeric failure
(divergence, collapsed pre-image, degenerate metric split), 4 I/O error.
The DRKM_THREADS environment variable caps the sweep worker pool.

The model file written by train is a single text file: provenance lines,
one '# layer:' line per layer, then the stacked codes and the training
points as '# h_stack: S N' / '# x: N d' sections of comma-joined floats
(repr round-trip, so a reloaded model encodes identically).
"""

import argparse
import concurrent.futures
import csv
import hashlib
import io
import os
import sys

import numpy as np

from .config import ExperimentConfig, load_config
from .datasets import (
    add_noise,
    generate_factor_toy,
    generate_shape,
    half_circle,
    ring,
    save_csv,
    spiral,
    square,
    square_and_spiral,
    two_squares_spiral_ring,
)
from .encoder import (
    PreimageSettings,
    TrainedModel,
    drkm_denoise_batch,
    encode_batch,
    kpca_denoise_batch,
    reconstruction_error,
)
from .errors import (
    ConfigError,
    DrkmError,
    InfeasibleConstraint,
    InvalidArgument,
    ParseError,
)
from .kernels import KernelSpec
from .metrics import MetricSettings, evaluate_metrics, report_table, report_to_csv
from .model import LayerConfig, ModelConfig, ModelState
from .optimizer import PenaltySchedule, init_layerwise_kpca, init_random, train
from .svg import scatter_svg

_SHAPE_BUILDERS = {
    "square": square,
    "half_circle": half_circle,
    "spiral": spiral,
    "ring": ring,
    "square_and_spiral": square_and_spiral,
    "two_squares_spiral_ring": two_squares_spiral_ring,
}

_MODEL_MAGIC = "drkm_model_v1"

# dataset streams derived from the master seed by fixed offsets
_VAL_CURVE_OFFSET = 1
_TRAIN_NOISE_OFFSET = 2
_VAL_NOISE_OFFSET = 3


def _array_sha(x):
    digest = hashlib.sha256()
    x = np.ascontiguousarray(x)
    digest.update(str(x.shape).encode("ascii"))
    digest.update(x.tobytes())
    return digest.hexdigest()


def _build_data(cfg):
    """Deterministic data for the configured dataset section.

    Returns a dict with train_clean / train_noisy (and the validation
    pair when configured); kind factor_toy adds the FactorDataset.
    """
    d = cfg.dataset
    seed = d["seed"]
    out = {}
    if d["kind"] == "shape":
        builder = _SHAPE_BUILDERS[d["shape"]]
        clean = generate_shape(builder(d["n_train"], seed=seed))
        out["train_clean"] = clean
        out["train_noisy"] = add_noise(clean, d["sigma_n"], seed=seed + _TRAIN_NOISE_OFFSET)
        if d["n_validation"]:
            val = generate_shape(builder(d["n_validation"], seed=seed + _VAL_CURVE_OFFSET))
            out["validation_clean"] = val
            out["validation_noisy"] = add_noise(
                val, d["sigma_n"], seed=seed + _VAL_NOISE_OFFSET
            )
    else:
        toy = generate_factor_toy(
            tuple(d["cardinalities"]), d["embedding_dim"], seed, n_samples=d["n_samples"]
        )
        out["factor_dataset"] = toy
        out["train_clean"] = toy.points
        out["train_noisy"] = add_noise(
            toy.points, d["sigma_n"], seed=seed + _TRAIN_NOISE_OFFSET
        )
    return out


def _meta(cfg):
    return {
        "config_hash": cfg.hash_hex,
        "dataset_seed": cfg.dataset["seed"],
        "training_seed": cfg.training["seed"],
    }


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _table_text(metadata, header, rows):
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _svg_comment(cfg):
    meta = _meta(cfg)
    return " ".join(f"{k}: {v}" for k, v in meta.items())


def _resolved_layers(cfg, n_train):
    """Layer dicts with auto bandwidths filled in; select left as a marker."""
    layers = []
    for idx, layer in enumerate(cfg.model["layers"]):
        kernel = dict(layer["kernel"])
        if kernel["sigma2"] == "auto":
            kernel["sigma2"] = 4.0 * cfg.model["layers"][idx - 1]["s"] / n_train
        layers.append({**layer, "kernel": kernel})
    return layers


def _model_config(layer_dicts):
    return ModelConfig(
        layers=tuple(
            LayerConfig(
                s=layer["s"],
                eta=layer["eta"],
                lam=layer["lam"],
                kernel=KernelSpec(
                    layer["kernel"]["family"],
                    sigma2=layer["kernel"]["sigma2"],
                    trainable_bandwidth=layer["kernel"]["trainable_bandwidth"],
                ),
            )
            for layer in layer_dicts
        )
    )


def _train_once(cfg, model_config, x_train):
    if cfg.training["init"] == "layerwise_kpca":
        h0 = init_layerwise_kpca(model_config, x_train)
    else:
        h0 = init_random(model_config, x_train.shape[0], cfg.training["seed"])
    state = ModelState(config=model_config, x=x_train, h=tuple(h0))
    final, report = train(state, PenaltySchedule(**cfg.training["penalty"]))
    return TrainedModel(final), report


def _preimage_settings(cfg):
    d = cfg.denoise
    return PreimageSettings(
        max_iters=d["max_iters"], tol=d["tol"], restart_on_collapse=d["restart_on_collapse"]
    )


def _select_bandwidth(cfg, data):
    """Validation-error bandwidth selection for a first-layer 'select'.

    Trains one model per candidate on the noisy training points, denoises
    the noisy validation points out of sample, and keeps the bandwidth
    with the smallest error against the clean validation points (ties to
    the smallest candidate).  Returns (model, report, sigma2, rows).
    """
    if "validation_noisy" not in data:
        raise ConfigError(
            "sigma2: select needs a shape dataset with n_validation > 0"
        )
    grid = cfg.denoise["selection_grid"]
    candidates = np.geomspace(grid["low"], grid["high"], grid["count"])
    settings = _preimage_settings(cfg)
    best = None
    rows = []
    for cand in candidates:
        layers = _resolved_layers(cfg, data["train_noisy"].shape[0])
        layers[0]["kernel"]["sigma2"] = float(cand)
        model, report = _train_once(cfg, _model_config(layers), data["train_noisy"])
        denoised = drkm_denoise_batch(
            model, data["validation_noisy"], s_keep=cfg.denoise["s_keep"], settings=settings
        )
        error = reconstruction_error(data["validation_clean"], denoised)
        rows.append([repr(float(cand)), repr(error), 0])
        if best is None or error < best[0]:
            best = (error, float(cand), model, report)
    rows[[float(r[0]) for r in rows].index(best[1])][2] = 1
    return best[2], best[3], best[1], rows


def _train_model_for_config(cfg, data):
    """Train per the config, running bandwidth selection when requested."""
    layers = _resolved_layers(cfg, data["train_noisy"].shape[0])
    if layers[0]["kernel"].get("sigma2") == "select":
        return _select_bandwidth(cfg, data)
    model, report = _train_once(cfg, _model_config(layers), data["train_noisy"])
    return model, report, None, None


def save_model(path, model, cfg, data_sha):
    state = model.state
    lines = [f"# format: {_MODEL_MAGIC}"]
    for key, value in _meta(cfg).items():
        lines.append(f"# {key}: {value}")
    lines.append(f"# init: {cfg.training['init']}")
    lines.append(f"# data_sha256: {data_sha}")
    for layer in state.config.layers:
        kernel = layer.kernel
        sigma = "none" if kernel.sigma2 is None else repr(kernel.sigma2)
        lines.append(
            f"# layer: s={layer.s} eta={layer.eta!r} lam={layer.lam!r} "
            f"family={kernel.family} sigma2={sigma} "
            f"trainable={int(kernel.trainable_bandwidth)}"
        )
    h_stack = np.concatenate(state.h, axis=0)
    lines.append(f"# h_stack: {h_stack.shape[0]} {h_stack.shape[1]}")
    for row in h_stack:
        lines.append(",".join(repr(float(v)) for v in row))
    lines.append(f"# x: {state.x.shape[0]} {state.x.shape[1]}")
    for row in state.x:
        lines.append(",".join(repr(float(v)) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _parse_layer_line(body, line_number):
    fields = {}
    for item in body.split():
        if "=" not in item:
            raise ParseError(f"malformed layer field {item!r}", line_number)
        key, value = item.split("=", 1)
        fields[key] = value
    try:
        s = int(fields["s"])
        eta = float(fields["eta"])
        lam = float(fields["lam"])
        family = fields["family"]
        sigma2 = None if fields["sigma2"] == "none" else float(fields["sigma2"])
        trainable = bool(int(fields["trainable"]))
    except (KeyError, ValueError) as err:
        raise ParseError(f"bad layer line: {err}", line_number) from None
    return LayerConfig(
        s=s,
        eta=eta,
        lam=lam,
        kernel=KernelSpec(family, sigma2=sigma2, trainable_bandwidth=trainable),
    )


def _read_matrix(lines, start, shape, path):
    rows, (n, d) = [], shape
    for offset in range(n):
        number = start + offset
        if number > len(lines):
            raise ParseError("file ends inside a matrix section", len(lines))
        fields = lines[number - 1].split(",")
        if len(fields) != d:
            raise ParseError(f"expected {d} fields, got {len(fields)}", number)
        try:
            rows.append([float(v) for v in fields])
        except ValueError as err:
            raise ParseError(str(err), number) from None
    return np.array(rows, dtype=float), start + n


def load_model(path):
    """Read a model file back into a TrainedModel plus its provenance."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    meta = {}
    layers = []
    h_stack = x = None
    number = 1
    if not lines or lines[0].strip() != f"# format: {_MODEL_MAGIC}":
        raise ParseError(f"not a {_MODEL_MAGIC} file", 1)
    while number <= len(lines):
        line = lines[number - 1].strip()
        number += 1
        if not line:
            continue
        if not line.startswith("#"):
            raise ParseError("data outside a declared matrix section", number - 1)
        body = line[1:].strip()
        if body.startswith("layer:"):
            layers.append(_parse_layer_line(body[len("layer:"):], number - 1))
        elif body.startswith("h_stack:") or body.startswith("x:"):
            key, _, dims = body.partition(":")
            try:
                n, d = (int(v) for v in dims.split())
            except ValueError:
                raise ParseError(f"bad {key} dimensions {dims!r}", number - 1) from None
            matrix, number = _read_matrix(lines, number, (n, d), path)
            if key == "h_stack":
                h_stack = matrix
            else:
                x = matrix
        else:
            key, _, value = body.partition(":")
            meta[key.strip()] = value.strip()
    if not layers or h_stack is None or x is None:
        raise ParseError("model file is missing layers or matrix sections", len(lines))
    config = ModelConfig(layers=tuple(layers))
    if h_stack.shape != (config.total_s, x.shape[0]):
        raise ParseError(
            f"h_stack shape {h_stack.shape} does not match layers/x", len(lines)
        )
    split = []
    row = 0
    for layer in config.layers:
        split.append(h_stack[row : row + layer.s])
        row += layer.s
    state = ModelState(config=config, x=x, h=tuple(split))
    return TrainedModel(state), meta


def _load_model_for(cfg, args, data):
    path = args.model or os.path.join(cfg.output_dir, "model.csv")
    model, meta = load_model(path)
    expected = _array_sha(data["train_noisy"])
    stored = meta.get("data_sha256")
    if stored is not None and stored != expected:
        raise ConfigError(
            f"model {path} was trained on different data than this "
            "configuration generates (data_sha256 mismatch)"
        )
    return model


def _parse_mask(args, cfg):
    if args.component_mask is not None:
        text = args.component_mask.strip()
        if not text:
            raise InvalidArgument("component mask selects zero components")
        try:
            return [int(v) for v in text.split(",")]
        except ValueError:
            raise InvalidArgument(
                f"component mask must be comma-separated integers, got {text!r}"
            ) from None
    return cfg.denoise["component_mask"]


def cmd_generate(cfg, args):
    data = _build_data(cfg)
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    d = cfg.dataset
    meta = dict(_meta(cfg))
    if d["kind"] == "shape":
        meta["shape"] = d["shape"]
    else:
        meta["cardinalities"] = "x".join(str(c) for c in d["cardinalities"])
    meta["sigma_n"] = repr(d["sigma_n"])
    manifest_rows = []
    toy = data.get("factor_dataset")
    roles = [r for r in ("train_clean", "train_noisy", "validation_clean", "validation_noisy") if r in data]
    for role in roles:
        points = data[role]
        path = os.path.join(out_dir, f"{role}.csv")
        if toy is not None:
            payload = type(toy)(toy.factors, points, toy.factor_values, None)
        else:
            payload = points
        save_csv(path, payload, metadata=meta)
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        manifest_rows.append([f"{role}.csv", role, points.shape[0], digest])
    _write_text(
        os.path.join(out_dir, "manifest.csv"),
        _table_text(_meta(cfg), ["file", "role", "rows", "sha256"], manifest_rows),
    )
    print(f"wrote {len(manifest_rows)} datasets to {out_dir}")


def cmd_train(cfg, args):
    data = _build_data(cfg)
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    model, report, selected, selection_rows = _train_model_for_config(cfg, data)
    data_sha = _array_sha(data["train_noisy"])
    save_model(os.path.join(out_dir, "model.csv"), model, cfg, data_sha)
    meta = dict(_meta(cfg))
    meta["init"] = cfg.training["init"]
    meta["data_sha256"] = data_sha
    meta["converged"] = str(report.converged).lower()
    meta["outer_iterations"] = report.outer_iterations
    for idx, layer in enumerate(model.state.config.layers):
        sigma = layer.kernel.sigma2
        meta[f"sigma2_layer_{idx + 1}"] = "none" if sigma is None else repr(sigma)
    rows = [
        [
            k,
            repr(r.mu),
            repr(r.tau),
            r.steps,
            r.stop_reason,
            repr(r.grad_norm),
            repr(r.objective),
            repr(r.residual),
            repr(r.penalty_start),
            repr(r.penalty_end),
            r.start_checksum,
            r.end_checksum,
        ]
        for k, r in enumerate(report.rounds)
    ]
    _write_text(
        os.path.join(out_dir, "train_report.csv"),
        _table_text(
            meta,
            [
                "round",
                "mu",
                "tau",
                "steps",
                "stop_reason",
                "grad_norm",
                "objective",
                "residual",
                "penalty_start",
                "penalty_end",
                "start_checksum",
                "end_checksum",
            ],
            rows,
        ),
    )
    if selection_rows is not None:
        _write_text(
            os.path.join(out_dir, "selection.csv"),
            _table_text(
                _meta(cfg), ["candidate_sigma2", "validation_error", "selected"], selection_rows
            ),
        )
        print(f"selected sigma2 {selected!r} on the validation split")
    last = report.rounds[-1]
    print(
        f"trained {len(model.state.config.layers)} layers on "
        f"{model.state.n_points} points: objective {last.objective:.6f}, "
        f"constraint residual {last.residual:.3e}"
    )


def cmd_denoise(cfg, args):
    data = _build_data(cfg)
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    model = _load_model_for(cfg, args, data)
    mask = _parse_mask(args, cfg)
    settings = _preimage_settings(cfg)
    noisy = data["train_noisy"]
    clean = data["train_clean"]
    denoised = drkm_denoise_batch(
        model, noisy, s_keep=cfg.denoise["s_keep"], settings=settings, components=mask
    )
    err_noisy = reconstruction_error(clean, noisy)
    err_denoised = reconstruction_error(clean, denoised)
    meta = dict(_meta(cfg))
    meta["component_mask"] = "all" if mask is None else ",".join(str(c) for c in mask)
    save_csv(os.path.join(out_dir, "denoised.csv"), denoised, metadata=meta)
    summary = [
        ["n_points", noisy.shape[0]],
        ["component_mask", meta["component_mask"]],
        ["error_noisy_vs_clean", repr(err_noisy)],
        ["error_denoised_vs_clean", repr(err_denoised)],
    ]
    groups = [
        ("clean", clean, "gray", 2.0),
        ("noisy", noisy, "orange", 2.5),
        ("denoised", denoised, "blue", 2.5),
    ]
    run_baseline = args.baseline or cfg.denoise["baseline"]
    if run_baseline:
        kernel = model.state.config.layers[0].kernel
        if kernel.family != "rbf":
            raise ConfigError("the denoising baseline needs an RBF first layer")
        baseline = kpca_denoise_batch(
            model.state.x,
            KernelSpec("rbf", sigma2=kernel.sigma2),
            cfg.denoise["baseline_components"],
            noisy,
            settings=settings,
        )
        err_baseline = reconstruction_error(clean, baseline)
        save_csv(os.path.join(out_dir, "kpca_denoised.csv"), baseline, metadata=meta)
        summary.append(["baseline_components", cfg.denoise["baseline_components"]])
        summary.append(["error_kpca_vs_clean", repr(err_baseline)])
        summary.append(["ratio_kpca_over_drkm", repr(err_baseline / err_denoised)])
        groups.append(("kpca baseline", baseline, "green", 2.0))
    _write_text(
        os.path.join(out_dir, "denoise_summary.csv"),
        _table_text(meta, ["quantity", "value"], summary),
    )
    _write_text(
        os.path.join(out_dir, "denoise.svg"),
        scatter_svg(groups, title="denoising overlay", comment=_svg_comment(cfg)),
    )
    line = f"denoised {noisy.shape[0]} points: error {err_denoised:.6f} vs noisy {err_noisy:.6f}"
    if run_baseline:
        line += f", kpca/drkm ratio {err_baseline / err_denoised:.3f}"
    print(line)


def cmd_metrics(cfg, args):
    if cfg.dataset["kind"] != "factor_toy":
        raise ConfigError("metrics need a factor_toy dataset with ground-truth factors")
    data = _build_data(cfg)
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    model = _load_model_for(cfg, args, data)
    blocks = encode_batch(model, data["train_noisy"])
    latents = np.concatenate(blocks, axis=1)
    target = cfg.metrics["target_latent_dim"]
    if target is not None and latents.shape[1] != target:
        raise ConfigError(
            f"model produces {latents.shape[1]} latent dimensions, "
            f"configuration demands {target}"
        )
    settings = MetricSettings(
        bins=cfg.metrics["bins"],
        train_fraction=cfg.metrics["train_fraction"],
        seed=cfg.metrics["seed"],
        n_eval=cfg.metrics["n_eval"],
    )
    report = evaluate_metrics(latents, data["factor_dataset"], settings)
    meta_lines = "".join(f"# {k}: {v}\n" for k, v in _meta(cfg).items())
    _write_text(os.path.join(out_dir, "metrics.csv"), meta_lines + report_to_csv(report))
    _write_text(os.path.join(out_dir, "metrics.txt"), report_table(report))
    print(report_table(report), end="")


def _sweep_cell(payload):
    """One sweep cell, safe to run in a worker process."""
    cfg = ExperimentConfig(payload["normalized"])
    gamma = payload["gamma"]
    n_train = payload["n_train"]
    arch = payload["arch"]
    seed = payload["seed"]
    arch_text = "-".join(str(s) for s in arch)
    base = [repr(gamma), n_train, len(arch), arch_text, seed]
    try:
        d = cfg.dataset
        toy = generate_factor_toy(
            tuple(d["cardinalities"]), d["embedding_dim"], d["seed"], n_samples=n_train
        )
        noisy = add_noise(toy.points, d["sigma_n"], seed=d["seed"] + _TRAIN_NOISE_OFFSET)
        layer_dicts = []
        for idx, s in enumerate(arch):
            sigma2 = cfg.sweep["sigma2"] if idx == 0 else 4.0 * arch[idx - 1] / n_train
            layer_dicts.append(
                {
                    "s": s,
                    "eta": gamma,
                    "lam": 1.0,
                    "kernel": {"family": "rbf", "sigma2": sigma2, "trainable_bandwidth": False},
                }
            )
        model_config = _model_config(layer_dicts)
        if cfg.training["init"] == "layerwise_kpca":
            h0 = init_layerwise_kpca(model_config, noisy)
        else:
            h0 = init_random(model_config, noisy.shape[0], seed)
        state = ModelState(config=model_config, x=noisy, h=tuple(h0))
        final, _ = train(state, PenaltySchedule(**cfg.training["penalty"]))
        latents = np.concatenate(encode_batch(TrainedModel(final), noisy), axis=1)
        settings = MetricSettings(
            bins=cfg.metrics["bins"],
            train_fraction=cfg.metrics["train_fraction"],
            seed=cfg.metrics["seed"],
            n_eval=cfg.metrics["n_eval"],
        )
        report = evaluate_metrics(latents, toy, settings)
        rows = [
            base + [metric, repr(getattr(report, metric)), "ok"]
            for metric in ("mig", "sap", "irs")
        ]
    except DrkmError as err:
        rows = [base + ["", "", f"failed: {type(err).__name__}: {err}"]]
    return payload["order"], rows


def _worker_count(n_cells):
    raw = os.environ.get("DRKM_THREADS")
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"DRKM_THREADS must be an integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError(f"DRKM_THREADS must be at least 1, got {cap}")
    return max(1, min(cap, n_cells))


def cmd_sweep(cfg, args):
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a sweep section")
    if cfg.dataset["kind"] != "factor_toy":
        raise ConfigError("sweeps evaluate metrics and need a factor_toy dataset")
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    payloads = []
    order = 0
    for gamma in cfg.sweep["gamma"]:
        for n_train in cfg.sweep["n_train"]:
            for arch in cfg.sweep["architectures"]:
                for seed in cfg.sweep["seeds"]:
                    payloads.append(
                        {
                            "normalized": cfg.normalized,
                            "gamma": gamma,
                            "n_train": n_train,
                            "arch": arch,
                            "seed": seed,
                            "order": order,
                        }
                    )
                    order += 1
    workers = _worker_count(len(payloads))
    if workers == 1:
        results = [_sweep_cell(p) for p in payloads]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    results.sort(key=lambda item: item[0])
    long_rows = [row for _, rows in results for row in rows]
    header = ["gamma", "n_train", "n_layers", "architecture", "seed", "metric", "value", "status"]
    _write_text(
        os.path.join(out_dir, "sweep.csv"), _table_text(_meta(cfg), header, long_rows)
    )

    grouped = {}
    for row in long_rows:
        if row[7] != "ok":
            continue
        key = (row[0], row[1], row[2], row[3], row[5])
        grouped.setdefault(key, []).append(float(row[6]))
    agg_rows = []
    for key in sorted(grouped, key=lambda k: (float(k[0]), k[1], k[2], k[3], k[4])):
        values = np.array(grouped[key])
        agg_rows.append(
            list(key[:4])
            + [key[4], repr(float(values.mean())), repr(float(values.std())), values.size]
        )
    _write_text(
        os.path.join(out_dir, "sweep_aggregate.csv"),
        _table_text(
            _meta(cfg),
            ["gamma", "n_train", "n_layers", "architecture", "metric", "mean", "std", "n_ok"],
            agg_rows,
        ),
    )
    failed = sum(1 for row in long_rows if row[7] != "ok")
    print(
        f"swept {len(payloads)} cells with {workers} workers: "
        f"{len(payloads) - failed} succeeded, {failed} failed"
    )


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="drkm",
        description="Kernel PCA stack experiments: data, training, denoising, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "write the configured dataset as CSV files"),
        ("train", "train the configured model and write model + report"),
        ("denoise", "denoise the training points with a trained model"),
        ("metrics", "score a trained model's codes against the factors"),
        ("sweep", "grid of trainings over gamma, n, architecture, seed"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="YAML experiment file")
        cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        if name in ("denoise", "metrics"):
            cmd.add_argument(
                "--model", default=None, help="model file (default: <out>/model.csv)"
            )
        if name == "denoise":
            cmd.add_argument(
                "--component-mask",
                default=None,
                help="comma-separated projection component indices",
            )
            cmd.add_argument(
                "--baseline", action="store_true", help="also run the kernel PCA baseline"
            )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out)
        _COMMANDS[args.command](cfg, args)
    except (ConfigError, InvalidArgument, InfeasibleConstraint) as err:
        print(f"configuration error: {err}", file=sys.stderr, flush=True)
        return 2
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr, flush=True)
        return 4
    except DrkmError as err:
        print(f"numeric failure: {type(err).__name__}: {err}", file=sys.stderr, flush=True)
        return 3
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr, flush=True)
        return 4
    return 0
