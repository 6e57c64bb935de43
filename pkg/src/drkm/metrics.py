"""Disentanglement scores for latent codes against known generative factors.

Implements the three scores most used in the disentanglement literature:
the mutual information gap of Chen et al. 2018, the separated attribute
predictability score of Kumar et al. 2018, and the interventional
robustness score of Suter et al. 2019.  The original papers leave several
estimator choices open; the conventions here are

  * latents are discretized into equal-frequency bins (default 20) and
    mutual information is taken over the joint empirical distribution,
    in nats;
  * the MIG gap between the two best latents is normalized by the
    empirical factor entropy;
  * SAP predicts each factor from one latent at a time with a
    single-threshold decision stump, scored by balanced accuracy on a
    held-out split (multi-class factors use the best one-vs-rest
    threshold), and averages the top-two column gaps;
  * IRS normalizes the worst deviation of a latent around its associated
    factor's per-value means by its worst deviation overall and averages
    one minus that over latents, weighted by mutual information mass.

All scores lie in [0, 1]; larger means more disentangled.  They are
invariant under positive affine maps of individual latents and under
permutation of latent columns.

Latents are (n_samples, n_latents) float matrices.  Factors are
(n_samples, n_factors) integer matrices or a FactorDataset, whose factor
names then label the report rows.
"""

import csv
import dataclasses
import io
import math
import warnings

import numpy as np

from .datasets import FactorDataset
from .errors import DegenerateSplit, InvalidArgument

_MAX_SPLIT_ATTEMPTS = 10
_SAP_CHANCE = 0.5


def _check_bins(bins):
    bins = int(bins)
    if bins < 2:
        raise InvalidArgument("bins must be at least 2")
    return bins


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**63:
        raise InvalidArgument("seed must be a non-negative 63-bit integer")
    return seed


def _latent_matrix(latents):
    x = np.asarray(latents, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise InvalidArgument("latents must be a non-empty 2-d matrix")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("latents contain non-finite entries")
    return x


def _factor_matrix(factors):
    """Factor values as an (n, n_factors) int array plus display names."""
    if isinstance(factors, FactorDataset):
        return factors.factor_values, [name for name, _ in factors.factors]
    values = np.asarray(factors)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise InvalidArgument("factors must be a non-empty 2-d integer array")
    if not np.issubdtype(values.dtype, np.integer):
        raise InvalidArgument("factor values must be integers")
    return values.astype(np.int64), [f"factor_{j}" for j in range(values.shape[1])]


def equal_frequency_codes(column, bins):
    """Bin codes in [0, bins) splitting the column at its own quantiles.

    A value equal to an interior edge falls into the lower bin; a
    constant column occupies a single bin.
    """
    column = np.asarray(column, dtype=float)
    if column.ndim != 1:
        raise InvalidArgument("column must be a vector")
    if column.size == 0:
        raise InvalidArgument("column must be non-empty")
    if not np.all(np.isfinite(column)):
        raise InvalidArgument("column contains non-finite entries")
    bins = _check_bins(bins)
    edges = np.quantile(column, np.arange(1, bins) / bins)
    return np.searchsorted(edges, column, side="right")


def _entropy(codes):
    counts = np.bincount(codes)
    p = counts[counts > 0] / codes.size
    return float(-(p * np.log(p)).sum())


def _mutual_information_codes(a, b):
    """MI in nats between two integer code vectors, joint empirical law."""
    na = int(a.max()) + 1
    nb = int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb)
    p = joint / a.size
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    nz = p > 0.0
    outer = pa[:, None] * pb[None, :]
    mi = float((p[nz] * np.log(p[nz] / outer[nz])).sum())
    # the empirical MI is non-negative; guard only against rounding
    return max(mi, 0.0)


def mutual_information(latent_column, factor_column, bins=20):
    """MI in nats between one latent column and one discrete factor.

    The latent is discretized into equal-frequency bins, the factor is
    used as is.  A constant latent gives 0.
    """
    x = np.asarray(latent_column, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument("latent_column must be a vector")
    f = np.asarray(factor_column)
    if f.ndim != 1 or f.shape[0] != x.shape[0]:
        raise InvalidArgument("factor_column must be a vector of matching length")
    if not np.issubdtype(f.dtype, np.integer):
        raise InvalidArgument("factor values must be integers")
    codes = equal_frequency_codes(x, bins)
    _, fac = np.unique(f, return_inverse=True)
    return _mutual_information_codes(codes, fac)


def _mi_table(latents, values, bins):
    """Pairwise latent/factor MI matrix plus compact factor codes."""
    lat_codes = [
        equal_frequency_codes(latents[:, i], bins) for i in range(latents.shape[1])
    ]
    fac_codes = [
        np.unique(values[:, j], return_inverse=True)[1] for j in range(values.shape[1])
    ]
    mi = np.empty((len(lat_codes), len(fac_codes)))
    for i, a in enumerate(lat_codes):
        for j, b in enumerate(fac_codes):
            mi[i, j] = _mutual_information_codes(a, b)
    return mi, fac_codes


def _mig_detail(latents, values, names, bins):
    mi, fac_codes = _mi_table(latents, values, bins)
    rows = []
    gaps = []
    notes = []
    for j, codes in enumerate(fac_codes):
        h = _entropy(codes)
        if h == 0.0:
            notes.append(f"mig: factor {names[j]} has a single observed value, excluded")
            rows.append((names[j], None, "excluded: zero entropy"))
            continue
        col = np.sort(mi[:, j])[::-1]
        # a single latent has no runner-up, the gap is its own MI
        second = float(col[1]) if col.size > 1 else 0.0
        gap = min(max((float(col[0]) - second) / h, 0.0), 1.0)
        rows.append((names[j], gap, "ok"))
        gaps.append(gap)
    if gaps:
        value = float(np.mean(gaps))
    else:
        value = 0.0
        notes.append("mig: no factor with positive entropy, score 0")
    return value, tuple(rows), notes


def mig(latents, factors, bins=20):
    """Mean over factors of the entropy-normalized gap between the two
    latents most informative about that factor."""
    x = _latent_matrix(latents)
    values, names = _factor_matrix(factors)
    if values.shape[0] != x.shape[0]:
        raise InvalidArgument("latents and factors must have the same number of rows")
    value, _, notes = _mig_detail(x, values, names, bins)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return value


def _fit_stump(train_x, train_pos):
    """Threshold and polarity of the best balanced-accuracy stump.

    Returns (threshold, predict_above).  Ties go to the leftmost cut, so
    the fit is deterministic.  Both classes must appear in train_pos.
    """
    order = np.argsort(train_x, kind="stable")
    xs = train_x[order]
    pos = train_pos[order]
    n = xs.size
    n_pos = int(pos.sum())
    n_neg = n - n_pos
    # cut k splits the sorted sample into xs[:k] (below) and xs[k:] (above)
    pos_below = np.concatenate([[0], np.cumsum(pos)])
    neg_below = np.arange(n + 1) - pos_below
    tpr = (n_pos - pos_below) / n_pos
    tnr = neg_below / n_neg
    bacc_above = 0.5 * (tpr + tnr)
    bacc = np.maximum(bacc_above, 1.0 - bacc_above)
    # cutting inside a run of equal values is not realizable by a threshold
    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = xs[1:] != xs[:-1]
    bacc[~valid] = -1.0
    k = int(np.argmax(bacc))
    if k == 0:
        threshold = float(xs[0]) - 1.0
    elif k == n:
        threshold = float(xs[-1]) + 1.0
    else:
        threshold = 0.5 * (float(xs[k - 1]) + float(xs[k]))
    return threshold, bool(bacc_above[k] >= 1.0 - bacc_above[k])


def _balanced_accuracy(pred_pos, is_pos):
    """Mean per-class recall over the classes present in is_pos."""
    recalls = []
    if is_pos.any():
        recalls.append(float(pred_pos[is_pos].mean()))
    if (~is_pos).any():
        recalls.append(float((~pred_pos[~is_pos]).mean()))
    return float(np.mean(recalls))


def _score_split(latents, values, train_fraction, seed):
    """Permutation split whose train part sees every observed class."""
    n = latents.shape[0]
    if n < 2:
        raise InvalidArgument("sap needs at least two samples")
    train_fraction = float(train_fraction)
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgument("train_fraction must be strictly between 0 and 1")
    seed = _check_seed(seed)
    n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
    for attempt in range(_MAX_SPLIT_ATTEMPTS):
        rng = np.random.Generator(np.random.Philox(key=seed + attempt))
        perm = rng.permutation(n)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
        ok = True
        for j in range(values.shape[1]):
            observed = np.unique(values[:, j])
            if observed.size < 2:
                continue
            if np.unique(values[train_idx, j]).size != observed.size:
                ok = False
                break
        if ok:
            return train_idx, test_idx
    raise DegenerateSplit(
        "no train split contained every factor value after "
        f"{_MAX_SPLIT_ATTEMPTS} attempts"
    )


def _sap_detail(latents, values, names, train_fraction, seed):
    train_idx, test_idx = _score_split(latents, values, train_fraction, seed)
    rows = []
    gaps = []
    notes = []
    for j in range(values.shape[1]):
        col = values[:, j]
        classes = np.unique(col)
        if classes.size < 2:
            notes.append(f"sap: factor {names[j]} has a single observed value, excluded")
            rows.append((names[j], None, "excluded: zero entropy"))
            continue
        col_scores = np.empty(latents.shape[1])
        # for a binary factor the two one-vs-rest problems are polarity
        # flips of each other, one suffices
        targets = classes[1:] if classes.size == 2 else classes
        for i in range(latents.shape[1]):
            best = 0.0
            for c in targets:
                is_pos = col == c
                threshold, above = _fit_stump(latents[train_idx, i], is_pos[train_idx])
                pred = latents[test_idx, i] > threshold
                if not above:
                    pred = ~pred
                best = max(best, _balanced_accuracy(pred, is_pos[test_idx]))
            col_scores[i] = best
        order = np.sort(col_scores)[::-1]
        # with one latent the runner-up defaults to the stump chance level
        second = float(order[1]) if order.size > 1 else _SAP_CHANCE
        gap = min(max(float(order[0]) - second, 0.0), 1.0)
        rows.append((names[j], gap, f"top latent latent_{int(np.argmax(col_scores))}"))
        gaps.append(gap)
    if gaps:
        value = float(np.mean(gaps))
    else:
        value = 0.0
        notes.append("sap: no factor with positive entropy, score 0")
    return value, tuple(rows), notes


def sap(latents, factors, train_fraction=0.8, seed=0):
    """Mean over factors of the gap between the two best single-latent
    stump predictors, scored by held-out balanced accuracy."""
    x = _latent_matrix(latents)
    values, names = _factor_matrix(factors)
    if values.shape[0] != x.shape[0]:
        raise InvalidArgument("latents and factors must have the same number of rows")
    value, _, notes = _sap_detail(x, values, names, train_fraction, seed)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return value


def _irs_detail(latents, values, names, bins):
    mi, fac_codes = _mi_table(latents, values, bins)
    rows = []
    notes = []
    n_latent = latents.shape[1]
    single_factor = values.shape[1] == 1
    if single_factor:
        notes.append(
            "irs: single factor, robustness to the other factors is vacuous, score 1"
        )
    scores = np.empty(n_latent)
    weights = np.empty(n_latent)
    for i in range(n_latent):
        assoc = int(np.argmax(mi[i]))
        weights[i] = mi[i, assoc]
        col = latents[:, i]
        overall = float(np.abs(col - col.mean()).max())
        if single_factor:
            scores[i] = 1.0
        elif overall == 0.0:
            notes.append(f"irs: latent_{i} is constant, scored 1 by convention")
            scores[i] = 1.0
        else:
            codes = fac_codes[assoc]
            counts = np.bincount(codes)
            group_mean = np.bincount(codes, weights=col) / counts
            within = float(np.abs(col - group_mean[codes]).max())
            scores[i] = max(0.0, 1.0 - within / overall)
        rows.append((f"latent_{i}", names[assoc], float(weights[i]), float(scores[i])))
    total = float(weights.sum())
    if total == 0.0:
        notes.append("irs: no mutual information mass, latents weighted uniformly")
        value = float(np.mean(scores))
    else:
        value = float((weights / total) @ scores)
    return min(max(value, 0.0), 1.0), tuple(rows), notes


def irs(latents, factors, bins=20):
    """MI-mass weighted mean over latents of one minus the worst
    within-group deviation relative to the worst overall deviation.

    Each latent's groups are the values of its maximum-MI factor; inside
    a group only the other factors vary, so a small within-group
    deviation means the latent is robust to them.
    """
    x = _latent_matrix(latents)
    values, names = _factor_matrix(factors)
    if values.shape[0] != x.shape[0]:
        raise InvalidArgument("latents and factors must have the same number of rows")
    value, _, notes = _irs_detail(x, values, names, bins)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return value


@dataclasses.dataclass(frozen=True)
class MetricSettings:
    """Estimator knobs shared by the three scores.

    n_eval caps how many samples enter the estimate: a larger dataset is
    subsampled at random without replacement, a smaller one is used
    whole.  seed drives both that subsample and the SAP split.
    """

    bins: int = 20
    train_fraction: float = 0.8
    seed: int = 0
    n_eval: int = 4000

    def __post_init__(self):
        object.__setattr__(self, "bins", _check_bins(self.bins))
        object.__setattr__(self, "seed", _check_seed(self.seed))
        frac = float(self.train_fraction)
        if not 0.0 < frac < 1.0:
            raise InvalidArgument("train_fraction must be strictly between 0 and 1")
        object.__setattr__(self, "train_fraction", frac)
        n_eval = int(self.n_eval)
        if n_eval < 2:
            raise InvalidArgument("n_eval must be at least 2")
        object.__setattr__(self, "n_eval", n_eval)


@dataclasses.dataclass(frozen=True)
class MetricReport:
    """The three scores plus per-factor and per-latent breakdowns.

    mig_per_factor and sap_per_factor rows are (factor_name, gap, status)
    with gap None when the factor was excluded; irs_per_latent rows are
    (latent_name, associated_factor, mi_weight, score).  notes records
    every convention that fired while scoring.
    """

    mig: float
    sap: float
    irs: float
    mig_per_factor: tuple
    sap_per_factor: tuple
    irs_per_latent: tuple
    notes: tuple = ()

    def __post_init__(self):
        for name in ("mig", "sap", "irs"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise InvalidArgument(f"{name} score {value!r} outside [0, 1]")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "mig_per_factor", tuple(self.mig_per_factor))
        object.__setattr__(self, "sap_per_factor", tuple(self.sap_per_factor))
        object.__setattr__(self, "irs_per_latent", tuple(self.irs_per_latent))
        object.__setattr__(self, "notes", tuple(str(n) for n in self.notes))


def evaluate_metrics(latents, factors, settings=None):
    """All three scores with their breakdowns on one evaluation set."""
    if settings is None:
        settings = MetricSettings()
    x = _latent_matrix(latents)
    values, names = _factor_matrix(factors)
    if values.shape[0] != x.shape[0]:
        raise InvalidArgument("latents and factors must have the same number of rows")
    notes = []
    if x.shape[0] > settings.n_eval:
        rng = np.random.Generator(np.random.Philox(key=settings.seed))
        keep = np.sort(rng.choice(x.shape[0], size=settings.n_eval, replace=False))
        notes.append(f"evaluated on a random subset of {settings.n_eval} of {x.shape[0]} samples")
        x = x[keep]
        values = values[keep]
    mig_value, mig_rows, mig_notes = _mig_detail(x, values, names, settings.bins)
    sap_value, sap_rows, sap_notes = _sap_detail(
        x, values, names, settings.train_fraction, settings.seed
    )
    irs_value, irs_rows, irs_notes = _irs_detail(x, values, names, settings.bins)
    return MetricReport(
        mig=mig_value,
        sap=sap_value,
        irs=irs_value,
        mig_per_factor=mig_rows,
        sap_per_factor=sap_rows,
        irs_per_latent=irs_rows,
        notes=tuple(notes + mig_notes + sap_notes + irs_notes),
    )


def report_to_csv(report):
    """Report as CSV text with a section,name,value,detail header."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "name", "value", "detail"])
    for name in ("mig", "sap", "irs"):
        writer.writerow(["summary", name, repr(getattr(report, name)), ""])
    for section, rows in (("mig", report.mig_per_factor), ("sap", report.sap_per_factor)):
        for fname, gap, status in rows:
            writer.writerow([section, fname, "" if gap is None else repr(gap), status])
    for lname, fname, weight, score in report.irs_per_latent:
        writer.writerow(["irs", lname, repr(score), f"factor {fname}, mi weight {weight:.6g}"])
    for k, note in enumerate(report.notes):
        writer.writerow(["note", str(k), "", note])
    return buf.getvalue()


def report_table(report):
    """Report as an aligned human-readable text block."""
    lines = [
        f"overall   mig {report.mig:.6f}   sap {report.sap:.6f}   irs {report.irs:.6f}"
    ]
    for title, rows in (
        ("mig gap by factor", report.mig_per_factor),
        ("sap gap by factor", report.sap_per_factor),
    ):
        if rows:
            lines.append(f"{title}:")
            for fname, gap, status in rows:
                shown = "excluded" if gap is None else f"{gap:.6f}"
                lines.append(f"  {fname:<20} {shown:>10}  {status}")
    if report.irs_per_latent:
        lines.append("irs by latent:")
        for lname, fname, weight, score in report.irs_per_latent:
            lines.append(
                f"  {lname:<20} {score:>10.6f}  factor {fname}, mi weight {weight:.4f}"
            )
    if report.notes:
        lines.append("notes:")
        lines.extend(f"  {note}" for note in report.notes)
    return "\n".join(lines) + "\n"
