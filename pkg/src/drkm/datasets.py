"""Synthetic 2D curve datasets, noise injection, and a toy factor dataset.

Curve generators draw points uniformly along a shape's arc length using
stratified sampling: the curve is split into n equal-length strata and one
point is jittered uniformly inside each, so coverage is even while the seed
still moves every point.  All shapes live inside the [-1, 1]^2 box.

The factor toy provides a small stand-in for image datasets whose samples
are a deterministic function of discrete generative factors: each factor
value owns a fixed random embedding, and the observation is a tanh-squashed
random rotation of the summed embeddings.  Factors are recoverable from the
observations but no single coordinate encodes a single factor.

CSV persistence round-trips float64 exactly by writing shortest
round-trip decimal reprs.
"""

import dataclasses
import math

import numpy as np

from .errors import InvalidArgument, ParseError

SQUARE = "square"
HALF_CIRCLE = "half_circle"
SPIRAL = "spiral"
RING = "ring"
COMPOSITE = "composite"

_PRIMITIVE_KINDS = (SQUARE, HALF_CIRCLE, SPIRAL, RING)

_SPIRAL_TURNS = 3
_SPIRAL_THETA_MAX = 2.0 * math.pi * _SPIRAL_TURNS
# Dense enough that linear inversion of the arc-length table positions
# points to ~1e-8 of the curve scale.
_SPIRAL_KNOTS = 4097

_RING_INNER_RADIUS = 0.5


def _spiral_arclen(theta):
    # arc length of r = a*theta up to the constant factor a
    return 0.5 * (theta * np.sqrt(1.0 + theta * theta) + np.arcsinh(theta))


_SPIRAL_THETA_GRID = np.linspace(0.0, _SPIRAL_THETA_MAX, _SPIRAL_KNOTS)
_SPIRAL_S_GRID = _spiral_arclen(_SPIRAL_THETA_GRID)


def _check_seed(seed):
    seed = int(seed)
    if seed < 0:
        raise InvalidArgument("seed must be a non-negative integer")
    return seed


@dataclasses.dataclass(frozen=True)
class Placement:
    """One part of a composite shape: a shape scaled then shifted."""

    shape: "ShapeSpec"
    offset: tuple = (0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.shape, ShapeSpec):
            raise InvalidArgument("placement shape must be a ShapeSpec")
        offset = tuple(float(v) for v in self.offset)
        if len(offset) != 2 or not all(math.isfinite(v) for v in offset):
            raise InvalidArgument("placement offset must be two finite numbers")
        object.__setattr__(self, "offset", offset)
        scale = float(self.scale)
        if not math.isfinite(scale) or scale <= 0.0:
            raise InvalidArgument("placement scale must be positive and finite")
        object.__setattr__(self, "scale", scale)


@dataclasses.dataclass(frozen=True)
class ShapeSpec:
    """A primitive curve (square, half circle, spiral, ring) or a composite.

    Primitive specs carry their own point count and seed.  Composite specs
    hold placements whose shapes carry the counts and seeds; their own
    n_points and seed stay at zero.
    """

    kind: str
    n_points: int = 0
    seed: int = 0
    parts: tuple = ()

    def __post_init__(self):
        if self.kind == COMPOSITE:
            if not self.parts:
                raise InvalidArgument("composite shape needs at least one part")
            parts = tuple(self.parts)
            for part in parts:
                if not isinstance(part, Placement):
                    raise InvalidArgument("composite parts must be Placements")
            object.__setattr__(self, "parts", parts)
            if int(self.n_points) != 0 or int(self.seed) != 0:
                raise InvalidArgument(
                    "composite shapes take point counts and seeds from their parts"
                )
            return
        if self.kind not in _PRIMITIVE_KINDS:
            raise InvalidArgument(f"unknown shape kind {self.kind!r}")
        if self.parts:
            raise InvalidArgument("only composite shapes carry parts")
        n_points = int(self.n_points)
        if n_points < 1:
            raise InvalidArgument("n_points must be at least 1")
        object.__setattr__(self, "n_points", n_points)
        object.__setattr__(self, "seed", _check_seed(self.seed))

    @property
    def total_points(self):
        if self.kind == COMPOSITE:
            return sum(part.shape.total_points for part in self.parts)
        return self.n_points


def square(n_points, seed=0):
    return ShapeSpec(SQUARE, n_points, seed)


def half_circle(n_points, seed=0):
    return ShapeSpec(HALF_CIRCLE, n_points, seed)


def spiral(n_points, seed=0):
    return ShapeSpec(SPIRAL, n_points, seed)


def ring(n_points, seed=0):
    return ShapeSpec(RING, n_points, seed)


def composite(parts):
    return ShapeSpec(COMPOSITE, parts=tuple(parts))


def _split_counts(n_points, k):
    base, rem = divmod(int(n_points), k)
    if base == 0:
        raise InvalidArgument(f"need at least {k} points for {k} parts")
    return [base + 1 if i < rem else base for i in range(k)]


def square_and_spiral(n_points, seed=0):
    """A square with a spiral next to it, side by side inside the box."""
    seed = _check_seed(seed)
    counts = _split_counts(n_points, 2)
    return composite(
        [
            Placement(square(counts[0], seed), offset=(-0.52, 0.0), scale=0.45),
            Placement(spiral(counts[1], seed + 1), offset=(0.52, 0.0), scale=0.45),
        ]
    )


def two_squares_spiral_ring(n_points, seed=0):
    """Two squares above, a spiral and a ring below, one per quadrant."""
    seed = _check_seed(seed)
    counts = _split_counts(n_points, 4)
    return composite(
        [
            Placement(square(counts[0], seed), offset=(-0.55, 0.55), scale=0.40),
            Placement(square(counts[1], seed + 1), offset=(0.55, 0.55), scale=0.40),
            Placement(spiral(counts[2], seed + 2), offset=(-0.53, -0.53), scale=0.42),
            Placement(ring(counts[3], seed + 3), offset=(0.53, -0.53), scale=0.42),
        ]
    )


def _stratified_params(n, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    return (np.arange(n) + rng.uniform(0.0, 1.0, n)) / n


def _square_curve(t):
    # counterclockwise from the (-1, -1) corner, arc length 8
    u = 4.0 * t
    side = np.floor(u)
    pos = 2.0 * (u - side) - 1.0
    x = np.select([side == 0, side == 1, side == 2], [pos, 1.0, -pos], -1.0)
    y = np.select([side == 0, side == 1, side == 2], [-1.0, pos, 1.0], -pos)
    return np.stack([x, y], axis=1)


def _half_circle_curve(t):
    theta = np.pi * t
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def _spiral_curve(t):
    s = t * _SPIRAL_S_GRID[-1]
    theta = np.interp(s, _SPIRAL_S_GRID, _SPIRAL_THETA_GRID)
    r = theta / _SPIRAL_THETA_MAX
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def _ring_curve(t):
    # outer unit circle then inner circle, parameterized by arc length,
    # so the point split matches the 2:1 circumference ratio
    outer_len = 2.0 * np.pi
    s = t * outer_len * (1.0 + _RING_INNER_RADIUS)
    on_outer = s < outer_len
    theta = np.where(on_outer, s, (s - outer_len) / _RING_INNER_RADIUS)
    r = np.where(on_outer, 1.0, _RING_INNER_RADIUS)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


_CURVES = {
    SQUARE: _square_curve,
    HALF_CIRCLE: _half_circle_curve,
    SPIRAL: _spiral_curve,
    RING: _ring_curve,
}


def generate_shape(spec):
    """Sample points along the curve described by spec, shape (n, 2)."""
    if not isinstance(spec, ShapeSpec):
        raise InvalidArgument("spec must be a ShapeSpec")
    if spec.kind == COMPOSITE:
        blocks = [
            part.scale * generate_shape(part.shape) + np.asarray(part.offset)
            for part in spec.parts
        ]
        return np.concatenate(blocks, axis=0)
    t = _stratified_params(spec.n_points, spec.seed)
    return _CURVES[spec.kind](t)


def add_noise(x, sigma_n, seed):
    """Add i.i.d. centered Gaussian noise of standard deviation sigma_n."""
    x = np.asarray(x, dtype=float)
    sigma_n = float(sigma_n)
    if not math.isfinite(sigma_n) or sigma_n < 0.0:
        raise InvalidArgument("sigma_n must be non-negative and finite")
    seed = _check_seed(seed)
    if sigma_n == 0.0:
        return x.copy()
    rng = np.random.Generator(np.random.Philox(key=seed))
    return x + rng.normal(0.0, sigma_n, x.shape)


_NAME_FORBIDDEN = set(',"#\r\n') | {" ", "\t"}


@dataclasses.dataclass(frozen=True)
class FactorDataset:
    """Observations paired with the discrete factor values that made them.

    generator maps a tuple of factor values to its observation; datasets
    loaded from disk carry None there because only the samples persist.
    """

    factors: tuple
    points: np.ndarray
    factor_values: np.ndarray
    generator: object = None

    def __post_init__(self):
        factors = tuple((str(name), int(card)) for name, card in self.factors)
        for name, card in factors:
            if not name or any(ch in _NAME_FORBIDDEN for ch in name):
                raise InvalidArgument(f"factor name {name!r} not CSV-safe")
            if card < 1:
                raise InvalidArgument("factor cardinality must be at least 1")
        if len({name for name, _ in factors}) != len(factors):
            raise InvalidArgument("factor names must be unique")
        object.__setattr__(self, "factors", factors)
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.factor_values)
        if points.ndim != 2 or values.ndim != 2:
            raise InvalidArgument("points and factor_values must be 2-d")
        if values.shape != (points.shape[0], len(factors)):
            raise InvalidArgument(
                "factor_values must have one row per point and one column per factor"
            )
        if not np.issubdtype(values.dtype, np.integer):
            raise InvalidArgument("factor values must be integers")
        for j, (_, card) in enumerate(factors):
            col = values[:, j]
            if col.size and (col.min() < 0 or col.max() >= card):
                raise InvalidArgument(f"factor column {j} outside [0, {card})")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "factor_values", values.astype(np.int64))

    @property
    def n_factors(self):
        return len(self.factors)


def generate_factor_toy(per_factor_cardinalities, embedding_dim, seed, n_samples=None):
    """Deterministic factors-to-points toy dataset on an exhaustive grid.

    Every factor value indexes a fixed Gaussian embedding; an observation
    is tanh(R @ sum of embeddings) for a fixed random rotation R, so the
    factors stay recoverable but are entangled across coordinates.  With
    n_samples, a random subset of the grid is kept (without replacement).
    """
    cards = tuple(int(c) for c in per_factor_cardinalities)
    if not cards or any(c < 2 for c in cards):
        raise InvalidArgument("need at least one factor, each with cardinality >= 2")
    dim = int(embedding_dim)
    if dim < len(cards):
        raise InvalidArgument("embedding_dim must be at least the factor count")
    seed = _check_seed(seed)
    rng = np.random.Generator(np.random.Philox(key=seed))
    n_factors = len(cards)
    # variance 1/n_factors per embedding keeps the summed input inside
    # the responsive part of tanh
    scale = 1.0 / math.sqrt(n_factors)
    embeddings = [rng.normal(0.0, scale, (c, dim)) for c in cards]
    gauss = rng.normal(0.0, 1.0, (dim, dim))
    q, r = np.linalg.qr(gauss)
    rotation = q * np.sign(np.diag(r))[None, :]

    grid = np.stack(
        np.meshgrid(*[np.arange(c) for c in cards], indexing="ij"), axis=-1
    ).reshape(-1, n_factors)
    if n_samples is not None:
        n_samples = int(n_samples)
        if not 1 <= n_samples <= grid.shape[0]:
            raise InvalidArgument("n_samples must be in [1, grid size]")
        keep = np.sort(rng.choice(grid.shape[0], size=n_samples, replace=False))
        grid = grid[keep]

    summed = np.zeros((grid.shape[0], dim))
    for j in range(n_factors):
        summed += embeddings[j][grid[:, j]]
    points = np.tanh(summed @ rotation.T)

    def generator(values):
        u = np.zeros(dim)
        for j in range(n_factors):
            u += embeddings[j][int(values[j])]
        return np.tanh(rotation @ u)

    factors = tuple((f"factor_{j}", cards[j]) for j in range(n_factors))
    return FactorDataset(factors, points, grid, generator)


def _format_float(v):
    return repr(float(v))


def save_csv(path, data, metadata=None):
    """Write a matrix or FactorDataset as CSV with LF endings.

    Metadata key/value pairs become leading '# key: value' lines; factor
    descriptions are stored the same way so load_csv can rebuild the
    dataset structure.
    """
    lines = []
    for key, value in (metadata or {}).items():
        key, value = str(key), str(value)
        if any(ch in key for ch in ":\r\n") or any(ch in value for ch in "\r\n"):
            raise InvalidArgument("metadata keys and values must be single-line")
        lines.append(f"# {key}: {value}")
    if isinstance(data, FactorDataset):
        for name, card in data.factors:
            lines.append(f"# factor: {name} {card}")
        names = [name for name, _ in data.factors]
        dim = data.points.shape[1]
        lines.append(",".join(names + [f"x{j}" for j in range(dim)]))
        for values, point in zip(data.factor_values, data.points):
            fields = [str(int(v)) for v in values]
            fields += [_format_float(v) for v in point]
            lines.append(",".join(fields))
    else:
        x = np.asarray(data, dtype=float)
        if x.ndim != 2:
            raise InvalidArgument("matrix data must be 2-d")
        lines.append(",".join(f"x{j}" for j in range(x.shape[1])))
        for row in x:
            lines.append(",".join(_format_float(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_factor_comment(body, line_number):
    fields = body.split()
    if len(fields) != 2:
        raise ParseError("factor line must be '# factor: name cardinality'", line_number)
    try:
        card = int(fields[1])
    except ValueError:
        raise ParseError(f"bad factor cardinality {fields[1]!r}", line_number) from None
    return fields[0], card


def load_csv(path):
    """Load a CSV written by save_csv.

    Returns an (n, d) float matrix, or a FactorDataset when the file
    declares factors.  Malformed content raises ParseError carrying the
    1-based line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().split("\n")
    factors = []
    header = None
    header_line = 0
    rows = []
    row_lines = []
    for idx, raw in enumerate(raw_lines, start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("factor:"):
                if header is not None:
                    raise ParseError("factor declarations must precede the header", idx)
                factors.append(_parse_factor_comment(body[len("factor:"):], idx))
            continue
        fields = line.split(",")
        if header is None:
            header = [f.strip() for f in fields]
            header_line = idx
            if any(not name for name in header):
                raise ParseError("empty column name in header", idx)
            continue
        if len(fields) != len(header):
            raise ParseError(
                f"row has {len(fields)} fields, header declares {len(header)}", idx
            )
        rows.append(fields)
        row_lines.append(idx)
    if header is None:
        raise ParseError("no header row found", 1)

    n_factors = len(factors)
    if n_factors:
        declared = [name for name, _ in factors]
        if header[:n_factors] != declared:
            raise ParseError(
                f"header columns {header[:n_factors]} do not match declared "
                f"factors {declared}",
                header_line,
            )
    dim = len(header) - n_factors
    if dim < 1:
        raise ParseError("no data columns after the factor columns", header_line)

    values = np.zeros((len(rows), n_factors), dtype=np.int64)
    points = np.zeros((len(rows), dim))
    for i, (fields, line_number) in enumerate(zip(rows, row_lines)):
        for j in range(n_factors):
            try:
                values[i, j] = int(fields[j])
            except ValueError:
                raise ParseError(
                    f"bad integer {fields[j]!r} in factor column {j}", line_number
                ) from None
        for j in range(dim):
            try:
                points[i, j] = float(fields[n_factors + j])
            except ValueError:
                raise ParseError(
                    f"bad number {fields[n_factors + j]!r} in column {n_factors + j}",
                    line_number,
                ) from None
    if n_factors:
        for j, (_, card) in enumerate(factors):
            col = values[:, j]
            if col.size and (col.min() < 0 or col.max() >= card):
                bad = int(np.argmax((col < 0) | (col >= card)))
                raise ParseError(
                    f"factor value {col[bad]} outside [0, {card})", row_lines[bad]
                )
        return FactorDataset(tuple(factors), points, values, generator=None)
    return points
