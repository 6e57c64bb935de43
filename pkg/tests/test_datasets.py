"""Tests for the synthetic curve generators, noise, factor toy, and CSV I/O."""

import numpy as np
import pytest

from drkm.datasets import (
    COMPOSITE,
    FactorDataset,
    Placement,
    ShapeSpec,
    add_noise,
    composite,
    generate_factor_toy,
    generate_shape,
    half_circle,
    load_csv,
    ring,
    save_csv,
    spiral,
    square,
    square_and_spiral,
    two_squares_spiral_ring,
)
from drkm.errors import InvalidArgument, ParseError


class TestShapeSpec:
    def test_unknown_kind(self):
        with pytest.raises(InvalidArgument):
            ShapeSpec("triangle", 10)

    def test_point_count_positive(self):
        with pytest.raises(InvalidArgument):
            ShapeSpec("square", 0)

    def test_seed_non_negative(self):
        with pytest.raises(InvalidArgument):
            ShapeSpec("square", 10, seed=-1)

    def test_primitive_rejects_parts(self):
        with pytest.raises(InvalidArgument):
            ShapeSpec("square", 10, parts=(Placement(square(5)),))

    def test_composite_needs_parts(self):
        with pytest.raises(InvalidArgument):
            ShapeSpec(COMPOSITE)

    def test_composite_rejects_own_count_and_seed(self):
        part = Placement(square(5))
        with pytest.raises(InvalidArgument):
            ShapeSpec(COMPOSITE, n_points=5, parts=(part,))
        with pytest.raises(InvalidArgument):
            ShapeSpec(COMPOSITE, seed=3, parts=(part,))

    def test_placement_validation(self):
        with pytest.raises(InvalidArgument):
            Placement(square(5), scale=0.0)
        with pytest.raises(InvalidArgument):
            Placement(square(5), scale=float("inf"))
        with pytest.raises(InvalidArgument):
            Placement(square(5), offset=(float("nan"), 0.0))
        with pytest.raises(InvalidArgument):
            Placement("square", offset=(0.0, 0.0))

    def test_total_points(self):
        spec = composite([Placement(square(5)), Placement(ring(7, seed=1))])
        assert spec.total_points == 12
        assert square(9).total_points == 9


class TestSquare:
    def test_four_points_one_per_side(self):
        pts = generate_shape(square(4, seed=7))
        # stratified quarters of the perimeter put one point on each side,
        # in counterclockwise order from the bottom-left corner
        assert pts.shape == (4, 2)
        assert pts[0, 1] == -1.0
        assert pts[1, 0] == 1.0
        assert pts[2, 1] == 1.0
        assert pts[3, 0] == -1.0

    def test_perimeter_membership(self):
        pts = generate_shape(square(257, seed=3))
        assert np.all(np.max(np.abs(pts), axis=1) == 1.0)
        assert np.all(np.abs(pts) <= 1.0)

    def test_covers_all_sides(self):
        pts = generate_shape(square(400, seed=0))
        for value, axis in [(-1.0, 1), (1.0, 0), (1.0, 1), (-1.0, 0)]:
            assert np.sum(pts[:, axis] == value) >= 90


class TestHalfCircle:
    def test_arc_equation(self):
        pts = generate_shape(half_circle(200, seed=5))
        r2 = np.sum(pts * pts, axis=1)
        assert np.max(np.abs(r2 - 1.0)) < 1e-12
        assert np.all(pts[:, 1] >= 0.0)

    def test_spans_the_arc(self):
        pts = generate_shape(half_circle(100, seed=2))
        assert pts[0, 0] > 0.99
        assert pts[-1, 0] < -0.99


class TestSpiral:
    def test_radius_monotone_in_parameter_order(self):
        pts = generate_shape(spiral(500, seed=11))
        r = np.hypot(pts[:, 0], pts[:, 1])
        assert np.all(np.diff(r) > 0.0)
        assert r[-1] <= 1.0 + 1e-12

    def test_three_turns(self):
        pts = generate_shape(spiral(2000, seed=1))
        angles = np.arctan2(pts[:, 1], pts[:, 0])
        # count wraps of the continuous angle
        unwrapped = np.unwrap(angles)
        turns = (unwrapped[-1] - unwrapped[0]) / (2.0 * np.pi)
        assert 2.8 < turns < 3.0

    def test_arc_length_spacing_roughly_even(self):
        pts = generate_shape(spiral(1000, seed=4))
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        # stratified sampling keeps consecutive gaps within a small
        # multiple of the mean
        assert np.max(gaps) < 6.0 * np.mean(gaps)


class TestRing:
    def test_two_radii(self):
        pts = generate_shape(ring(300, seed=9))
        r = np.hypot(pts[:, 0], pts[:, 1])
        outer = np.abs(r - 1.0) < 1e-12
        inner = np.abs(r - 0.5) < 1e-12
        assert np.all(outer | inner)

    def test_split_follows_circumference(self):
        pts = generate_shape(ring(300, seed=9))
        r = np.hypot(pts[:, 0], pts[:, 1])
        assert np.sum(np.abs(r - 1.0) < 1e-12) == 200
        assert np.sum(np.abs(r - 0.5) < 1e-12) == 100


class TestComposite:
    def test_recomposition(self):
        parts = [
            Placement(square(40, seed=3), offset=(-0.5, 0.1), scale=0.4),
            Placement(spiral(60, seed=4), offset=(0.5, -0.1), scale=0.45),
        ]
        spec = composite(parts)
        pts = generate_shape(spec)
        manual = np.concatenate(
            [
                0.4 * generate_shape(square(40, seed=3)) + np.array([-0.5, 0.1]),
                0.45 * generate_shape(spiral(60, seed=4)) + np.array([0.5, -0.1]),
            ],
            axis=0,
        )
        assert pts.shape == (100, 2)
        assert np.array_equal(pts, manual)

    @pytest.mark.parametrize("layout", [square_and_spiral, two_squares_spiral_ring])
    def test_layouts_fit_in_the_box(self, layout):
        spec = layout(401, seed=6)
        pts = generate_shape(spec)
        assert pts.shape == (401, 2)
        assert np.all(np.abs(pts) <= 1.0)

    def test_layout_point_split_exact(self):
        assert square_and_spiral(1001).total_points == 1001
        assert two_squares_spiral_ring(999).total_points == 999


class TestDeterminism:
    @pytest.mark.parametrize(
        "spec",
        [
            square(50, seed=1),
            half_circle(50, seed=2),
            spiral(50, seed=3),
            ring(50, seed=4),
            square_and_spiral(50, seed=5),
        ],
    )
    def test_same_spec_same_points(self, spec):
        assert np.array_equal(generate_shape(spec), generate_shape(spec))

    def test_seed_moves_points(self):
        a = generate_shape(square(50, seed=1))
        b = generate_shape(square(50, seed=2))
        assert not np.array_equal(a, b)


class TestAddNoise:
    def test_zero_sigma_identity(self):
        x = generate_shape(square(30, seed=0))
        y = add_noise(x, 0.0, seed=5)
        assert np.array_equal(x, y)
        assert y is not x

    def test_same_seed_same_noise(self):
        x = np.zeros((100, 2))
        assert np.array_equal(add_noise(x, 0.1, seed=3), add_noise(x, 0.1, seed=3))

    def test_noise_standard_deviation(self):
        x = np.zeros((50000, 2))
        noise = add_noise(x, 0.3, seed=8)
        n = noise.size
        # sampling std of the std estimate is sigma / sqrt(2 n)
        assert abs(noise.std() - 0.3) < 3.0 * 0.3 / np.sqrt(2.0 * n)
        assert abs(noise.mean()) < 3.0 * 0.3 / np.sqrt(n)

    def test_negative_sigma_rejected(self):
        with pytest.raises(InvalidArgument):
            add_noise(np.zeros((3, 2)), -0.1, seed=0)


class TestFactorToy:
    def test_grid_size_and_distinctness(self):
        data = generate_factor_toy((3, 3), 4, seed=0)
        assert data.points.shape == (9, 4)
        assert data.factor_values.shape == (9, 2)
        assert np.unique(data.points, axis=0).shape[0] == 9

    def test_single_factor_moves_change_the_point(self):
        data = generate_factor_toy((3, 4), 5, seed=2)
        values = data.factor_values
        for i in range(values.shape[0]):
            for j in range(values.shape[0]):
                if np.sum(values[i] != values[j]) == 1:
                    assert not np.allclose(data.points[i], data.points[j])

    def test_same_seed_identical(self):
        a = generate_factor_toy((3, 3, 2), 4, seed=9)
        b = generate_factor_toy((3, 3, 2), 4, seed=9)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.factor_values, b.factor_values)

    def test_generator_matches_rows(self):
        data = generate_factor_toy((3, 2), 3, seed=4)
        for values, point in zip(data.factor_values, data.points):
            assert np.allclose(data.generator(values), point, atol=1e-14)

    def test_subset_sampling(self):
        full = generate_factor_toy((4, 4), 4, seed=1)
        sub = generate_factor_toy((4, 4), 4, seed=1, n_samples=7)
        assert sub.points.shape == (7, 4)
        # every subset row appears in the full grid
        for values, point in zip(sub.factor_values, sub.points):
            row = np.flatnonzero(np.all(full.factor_values == values, axis=1))
            assert row.size == 1
            assert np.array_equal(full.points[row[0]], point)

    def test_validation(self):
        with pytest.raises(InvalidArgument):
            generate_factor_toy((1, 3), 4, seed=0)
        with pytest.raises(InvalidArgument):
            generate_factor_toy((3, 3), 1, seed=0)
        with pytest.raises(InvalidArgument):
            generate_factor_toy((3, 3), 4, seed=0, n_samples=10)


class TestCsvRoundTrip:
    def test_matrix_bit_identical(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(key=12))
        x = rng.standard_normal((10, 2))
        path = tmp_path / "m.csv"
        save_csv(path, x)
        assert np.array_equal(load_csv(path), x)

    def test_matrix_awkward_values(self, tmp_path):
        x = np.array([[1e-300, -1e300], [0.1 + 0.2, -0.0], [np.pi, 2.0 ** -52]])
        path = tmp_path / "m.csv"
        save_csv(path, x)
        assert np.array_equal(load_csv(path), x)

    def test_factor_dataset_round_trip(self, tmp_path):
        data = generate_factor_toy((3, 2), 3, seed=7)
        path = tmp_path / "f.csv"
        save_csv(path, data, metadata={"origin": "toy"})
        loaded = load_csv(path)
        assert isinstance(loaded, FactorDataset)
        assert loaded.factors == data.factors
        assert np.array_equal(loaded.points, data.points)
        assert np.array_equal(loaded.factor_values, data.factor_values)
        assert loaded.generator is None

    def test_save_then_load_uses_lf_endings(self, tmp_path):
        path = tmp_path / "m.csv"
        save_csv(path, np.zeros((2, 2)))
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


class TestCsvErrors:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            load_csv(path)

    def test_row_width_mismatch_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1.0,2.0\n1.0,2.0\n1.0\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.line_number == 4

    def test_bad_float_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1.0,2.0\n1.0,oops\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.line_number == 3

    def test_factor_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "# factor: shade 2\nwrong,x0\n0,1.0\n",
            encoding="utf-8",
        )
        with pytest.raises(ParseError):
            load_csv(path)

    def test_factor_value_out_of_range(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "# factor: shade 2\nshade,x0\n0,1.0\n5,1.0\n",
            encoding="utf-8",
        )
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.line_number == 4

    def test_factor_declaration_after_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0\n# factor: shade 2\n1.0\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_csv(path)

    def test_metadata_must_be_single_line(self, tmp_path):
        with pytest.raises(InvalidArgument):
            save_csv(tmp_path / "x.csv", np.zeros((1, 1)), metadata={"a": "b\nc"})
