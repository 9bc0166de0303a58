"""Tests for domain shapes, regularity checks and the simplex tiling."""

import numpy as np
import pytest
from pydantic import TypeAdapter, ValidationError

from thermolimit.exceptions import GeometryError, UnsupportedShapeError
from thermolimit.geometry import (
    Ball,
    CellUnion,
    Cube,
    Cuboid,
    DomainShape,
    Intersection,
    RigidTransform,
    Simplex,
    TilingSpec,
    aligned_cube,
    boundary_scaling,
    check_rotation,
    classify_cells,
    collar_profile,
    collar_volume,
    cone_check,
    fisher_a_estimate,
    haar_angle_ks,
    inclusion_radius,
    regularized_volume,
    regularized_volume_scan,
    sample_group_element,
    shape_signed_distance,
    tiling_volume_identity,
    translate_counts,
)
from thermolimit.nuclei import LatticeSpec

CUBIC = LatticeSpec()
T_GRID = [0.005, 0.01, 0.02]


def _rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------

class TestShapes:
    """Signed distances, volumes and placement."""

    def test_cube_distances(self):
        cube = Cube(side=4.0)
        sd = cube.signed_distance([[2.0, 2.0, 2.0], [5.0, 2.0, 2.0], [5.0, 5.0, 2.0]])
        np.testing.assert_allclose(sd, [-2.0, 1.0, np.sqrt(2.0)])
        assert cube.volume == pytest.approx(64.0)

    def test_ball_distances(self):
        ball = Ball(radius=2.0, transform=RigidTransform(translation=(1.0, 0.0, 0.0)))
        np.testing.assert_allclose(ball.signed_distance([[1.0, 0.0, 0.0], [4.0, 0.0, 0.0]]),
                                   [-2.0, 1.0])
        assert ball.bbox().lo == (-1.0, -2.0, -2.0)

    def test_regular_simplex(self):
        simplex = Simplex.regular(1.0)
        assert simplex.circumradius == pytest.approx(1.0)
        assert simplex.volume == pytest.approx(8.0 / (9.0 * np.sqrt(3.0)))
        assert simplex.inradius == pytest.approx(1.0 / 3.0)
        sd = simplex.signed_distance(simplex.incenter[None, :])
        assert sd[0] == pytest.approx(-1.0 / 3.0)

    def test_simplex_outside_distance_to_vertex(self):
        simplex = Simplex.regular(1.0)
        vertex = simplex.vertex_array[0]
        assert simplex.signed_distance((2.0 * vertex)[None, :])[0] == pytest.approx(1.0)

    def test_rotation_preserves_distances(self):
        rot = RigidTransform.from_arrays(_rotation_z(0.7), (3.0, -1.0, 2.0))
        cube = Cube(side=2.0, transform=rot)
        local = np.array([[0.5, 0.5, 0.5], [3.0, 1.0, 1.0]])
        np.testing.assert_allclose(cube.signed_distance(rot.to_world(local)),
                                   Cube(side=2.0).signed_distance(local), atol=1e-12)

    def test_check_rotation_rejects_reflection(self):
        with pytest.raises(GeometryError):
            check_rotation(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(ValidationError):
            RigidTransform(rotation=((2, 0, 0), (0, 1, 0), (0, 0, 1)))

    def test_cube_from_mapping(self):
        shape = TypeAdapter(DomainShape).validate_python({"kind": "cube", "side": 3})
        assert isinstance(shape, Cube)
        assert shape.sides == (3.0, 3.0, 3.0)

    def test_degenerate_simplex_rejected(self):
        with pytest.raises(ValidationError):
            Simplex(vertices=((0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0)))

    def test_cell_union(self):
        union = CellUnion(cells=[(0, 0, 0), (1, 0, 0)])
        assert union.volume == 2.0
        sd = union.signed_distance([[0.5, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert sd[0] == pytest.approx(-0.5)
        assert sd[1] == pytest.approx(0.5)

    def test_intersection_volume(self):
        both = Intersection(first=Cube(side=2.0),
                            second=Cube(side=2.0, transform=RigidTransform(
                                translation=(1.0, 0.0, 0.0))))
        assert both.volume == pytest.approx(4.0, rel=1e-6)

    def test_disjoint_intersection_is_empty(self):
        far = Intersection(first=Ball(radius=1.0),
                           second=Ball(radius=1.0, transform=RigidTransform(
                               translation=(10.0, 0.0, 0.0))))
        assert far.volume == 0.0
        assert regularized_volume(far) == 0.0

    def test_site_distances_are_lattice_shift_invariant(self):
        shape = Ball(radius=2.5, transform=RigidTransform(translation=(0.25, 0.125, -0.375)))
        sites = np.array([[0, 0, 0], [1, 2, -1], [3, 0, 0]])
        disp = np.array([[0.1, 0.0, 0.0], [0.0, -0.2, 0.1], [0.0, 0.0, 0.3]])
        k = np.array([5, -7, 2])
        moved = shape.translated(k.astype(float))
        np.testing.assert_array_equal(
            shape_signed_distance(moved, sites + k, disp, CUBIC),
            shape_signed_distance(shape, sites, disp, CUBIC),
        )


# ---------------------------------------------------------------------------
# Collars and Fisher regularity
# ---------------------------------------------------------------------------

class TestCollars:
    """Monte Carlo collar volumes against closed forms."""

    def test_cube_collar_matches_closed_form(self):
        side, t = 10.0, 0.02
        w = t * side
        inner = side ** 3 - (side - 2 * w) ** 3
        outer = 6 * side ** 2 * w + 3 * np.pi * side * w ** 2 + 4.0 / 3.0 * np.pi * w ** 3
        estimate = collar_volume(Cube(side=side), t, n_mc=200_000, seed=1)
        assert estimate == pytest.approx(inner + outer, rel=0.03)

    def test_profile_is_monotone(self):
        profile = collar_profile(Ball(radius=3.0), T_GRID, n_mc=50_000, seed=2)
        assert profile.volumes == sorted(profile.volumes)
        assert all(s > 0 for s in profile.stderrs)

    def test_zero_width_collar_is_empty(self):
        assert collar_volume(Cube(side=2.0), 0.0, n_mc=10_000, seed=3) == 0.0

    def test_too_few_points(self):
        with pytest.raises(GeometryError):
            collar_volume(Cube(side=2.0), 0.01, n_mc=100, seed=0)

    def test_negative_t(self):
        with pytest.raises(GeometryError):
            collar_volume(Cube(side=2.0), -0.1, n_mc=10_000, seed=0)

    def test_intersection_has_no_exact_exterior(self):
        shape = Intersection(first=Cube(side=2.0), second=Ball(radius=1.5))
        with pytest.raises(UnsupportedShapeError):
            collar_volume(shape, 0.01, n_mc=10_000, seed=0)

    def test_fisher_cube(self):
        estimate = fisher_a_estimate(Cube(side=10.0), T_GRID, n_mc=200_000, seed=4)
        assert 11.0 <= estimate.a <= 13.0

    def test_fisher_ball(self):
        estimate = fisher_a_estimate(Ball(radius=5.0), T_GRID, n_mc=200_000, seed=5)
        assert 9.0 <= estimate.a <= 10.5

    def test_fisher_grid_bounds(self):
        with pytest.raises(GeometryError):
            fisher_a_estimate(Cube(side=1.0), [0.1, 0.3], n_mc=10_000, seed=0)

    def test_same_seed_same_profile(self):
        a = collar_profile(Cube(side=3.0), T_GRID, n_mc=20_000, seed=6, threads=1)
        b = collar_profile(Cube(side=3.0), T_GRID, n_mc=20_000, seed=6, threads=4)
        assert a.volumes == b.volumes


# ---------------------------------------------------------------------------
# Cone property
# ---------------------------------------------------------------------------

class TestConeCheck:
    """Sampled audit of the ε-cone property."""

    def test_cube_passes(self):
        report = cone_check(Cube(side=4.0), 0.3, n_samples=200, seed=1)
        assert report.passed
        assert report.witnesses == []

    def test_ball_passes(self):
        assert cone_check(Ball(radius=3.0), 0.3, n_samples=200, seed=2).passed

    def test_thin_slab_fails(self):
        slab = Cuboid(sides=(4.0, 4.0, 0.05))
        report = cone_check(slab, 0.5, n_samples=100, seed=3)
        assert not report.passed
        assert report.witnesses
        assert any(w.inside for w in report.witnesses)

    def test_nonpositive_epsilon(self):
        with pytest.raises(GeometryError):
            cone_check(Cube(side=1.0), 0.0, n_samples=10, seed=0)


# ---------------------------------------------------------------------------
# Regularized volume
# ---------------------------------------------------------------------------

class TestRegularizedVolume:
    """Volume of the union of cells meeting D."""

    def test_aligned_cube_is_exact(self):
        assert regularized_volume(aligned_cube(4.0)) == pytest.approx(64.0)

    @pytest.mark.parametrize("shape", [
        Ball(radius=2.3, transform=RigidTransform(translation=(0.1, 0.2, 0.3))),
        Cube(side=3.0, transform=RigidTransform.from_arrays(_rotation_z(0.4), (0.2, 0.1, 0.0))),
        Simplex.regular(2.5),
    ], ids=["ball", "rotated-cube", "simplex"])
    def test_bounds_the_scan(self, shape):
        exact = regularized_volume(shape)
        coarse = regularized_volume_scan(shape, per_axis=3)
        scan = regularized_volume_scan(shape, per_axis=9)
        assert coarse <= scan <= exact
        assert exact >= shape.volume
        # the scan misses only cells that D barely clips
        assert scan >= 0.6 * exact

    def test_cell_union_is_its_own_regularization(self):
        union = CellUnion(cells=[(0, 0, 0), (1, 0, 0), (1, 1, 0)])
        assert regularized_volume(union) == pytest.approx(3.0)

    def test_non_diagonal_lattice_rejected(self):
        fcc = LatticeSpec(basis=((0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0)))
        with pytest.raises(UnsupportedShapeError):
            regularized_volume(Cube(side=2.0), fcc)


# ---------------------------------------------------------------------------
# Group sampling and tiling
# ---------------------------------------------------------------------------

class TestGroup:
    """Haar rotations and cell translations."""

    def test_haar_angles(self):
        test = haar_angle_ks(5000, seed=1)
        assert test.passed
        assert np.abs(np.asarray(test.mean_rotation)).max() < 5 * test.mean_rotation_stderr + 0.01

    def test_element_is_reproducible(self):
        a = sample_group_element(2.0, seed=3)
        b = sample_group_element(2.0, seed=3)
        assert a == b
        check_rotation(a.rotation)
        assert np.all(np.abs(a.translation) <= 0.5)

    def test_scale_below_one_rejected(self):
        with pytest.raises(GeometryError):
            sample_group_element(0.5)

    def test_free_mode_needs_box(self):
        with pytest.raises(GeometryError):
            sample_group_element(1.0, mode="free")


class TestTiling:
    """Partition of unity and inner/boundary cells."""

    def test_translate_counts_of_integer_cube(self):
        points = np.random.default_rng(0).random((50, 3)) - 0.5
        counts = translate_counts(Cube(side=5.0), points, CUBIC)
        assert np.all(counts == 125)

    def test_identity_for_integer_cube_is_exact(self):
        report = tiling_volume_identity(Cube(side=10.0), TilingSpec(scale=1.0), n_g=1000,
                                        n_mc=2, seed=1)
        assert report.rhs == pytest.approx(1000.0)
        assert report.rel_error < 1e-12

    @pytest.mark.parametrize("scale", [1.0, 2.0])
    def test_identity_for_ball(self, scale):
        report = tiling_volume_identity(Ball(radius=5.0), TilingSpec(scale=scale), n_g=1000,
                                        n_mc=8, seed=2)
        assert report.rel_error < 0.01

    def test_identity_needs_group_samples(self):
        with pytest.raises(GeometryError):
            tiling_volume_identity(Cube(side=2.0), TilingSpec(), n_g=10, n_mc=4, seed=0)

    def test_inclusion_radius(self):
        radius = inclusion_radius(TilingSpec(scale=2.0), CUBIC)
        assert radius == pytest.approx(2.0 + np.sqrt(3.0) / 2.0)

    def test_inner_poses_stay_inside(self):
        result = classify_cells(aligned_cube(16.0), TilingSpec(scale=1.0), seed=4)
        assert result.audit_poses > 0
        assert result.audit_violations == 0
        assert 0 < result.inner_fraction < 1

    def test_inner_fraction_grows(self):
        tiling = TilingSpec(scale=1.0)
        fractions = [classify_cells(aligned_cube(L), tiling).inner_fraction for L in (8, 16, 32)]
        assert fractions == sorted(fractions)

    def test_reachable_inner_fraction(self):
        cube = aligned_cube(64.0)
        assert classify_cells(cube, TilingSpec(scale=1.0)).inner_fraction == \
            pytest.approx((60 / 64) ** 3)
        fraction = classify_cells(cube, TilingSpec(scale=2.0)).inner_fraction
        assert fraction == pytest.approx((58 / 64) ** 3)
        assert fraction < 0.75

    def test_boundary_scaling_slope(self):
        shapes = [aligned_cube(L) for L in (16.0, 32.0, 64.0)]
        results, boundary_slope, inner_slope = boundary_scaling(shapes, TilingSpec(scale=1.0))
        assert len(results) == 3
        assert boundary_slope == pytest.approx(2.0 / 3.0, abs=0.1)
        assert inner_slope == pytest.approx(1.0, abs=0.1)

    def test_scaling_needs_two_domains(self):
        with pytest.raises(GeometryError):
            boundary_scaling([aligned_cube(8.0)], TilingSpec(scale=1.0))
