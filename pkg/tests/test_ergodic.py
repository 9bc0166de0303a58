"""Tests for ergodic averages, neutrality, thermodynamic scans and the tiling gap."""

import numpy as np
import pytest
from pydantic import ValidationError

from thermolimit.electrostatics import trial_energy
from thermolimit.ergodic import (
    DomainSequence,
    analytic_mean,
    domain_charge,
    ergodic_average,
    expected_fluctuation_slope,
    graf_schenker_gap,
    log_slope,
    neutrality_estimate,
    richardson_limit,
    sites_in_domain,
    thermo_scan,
    tile_memberships,
)
from thermolimit.exceptions import ErgodicError
from thermolimit.geometry import TilingSpec, aligned_cube
from thermolimit.geometry.shapes import Simplex
from thermolimit.geometry.tiling import sample_group_elements
from thermolimit.moments import Statistic
from thermolimit.nuclei import (
    Box,
    ConstantCharge,
    GaussianIsotropic,
    LatticeSpec,
    ModelSpec,
    NuclearConfiguration,
    PointMass,
    UniformBall,
    VacancyCharge,
    sample_configuration,
)

CUBIC = LatticeSpec()
GAUSSIAN = ModelSpec(displacement=GaussianIsotropic(sigma=0.2))
RIGID = ModelSpec(displacement=PointMass())


def _site_grid(n: int) -> np.ndarray:
    axis = np.arange(-n, n + 1)
    return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)


# ---------------------------------------------------------------------------
# Domain sequences
# ---------------------------------------------------------------------------

class TestDomainSequence:
    """Nested families around the origin."""

    def test_cube_is_a_union_of_cells(self):
        seq = DomainSequence(family="cube", sizes=[4, 8])
        shape = seq.shape(4)
        assert shape.volume == pytest.approx(64.0)
        assert sites_in_domain(shape, _site_grid(6), CUBIC).sum() == 64

    def test_domains_are_nested(self):
        for family in ("cube", "ball", "simplex"):
            seq = DomainSequence(family=family, sizes=[4, 8, 12])
            volumes = seq.volumes()
            assert volumes == sorted(volumes)
            box = seq.window()
            for shape in seq.shapes():
                inner = shape.bbox()
                assert np.all(np.array(inner.lo) >= np.array(box.lo) - 1e-12)
                assert np.all(np.array(inner.hi) <= np.array(box.hi) + 1e-12)

    def test_sizes_must_increase(self):
        with pytest.raises(ValidationError):
            DomainSequence(sizes=[4, 4])
        with pytest.raises(ValidationError):
            DomainSequence(sizes=[-1, 2])

    def test_distortion_bound_is_checked(self):
        DomainSequence(family="cube", sizes=[2, 4], distortion=1.8)
        with pytest.raises(ValidationError, match="distortion"):
            DomainSequence(family="cube", sizes=[2, 4], distortion=1.5)

    def test_ball_distortion_constant(self):
        seq = DomainSequence(family="ball", sizes=[2.0])
        expected = 2.0 / (4.0 / 3.0 * np.pi) ** (1.0 / 3.0)
        assert seq.distortion_constants()[0] == pytest.approx(expected)


class TestScalingHelpers:
    """Extrapolation and log-log slopes."""

    def test_richardson_recovers_surface_law(self):
        volumes = [8.0, 64.0, 512.0]
        values = [3.0 + 2.0 * v ** (-1.0 / 3.0) for v in volumes]
        assert richardson_limit(volumes, values) == pytest.approx(3.0)

    def test_richardson_single_size(self):
        assert richardson_limit([8.0], [1.5]) == 1.5

    def test_log_slope(self):
        volumes = [10.0, 100.0, 1000.0]
        slope, stderr = log_slope(volumes, [v ** -0.5 for v in volumes])
        assert slope == pytest.approx(-0.5)
        assert stderr == pytest.approx(0.0, abs=1e-12)

    def test_log_slope_undefined_for_zeros(self):
        assert log_slope([1.0, 2.0], [0.0, 0.0]) == (None, None)


# ---------------------------------------------------------------------------
# Ergodic averages and neutrality
# ---------------------------------------------------------------------------

class TestErgodicAverage:
    """Spatial averages over growing domains."""

    def test_analytic_references(self):
        model = ModelSpec(charge=VacancyCharge(p_vac=0.3, z=2.0))
        assert analytic_mean(model, Statistic(kind="X0")) == pytest.approx(0.7)
        assert analytic_mean(model, Statistic(kind="charge")) == pytest.approx(1.4)
        assert analytic_mean(model, Statistic(kind="X1")) is None

    def test_count_average_converges(self):
        seq = DomainSequence(family="cube", sizes=[2, 4, 8])
        series = ergodic_average(GAUSSIAN, "X0", seed=1, sequence=seq, replicas=20)
        assert series.reference == 1.0
        assert series.reference_kind == "analytic"
        assert series.nonincreasing()
        assert series.l1_errors[-1] < series.l1_errors[0]
        assert series.points[-1].mean == pytest.approx(1.0, abs=0.05)

    def test_rigid_lattice_has_no_error(self):
        seq = DomainSequence(family="cube", sizes=[2, 4])
        series = ergodic_average(RIGID, "X0", seed=0, sequence=seq, replicas=3)
        assert series.l1_errors == [0.0, 0.0]

    def test_cell_sum_uses_largest_size_mean(self):
        seq = DomainSequence(family="ball", sizes=[3, 6])
        series = ergodic_average(GAUSSIAN, "X1", seed=2, sequence=seq, replicas=5)
        assert series.reference_kind == "largest-size mean"
        assert series.reference == pytest.approx(series.points[-1].mean)

    def test_thread_count_does_not_matter(self):
        seq = DomainSequence(family="cube", sizes=[2, 4])
        one = ergodic_average(GAUSSIAN, "X0", seed=3, sequence=seq, replicas=6, threads=1)
        four = ergodic_average(GAUSSIAN, "X0", seed=3, sequence=seq, replicas=6, threads=4)
        assert one.points == four.points

    def test_per_nucleus_statistic_rejected(self):
        seq = DomainSequence(sizes=[2])
        with pytest.raises(ErgodicError):
            ergodic_average(GAUSSIAN, "delta_at_origin", seed=0, sequence=seq, replicas=4)

    def test_one_replica_rejected(self):
        with pytest.raises(ErgodicError):
            ergodic_average(GAUSSIAN, "X0", seed=0, sequence=DomainSequence(sizes=[2]),
                            replicas=1)


class TestNeutrality:
    """Charge per volume tends to Z_av/|W|."""

    def test_vacancy_charge_density(self):
        model = ModelSpec(displacement=PointMass(), charge=VacancyCharge(p_vac=0.3, z=2.0))
        seq = DomainSequence(family="cube", sizes=[4, 8])
        report = neutrality_estimate(model, seq, replicas=20, seed=4)
        last = report.points[-1]
        assert report.reference == pytest.approx(1.4)
        assert abs(last.estimate - 1.4) <= 4 * last.stderr
        assert last.lo <= last.estimate <= last.hi
        assert len(last.per_replica) == 20
        assert report.z_av == pytest.approx(last.estimate)

    def test_domain_charge_of_rigid_lattice(self):
        config = sample_configuration(CUBIC, PointMass(), ConstantCharge(z=3.0), Box.cube(-4, 4))
        assert domain_charge(config, aligned_cube(3.0)) == (81.0, 27)

    def test_one_replica_rejected(self):
        with pytest.raises(ErgodicError):
            neutrality_estimate(RIGID, DomainSequence(sizes=[2]), replicas=1, seed=0)


# ---------------------------------------------------------------------------
# Thermodynamic scan
# ---------------------------------------------------------------------------

class TestThermoScan:
    """Per-volume proxy energy over a domain sequence."""

    def test_rigid_lattice_is_deterministic(self):
        seq = DomainSequence(family="cube", sizes=[2, 4])
        series = thermo_scan(RIGID, seq, cone_epsilon=0.5, replicas=30, seed=5)
        for p in series.points:
            assert p.kinetic == pytest.approx(4.0)
            assert p.l1_deviation == 0.0
            assert p.boundary > 0.0
        assert series.kinetic_limit == pytest.approx(4.0)
        assert series.fluctuation_slope is None
        assert series.expected_fluctuation_slope is None

    def test_gaussian_fluctuations_decay(self):
        model = ModelSpec(displacement=GaussianIsotropic(sigma=0.5, tail_sigmas=6.0))
        seq = DomainSequence(family="cube", sizes=[4, 8, 16])
        series = thermo_scan(model, seq, cone_epsilon=0.5, replicas=30, seed=12)
        assert series.expected_fluctuation_slope == pytest.approx(-1.0 / 3.0)
        assert series.fluctuation_slope < 0
        assert series.fluctuation_slope == pytest.approx(-1.0 / 3.0, abs=0.3)
        deviations = [p.l1_deviation for p in series.points]
        assert deviations == sorted(deviations, reverse=True)

    def test_kinetic_limit_is_linear_in_c_kin(self):
        model = ModelSpec(displacement=GaussianIsotropic(sigma=0.5, tail_sigmas=6.0))
        seq = DomainSequence(family="cube", sizes=[2, 4])
        one = thermo_scan(model, seq, 0.5, c_kin=1.0, replicas=30, seed=13)
        two = thermo_scan(model, seq, 0.5, c_kin=2.0, replicas=30, seed=13)
        assert two.kinetic_limit == pytest.approx(2.0 * one.kinetic_limit, rel=1e-12)
        assert two.boundary_limit == one.boundary_limit

    def test_expected_slope_follows_the_nearest_neighbor_tail(self):
        assert expected_fluctuation_slope(GAUSSIAN) == pytest.approx(-1.0 / 3.0)
        bounded = ModelSpec(displacement=UniformBall(radius=0.4))
        assert expected_fluctuation_slope(bounded) == pytest.approx(-0.5)
        assert expected_fluctuation_slope(RIGID) is None
        vacancies = ModelSpec(charge=VacancyCharge(p_vac=0.1, z=1.0))
        assert expected_fluctuation_slope(vacancies) == pytest.approx(-0.5)
        assert expected_fluctuation_slope(ModelSpec(kind="poisson", intensity=1.0)) == \
            pytest.approx(-1.0 / 3.0)

    def test_rigid_boundary_term_decays_like_inverse_size(self):
        config = sample_configuration(CUBIC, PointMass(), ConstantCharge(z=1.0),
                                      Box.cube(-2, 34))
        sizes = [8.0, 16.0, 32.0]
        per_volume = [trial_energy(config, aligned_cube(L), 0.5, breakdown=False).boundary / L ** 3
                      for L in sizes]
        slope, _ = log_slope(sizes, per_volume)
        assert slope == pytest.approx(-1.0, abs=0.3)
        volume_slope, _ = log_slope([L ** 3 for L in sizes], per_volume)
        assert volume_slope == pytest.approx(-1.0 / 3.0, abs=0.1)

    def test_too_few_replicas(self):
        with pytest.raises(ErgodicError, match="30"):
            thermo_scan(GAUSSIAN, DomainSequence(sizes=[2, 4]), 0.5, replicas=10)


# ---------------------------------------------------------------------------
# Tiling gap
# ---------------------------------------------------------------------------

class TestTileMemberships:
    """Point-in-tile bookkeeping for one group element."""

    def test_matches_explicit_search(self):
        tiling = TilingSpec(scale=1.5)
        tile = Simplex(vertices=tuple(tuple(v) for v in tiling.scaled_vertices.tolist()))
        rotations, translations = sample_group_elements(1, tiling.scale, "cell-translation", 7)
        points = np.random.default_rng(0).uniform(-2, 2, (200, 3))
        rows, keys, depth = tile_memberships(points, rotations[0], translations[0], tile, CUBIC)
        assert np.all(depth > 0)

        found = set(zip(rows.tolist(), map(tuple, keys.tolist())))
        expected = set()
        for j in _site_grid(6):
            local = (points - translations[0] - j) @ rotations[0]
            for r in np.nonzero(tile.signed_distance_local(local) < 0)[0]:
                expected.add((int(r), tuple(int(v) for v in j)))
        assert found == expected

    def test_mean_multiplicity_is_volume_ratio(self):
        tiling = TilingSpec(scale=2.0)
        tile = Simplex(vertices=tuple(tuple(v) for v in tiling.scaled_vertices.tolist()))
        rotations, translations = sample_group_elements(1, tiling.scale, "cell-translation", 8)
        points = np.random.default_rng(1).uniform(0, 10, (10_000, 3))
        rows, _, _ = tile_memberships(points, rotations[0], translations[0], tile, CUBIC)
        assert rows.size / points.shape[0] == pytest.approx(tiling.scaled_volume, rel=0.05)

    def test_no_points(self):
        rows, keys, depth = tile_memberships(np.zeros((0, 3)), np.eye(3), np.zeros(3),
                                             Simplex.regular(), CUBIC)
        assert rows.size == 0 and keys.shape == (0, 3) and depth.size == 0


class TestGap:
    """lhs - rhs of the tiling inequality for the proxy energy."""

    @pytest.fixture(scope="class")
    def rigid(self):
        return sample_configuration(CUBIC, PointMass(), ConstantCharge(z=1.0), Box.cube(-3, 5))

    def test_lhs_is_the_proxy_energy(self, rigid):
        shape = aligned_cube(3.0)
        report = graf_schenker_gap(rigid, shape, TilingSpec(scale=2.0), n_g=500, seed=9)
        assert report.lhs == pytest.approx(trial_energy(rigid, shape, 0.5).total)
        assert report.gap == pytest.approx(report.lhs - report.rhs)
        assert report.nuclei_in_domain == 27
        assert report.tiled_mean > 0

    def test_reproducible_and_thread_independent(self, rigid):
        shape = aligned_cube(2.0)
        one = graf_schenker_gap(rigid, shape, n_g=500, seed=10, threads=1)
        four = graf_schenker_gap(rigid, shape, n_g=500, seed=10, threads=4)
        assert one == four

    def test_empty_domain(self):
        config = NuclearConfiguration.from_points([[10.0, 10.0, 10.0]], 1.0, Box.cube(9, 11))
        shape = aligned_cube(2.0)
        report = graf_schenker_gap(config, shape, TilingSpec(scale=2.0), n_g=500, seed=0)
        assert report.lhs == 0.0
        assert report.tiled_mean == 0.0
        assert report.rhs == pytest.approx(-(1.0 / 2.0) * shape.volume)

    def test_argument_checks(self, rigid):
        with pytest.raises(ErgodicError):
            graf_schenker_gap(rigid, aligned_cube(2.0), n_g=100)
        with pytest.raises(ErgodicError):
            graf_schenker_gap(rigid, aligned_cube(2.0), c_gs=-1.0)
