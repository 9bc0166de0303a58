"""Tests for pair energies, screening clouds and the trial-state energy."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermolimit.electrostatics import (
    PointCharge,
    ScreeningCloud,
    build_screening,
    cloud_interaction,
    coulomb_energy,
    dipole_bound_audit,
    dipole_interaction,
    domain_nuclei,
    lieb_yau_term,
    random_charge_system,
    trial_energy,
    yukawa_comparison_deficit,
    yukawa_deficit_audit,
    yukawa_energy,
)
from thermolimit.electrostatics.oracle import (
    boundary_sum_reference,
    coulomb_energy_reference,
    yukawa_energy_reference,
)
from thermolimit.exceptions import ElectrostaticsError
from thermolimit.geometry import Ball, RigidTransform, aligned_cube
from thermolimit.nuclei import (
    Box,
    ConstantCharge,
    GaussianIsotropic,
    LatticeSpec,
    PointMass,
    UniformIntervalCharge,
    sample_configuration,
    shift_configuration,
)

CUBIC = LatticeSpec()
UNIT = ConstantCharge(z=1.0)


@pytest.fixture(scope="module")
def vibrating():
    return sample_configuration(CUBIC, GaussianIsotropic(sigma=0.1, tail_sigmas=6.0), UNIT,
                                Box.cube(-1, 7), seed=31)


@pytest.fixture(scope="module")
def rigid():
    return sample_configuration(CUBIC, PointMass(), UNIT, Box.cube(-2, 6))


# ---------------------------------------------------------------------------
# Pair energies
# ---------------------------------------------------------------------------

class TestPairEnergies:
    """Vectorized sums against double loops."""

    def test_coulomb_matches_reference(self):
        pos, q = random_charge_system(np.random.default_rng(0), 30)
        assert coulomb_energy((pos, q)) == pytest.approx(
            coulomb_energy_reference(pos.tolist(), q.tolist()), rel=1e-12)

    def test_yukawa_matches_reference(self):
        pos, q = random_charge_system(np.random.default_rng(1), 25)
        assert yukawa_energy((pos, q), mass=0.7) == pytest.approx(
            yukawa_energy_reference(pos.tolist(), q.tolist(), mass=0.7), rel=1e-12)

    def test_point_charge_input(self):
        charges = [PointCharge(position=(0, 0, 0), charge=1.0),
                   PointCharge(position=(2, 0, 0), charge=-3.0)]
        assert coulomb_energy(charges) == pytest.approx(-1.5)

    def test_yukawa_at_zero_mass_is_coulomb(self):
        pos, q = random_charge_system(np.random.default_rng(2), 10)
        assert yukawa_energy((pos, q), mass=0.0) == pytest.approx(coulomb_energy((pos, q)))

    def test_coincident_positions_rejected(self):
        with pytest.raises(ElectrostaticsError):
            coulomb_energy((np.zeros((2, 3)), np.ones(2)))

    def test_negative_mass_rejected(self):
        with pytest.raises(ElectrostaticsError):
            yukawa_energy((np.eye(3), np.ones(3)), mass=-1.0)

    def test_single_charge_deficit_is_diagonal(self):
        assert yukawa_comparison_deficit((np.zeros((1, 3)), np.array([0.3])), mass=2.0) == \
            pytest.approx(0.18)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(min_value=1, max_value=40))
    def test_deficit_never_negative(self, seed, n):
        pos, q = random_charge_system(np.random.default_rng(seed), n)
        assert yukawa_comparison_deficit((pos, q)) >= -1e-9


class TestAudits:
    """Randomized inequality checks."""

    def test_yukawa_audit(self):
        audit = yukawa_deficit_audit(2000, seed=3)
        assert audit.violations == 0
        assert audit.min_deficit >= -1e-9
        # near-tight cases exist
        assert audit.min_deficit < 0.2

    def test_dipole_audit(self):
        audit = dipole_bound_audit(20_000, seed=4)
        assert audit.violations == 0
        assert audit.max_bound_ratio <= 1.0
        assert np.isfinite(audit.max_decay_ratio)
        assert audit.max_decay_ratio <= 1e3

    def test_dipole_audit_needs_separation(self):
        with pytest.raises(ElectrostaticsError):
            dipole_bound_audit(10, seed=0, cone_epsilon=1.0, r_range=(0.5, 2.0))

    def test_audit_is_reproducible(self):
        assert dipole_bound_audit(500, seed=5) == dipole_bound_audit(500, seed=5)


class TestDipoleInteraction:
    """Interaction of two screened nuclei."""

    def test_clouds_on_top_cancel(self):
        r, r2 = np.zeros(3), np.array([3.0, 0.0, 0.0])
        assert dipole_interaction(r, 2.0, r, r2, 1.5, r2, 0.1, 0.1) == pytest.approx(0.0)

    def test_dipole_decays(self):
        near = dipole_interaction([0, 0, 0], 1, [0.1, 0, 0], [5, 0, 0], 1, [5.1, 0, 0], 0.05, 0.05)
        far = dipole_interaction([0, 0, 0], 1, [0.1, 0, 0], [20, 0, 0], 1, [20.1, 0, 0], 0.05, 0.05)
        assert abs(far) < abs(near) / 30

    def test_overlap_rejected(self):
        with pytest.raises(ElectrostaticsError):
            dipole_interaction([0, 0, 0], 1, [0.2, 0, 0], [1, 0, 0], 1, [0.8, 0, 0], 0.3, 0.3)

    def test_cloud_containing_other_nucleus_rejected(self):
        with pytest.raises(ElectrostaticsError):
            dipole_interaction([0, 0, 0], 1, [0.9, 0, 0], [1, 0, 0], 1, [2, 0, 0], 0.2, 0.1)

    def test_radii_are_required(self):
        with pytest.raises(TypeError):
            dipole_interaction([0, 0, 0], 1, [0.2, 0, 0], [1, 0, 0], 1, [0.8, 0, 0])
        with pytest.raises(ElectrostaticsError):
            dipole_interaction([0, 0, 0], 1, [0, 0, 0], [3, 0, 0], 1, [3, 0, 0], -0.1, 0.1)

    def test_cloud_interaction_uses_cloud_radii(self, rigid):
        clouds = build_screening(rigid, aligned_cube(4.0), cone_epsilon=0.5)
        a, b = clouds[0], clouds[1]
        expected = dipole_interaction(a.position, a.z, a.centre, b.position, b.z, b.centre,
                                      a.radius, b.radius)
        assert cloud_interaction(a, b) == expected

    def test_overlapping_clouds_rejected(self):
        a = ScreeningCloud(nucleus=0, position=(0.0, 0.0, 0.0), z=1.0, centre=(0.2, 0.0, 0.0),
                           radius=0.3, delta_prime=1.0, depth=0.5, placement="cone_offset")
        b = ScreeningCloud(nucleus=1, position=(1.0, 0.0, 0.0), z=1.0, centre=(0.8, 0.0, 0.0),
                           radius=0.3, delta_prime=1.0, depth=0.5, placement="cone_offset")
        with pytest.raises(ElectrostaticsError, match="overlap"):
            cloud_interaction(a, b)


# ---------------------------------------------------------------------------
# Screening and trial energy
# ---------------------------------------------------------------------------

class TestScreening:
    """Placement of screening clouds."""

    def test_clouds_stay_inside_and_apart(self, vibrating):
        shape = aligned_cube(6.0)
        clouds = build_screening(vibrating, shape, cone_epsilon=0.5)
        idx, _ = domain_nuclei(vibrating, shape)
        assert [c.nucleus for c in clouds] == idx.tolist()
        for c in clouds:
            assert c.radius == pytest.approx(c.delta_prime / 8.0)
            assert c.delta_prime <= 0.5
            if c.placement == "on_top":
                assert c.depth > 0.5
                assert c.offset == 0.0
            else:
                assert c.offset == pytest.approx(c.delta_prime / 4.0)
                assert -shape.signed_distance([c.centre])[0] >= c.radius - 1e-12
        assert any(c.placement == "cone_offset" for c in clouds)

    def test_boundary_layer_is_offset(self, rigid):
        clouds = build_screening(rigid, aligned_cube(4.0), cone_epsilon=0.5)
        outer = [c for c in clouds if c.depth == pytest.approx(0.5)]
        inner = [c for c in clouds if c.depth == pytest.approx(1.5)]
        assert len(outer) == 56 and len(inner) == 8
        assert all(c.placement == "cone_offset" for c in outer)
        assert all(c.placement == "on_top" for c in inner)
        assert all(c.offset == pytest.approx(0.125) for c in outer)
        report = trial_energy(rigid, aligned_cube(4.0), cone_epsilon=0.5)
        assert (report.on_top, report.cone_offset, report.collar_nuclei) == (8, 56, 56)

    def test_ball_domain(self, vibrating):
        ball = Ball(radius=2.5, transform=RigidTransform(translation=(3.0, 3.0, 3.0)))
        clouds = build_screening(vibrating, ball, cone_epsilon=0.5)
        assert clouds
        assert all(-ball.signed_distance([c.centre])[0] >= c.radius - 1e-12 for c in clouds)

    def test_nonpositive_epsilon_rejected(self, vibrating):
        with pytest.raises(ElectrostaticsError):
            build_screening(vibrating, aligned_cube(2.0), cone_epsilon=0.0)


class TestTrialEnergy:
    """Kinetic, boundary and attraction terms."""

    def test_rigid_lattice_kinetic(self, rigid):
        report = trial_energy(rigid, aligned_cube(4.0), cone_epsilon=0.5)
        assert report.nuclei_in_domain == 64
        assert report.kinetic == pytest.approx(64 / 0.25)
        assert report.total == pytest.approx(report.kinetic + report.boundary)
        assert report.per_volume == pytest.approx(report.total / 64.0)

    def test_boundary_matches_reference(self, vibrating):
        shape = aligned_cube(5.0)
        eps = 0.5
        report = trial_energy(vibrating, shape, cone_epsilon=eps)
        idx, depth = domain_nuclei(vibrating, shape)
        collar = idx[depth <= eps]
        expected = boundary_sum_reference(vibrating.positions[collar], vibrating.charges[collar])
        assert report.collar_nuclei == collar.size
        assert report.boundary == pytest.approx(expected, rel=1e-10)

    def test_breakdown_sums_to_totals(self, vibrating):
        report = trial_energy(vibrating, aligned_cube(5.0), cone_epsilon=0.5)
        assert report.breakdown.kinetic.sum() == pytest.approx(report.kinetic)
        assert report.breakdown.boundary.sum() == pytest.approx(report.boundary)
        assert report.breakdown.attraction.sum() == pytest.approx(report.attraction_term)

    def test_lattice_shift_invariance(self, vibrating):
        shape = aligned_cube(5.0)
        k = np.array([3, -4, 2])
        moved = trial_energy(shift_configuration(vibrating, k), shape.translated(-k.astype(float)),
                             cone_epsilon=0.5, breakdown=False)
        base = trial_energy(vibrating, shape, cone_epsilon=0.5, breakdown=False)
        assert moved.kinetic == base.kinetic
        assert moved.boundary == base.boundary
        assert moved.collar_nuclei == base.collar_nuclei

    def test_empty_domain(self, rigid):
        far = Ball(radius=0.2, transform=RigidTransform(translation=(0.5, 0.5, 0.5)))
        report = trial_energy(rigid, far, cone_epsilon=0.5)
        assert report.total == 0.0
        assert report.nuclei_in_domain == 0

    def test_negative_c_kin_rejected(self, rigid):
        with pytest.raises(ElectrostaticsError):
            trial_energy(rigid, aligned_cube(2.0), cone_epsilon=0.5, c_kin=-1.0)


class TestLiebYau:
    """(Z²/8) Σ 1/δ over K ∩ D."""

    def test_rigid_lattice(self, rigid):
        assert lieb_yau_term(rigid, aligned_cube(4.0)) == pytest.approx(64 / 8.0)

    def test_matches_trial_report(self, vibrating):
        shape = aligned_cube(5.0)
        assert trial_energy(vibrating, shape, 0.5).lieb_yau == pytest.approx(
            lieb_yau_term(vibrating, shape))

    def test_mixed_charges_rejected(self):
        config = sample_configuration(CUBIC, PointMass(),
                                      UniformIntervalCharge(z_min=1.0, z_max=2.0),
                                      Box.cube(-1, 4), seed=2)
        with pytest.raises(ElectrostaticsError):
            lieb_yau_term(config, aligned_cube(3.0))
