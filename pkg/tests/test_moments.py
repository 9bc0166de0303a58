"""Tests for moment and tail estimation at the origin cell.

Replica counts are far below the full experiment scale; assertions use the
reported standard errors as tolerance.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermolimit.exceptions import EstimationError
from thermolimit.moments import (
    Statistic,
    cell_masses,
    check_X0_norm_bound,
    check_X1_implies_X0,
    estimate_moment,
    moment_stability,
    pair_small_ball_probability,
    sample_origin,
    summarize,
    tail_exponent,
    tail_fit_from_values,
    x0_norm_series,
    x0_tail_lower_bound,
    x1_integrability_series,
    z_value,
)
from thermolimit.nuclei import (
    CompactInCell,
    GaussianIsotropic,
    ModelSpec,
    PointMass,
    UniformBall,
    VacancyCharge,
)

GAUSSIAN = ModelSpec(displacement=GaussianIsotropic(sigma=0.5, tail_sigmas=8.0))
BALL = ModelSpec(displacement=UniformBall(radius=0.2))
RIGID = ModelSpec(displacement=PointMass())


# ---------------------------------------------------------------------------
# Statistic parsing and summaries
# ---------------------------------------------------------------------------

class TestStatistic:
    """Text and mapping forms of a statistic."""

    def test_parse_plain(self):
        assert Statistic.parse("X1").kind == "X1"

    def test_parse_truncated(self):
        stat = Statistic.parse("Xp(2, 0.5)")
        assert (stat.kind, stat.p, stat.eps) == ("Xp", 2.0, 0.5)
        assert stat.label == "Xp(2,0.5)"

    def test_parse_mapping(self):
        assert Statistic.parse({"kind": "delta_at_origin"}).per_nucleus

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            Statistic.parse("X7")


class TestSummaries:
    """Normal quantiles and CLT intervals."""

    def test_z_value_99(self):
        assert z_value(0.99) == pytest.approx(2.5758, abs=1e-4)

    def test_z_value_rejects_bad_level(self):
        with pytest.raises(EstimationError):
            z_value(1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=60))
    def test_interval_brackets_mean(self, values):
        mean, stderr, lo, hi = summarize(np.array(values), 0.99)
        assert stderr >= 0
        assert lo <= mean + 1e-9 and mean <= hi + 1e-9


# ---------------------------------------------------------------------------
# estimate_moment
# ---------------------------------------------------------------------------

class TestEstimateMoment:
    """Sample moments at the origin cell."""

    def test_gaussian_mean_count_is_one(self):
        est = estimate_moment(GAUSSIAN, "X0", 1.0, replicas=2000, seed=1, level=0.99)
        assert abs(est.mean - 1.0) <= 4 * est.stderr
        assert est.lo <= est.mean <= est.hi
        assert est.seeds.replicas == 2000

    def test_point_mass_is_exact(self):
        for p in (1.0, 3.0):
            est = estimate_moment(RIGID, "X0", p, replicas=50, seed=2)
            assert est.mean == 1.0
            assert est.stderr == 0.0

    def test_vacancy_mean_count(self):
        model = ModelSpec(charge=VacancyCharge(p_vac=0.3, z=2.0))
        est = estimate_moment(model, "charge", 1.0, replicas=3000, seed=3)
        assert abs(est.mean - 1.4) <= 4 * est.stderr

    def test_too_few_replicas(self):
        with pytest.raises(EstimationError, match="30"):
            estimate_moment(GAUSSIAN, "X0", 1.0, replicas=5, seed=0)

    def test_nonpositive_exponent(self):
        with pytest.raises(EstimationError):
            estimate_moment(GAUSSIAN, "X0", 0.0, replicas=30, seed=0)

    def test_per_nucleus_statistic_rejected_with_vacancies(self):
        model = ModelSpec(charge=VacancyCharge(p_vac=0.1, z=1.0))
        with pytest.raises(EstimationError):
            estimate_moment(model, "delta_at_origin", 1.0, replicas=30, seed=0)

    def test_independent_of_thread_count(self):
        one = estimate_moment(BALL, "X1", 1.0, replicas=300, seed=4, threads=1)
        four = estimate_moment(BALL, "X1", 1.0, replicas=300, seed=4, threads=4)
        assert one.mean == four.mean
        assert one.stderr == four.stderr

    def test_replica_prefix_is_stable(self):
        full = sample_origin(BALL, 200, seed=5)
        tail = sample_origin(BALL, 100, seed=5, start=100)
        x0 = Statistic(kind="X0")
        np.testing.assert_array_equal(full.values(x0)[100:], tail.values(x0))

    def test_compact_support_counts_exactly_one(self):
        law = CompactInCell(lo=(-0.25,) * 3, hi=(0.25,) * 3)
        model = ModelSpec(displacement=law)
        sample = sample_origin(model, 1000, seed=6)
        assert np.all(sample.values(Statistic(kind="X0")) == 1.0)
        eta = law.gap(model.lattice)
        assert np.all(sample.values(Statistic(kind="X1")) <= 1.0 / eta)


# ---------------------------------------------------------------------------
# Tail fits
# ---------------------------------------------------------------------------

class TestTailFit:
    """Log-log regression of exceedance and small-ball probabilities."""

    def test_pareto_exceedance_slope(self):
        gen = np.random.default_rng(0)
        values = gen.pareto(2.0, 50_000) + 1.0
        fit = tail_fit_from_values(values, [1.5, 2.0, 3.0, 4.0, 6.0], "exceedance", "synthetic",
                                   min_hits=50)
        assert fit.slope == pytest.approx(-2.0, abs=0.1)
        assert all(a >= b for a, b in zip(fit.probabilities, fit.probabilities[1:]))
        assert not fit.degenerate

    def test_small_ball_probabilities_increase(self):
        values = np.random.default_rng(1).uniform(0, 1, 100_000) ** (1 / 3)
        fit = tail_fit_from_values(values, [0.1, 0.2, 0.3, 0.4], "small_ball", "synthetic",
                                   min_hits=5)
        assert all(a <= b for a, b in zip(fit.probabilities, fit.probabilities[1:]))
        assert fit.slope == pytest.approx(3.0, abs=0.2)

    def test_needs_four_points(self):
        with pytest.raises(EstimationError):
            tail_fit_from_values(np.ones(10), [1, 2, 3], "exceedance", "x")

    def test_grid_must_increase(self):
        with pytest.raises(EstimationError):
            tail_fit_from_values(np.ones(10), [1, 3, 2, 4], "exceedance", "x")

    def test_zero_hit_bins_are_dropped_with_warning(self):
        values = np.array([1.0] * 100 + [2.5] * 10)
        fit = tail_fit_from_values(values, [0.5, 2.0, 3.0, 4.0], "exceedance", "x", min_hits=50)
        assert fit.used_points == 2
        assert any("zero-hit" in w for w in fit.warnings)
        assert any("below 50 hits" in w for w in fit.warnings)

    def test_all_empty_is_degenerate(self):
        fit = tail_fit_from_values(np.ones(100), [2, 3, 4, 5], "exceedance", "x")
        assert fit.degenerate
        assert fit.slope is None

    def test_gaussian_small_ball_exponent(self):
        fit = tail_exponent(GAUSSIAN, "delta_at_origin", [0.08, 0.1, 0.13, 0.16, 0.2],
                            replicas=20_000, seed=7)
        assert fit.mode == "small_ball"
        assert fit.slope == pytest.approx(3.0, abs=0.5)

    def test_exceedance_default_for_cell_sums(self):
        fit = tail_exponent(BALL, "X1", [1.5, 2.0, 2.5, 3.0], replicas=200, seed=8)
        assert fit.mode == "exceedance"
        assert fit.seeds.master_seed == 8


# ---------------------------------------------------------------------------
# Stability over replica prefixes
# ---------------------------------------------------------------------------

class TestStability:
    """CI width shrinkage for finite moments."""

    def test_finite_second_moment_is_stable(self):
        report = moment_stability(GAUSSIAN, "X0", 2.0, [100, 1600], seed=9)
        assert report.expected_shrink == pytest.approx(4.0)
        assert report.stable
        assert report.ci_widths[0] > report.ci_widths[-1]

    def test_grid_needs_two_sizes(self):
        with pytest.raises(EstimationError):
            moment_stability(GAUSSIAN, "X0", 2.0, [100], seed=0)
        with pytest.raises(EstimationError):
            moment_stability(GAUSSIAN, "X0", 2.0, [10, 100], seed=0)


# ---------------------------------------------------------------------------
# Deterministic series and inequalities
# ---------------------------------------------------------------------------

class TestCellMassSeries:
    """ν(W − j) sums and the bounds built from them."""

    def test_gaussian_masses_sum_to_one(self):
        value, tail, exact = x0_norm_series(GAUSSIAN.displacement, p=1.0)
        assert value == pytest.approx(1.0, abs=1e-12)
        assert exact

    def test_norm_series_grows_with_p(self):
        law = GAUSSIAN.displacement
        assert x0_norm_series(law, p=4.0)[0] > x0_norm_series(law, p=2.0)[0] > 1.0

    def test_point_mass_series_is_one(self):
        assert x0_norm_series(PointMass(), p=2.0)[0] == pytest.approx(1.0)

    def test_ball_masses_by_quadrature(self):
        masses = cell_masses(UniformBall(radius=0.7))
        assert not masses.exact
        assert masses.masses.sum() == pytest.approx(1.0, abs=1e-2)

    def test_series_rejects_p_below_one(self):
        with pytest.raises(EstimationError):
            x0_norm_series(GAUSSIAN.displacement, p=0.5)

    def test_tail_lower_bound(self):
        assert x0_tail_lower_bound(GAUSSIAN.displacement, n=3) > 0.0
        compact = CompactInCell(lo=(-0.25,) * 3, hi=(0.25,) * 3)
        assert x0_tail_lower_bound(compact, n=2) == 0.0
        assert x0_tail_lower_bound(compact, n=1) == pytest.approx(1.0)

    def test_x1_series(self):
        assert x1_integrability_series(PointMass(), p=2.0)[0] == float("inf")
        value, tail = x1_integrability_series(GAUSSIAN.displacement, p=2.0)
        assert np.isfinite(value) and value > 0
        assert tail >= 0

    def test_pair_small_ball_is_cubic(self):
        probs = pair_small_ball_probability(0.5, 1.0, [0.01, 0.02])
        assert probs[1] / probs[0] == pytest.approx(8.0, rel=1e-3)


class TestMomentInequalities:
    """Monte Carlo sides checked against deterministic ones."""

    @pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
    def test_x0_norm_bound(self, p):
        report = check_X0_norm_bound(GAUSSIAN, p, replicas=1000, seed=10)
        assert report.holds
        assert report.lhs <= report.rhs + 3 * report.lhs_stderr

    def test_x0_norm_bound_needs_lattice(self):
        with pytest.raises(EstimationError):
            check_X0_norm_bound(ModelSpec(kind="poisson", intensity=1.0), 2.0, 100, 0)

    @pytest.mark.parametrize("model", [GAUSSIAN, BALL], ids=["gaussian", "ball"])
    def test_x1_controls_x0(self, model):
        report = check_X1_implies_X0(model, 2.0, replicas=1000, seed=11)
        assert report.holds
        assert report.detail["diameter"] == pytest.approx(np.sqrt(3.0))
