import numpy as np
import pytest

from hardy_lab.decomposition import random_piecewise_fields
from hardy_lab.kernels import make_kernel, verify_lai
from hardy_lab.maximal import (
    HolderCutoffLP,
    apply_kernel,
    ascend,
    candidate_value,
    fit_domination,
    grand_maximal,
    hl_maximal,
    holder_cutoff,
    lipschitz_commutation_excess,
    nonvanishing_constants,
    nonvanishing_margin,
    pointwise_domination_deficit,
    project_to_family,
    radial_maximal,
    riesz_l1_constant,
    riesz_potential,
)
from hardy_lab.space import Field, build_patchwork, build_space, certify_space


@pytest.fixture
def triangle():
    return make_kernel("bump", profile="triangle", support=1.0)


@pytest.fixture
def bump_fit(line, triangle):
    space, _ = certify_space(line)
    return verify_lai(triangle, space)


class TestRadialMaximal:
    def test_triangle_preserves_constants_inside(self, line, triangle) -> None:
        o = line.default_basepoint()
        applied = apply_kernel(triangle, 0.25, Field.constant(line, 1.0))
        assert applied.values[o] == pytest.approx(1.0)

    def test_sup_over_grid(self, line, triangle) -> None:
        f = Field.point_mass(line, 40)
        result = radial_maximal(triangle, f)
        assert result.method == "radial:bump"
        for ti in result.grid[::8]:
            assert np.all(result.values >= np.abs(apply_kernel(triangle, ti, f).values) - 1e-12)
        assert set(np.unique(result.argmax_t)) <= set(result.grid)

    def test_frame(self, line, triangle) -> None:
        frame = radial_maximal(triangle, Field.indicator(line, range(50, 60))).to_frame()
        assert frame.columns == ["point_id", "value", "argmax_t"]
        assert frame.height == line.n_points


class TestLocalMaximal:
    def test_constant_field(self, line) -> None:
        values = hl_maximal(line, Field.constant(line, 2.0), 0.5).values
        assert np.allclose(values, 2.0)

    def test_dominates_field(self, line) -> None:
        f = Field.indicator(line, range(20, 30), value=-3.0)
        assert np.all(hl_maximal(line, f, 0.25).values >= np.abs(f.values) - 1e-12)

    def test_radius_below_resolution(self, line) -> None:
        with pytest.raises(ValueError, match="resolution"):
            hl_maximal(line, Field.zeros(line), 0.01)

    def test_riesz_l1_constant_in_one_dimension(self, line) -> None:
        assert riesz_l1_constant(line, 0.25) == pytest.approx(33.0 / 64.0)

    def test_riesz_potential_bounded_by_constant(self, line) -> None:
        f = Field.point_mass(line, 64)
        potential = riesz_potential(line, f, 0.25)
        assert potential.integral() <= riesz_l1_constant(line, 0.25) * f.norm(1) + 1e-12

    def test_domination_fit(self, line, triangle) -> None:
        fields = [Field.point_mass(line, 64), Field.indicator(line, range(30, 70))]
        fit = fit_domination(triangle, line, fields, R=1.0)
        assert fit.n_fields == 2
        assert 0 < fit.C <= 3.0


class TestChecks:
    def test_nonvanishing_constants(self) -> None:
        assert nonvanishing_constants(0.5, 1.0) == pytest.approx((0.25, 0.25))
        assert nonvanishing_constants(0.2, 0.5) == pytest.approx((0.1, 0.01))

    def test_nonvanishing_margin(self, line, triangle, bump_fit) -> None:
        report = nonvanishing_margin(triangle, bump_fit, line)
        assert report.n_pairs > 0
        assert report.holds
        assert report.min_ratio >= 1.0

    def test_lipschitz_commutation(self, line, triangle, bump_fit) -> None:
        patchwork = build_patchwork(line, 0.25)
        f = random_piecewise_fields(line, 1, seed=3)[0]
        report = lipschitz_commutation_excess(triangle, bump_fit, patchwork, f, cutoffs=[0, 1, 2])
        assert report.holds
        assert len(report.per_cutoff) == 3

    def test_commutation_needs_finite_support(self, line, bump_fit) -> None:
        patchwork = build_patchwork(line, 0.25)
        with pytest.raises(ValueError, match="finite support"):
            lipschitz_commutation_excess(make_kernel("poisson_model"), bump_fit, patchwork, Field.zeros(line))

    def test_domination_deficit(self, line, triangle, bump_fit) -> None:
        f = Field.indicator(line, range(40, 90))
        eps, deficit = pointwise_domination_deficit(triangle, bump_fit, f)
        assert np.all(deficit.values >= 0)
        assert 0 <= eps <= bump_fit.c * f.norm(1)

    @pytest.mark.slow
    def test_domination_gap_halves_under_refinement(self, triangle) -> None:
        totals = []
        for spacing in (1.0 / 64.0, 1.0 / 128.0):
            space = build_space("grid", dimension=1, origin=-1.0, extent=2.0, spacing=spacing)
            space, _ = certify_space(space)
            fitted = verify_lai(triangle, space)
            fields = random_piecewise_fields(space, 100, seed=17)
            totals.append(sum(pointwise_domination_deficit(triangle, fitted, fi)[0] for fi in fields))
        coarse, fine = totals
        assert coarse > 0
        assert fine <= 0.7 * coarse


class TestGrandMaximal:
    def test_cutoff_members_are_feasible(self, unit_grid) -> None:
        for profilei in ("triangle", "raised_cosine", "envelope"):
            phi = holder_cutoff(unit_grid, 32, 0.25, 1.0, profilei)
            problem = HolderCutoffLP(unit_grid, 32, 0.25, 1.0, phi)
            assert problem.max_constraint_violation(phi.values[problem.ball]) <= 1e-12
            assert np.all(np.isin(phi.support(), problem.ball))
            assert phi.sup() > 0

    def test_unknown_cutoff_profile(self, unit_grid) -> None:
        with pytest.raises(ValueError, match="profile"):
            holder_cutoff(unit_grid, 32, 0.25, 1.0, "gaussian")

    @pytest.mark.parametrize("gamma", [1.0, 0.5])
    def test_envelope_is_optimal_for_nonnegative_fields(self, unit_grid, gamma) -> None:
        f = Field.indicator(unit_grid, range(20, 45))
        problem = HolderCutoffLP(unit_grid, 32, 0.25, gamma, f)
        value, phi, ok = problem.solve()
        assert ok
        best, _ = candidate_value(problem)
        assert best == pytest.approx(value, rel=1e-6)
        assert problem.max_constraint_violation(phi.values[problem.ball]) <= 1e-6

    def test_candidates_never_beat_the_lp(self, unit_grid) -> None:
        f = random_piecewise_fields(unit_grid, 1, seed=7)[0]
        kernels = [make_kernel("bump", support=1.0)]
        exact = grand_maximal(unit_grid, f, 1.0, method="lp_exact", points=[10, 32], radii=[0.25, 0.5])
        family = grand_maximal(unit_grid, f, 1.0, points=[10, 32], radii=[0.25, 0.5], kernels=kernels)
        assert not exact.fallback
        assert np.all(family.values <= exact.values * (1.0 + 1e-6) + 1e-9)
        assert np.all(exact.values > 0)
        assert family.to_frame().height == 2

    @pytest.mark.slow
    def test_candidates_track_the_lp(self, unit_grid) -> None:
        fields = random_piecewise_fields(unit_grid, 50, seed=0)
        kernels = [make_kernel("bump", support=1.0)]
        for fi in fields:
            exact = grand_maximal(unit_grid, fi, 1.0, method="lp_exact", points=[32], radii=[0.25, 0.5])
            family = grand_maximal(unit_grid, fi, 1.0, points=[32], radii=[0.25, 0.5], kernels=kernels)
            assert family.values[0] >= 0.8 * exact.values[0]
            assert family.values[0] <= exact.values[0] * (1.0 + 1e-6) + 1e-9

    def test_ascent_stays_feasible_and_improves(self, unit_grid) -> None:
        f = random_piecewise_fields(unit_grid, 1, seed=4)[0]
        problem = HolderCutoffLP(unit_grid, 32, 0.5, 1.0, f)
        start = project_to_family(problem, problem.box.copy())
        modulus = problem.radius ** (-1.0) * (unit_grid.distances[np.ix_(problem.ball, problem.ball)] / problem.radius)
        phi = ascend(problem, start, modulus)
        assert problem.max_constraint_violation(phi) <= 1e-9
        assert np.dot(phi, problem.objective) >= np.dot(start, problem.objective) - 1e-12

    def test_zero_field(self, unit_grid) -> None:
        value, phi, ok = HolderCutoffLP(unit_grid, 10, 0.25, 1.0, Field.zeros(unit_grid)).solve()
        assert ok
        assert value == 0.0
        assert phi.sup() == 0.0

    def test_lp_text(self, unit_grid) -> None:
        text = HolderCutoffLP(unit_grid, 32, 0.0625, 1.0, Field.constant(unit_grid, 1.0)).to_text()
        assert text.startswith("\\ Hoelder cutoff LP")
        for sectioni in ("Maximize", "Subject To", "Bounds", "End"):
            assert f"\n{sectioni}\n" in text or text.endswith(f"{sectioni}\n")

    def test_method_validation(self, unit_grid) -> None:
        f = Field.zeros(unit_grid)
        with pytest.raises(ValueError, match="Unknown grand maximal method"):
            grand_maximal(unit_grid, f, 1.0, method="simplex")
        big = build_space("grid", dimension=1, extent=1.0, spacing=1.0 / 512.0)
        with pytest.raises(ValueError, match="lp_exact"):
            grand_maximal(big, Field.zeros(big), 1.0, method="lp_exact")
