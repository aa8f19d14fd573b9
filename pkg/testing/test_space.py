from dataclasses import replace

import numpy as np
import pytest

from hardy_lab.space import (
    Field,
    audit_triangle,
    average_bound,
    build_patchwork,
    build_space,
    certify_space,
    equiv_dist_holds,
    lipschitz_constant,
    maximal_net,
    overlap_bound,
    separated_set,
    taper,
    verify_ahlfors,
    verify_net,
)
from hardy_lab.utilities import ahlfors_radii, geometric_grid, t_grid


def _path_table(n: int = 6) -> np.ndarray:
    ids = np.arange(n)
    return np.abs(ids[:, None] - ids[None, :]).astype(float)


class TestBuildSpace:
    def test_grid_counts_and_weights(self, unit_grid) -> None:
        assert unit_grid.n_points == 65
        assert unit_grid.resolution == pytest.approx(1.0 / 64.0)
        assert np.allclose(unit_grid.weights, 1.0 / 64.0)
        assert unit_grid.diameter == pytest.approx(1.0)

    def test_square_grid(self, square) -> None:
        assert square.n_points == 81
        assert np.allclose(square.weights, 1.0 / 64.0)
        assert square.diameter == pytest.approx(np.sqrt(2.0))

    def test_torus_wraps(self, torus) -> None:
        assert torus.n_points == 64
        assert torus.period == pytest.approx(1.0)
        assert torus.dist(0, 63) == pytest.approx(1.0 / 64.0)
        assert torus.diameter == pytest.approx(0.5)

    def test_default_basepoint_is_nearest_origin(self, line) -> None:
        o = line.default_basepoint()
        assert line.coords[o, 0] == pytest.approx(0.0)
        assert line.depth(o)[o] == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(topology="grid", dimension=4),
            dict(topology="grid", extent=0.5, spacing=0.5),
            dict(topology="sphere"),
            dict(topology="torus", extent=1.0, spacing=0.3),
        ],
    )
    def test_rejects_bad_parameters(self, kwargs) -> None:
        with pytest.raises(ValueError):
            build_space(**kwargs)

    def test_table_space(self) -> None:
        space = build_space("table", weights=np.ones(6), distances=_path_table(), ahlfors_dimension=1.0)
        assert space.n_points == 6
        assert space.resolution == pytest.approx(1.0)
        assert space.dist(1, 4) == pytest.approx(3.0)
        assert space.default_basepoint() == 0

    def test_table_space_validation(self) -> None:
        d = _path_table()
        d[0, 1] = 2.0
        with pytest.raises(ValueError, match="symmetric"):
            build_space("table", weights=np.ones(6), distances=d)

        d = _path_table()
        d[2, 2] = 1.0
        with pytest.raises(ValueError, match="diagonal"):
            build_space("table", weights=np.ones(6), distances=d)

        d = _path_table()
        d[1, 2] = d[2, 1] = 0.0
        with pytest.raises(ValueError, match="positive distance"):
            build_space("table", weights=np.ones(6), distances=d)

        with pytest.raises(ValueError):
            build_space("table", weights=-np.ones(6), distances=_path_table())


class TestField:
    def test_arithmetic_and_norms(self, unit_grid) -> None:
        one = Field.constant(unit_grid, 1.0)
        two = one + one
        assert two.integral() == pytest.approx(2.0 * unit_grid.total_measure)
        assert (two - one * 3.0).sup() == pytest.approx(1.0)
        assert two.norm(np.inf) == pytest.approx(2.0)
        assert (-two).abs().norm(2) == pytest.approx(2.0 * np.sqrt(unit_grid.total_measure))

    def test_point_mass_has_unit_integral(self, unit_grid) -> None:
        f = Field.point_mass(unit_grid, 10, mass=3.0)
        assert f.integral() == pytest.approx(3.0)
        assert f.support().tolist() == [10]

    def test_values_are_read_only_and_finite(self, unit_grid) -> None:
        f = Field.indicator(unit_grid, [1, 2, 3])
        with pytest.raises(ValueError):
            f.values[0] = 1.0
        with pytest.raises(ValueError):
            Field(np.full(unit_grid.n_points, np.nan), unit_grid)

    def test_fields_on_different_spaces_do_not_mix(self, unit_grid, line) -> None:
        with pytest.raises(ValueError):
            Field.zeros(unit_grid) + Field.zeros(line)


class TestMetricChecks:
    def test_triangle_audit(self, square, torus) -> None:
        assert audit_triangle(square, n_triples=2000) <= 1e-12
        assert audit_triangle(torus, n_triples=2000) <= 1e-12

    def test_equivalent_depths(self, line) -> None:
        assert equiv_dist_holds(line, line.default_basepoint())

    def test_lipschitz_constant(self, unit_grid) -> None:
        values = 3.0 * unit_grid.coords[:, 0]
        assert lipschitz_constant(values, unit_grid) == pytest.approx(3.0)


class TestAhlfors:
    def test_interval_is_one_dimensional(self, unit_grid) -> None:
        report = verify_ahlfors(unit_grid, 1.0)
        assert report.certified
        assert report.n_violations == 0
        assert 1.0 <= report.fitted_A <= 4.0

    def test_certify_space_attaches_constant(self, unit_grid) -> None:
        certified, report = certify_space(unit_grid)
        assert certified.is_certified
        assert certified.ahlfors_constant == pytest.approx(report.fitted_A)
        assert not unit_grid.is_certified

    def test_wrong_dimension_needs_a_larger_constant(self, unit_grid) -> None:
        right = verify_ahlfors(unit_grid, 1.0)
        wrong = verify_ahlfors(unit_grid, 2.0)
        assert wrong.fitted_A > right.fitted_A

    def test_small_radii_are_dropped(self, unit_grid) -> None:
        report = verify_ahlfors(unit_grid, 1.0, radii=[1.0 / 64.0, 0.1])
        assert report.radii == [pytest.approx(0.1)]
        assert report.warnings

    def test_no_radii_is_not_certified(self, unit_grid) -> None:
        report = verify_ahlfors(unit_grid, 1.0, radii=[1.0 / 128.0])
        assert not report.certified
        assert report.fitted_A == float("inf")

    def test_saturated_ball_is_a_violation(self, unit_grid) -> None:
        report = verify_ahlfors(unit_grid, 1.0, radii=[0.1, 1.0])
        assert not report.certified
        assert any(wi["kind"] == "saturated" for wi in report.violations)

    def test_symmetric_interval_is_certified(self, line) -> None:
        certified, report = certify_space(line)
        assert report.certified
        assert certified.is_certified
        assert max(report.radii) < 1.0
        assert report.violations == []


class TestGrids:
    @pytest.mark.parametrize("spacing", [1.0 / 64.0, 1.0 / 256.0])
    def test_ahlfors_radii_stay_below_half_diameter(self, spacing) -> None:
        radii = ahlfors_radii(spacing, 2.0)
        assert radii.size > 0
        assert radii[0] > 2.0 * spacing
        assert radii[-1] < 1.0 * (1.0 - 1e-10)
        assert np.allclose(radii[1:] / radii[:-1], 2.0**0.25)

    def test_grid_bottom_node_is_clamped(self) -> None:
        times = t_grid(1.0 / 256.0)
        assert times[0] >= 2.0 / 256.0
        assert times[-1] == pytest.approx(1.0)
        assert geometric_grid(1.0, 2.0).tolist() == [1.0]


class TestNets:
    @pytest.mark.parametrize("t", [0.5, 0.25, 0.1])
    def test_net_properties(self, line, t) -> None:
        o = line.default_basepoint()
        net = maximal_net(line, o, t, a=0.5)
        report = verify_net(net, line)
        assert report.passed
        assert report.uncovered == []
        assert net.constant >= 1.0

    def test_net_with_averaged_field(self, line) -> None:
        o = line.default_basepoint()
        g = Field(1.0 + line.coords[:, 0] ** 2, line)
        net = maximal_net(line, o, 0.25, a=1.0, g=g)
        assert verify_net(net, line, g).passed
        assert net.average_constant <= 2.0 + 1e-12

    def test_stacked_centers_break_the_overlap_bound(self, line) -> None:
        o = line.default_basepoint()
        net = maximal_net(line, o, 0.25, a=1.0)
        report = verify_net(net, line)
        assert report.passed
        assert report.realized_overlap <= report.overlap_bound

        n = int(report.overlap_bound) + 1
        stacked = replace(net, centers=np.full(n, o), seeds=np.full(n, o))
        bad = verify_net(stacked, line)
        assert bad.realized_overlap == n
        assert not bad.overlap
        assert not bad.passed

    def test_center_above_twice_the_seed_average_fails(self, line) -> None:
        o = line.default_basepoint()
        net = maximal_net(line, o, 0.25, a=1.0)
        spiked = np.ones(line.n_points)
        spiked[net.centers[0]] = 100.0
        report = verify_net(net, line, Field(spiked, line))
        assert report.seed_ratio > 2.0
        assert not report.average

    def test_bounds(self) -> None:
        assert overlap_bound(1.0, 1.0, 1.0) == pytest.approx(97.0)
        assert average_bound(2.0, 1.0, 0.5) == pytest.approx(128.0)

    def test_net_rejects_bad_parameters(self, line) -> None:
        o = line.default_basepoint()
        with pytest.raises(ValueError):
            maximal_net(line, o, 0.75)
        with pytest.raises(ValueError):
            maximal_net(line, o, 0.25, a=0.0)
        with pytest.raises(ValueError):
            maximal_net(line, o, 0.25, g=Field.constant(line, -1.0))

    def test_separated_set_is_separated(self, unit_grid) -> None:
        picked = separated_set(unit_grid, np.arange(unit_grid.n_points), 0.1)
        d = unit_grid.distances[np.ix_(picked, picked)]
        assert d[~np.eye(picked.size, dtype=bool)].min() >= 0.1 - 1e-12


class TestPatchwork:
    def test_partition_of_unity(self, unit_grid) -> None:
        patchwork = build_patchwork(unit_grid, 0.1)
        assert patchwork.partition_residual() <= 1e-12
        assert patchwork.color_separation() >= 0.4 - 1e-12
        assert sum(len(ci) for ci in patchwork.colors) == patchwork.centers.size
        assert patchwork.lipschitz > 0

    def test_enlarged_cutoff_covers_its_patch(self, unit_grid) -> None:
        patchwork = build_patchwork(unit_grid, 0.1)
        for k in range(patchwork.centers.size):
            inside = patchwork.cutoff(k).values > 0
            assert np.all(patchwork.enlarged_cutoff(k).values[inside] == 1.0)

    def test_kappa_below_resolution(self, unit_grid) -> None:
        with pytest.raises(ValueError, match="resolution"):
            build_patchwork(unit_grid, 0.02)

    def test_taper(self) -> None:
        r = np.array([0.0, 0.5, 0.75, 1.0, 2.0])
        assert np.allclose(taper(r, 0.5, 1.0), [1.0, 1.0, 0.5, 0.0, 0.0])
