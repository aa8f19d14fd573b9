import numpy as np
import pytest

from hardy_lab.exceptions import CertificationError
from hardy_lab.kernels import (
    GluedKernel,
    Subordinator,
    cutoff_constants,
    dilation_chart,
    fit_gaussian_bounds,
    glue_kernel,
    glue_over_centers,
    gradient_holder_constant,
    identity_chart,
    lip_range_constant,
    make_kernel,
    periodic_heat_1d,
    semigroup_residual,
    split_ai,
    subordinator_density,
    torus_heat,
    verify_lai,
    zeta,
)
from hardy_lab.space import Field, build_space, certify_space


def _half_density(s: float) -> float:
    return s**-0.5 * np.exp(-1.0 / (4.0 * s)) / (2.0 * np.sqrt(np.pi))


class TestMakeKernel:
    def test_bump_values(self, line) -> None:
        kernel = make_kernel("bump", profile="triangle", support=1.0)
        o = line.default_basepoint()
        row = kernel.row(line, 0.5, o)
        assert row[o] == pytest.approx(2.0)
        assert np.all(row[line.dist_rows([o])[0] >= 0.5] == 0.0)

    def test_describe(self) -> None:
        kernel = make_kernel("bump", profile="raised_cosine", support=0.5)
        described = kernel.describe()
        assert described["kind"] == "bump"
        assert described["profile"] == "raised_cosine"
        assert described["support"] == 0.5
        assert make_kernel("poisson_model").describe()["support"] == "inf"

    def test_with_scale_leaves_original(self, line) -> None:
        kernel = make_kernel("poisson_model")
        scaled = kernel.with_scale(0.25)
        assert kernel.scale == 1.0
        assert np.allclose(scaled.row(line, 1.0, 3), 0.25 * kernel.row(line, 1.0, 3))

    def test_times_outside_unit_interval(self, line) -> None:
        kernel = make_kernel("bump")
        with pytest.raises(ValueError, match="times"):
            kernel.evaluate(line, 0.0, [0])
        with pytest.raises(ValueError, match="times"):
            kernel.evaluate(line, 1.5, [0])

    def test_unknown_kind_and_profile(self) -> None:
        with pytest.raises(ValueError, match="Unknown kernel kind"):
            make_kernel("gabor")
        with pytest.raises(ValueError, match="Unknown bump profile"):
            make_kernel("bump", profile="hat")

    def test_custom_profile_needs_holder_constant(self) -> None:
        def box(u):
            return np.where(np.asarray(u) < 1.0, 1.0, 0.0)

        with pytest.raises(ValueError, match="holder_constant"):
            make_kernel("bump", profile=box)

    def test_explicit_kernel(self, line) -> None:
        kernel = make_kernel("explicit", fn=lambda t, d: np.exp(-d / t) / t, name="laplace")
        assert kernel.describe()["name"] == "laplace"
        assert kernel.row(line, 0.5, 0)[0] == pytest.approx(2.0)

    def test_heat_kernel_needs_a_torus(self, line) -> None:
        with pytest.raises(ValueError, match="torus"):
            make_kernel("heat_torus").evaluate(line, 0.5, [0])


class TestVerifyLai:
    def test_triangle_bump_constants(self, line) -> None:
        space, _ = certify_space(line)
        fitted = verify_lai(make_kernel("bump", profile="triangle", support=1.0), space)
        assert fitted.support_ok
        assert fitted.C2 == pytest.approx(1.0)
        assert 0.95 * 32.0 / 27.0 <= fitted.C1 <= 32.0 / 27.0 + 1e-9
        assert fitted.C3 <= 8.0 + 1e-9
        assert fitted.scale == pytest.approx(1.0 / max(fitted.C1, fitted.C3))
        assert fitted.c == pytest.approx(fitted.scale * fitted.C2)
        assert 0 < fitted.c < 1
        assert fitted.certified
        assert fitted.margins["upper"] <= 1.0 + 1e-12
        assert fitted.margins["holder"] <= 1.0 + 1e-12
        assert fitted.warnings == []

    def test_support_violation(self, line) -> None:
        kernel = make_kernel("bump", profile="triangle", support=1.0)
        fitted = verify_lai(kernel, line, lam=0.25)
        assert not fitted.support_ok
        assert not fitted.certified
        assert fitted.witnesses
        assert all(wi["distance"] > 0.25 for wi in fitted.witnesses)

    def test_uncertified_space_is_flagged(self, line) -> None:
        fitted = verify_lai(make_kernel("poisson_model"), line, n_rows=8)
        assert any("Ahlfors" in wi for wi in fitted.warnings)

    def test_poisson_model(self, line) -> None:
        fitted = verify_lai(make_kernel("poisson_model"), line, n_rows=8)
        assert fitted.C2 == pytest.approx(1.0)
        assert fitted.C1 <= 2.0 + 1e-9
        assert fitted.certified

    @pytest.mark.slow
    def test_heat_kernel_certified_on_tori(self) -> None:
        circle = build_space("torus", dimension=1, extent=1.0, spacing=1.0 / 256.0)
        fitted = verify_lai(make_kernel("heat_torus", dimension=1, period=1.0), circle, gamma=1.0, n_rows=8)
        assert circle.n_points == 256
        assert fitted.gamma == 1.0
        assert fitted.certified

        flat = build_space("torus", dimension=2, extent=1.0, spacing=1.0 / 64.0)
        fitted = verify_lai(make_kernel("heat_torus", dimension=2, period=1.0), flat, gamma=1.0, n_rows=8)
        assert flat.n_points == 64 * 64
        assert fitted.certified
        assert 0 < fitted.c < 1

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "topology, kind, params",
        [
            ("grid", "bump", dict(profile="triangle", support=1.0)),
            ("grid", "poisson_model", dict()),
            ("torus", "heat_torus", dict(dimension=1, period=1.0)),
        ],
    )
    def test_constants_stable_under_refinement(self, topology, kind, params) -> None:
        fits = []
        for spacing in (1.0 / 64.0, 1.0 / 128.0):
            if topology == "grid":
                space = build_space("grid", dimension=1, origin=-1.0, extent=2.0, spacing=spacing)
            else:
                space = build_space("torus", dimension=1, extent=1.0, spacing=spacing)
            space, _ = certify_space(space)
            fits.append(verify_lai(make_kernel(kind, **params), space, n_rows=16))
        coarse, fine = fits
        assert coarse.certified and fine.certified
        for namei in ("C1", "C2", "C3", "c"):
            assert getattr(fine, namei) == pytest.approx(getattr(coarse, namei), rel=0.2)

    def test_cutoff_constants(self) -> None:
        assert cutoff_constants(1.0, 2.0, 3.0, 0.5) == pytest.approx((3.0, 15.0))

    def test_lip_range_constant(self) -> None:
        assert lip_range_constant(1.0, 2.0, 1.0, 1.0, 1.0) == pytest.approx(100.0 / 27.0)
        assert lip_range_constant(1.0, 10.0, 1.0, 1.0, 1.0) == 10.0


class TestHeat:
    def test_image_and_fourier_forms_agree(self) -> None:
        delta = np.linspace(0.0, 0.5, 11)
        fine = periodic_heat_1d(delta, 1e-3, 1.0)
        direct = sum(
            np.exp(-(delta + k) ** 2 / 4e-3) for k in range(-3, 4)
        ) / np.sqrt(4.0 * np.pi * 1e-3)
        assert np.allclose(fine, direct, rtol=1e-12)
        assert np.allclose(periodic_heat_1d(delta, 5.0, 1.0), 1.0, atol=1e-12)

    def test_mass_is_one(self, torus) -> None:
        h = torus_heat(torus, 0.01, [0, 7])
        assert np.allclose(h @ torus.weights, 1.0, atol=1e-12)

    def test_semigroup(self, torus) -> None:
        assert semigroup_residual(torus, 0.005, 0.005, rows=[0, 5]) < 1e-10

    def test_gaussian_bounds(self, torus) -> None:
        bounds = fit_gaussian_bounds(torus)
        assert 0 < bounds.lower <= 1.0 <= bounds.upper

    def test_heat_kernel_gradient_constant(self, torus) -> None:
        fitted = verify_lai(make_kernel("heat_torus", dimension=1, period=1.0), torus, n_rows=8)
        assert fitted.gamma == 1.0
        assert np.isfinite(fitted.C4)
        assert fitted.C3_from_gradient == pytest.approx(gradient_holder_constant(fitted.C4, 1.0, 1.0))
        assert fitted.C2 > 0

    def test_heat_kernel_on_torus(self, torus) -> None:
        kernel = make_kernel("heat_torus", dimension=1, period=1.0)
        row = kernel.row(torus, 0.25, 0)
        assert np.allclose(row, torus_heat(torus, 0.0625, [0])[0])


class TestSubordination:
    @pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
    def test_half_density_closed_form(self, s) -> None:
        assert subordinator_density(0.5, s) == pytest.approx(_half_density(s), rel=1e-5)

    def test_half_density_on_log_grid(self) -> None:
        s = np.geomspace(0.01, 100.0, 50)
        values = np.array([subordinator_density(0.5, si) for si in s])
        assert np.max(np.abs(values - _half_density(s))) <= 1e-8

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    def test_laplace_identity(self, alpha) -> None:
        sub = Subordinator(alpha, use_cache=False)
        for z in (0.5, 1.0, 2.0):
            assert sub.laplace_residual(z) <= 1e-6

    def test_rejects_bad_arguments(self) -> None:
        with pytest.raises(ValueError):
            subordinator_density(1.0, 1.0)
        with pytest.raises(ValueError):
            subordinator_density(0.5, 0.0)

    @pytest.mark.slow
    def test_laplace_transform(self) -> None:
        sub = Subordinator(0.5, n_nodes=200, use_cache=False)
        assert sub.laplace_residual(1.0) < 1e-4
        assert abs(sub.quadrature_mass - 1.0) < 0.01
        C, c = sub.fit_bounds()
        assert sub.bound_holds(C, c)

    @pytest.mark.slow
    def test_subordinated_kernel_mass(self, torus) -> None:
        kernel = make_kernel("subordinated", alpha=0.5, heat=dict(dimension=1, period=1.0), n_nodes=200)
        assert kernel.gamma == pytest.approx(1.0)
        row = kernel.row(torus, 0.5, 0)
        assert row @ torus.weights == pytest.approx(1.0, abs=1e-6)


class TestSplit:
    def test_parts_sum_to_kernel(self, line) -> None:
        kernel = make_kernel("poisson_model")
        local, tail, tail_norm = split_ai(kernel, 0.5, line)
        assert local.support == 0.5
        rows = [0, 40, 64]
        total = local.evaluate(line, 0.25, rows) + tail.evaluate(line, 0.25, rows)
        assert np.allclose(total, kernel.evaluate(line, 0.25, rows))
        assert 0 < tail_norm < np.inf

    def test_local_part_is_supported(self, line) -> None:
        local, _, _ = split_ai(make_kernel("poisson_model"), 0.5, line)
        d = line.dist_rows([64])[0]
        assert np.all(local.row(line, 1.0, 64)[d > 0.5] == 0.0)

    def test_growing_tail_is_rejected(self, line) -> None:
        kernel = make_kernel("explicit", fn=lambda t, d: np.ones_like(d) / t)
        with pytest.raises(CertificationError) as err:
            split_ai(kernel, 0.5, line)
        assert len(err.value.witnesses) >= 2

    def test_lambda_below_resolution(self, line) -> None:
        with pytest.raises(ValueError, match="resolution"):
            split_ai(make_kernel("poisson_model"), 0.02, line)


class TestCharts:
    def test_zeta(self) -> None:
        assert np.allclose(zeta([0.0, 0.5, 2.0], 2.0, 1.0), [1.0, 1.0, 0.0])

    def test_identity_glue_matches_base_near_center(self, line) -> None:
        o = line.default_basepoint()
        kernel = make_kernel("bump", support=0.125)
        glued = glue_kernel(kernel, identity_chart(line, o, 1.0))
        assert isinstance(glued, GluedKernel)
        assert glued.support == 1.0
        near = np.flatnonzero(line.dist_rows([o])[0] <= 0.25)
        assert np.allclose(glued.row(line, 0.5, o)[near], kernel.row(line, 0.5, o)[near])

    def test_support_must_fit_chart(self, line) -> None:
        with pytest.raises(ValueError, match="exceeds"):
            glue_kernel(make_kernel("bump", support=1.0), identity_chart(line, 64, 1.0))

    def test_dilation_chart(self, line) -> None:
        chart = dilation_chart(line, 64, 0.5, factor=2.0)
        low, high = chart.bilipschitz_ratios()
        assert low == pytest.approx(0.5)
        assert high == pytest.approx(0.5)
        chart.validate()
        glued = glue_kernel(make_kernel("bump", support=0.015625), chart)
        values = Field(glued.row(chart.target, 0.5, chart.target.default_basepoint()), chart.target)
        assert values.sup() > 0

    def test_glue_over_centers(self, line) -> None:
        kernel = make_kernel("bump", support=0.125)
        charts = [identity_chart(line, 48, 1.0), identity_chart(line, 80, 1.0)]
        report = glue_over_centers(kernel, charts, n_rows=8)
        assert report.centers == [48, 80]
        assert len(report.constants) == 2
        assert report.spread["C2"] == pytest.approx(0.0, abs=1e-9)
