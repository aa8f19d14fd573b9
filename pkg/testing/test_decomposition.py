from dataclasses import replace

import numpy as np
import pytest

from hardy_lab.decomposition import (
    CONDITIONS,
    ConstantLedger,
    calibrate_sum_constants,
    choose_constants,
    coefficient_audit,
    cutoff_family,
    ledger_at_eta,
    majorization_check,
    random_piecewise_fields,
    reconstruct,
    relative_change,
    resolvable_depth,
    uchiyama_decompose,
    with_E,
)
from hardy_lab.exceptions import LedgerInfeasibleError, NetResolutionError, ResidualBoundError
from hardy_lab.kernels import make_kernel, verify_lai
from hardy_lab.maximal import holder_cutoff
from hardy_lab.space import Field, certify_space


@pytest.fixture
def triangle():
    return make_kernel("bump", profile="triangle", support=1.0)


@pytest.fixture
def certified_line(line):
    space, _ = certify_space(line)
    return space


@pytest.fixture
def ledger(certified_line, triangle):
    return choose_constants(certified_line, verify_lai(triangle, certified_line))


@pytest.fixture
def cutoff(certified_line):
    return holder_cutoff(certified_line, certified_line.default_basepoint(), 1.0, 1.0, "triangle")


class TestLedger:
    def test_draft_closed_forms(self) -> None:
        draft = ConstantLedger.draft(1.0, 1.0, 0.5)
        assert draft.kappa == pytest.approx(2.0**4.5)
        assert draft.c1 == pytest.approx(0.25)
        assert draft.c2 == pytest.approx(0.25)
        assert draft.sigma == pytest.approx(1.0 / (2.0 * (32.0 + 2.0 / 3.0)))
        assert not draft.feasible

    @pytest.mark.parametrize("c, gamma", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, 1.5)])
    def test_draft_rejects(self, c, gamma) -> None:
        with pytest.raises(ValueError):
            ConstantLedger.draft(1.0, gamma, c)

    def test_chosen_ledger_is_feasible(self, ledger) -> None:
        ledger.validate()
        assert ledger.feasible
        conditions = ledger.conditions()
        assert set(conditions) == set(CONDITIONS)
        assert all(ok for _, _, ok in conditions.values())
        assert 0 < ledger.rho < 1
        assert 0.5 < ledger.p < 1
        assert np.log2(ledger.eta) == pytest.approx(round(np.log2(ledger.eta)))
        assert 0 < ledger.delta <= 0.25
        assert ledger.binding_constraint in CONDITIONS
        assert ledger.C_main >= 1.0
        assert ledger.c_source == "fitted"
        assert [pi["t"] for pi in ledger.calibration["main"]["per_time"]] == [0.25, 0.0625]
        assert "at_eta" not in ledger.calibration

    def test_dict_round_trip(self, ledger) -> None:
        restored = ConstantLedger.from_dict(ledger.to_dict())
        assert restored.kappa == pytest.approx(ledger.kappa)
        assert restored.p == pytest.approx(ledger.p)
        assert restored.binding == ledger.binding

    def test_uncertified_fit(self, certified_line, triangle) -> None:
        fitted = verify_lai(triangle, certified_line, lam=0.25)
        with pytest.raises(LedgerInfeasibleError) as err:
            choose_constants(certified_line, fitted)
        assert err.value.binding_constraint == "certification"

    def test_c_override(self, certified_line, triangle) -> None:
        fitted = verify_lai(triangle, certified_line)
        ledger = choose_constants(certified_line, fitted, c=0.5 * fitted.c)
        assert ledger.c == pytest.approx(0.5 * fitted.c)
        assert ledger.c_source == "override"

    def test_sum_constant_floor(self, certified_line) -> None:
        draft = ConstantLedger.draft(1.0, 1.0, 0.5)
        assert calibrate_sum_constants(certified_line, draft, 0.5, 1.0) >= 1.0
        with pytest.raises(ValueError):
            calibrate_sum_constants(certified_line, draft, 1.0, 0.5)

    def test_with_e(self, ledger) -> None:
        assert with_E(ledger, 3.5).E == 3.5
        assert np.isnan(ledger.E)


class TestDecompose:
    def test_levels_and_reconstruction(self, cutoff, triangle, ledger) -> None:
        dec = uchiyama_decompose(cutoff, triangle, ledger, N=4, allow_subresolution=True)
        assert dec.n_levels == 4
        assert all(ri <= 1.0 + 1e-9 for ri in dec.residual_ratios)
        assert all(li.saturated for li in dec.levels)
        assert dec.saturated_levels == 4
        assert dec.max_overlap == 0
        assert dec.initial_ratio <= 1.0 + 1e-12

        _, report = reconstruct(dec, triangle)
        assert report["residual_ok"]
        assert report["identity_error"] <= 1e-9
        assert coefficient_audit(dec) <= 1e-9

        trace = dec.trace()
        assert trace.height == 4
        assert trace["level"].to_list() == [0, 1, 2, 3]
        assert len(dec.to_dict()["levels"]) == 4

    def test_with_driving_field(self, certified_line, cutoff, triangle, ledger) -> None:
        f = random_piecewise_fields(certified_line, 1, seed=11)[0]
        dec = uchiyama_decompose(cutoff, triangle, ledger, f=f, N=2, allow_subresolution=True)
        assert dec.n_levels == 2
        assert max(dec.residual_ratios) <= 1.0 + 1e-9

    def test_zero_levels(self, cutoff, triangle, ledger) -> None:
        dec = uchiyama_decompose(cutoff, triangle, ledger, N=0)
        assert dec.n_levels == 0
        assert np.allclose(dec.residual.values, dec.phi.values)
        assert dec.trace().height == 0

    def test_below_resolution_needs_saturated_nets(self, cutoff, triangle, ledger) -> None:
        assert resolvable_depth(ledger, cutoff.space) == 0
        with pytest.raises(NetResolutionError):
            uchiyama_decompose(cutoff, triangle, ledger, N=2)

    def test_resolvable_depth(self, certified_line, ledger) -> None:
        assert resolvable_depth(replace(ledger, eta=0.25), certified_line) == 2

    def test_hand_fixed_eta_builds_real_nets(self, certified_line, cutoff, triangle, ledger) -> None:
        fixed = ledger_at_eta(certified_line, ledger, 0.25)
        assert fixed.eta == 0.25
        assert fixed.failed() == ["regime_descent"]
        assert [pi["t"] for pi in fixed.calibration["at_eta"]["main"]["per_time"]] == [0.25, 0.0625]
        with pytest.raises(LedgerInfeasibleError):
            uchiyama_decompose(cutoff, triangle, fixed, N=1)

        dec = uchiyama_decompose(cutoff, triangle, fixed, N=1, waive=["regime_descent"])
        assert dec.waived == ["regime_descent"]
        assert dec.saturated_levels == 0
        assert dec.levels[0].centers.size > 1
        assert 1 <= dec.max_overlap <= fixed.L
        assert dec.residual_ratios[0] <= 1.0 + 1e-9
        assert dec.levels[0].diagnostics["w_ratio"] <= 1.0 + 1e-9
        assert coefficient_audit(dec) <= 1e-9
        assert dec.to_dict()["waived"] == ["regime_descent"]

    def test_unknown_waived_condition(self, cutoff, triangle, ledger) -> None:
        with pytest.raises(ValueError, match="Unknown ledger conditions"):
            uchiyama_decompose(cutoff, triangle, ledger, N=0, waive=["speed"])

    def test_draft_ledger_is_rejected(self, cutoff, triangle) -> None:
        with pytest.raises(LedgerInfeasibleError):
            uchiyama_decompose(cutoff, triangle, ConstantLedger.draft(1.0, 1.0, 0.1), N=1)

    def test_not_a_cutoff(self, certified_line, triangle, ledger) -> None:
        with pytest.raises(ValueError, match="Hoelder"):
            uchiyama_decompose(Field.constant(certified_line, 5.0), triangle, ledger, N=1)

    def test_broken_residual_bound(self, cutoff, triangle, ledger) -> None:
        loud = replace(ledger, scale=3.0 / (ledger.kappa * ledger.delta))
        with pytest.raises(ResidualBoundError) as err:
            uchiyama_decompose(cutoff, triangle, loud, N=3, allow_subresolution=True)
        assert err.value.level == 1
        assert err.value.ratio > 1.0
        assert err.value.partial.n_levels == 1


class TestMajorization:
    def test_family_bound(self, certified_line, triangle, ledger) -> None:
        o = certified_line.default_basepoint()
        cutoffs = cutoff_family(certified_line, o, 1.0, radii=(0.5, 1.0))
        assert len(cutoffs) == 6
        fields = random_piecewise_fields(certified_line, 4, seed=5)
        report = majorization_check(cutoffs, fields, triangle, ledger)
        assert report.mode == "family"
        assert len(report.ratios) == 4
        assert 0 < report.E < np.inf
        assert report.p == pytest.approx(ledger.p)

        grand = majorization_check(cutoffs, fields, triangle, ledger, grand="candidate_family")
        assert grand.mode == "grand:candidate_family"
        assert grand.E >= report.E * (1.0 - 1e-9)

    def test_zero_field_is_skipped(self, certified_line, triangle, ledger) -> None:
        o = certified_line.default_basepoint()
        cutoffs = cutoff_family(certified_line, o, 1.0, radii=(1.0,), profiles=("triangle",))
        report = majorization_check(cutoffs, [Field.zeros(certified_line)], triangle, ledger)
        assert report.skipped == 1
        assert report.E == 0.0

    def test_cutoff_radius_range(self, certified_line) -> None:
        with pytest.raises(ValueError, match="radius"):
            cutoff_family(certified_line, 0, 1.0, radii=(2.0,))

    def test_piecewise_fields_are_reproducible(self, certified_line) -> None:
        first = random_piecewise_fields(certified_line, 2, seed=1)
        again = random_piecewise_fields(certified_line, 2, seed=1)
        other = random_piecewise_fields(certified_line, 2, seed=2)
        assert np.array_equal(first[1].values, again[1].values)
        assert not np.array_equal(first[1].values, other[1].values)

    def test_relative_change(self) -> None:
        assert relative_change(2.0, 3.0) == pytest.approx(0.5)
        assert relative_change(0.0, 0.0) == 0.0
        assert relative_change(0.0, 1.0) == float("inf")
