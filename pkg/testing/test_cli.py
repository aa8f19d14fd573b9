import json

import numpy as np
import polars as pl
import pytest

from hardy_lab.campaign import SCHEMA, Campaign, bundled_campaign
from hardy_lab.cli import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, main
from hardy_lab.decomposition import ConstantLedger
from hardy_lab.exceptions import BundleError, ConfigError
from hardy_lab.export import dumps, write_atom, write_field, write_json, write_lp, write_maximal
from hardy_lab.hardy import dipole_atom
from hardy_lab.kernels import make_kernel
from hardy_lab.load import load_field, load_table_space
from hardy_lab.maximal import HolderCutoffLP, radial_maximal
from hardy_lab.report import checks_frame, load_bundle, render
from hardy_lab.space import Field

SMALL = """
[campaign]
name = small
seed = 3

[space line]
topology = grid
dimension = 1
origin = -1
extent = 2
spacing = 0.015625

[kernel tri]
kind = bump
profile = triangle
support = 1

[certify tri]
kernel = tri
space = line

[ledger fitted]
certify = tri

[decompose main]
ledger = fitted
eta = 0.25
waive = regime_descent
levels = 1
fields = 0
"""


def _write(tmp_path, text: str, name: str = "campaign.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestCampaignFile:
    def test_unknown_kernel_kind(self) -> None:
        with pytest.raises(ConfigError) as err:
            Campaign.from_text("[kernel k]\nkind = gabor\n")
        assert err.value.section == "kernel k"
        assert err.value.key == "kind"

    def test_unknown_option(self) -> None:
        with pytest.raises(ConfigError) as err:
            Campaign.from_text("[space s]\ntopology = grid\ncolour = red\n")
        assert err.value.key == "colour"

    def test_reference_must_come_first(self) -> None:
        text = "[certify c]\nkernel = k\nspace = s\n\n[kernel k]\nkind = bump\n"
        with pytest.raises(ConfigError) as err:
            Campaign.from_text(text)
        assert err.value.key == "kernel"

    def test_bad_section_and_value(self) -> None:
        with pytest.raises(ConfigError):
            Campaign.from_text("[widget w]\n")
        campaign = Campaign.from_text("[space s]\ntopology = grid\nextent = wide\n")
        with pytest.raises(ConfigError) as err:
            campaign.stages[0].get("extent", float)
        assert err.value.key == "extent"

    def test_bundled_campaign_parses(self) -> None:
        campaign = Campaign.from_file(bundled_campaign())
        assert campaign.name == "1d_bump"
        assert [si.kind for si in campaign.stages][:3] == ["space", "kernel", "certify"]
        with pytest.raises(ConfigError):
            bundled_campaign("missing")


class TestRun:
    def test_empty_campaign(self, tmp_path) -> None:
        path = _write(tmp_path, "[campaign]\nname = empty\n")
        out = tmp_path / "bundle"
        assert main(["run", str(path), "--out", str(out)]) == EXIT_OK
        summary = load_bundle(out)
        assert summary["schema"] == SCHEMA
        assert summary["stages"] == []
        assert summary["passed"]

    def test_config_error_exit_code(self, tmp_path) -> None:
        path = _write(tmp_path, "[kernel k]\nkind = gabor\n")
        path_log = tmp_path / "run.log"
        code = main(["run", str(path), "--out", str(tmp_path / "bundle"), "--log", str(path_log)])
        assert code == EXIT_CONFIG
        assert "kind" in path_log.read_text(encoding="utf-8")
        assert not (tmp_path / "bundle" / "summary.json").exists()

    def test_log_file_levels(self, tmp_path) -> None:
        path = _write(tmp_path, "[campaign]\nname = empty\n")
        path_log = tmp_path / "logs" / "run.log"
        main(["run", str(path), "--out", str(tmp_path / "a"), "--log", str(path_log)])
        assert "Campaign 'empty'" in path_log.read_text(encoding="utf-8")
        main(["run", str(path), "--out", str(tmp_path / "b"), "--log", str(path_log), "--quiet"])
        assert path_log.read_text(encoding="utf-8") == ""

    def test_missing_campaign_file(self, tmp_path) -> None:
        assert main(["run", str(tmp_path / "none.ini")]) == EXIT_CONFIG

    def test_small_campaign(self, tmp_path) -> None:
        path = _write(tmp_path, SMALL)
        out = tmp_path / "bundle"
        assert main(["run", str(path), "--out", str(out)]) == EXIT_OK
        summary = load_bundle(out)
        assert summary["passed"]
        stages = {si["kind"]: si for si in summary["stages"]}
        assert all(si["status"] == "passed" for si in summary["stages"])
        assert stages["space"]["result"]["n_points"] == 129
        assert stages["certify"]["status"] == "passed"

        ledger = stages["ledger"]["result"]
        draft = ConstantLedger.draft(ledger["D"], ledger["gamma"], ledger["c"])
        assert ledger["kappa"] == pytest.approx(draft.kappa)

        run = stages["decompose"]["result"]["runs"][0]
        assert run["n_levels"] == 1
        assert run["saturated_levels"] == 0
        assert run["max_overlap"] >= 1
        assert stages["decompose"]["result"]["ledger"]["eta"] == 0.25
        assert run["max_residual_ratio"] <= 1.0 + 1e-9
        assert run["coefficient_audit"] <= 1e-9
        trace = pl.read_csv(out / run["trace"])
        assert trace.height == 1
        assert not trace["saturated"].any()

        frame = checks_frame(summary)
        assert frame.height == sum(len(si["checks"]) for si in summary["stages"])

    def test_saturated_levels_fail_the_stage(self, tmp_path) -> None:
        text = SMALL.replace("eta = 0.25\nwaive = regime_descent\n", "allow_subresolution = true\n")
        path = _write(tmp_path, text)
        out = tmp_path / "bundle"
        assert main(["run", str(path), "--out", str(out)]) == EXIT_ASSERTION
        stages = {si["kind"]: si for si in load_bundle(out)["stages"]}
        assert stages["decompose"]["status"] == "failed"
        checks = {ci["criterion"]: ci for ci in stages["decompose"]["checks"]}
        assert not checks["levels below resolution"]["passed"]
        assert stages["decompose"]["result"]["runs"][0]["saturated_levels"] > 0

    @pytest.mark.slow
    def test_bundled_campaign_passes(self, tmp_path) -> None:
        out = tmp_path / "bundle"
        assert main(["run", str(bundled_campaign()), "--out", str(out)]) == EXIT_OK
        summary = load_bundle(out)
        stages = {si["kind"]: si for si in summary["stages"] if si["kind"] in ("decompose", "hardy-suite")}
        assert all(ri["saturated_levels"] == 0 for ri in stages["decompose"]["result"]["runs"])
        criteria = [ci["criterion"] for ci in stages["hardy-suite"]["checks"]]
        assert "max ||K*a||_1" in criteria

    def test_runs_are_reproducible(self, tmp_path) -> None:
        path = _write(tmp_path, SMALL)
        main(["run", str(path), "--out", str(tmp_path / "a")])
        main(["run", str(path), "--out", str(tmp_path / "b")])
        assert render(tmp_path / "a", "json") == render(tmp_path / "b", "json")


class TestReport:
    def test_missing_bundle(self, tmp_path) -> None:
        assert main(["report", str(tmp_path / "nowhere")]) == EXIT_CONFIG

    def test_schema_mismatch(self, tmp_path) -> None:
        write_json(dict(schema=SCHEMA + 1, stages=[]), tmp_path / "summary.json")
        assert main(["report", str(tmp_path)]) == EXIT_CONFIG
        with pytest.raises(BundleError, match="schema"):
            load_bundle(tmp_path / "summary.json")

    def test_markdown(self, tmp_path, capsys) -> None:
        main(["run", str(_write(tmp_path, "[campaign]\nname = empty\n")), "--out", str(tmp_path / "bundle")])
        capsys.readouterr()
        assert main(["report", str(tmp_path / "bundle")]) == EXIT_OK
        text = capsys.readouterr().out
        assert text.startswith("# Campaign `empty`")
        assert "**PASS**" in text
        assert text == render(tmp_path / "bundle", "md")

    def test_unknown_format(self, tmp_path) -> None:
        with pytest.raises(ValueError, match="format"):
            render(tmp_path, "html")


class TestFiles:
    def test_dumps_is_deterministic(self) -> None:
        text = dumps(dict(b=np.float64(np.inf), a=np.arange(2), c=np.bool_(True)))
        assert text == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": "inf",\n  "c": true\n}\n'

    def test_field_round_trip(self, unit_grid, tmp_path) -> None:
        f = Field(np.sin(unit_grid.coords[:, 0]), unit_grid)
        g = load_field(write_field(f, tmp_path / "f.csv"), unit_grid)
        assert np.allclose(g.values, f.values)

    def test_atom_files(self, line, tmp_path) -> None:
        a = dipole_atom(line, 64, 0.125)
        path_csv, path_json = write_atom(a, tmp_path / "atom.csv")
        assert np.allclose(load_field(path_csv, line).values, a.values.values)
        with open(path_json, "r", encoding="utf-8") as f:
            sidecar = json.load(f)
        assert sidecar["verdict"]["kind"] == "standard"

    def test_field_file_validation(self, unit_grid, tmp_path) -> None:
        path = tmp_path / "bad.csv"
        pl.DataFrame({"point_id": [0, 0], "value": [1.0, 2.0]}).write_csv(path)
        with pytest.raises(ValueError, match="repeats"):
            load_field(path, unit_grid)
        pl.DataFrame({"point_id": [999], "value": [1.0]}).write_csv(path)
        with pytest.raises(ValueError, match="outside"):
            load_field(path, unit_grid)
        with pytest.raises(FileNotFoundError):
            load_field(tmp_path / "none.csv", unit_grid)

    def test_table_space(self, tmp_path) -> None:
        path_points = tmp_path / "points.csv"
        pl.DataFrame({"id": [2, 0, 1, 3], "weight": [1.0] * 4, "x": [2.0, 0.0, 1.0, 3.0]}).write_csv(path_points)
        space = load_table_space(path_points)
        assert space.n_points == 4
        assert space.dist(0, 3) == pytest.approx(3.0)

        path_distances = tmp_path / "distances.csv"
        pl.DataFrame({"id_a": [0, 0, 1], "id_b": [1, 2, 2], "distance": [1.0, 2.0, 1.0]}).write_csv(path_distances)
        with pytest.raises(ValueError, match="every pair"):
            load_table_space(path_points, path_distances)

    def test_maximal_and_lp_files(self, unit_grid, tmp_path) -> None:
        f = Field.point_mass(unit_grid, 20)
        path = write_maximal(radial_maximal(make_kernel("bump", support=0.5), f), tmp_path / "out" / "m.csv")
        frame = pl.read_csv(path)
        assert frame.columns == ["point_id", "value", "argmax_t"]
        assert frame.height == unit_grid.n_points

        problem = HolderCutoffLP(unit_grid, 32, 0.0625, 1.0, f)
        path_lp = write_lp(problem, tmp_path / "out" / "cutoff.lp")
        assert path_lp.read_text(encoding="utf-8") == problem.to_text()
