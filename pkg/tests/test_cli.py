"""CLI surface tests: verbs, artifacts, exit codes."""

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from afcsim import cli
from afcsim.config import reference_calibration_config


@pytest.fixture()
def fast_config_file(tmp_path):
    cfg = json.loads(
        Path("src/afcsim/data/reference_calibration.json").read_text()
        if Path("src/afcsim/data/reference_calibration.json").exists()
        else Path(__file__).parent.parent.joinpath(
            "src/afcsim/data/reference_calibration.json"
        ).read_text()
    )
    cfg["desk_scale"].update(
        chsh_cycles_per_setting=300_000,
        fringe_points=9,
        fringe_cycles_per_point=120_000,
        tomography_cycles_per_setting=250_000,
        g2_cycles=300_000,
        mc_trials=8,
    )
    path = tmp_path / "fast.json"
    path.write_text(json.dumps(cfg))
    return str(path)


class TestSimulate:
    def test_single_channel_run(self, tmp_path, fast_config_file):
        out = tmp_path / "out"
        code = cli.main(
            ["simulate", "--config", fast_config_file, "--out", str(out), "--channels", "1"]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["channels"]) == 1
        assert (out / "channel1_density_after.txt").exists()

    def test_bad_config_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"memory": {"channels": []}}')
        code = cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_bad_channel_label_exit_2(self, tmp_path, fast_config_file):
        code = cli.main(
            ["simulate", "--config", fast_config_file, "--out", str(tmp_path / "o"),
             "--channels", "9"]
        )
        assert code == 2


class TestAnalyzeGolden:
    def test_table4(self, tmp_path):
        code = cli.main(["analyze-golden", "table4", "--out", str(tmp_path)])
        assert code == 0
        metrics = json.loads((tmp_path / "table4_metrics.json").read_text())
        assert metrics["metrics"]["fidelity_in"] == pytest.approx(0.9134, abs=1e-3)

    def test_table2(self, tmp_path):
        code = cli.main(["analyze-golden", "table2", "--out", str(tmp_path)])
        assert code == 0
        fit = json.loads((tmp_path / "table2_decay_fit.json").read_text())
        assert fit["non_monotone_times_flagged_ns"] == [170.0]
        assert (tmp_path / "table2_decay_fit.csv").exists()

    def test_table3(self, tmp_path):
        code = cli.main(
            ["analyze-golden", "table3", "--out", str(tmp_path), "--trials", "8"]
        )
        assert code == 0
        summary = json.loads((tmp_path / "table3_reconstruction.json").read_text())
        assert summary["checks"]["fidelity_to_reference"]


class TestReproduce:
    def test_fig4_artifacts(self, tmp_path, fast_config_file):
        code = cli.main(
            ["reproduce", "fig4", "--config", fast_config_file, "--out", str(tmp_path)]
        )
        # reduced statistics may or may not hit the 5pp window; artifacts must exist
        assert code in (0, 1)
        assert (tmp_path / "fig4_fringe_alpha0.csv").exists()
        assert (tmp_path / "fig4_correlation_alpha0.csv").exists()
        summary = json.loads((tmp_path / "fig4_summary.json").read_text())
        assert set(summary["alpha_scans"]) == {"alpha0", "alpha_pi_2"}

    def test_fig7_artifacts(self, tmp_path, fast_config_file):
        code = cli.main(
            ["reproduce", "fig7", "--config", fast_config_file, "--out", str(tmp_path)]
        )
        assert code in (0, 1)
        rows = (tmp_path / "fig7_twofold_histogram.csv").read_text().splitlines()
        assert rows[0] == "delta_t_ps,count"
        assert len(rows) > 50

    def test_table2_alias(self, tmp_path):
        code = cli.main(["reproduce", "table2", "--out", str(tmp_path)])
        assert code == 0

    def test_unknown_figure_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["reproduce", "fig9", "--out", str(tmp_path)])
