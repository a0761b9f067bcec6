"""CLI behavior: subcommands, exit codes, artifact emission."""

import numpy as np
import pytest

from fadefree.cli import main
from fadefree.reporting import SWEEP_HEADER

CLEAN = """
[channel]
fiber_length_km = 0
loss_db = 0
snr_db = 9
optical = false
front_end = false

[frame]
n_training = 400
n_payload = 1600

[pnle]
enabled = false

[dfe]
enabled = false

[detector]
kinds = threshold

[run]
min_bits = 1600
seed = 5
"""


@pytest.fixture
def clean_ini(tmp_path):
    path = tmp_path / "clean.ini"
    path.write_text(CLEAN)
    return path


class TestRunCommand:
    def test_run_writes_report(self, clean_ini, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--config", str(clean_ini), "--out", str(out)])
        assert code == 0
        lines = (out / "report.csv").read_text().splitlines()
        assert lines[0] == SWEEP_HEADER
        assert len(lines) == 2
        assert "threshold" in capsys.readouterr().out

    def test_cli_detector_override(self, clean_ini, tmp_path):
        out = tmp_path / "out"
        code = main(["run", "--config", str(clean_ini), "--out", str(out),
                     "--detector", "fixed:4@3", "--seed", "8"])
        assert code == 0
        body = (out / "report.csv").read_text()
        assert "fixed:4" in body and ",8," in body

    def test_set_overrides(self, clean_ini, tmp_path):
        out = tmp_path / "out"
        code = main(["run", "--config", str(clean_ini), "--out", str(out),
                     "--set", "channel.snr_db=12", "--min-bits", "3200"])
        assert code == 0
        row = (out / "report.csv").read_text().splitlines()[1]
        assert row.split(",")[3] == "12"
        assert row.split(",")[5] == "3200"

    def test_config_error_exit_1(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[channel]\nunknown_key = 1\n")
        assert main(["run", "--config", str(bad)]) == 1

    def test_missing_config_exit_1(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 1

    def test_bad_flag_exit_1(self):
        assert main(["run", "--frobnicate"]) == 1

    def test_runtime_error_exit_2(self, clean_ini, tmp_path):
        # front end enabled with bandwidth beyond Nyquist fails mid-pipeline
        code = main(["run", "--config", str(clean_ini),
                     "--out", str(tmp_path / "o"),
                     "--set", "channel.front_end=true",
                     "--set", "channel.front_end_bandwidth_ghz=200"])
        assert code == 2


class TestSweepCommand:
    def test_sweep_writes_artifacts(self, clean_ini, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(clean_ini), "--out", str(out),
                     "--set", "sweep.snr_db=7,9", "--workers", "1"])
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == SWEEP_HEADER
        assert len(lines) == 3
        svg = (out / "ber_vs_snr_db.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg

    def test_sweep_byte_identical_on_repeat(self, clean_ini, tmp_path):
        outs = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            assert main(["sweep", "--config", str(clean_ini),
                         "--out", str(out), "--set", "sweep.snr_db=7,9",
                         "--workers", "1"]) == 0
            outs.append((out / "sweep.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_sweep_records_failures_and_continues(self, clean_ini, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(clean_ini), "--out", str(out),
                     "--set", "detector.kinds=threshold, mlse@25",
                     "--workers", "1"])
        assert code == 0
        assert (out / "failures.csv").exists()
        assert len((out / "sweep.csv").read_text().splitlines()) == 2
