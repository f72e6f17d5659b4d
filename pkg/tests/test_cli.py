"""Config parsing, artifact layout, exit codes, and rerun determinism."""

import json
import math
import os

import pytest

import fkpi_lab.cli as cli
from fkpi_lab.cli import COMMANDS, RunConfig, apply_overrides, main, parse_config


def run_cli(*args):
    return main(list(args))


def small_conserve_config(**extra):
    cfg = {
        "command": "conserve",
        "alpha": 3.0,
        "grid": {"modes_x": 32, "modes_y": 32},
        "evolution": {"dt": 0.05, "T": 0.1, "snapshot_stride": 1},
        "data": {"l2_norm": 0.1},
    }
    cfg.update(extra)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestParseConfig:
    def test_minimal_fills_defaults(self):
        config = parse_config('{"command": "conserve"}')
        assert isinstance(config, RunConfig)
        assert config.alpha == 2.5
        assert config.seed == 0
        assert config.format == "csv"
        assert config.output_dir == "fkpi-out"
        assert config.grid is None and config.evolution is None
        assert config.probe is None
        assert config.sections["conserve"]["mass_tol"] == 1e-6
        assert config.sections["transversality"]["samples"] == 1000

    def test_command_from_argument(self):
        config = parse_config("{}", command="scaling")
        assert config.command == "scaling"

    def test_command_required(self):
        with pytest.raises(ValueError, match="command is required"):
            parse_config("{}")

    def test_command_mismatch(self):
        with pytest.raises(ValueError, match="command mismatch"):
            parse_config('{"command": "conserve"}', command="scaling")

    def test_alpha_range_error_names_field(self):
        with pytest.raises(ValueError, match=r"alpha must lie in \[2, 4\), got 4.5"):
            parse_config('{"command": "conserve", "alpha": 4.5}')
        with pytest.raises(ValueError, match="alpha"):
            parse_config('{"command": "conserve", "alpha": 1.99}')

    def test_alpha_boundary_accepted(self):
        assert parse_config('{"command": "conserve", "alpha": 2.0}').alpha == 2.0

    def test_unknown_key_cites_name(self):
        with pytest.raises(ValueError, match="unknown key 'alhpa'"):
            parse_config('{"command": "conserve", "alhpa": 3.0}')

    def test_unknown_nested_key_cites_dotted_path(self):
        with pytest.raises(ValueError, match="unknown key 'evolution.dtt'"):
            parse_config('{"command": "conserve", "evolution": {"dtt": 0.1}}')

    def test_bad_json(self):
        with pytest.raises(ValueError, match="not valid JSON"):
            parse_config("{command: conserve}")

    def test_non_object(self):
        with pytest.raises(ValueError, match="JSON object"):
            parse_config("[1, 2]")

    def test_choice_rejected(self):
        with pytest.raises(ValueError, match="'format' must be one of"):
            parse_config('{"command": "conserve", "format": "xml"}')

    def test_type_errors(self):
        with pytest.raises(ValueError, match="'alpha' must be a number"):
            parse_config('{"command": "conserve", "alpha": "three"}')
        with pytest.raises(ValueError, match="'seed' must be an integer"):
            parse_config('{"command": "conserve", "seed": 1.5}')
        with pytest.raises(ValueError, match="'evolution.dealias' must be true"):
            parse_config('{"command": "conserve", "evolution": {"dealias": 1}}')

    def test_negative_workers(self):
        with pytest.raises(ValueError, match="workers"):
            parse_config('{"command": "conserve", "workers": -2}')

    def test_grid_section_builds_grid(self):
        config = parse_config(json.dumps(small_conserve_config()))
        assert config.grid.modes_x == 32
        assert config.grid.length_x == pytest.approx(2.0 * math.pi)
        assert config.evolution.dt == 0.05

    def test_probe_section_builds_sweep(self):
        text = json.dumps({
            "command": "bilinear", "seed": 7,
            "probe": {"dyadic_range": [8, 16, 32, 64], "tolerance_hi": 0.3},
        })
        config = parse_config(text)
        assert config.probe.dyadic_range == (8.0, 16.0, 32.0, 64.0)
        assert config.probe.seed == 7
        assert config.probe.tolerance_band == (-math.inf, 0.3)

    def test_probe_two_sided_band(self):
        text = json.dumps({
            "command": "strichartz",
            "probe": {"dyadic_range": [0.125, 0.25, 0.5],
                      "tolerance_lo": -0.2, "tolerance_hi": 0.2},
        })
        assert parse_config(text).probe.tolerance_band == (-0.2, 0.2)

    def test_probe_needs_dyadic_range(self):
        with pytest.raises(ValueError, match="probe.dyadic_range"):
            parse_config('{"command": "bilinear", "probe": {"tolerance_hi": 0.1}}')

    def test_echo_is_json_clean(self):
        config = parse_config(json.dumps(small_conserve_config()))
        echo = json.loads(json.dumps(config.echo))
        assert echo["command"] == "conserve"
        assert echo["grid"]["modes_x"] == 32
        assert echo["scan"]["samples"] == 10000


class TestOverrides:
    def test_top_level_and_dotted(self):
        raw = {"command": "conserve"}
        apply_overrides(raw, ["alpha=3.0", "conserve.mass_tol=1e-9"])
        assert raw["alpha"] == 3.0
        assert raw["conserve"]["mass_tol"] == 1e-9

    def test_json_values_and_string_fallback(self):
        raw = {}
        apply_overrides(raw, ['probe={"dyadic_range": [1, 2]}',
                              "format=json", "data.kind=zero"])
        assert raw["probe"] == {"dyadic_range": [1, 2]}
        assert raw["format"] == "json"
        assert raw["data"]["kind"] == "zero"

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="key=value"):
            apply_overrides({}, ["alpha"])

    def test_too_many_dots(self):
        with pytest.raises(ValueError, match="at most one dot"):
            apply_overrides({}, ["a.b.c=1"])

    def test_scalar_is_not_a_section(self):
        with pytest.raises(ValueError, match="not a section"):
            apply_overrides({"alpha": 2.5}, ["alpha.x=1"])


class TestHelp:
    def test_every_config_key_and_default_listed(self):
        text = cli.build_parser().format_help()
        for key, spec in cli.SCHEMA.items():
            if isinstance(spec, dict):
                for sub in spec:
                    assert f"{key}.{sub}" in text
            else:
                assert key in text
        assert "default 2.5" in text              # alpha
        assert 'default "csv"' in text            # format
        assert "default 1e-06" in text            # conserve.mass_tol
        assert "exit status" in text

    def test_commands_listed(self):
        text = cli.build_parser().format_help()
        for command in COMMANDS:
            assert command in text


class TestRunArtifacts:
    def test_conserve_small_run_passes(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config())
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        assert (out / "records.csv").exists()
        assert (out / "manifest.json").exists()
        assert not (out / "FAILED").exists()
        header = (out / "records.csv").read_text().splitlines()[0]
        assert header.startswith("probe,")
        assert (out / "plotdata" / "mass_drift_t.dat").exists()
        curve = (out / "plotdata" / "mass_drift_t.dat").read_text().splitlines()
        assert len(curve) == 3  # t = 0, 0.05, 0.1
        assert all(len(line.split()) == 2 for line in curve)

    def test_zero_data_conserve_trivially_passes(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config(
            data={"kind": "zero"}))
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        rows = (out / "records.csv").read_text().splitlines()[1:]
        assert len(rows) == 2
        assert all(",0.0," in row and ",true," in row for row in rows)

    def test_manifest_contents(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config())
        out = tmp_path / "out"
        run_cli("--config", cfg, "--output-dir", str(out))
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "conserve"
        assert manifest["config"]["alpha"] == 3.0
        assert manifest["config"]["evolution"]["dt"] == 0.05
        assert set(manifest["versions"]) == {"fkpi_lab", "numpy", "python"}
        assert manifest["records"] == 2
        assert manifest["failures"] == []
        assert manifest["timestamp"]["wall_time_s"] > 0.0

    def test_rerun_identical_modulo_timestamp(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config())
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        records_a = (out / "records.csv").read_bytes()
        curve_a = (out / "plotdata" / "energy_drift_t.dat").read_bytes()
        manifest_a = json.loads((out / "manifest.json").read_text())
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        assert (out / "records.csv").read_bytes() == records_a
        assert (out / "plotdata" / "energy_drift_t.dat").read_bytes() == curve_a
        manifest_b = json.loads((out / "manifest.json").read_text())
        manifest_a.pop("timestamp")
        manifest_b.pop("timestamp")
        assert manifest_a == manifest_b

    def test_json_format_writes_jsonl(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config(format="json"))
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        lines = (out / "records.jsonl").read_text().splitlines()
        assert len(lines) == 2
        rec = json.loads(lines[0])
        assert rec["probe"] == "mass_drift"
        assert rec["pass"] is True
        assert not (out / "records.csv").exists()

    def test_simulate_saves_final_state(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config(command="simulate"))
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        assert (out / "final_state.fkpi").stat().st_size > 0
        assert (out / "plotdata" / "mass_t.dat").exists()

    def test_seed_flag_enters_echo(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config())
        out = tmp_path / "out"
        run_cli("--config", cfg, "--output-dir", str(out), "--seed", "42")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 42


class TestExitCodes:
    def test_failing_record_exits_2_with_marker(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config(
            conserve={"mass_tol": 1e-30}))
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 2
        marker = (out / "FAILED").read_text()
        assert "mass_drift" in marker
        # partial results stay on disk next to the marker
        assert (out / "records.csv").exists()
        assert json.loads((out / "manifest.json").read_text())["failures"] == [
            "mass_drift"]

    def test_marker_cleared_on_subsequent_pass(self, tmp_path):
        bad = write_config(tmp_path, small_conserve_config(
            conserve={"mass_tol": 1e-30}), name="bad.json")
        good = write_config(tmp_path, small_conserve_config(), name="good.json")
        out = tmp_path / "out"
        assert run_cli("--config", bad, "--output-dir", str(out)) == 2
        assert run_cli("--config", good, "--output-dir", str(out)) == 0
        assert not (out / "FAILED").exists()

    def test_config_error_exits_1(self, tmp_path, capsys):
        cfg = write_config(tmp_path, small_conserve_config(alpha=4.5))
        assert run_cli("--config", cfg) == 1
        assert "alpha must lie in [2, 4)" in capsys.readouterr().err

    def test_unknown_key_exits_1(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"command": "conserve", "alhpa": 3.0})
        assert run_cli("--config", cfg) == 1
        assert "unknown key 'alhpa'" in capsys.readouterr().err

    def test_missing_config_file_exits_1(self, tmp_path, capsys):
        assert run_cli("--config", str(tmp_path / "nope.json")) == 1
        assert "error:" in capsys.readouterr().err

    def test_handler_error_exits_1_with_marker(self, tmp_path, capsys):
        # coarse lattice trips the scaling resolution guard inside the handler
        out = tmp_path / "out"
        code = run_cli("scaling", "--set", 'grid={"modes_x": 64, "modes_y": 16}',
                       "--output-dir", str(out))
        assert code == 1
        assert "resolution loss" in (out / "FAILED").read_text()
        manifest = json.loads((out / "manifest.json").read_text())
        assert "resolution loss" in manifest["error"]

    def test_command_line_set_override(self, tmp_path):
        cfg = write_config(tmp_path, small_conserve_config())
        out = tmp_path / "out"
        code = run_cli("--config", cfg, "--output-dir", str(out),
                       "--set", "conserve.energy_tol=1e-30")
        assert code == 2
        assert "energy_drift" in (out / "FAILED").read_text()


class TestSweepCommands:
    def test_linear_strichartz_slope_and_control(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "strichartz", "alpha": 3.0,
            "grid": {"modes_x": 128, "modes_y": 16},
            "probe": {"dyadic_range": [2, 4, 8, 16], "tolerance_hi": 0.1},
            "strichartz": {"snapshots": 48},
        })
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--output-dir", str(out)) == 0
        slopes = json.loads((out / "slopes.json").read_text())
        assert slopes[0]["probe"] == "linear_strichartz_slope"
        assert slopes[0]["pass"] is True
        assert abs(slopes[0]["slope"]) < 0.1
        curve = (out / "plotdata" / "linear_strichartz_band_n.dat")
        assert len(curve.read_text().splitlines()) == 4

        control = tmp_path / "control"
        code = run_cli("--config", cfg, "--output-dir", str(control),
                       "--set", "strichartz.comparator_shift=-0.25")
        assert code == 2
        slopes = json.loads((control / "slopes.json").read_text())
        assert slopes[0]["pass"] is False

    def test_lw_band_rejects_comparator_shift(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("trilinear", "--set", "trilinear.comparator_shift=-0.25",
                       "--output-dir", str(out))
        assert code == 1
        assert "lw_band" in capsys.readouterr().err

    def test_transversality_records(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli("transversality", "--output-dir", str(out)) == 0
        rows = (out / "records.csv").read_text().splitlines()
        assert len(rows) == 3
        assert all(",true," in row for row in rows[1:])
