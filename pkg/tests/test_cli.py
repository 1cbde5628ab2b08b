import json
from pathlib import Path

import numpy as np
import pytest

from edgedot import __version__
from edgedot.cli import main
from edgedot.config import ConfigError, build_config, parse_quantity
from edgedot.pulses import read_envelope


def outputs(d, suffix):
    return sorted(Path(d).glob(f"*{suffix}"))


def record(d):
    [p] = [p for p in outputs(d, ".json") if not p.name.endswith("-envelope.json")]
    return json.loads(p.read_text())


def test_parse_quantity_units():
    assert parse_quantity("6 us", "time") == 6.0
    assert parse_quantity("500 ns", "time") == 0.5
    assert np.isclose(parse_quantity("4 MHz", "frequency"), 4.0)
    assert parse_quantity("1e5 Ohm", "resistance") == 1e5
    with pytest.raises(ValueError):
        parse_quantity("6", "time")
    with pytest.raises(ValueError):
        parse_quantity("6 V", "time")
    assert parse_quantity("6", "time", allow_bare=True) == 6.0


def test_build_config_collects_all_errors():
    doc = {"experiment": "surface-cycle", "parameters": {"tau_h": "6 V", "n_cycles": 0, "bogus": 1}}
    with pytest.raises(ConfigError) as e:
        build_config(doc)
    text = " ".join(e.value.errors)
    assert "tau_h" in text and "n_cycles" in text and "bogus" in text


def test_surface_cycle_run(tmp_path):
    assert main(["run", "surface-cycle", "--output-dir", str(tmp_path)]) == 0
    doc = record(tmp_path)
    assert doc["results"]["total_us"] == 46.0
    assert doc["version"] == __version__ and doc["seed"] == 0
    [csv] = outputs(tmp_path, ".csv")
    assert csv.name.startswith("surface-cycle-")
    assert csv.read_text() == "cycle,x,z\n0,1,1\n1,1,1\n"


def test_injected_error_via_cli(tmp_path):
    assert main(["surface-cycle", "--inject", "z1", "--output-dir", str(tmp_path)]) == 0
    assert record(tmp_path)["results"]["syndromes"] == [[1, 1], [-1, 1]]


def test_missing_sidebands_exit_2(tmp_path, capsys):
    cfg = tmp_path / "t.toml"
    cfg.write_text("[parameters]\nmax_shift = 4.5e-4\n")
    assert main(["run", "trim-plan", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 2
    assert "sidebands" in capsys.readouterr().err
    assert outputs(tmp_path, ".csv") == []


def test_trim_plan_run(tmp_path):
    cfg = tmp_path / "t.toml"
    cfg.write_text("[parameters]\nsidebands = {n = 100, half_span = 1.5e-2}\npopulation_size = 200\n")
    assert main(["trim-plan", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 0
    lines = outputs(tmp_path, ".csv")[0].read_text().splitlines()
    assert len(lines) == 201


def test_validate(tmp_path, capsys):
    good = tmp_path / "g.toml"
    good.write_text('experiment = "filter-function"\n[parameters]\nf_max = "5 MHz"\n')
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "b.toml"
    bad.write_text('experiment = "sweep-detuning"\n[parameters]\nb0 = "1 Tesla"\nn_points = -3\n')
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "b0" in err and "n_points" in err
    unknown = tmp_path / "u.toml"
    unknown.write_text('experiment = "teleport"\n')
    assert main(["validate", str(unknown)]) == 2
    assert "grape-1q" in capsys.readouterr().err


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGEDOT_OUTPUT_DIR", str(tmp_path))
    assert main(["filter-function", "--pulse", "square-hadamard", "--n-points", "5"]) == 0
    assert len(outputs(tmp_path, ".csv")) == 1


def test_unknown_pulse_exit_2(tmp_path):
    assert main(["sweep-detuning", "--pulse", str(tmp_path / "missing.csv"),
                 "--output-dir", str(tmp_path)]) == 2


def test_target_mismatch_exit_2(tmp_path):
    assert main(["sweep-detuning", "--pulse", "square-cz", "--target", "hadamard",
                 "--output-dir", str(tmp_path)]) == 2
    assert list(tmp_path.iterdir()) == []


def test_runtime_failure_exit_1_cleans_up(tmp_path, monkeypatch):
    # the CSV is already on disk when the record write fails
    def boom(self, doc, suffix=".json"):
        raise OSError("disk full")

    monkeypatch.setattr("edgedot.cli._Artifacts.write_json", boom)
    assert main(["surface-cycle", "--output-dir", str(tmp_path)]) == 1
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("argv", [
    ["sweep-detuning", "--pulse", "square-hadamard", "--n-points", "41"],
    ["am-crosstalk", "--pulse", "square-hadamard", "--n-bands", "4", "--f-am-min", "20",
     "--f-am-max", "60", "--n-points", "3"],
    ["spectrum", "--pulse", "square-hadamard", "--n-bands", "5"],
])
def test_thread_count_does_not_change_csv(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--threads", "1", "--output-dir", str(a)]) == 0
    assert main(argv + ["--threads", "3", "--output-dir", str(b)]) == 0
    assert outputs(a, ".csv")[0].read_bytes() == outputs(b, ".csv")[0].read_bytes()


def test_grape_envelope_round_trip(tmp_path):
    argv = ["grape-1q", "--n-segments", "60", "--duration", "3", "--max-iters", "50",
            "--detuning-nodes", "1", "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    [csv] = outputs(tmp_path, ".csv")
    env = read_envelope(csv)
    assert len(env) == 60 and np.isclose(env.duration, 3.0)
    assert record(tmp_path)["metric"] == "global_phase"
