import json
import subprocess
import sys

import pytest

from qmtsdp.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_PARTIAL, main
from qmtsdp import estimators
from qmtsdp.serialization import load


def write_config(path, **kw):
    base = {"scenario": "shot_noise", "n_S": [400], "repetitions": 2}
    base.update(kw)
    path.write_text(json.dumps(base))
    return str(path)


@pytest.fixture
def simulated(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", n_S=[4000])
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "sim")]) == EXIT_OK
    return tmp_path / "sim"


def test_simulate_outputs(simulated):
    for name in ("povm.json", "states.json", "true_states.json", "frequencies.json", "frequencies.csv"):
        assert (simulated / name).exists()
    table = load(simulated / "frequencies.json")
    assert table.shots_per_state == 1000


@pytest.mark.parametrize("method", sorted(estimators.ESTIMATORS))
def test_fit(simulated, tmp_path, method, capsys):
    args = ["fit", "--frequencies", str(simulated / "frequencies.json"), "--states", str(simulated / "states.json"),
            "--method", method, "--out", str(tmp_path / "fit")]
    assert main(args) == EXIT_OK
    report = load(tmp_path / "fit" / f"fit_{method}.json")
    assert report.method
    assert method in capsys.readouterr().out


def test_seesaw(simulated, tmp_path):
    out = tmp_path / "ss"
    code = main(["seesaw", "--frequencies", str(simulated / "frequencies.json"),
                 "--states", str(simulated / "states.json"), "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "seesaw_trace.csv").read_text().startswith("step,side,delta\n")
    assert load(out / "seesaw_trace.json").steps


def test_scenario_and_plots(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", n_S=[400, 4000], name="sn")
    out = tmp_path / "run"
    code = main(["scenario", "--config", cfg, "--out", str(out), "--reps", "2", "--seed", "3",
                 "--plot", "shot_noise", "trace_distance"])
    assert code == EXIT_OK
    assert (out / "sn_repetitions.csv").exists()
    assert (out / "plotdata" / "sn_trace_distance.dat").exists()
    assert "slope_trace_distance" in (out / "sn_aggregate.csv").read_text()


def test_bench(tmp_path):
    out = tmp_path / "bench"
    code = main(["bench", "--dims", "2", "--shots", "100", "--ensembles", "complete", "--reps", "1",
                 "--methods", "single_delta", "--out", str(out), "--plot"])
    assert code == EXIT_OK
    assert (out / "bench.csv").exists() and (out / "bench.dat").exists()


class TestExitCodes:
    def test_config_errors(self, tmp_path):
        bad = write_config(tmp_path / "bad.json", n_S=[401])
        assert main(["scenario", "--config", bad]) == EXIT_CONFIG
        assert main(["scenario", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
        assert main(["fit", "--frequencies", "nope.json", "--states", "nope.json"]) == EXIT_CONFIG
        assert main(["scenario", "--config", write_config(tmp_path / "c.json"), "--reps", "0"]) == EXIT_CONFIG

    def test_partial_and_total_failure(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "cfg.json", repetitions=3)
        real = estimators.ESTIMATORS["single_delta"]
        calls = {"n": 0}

        def flaky(*args, **kw):
            calls["n"] += 1
            if calls["n"] == 2:
                raise RuntimeError("injected")
            return real(*args, **kw)

        monkeypatch.setitem(estimators.ESTIMATORS, "single_delta", flaky)
        assert main(["scenario", "--config", cfg, "--out", str(tmp_path / "p")]) == EXIT_PARTIAL

        def broken(*args, **kw):
            raise RuntimeError("injected")

        monkeypatch.setitem(estimators.ESTIMATORS, "single_delta", broken)
        assert main(["scenario", "--config", cfg, "--out", str(tmp_path / "f")]) == EXIT_FAILED

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path / "bad.json", repetitions=0)
    proc = subprocess.run([sys.executable, "-m", "qmtsdp", "scenario", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG
    assert "config error" in proc.stderr
