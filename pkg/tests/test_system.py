import json

import pytest

from nfcbms.simclock import LatencyTable, PowerTable
from nfcbms.system import ConfigError, RunConfig, load_config, parse_config, simulate


def test_defaults_round_trip():
    cfg = RunConfig(latency=LatencyTable().to_dict(), power=PowerTable().to_dict())
    back = parse_config(json.dumps(cfg.to_dict()))
    assert back == cfg
    assert LatencyTable(**back.latency) == LatencyTable()


@pytest.mark.parametrize(
    "text,line",
    [
        ('{\n  "seed": 1,\n  "bogus": 2\n}', 3),
        ('{\n  "seed": 1,\n  "iterations": "ten"\n}', 3),
        ('{\n  "latency": {\n    "authentication": 1,\n    "nope": 2\n  }\n}', 4),
        ('{\n  "seed": 1,\n  "mode": \n}', 4),
    ],
)
def test_config_errors_carry_line(text, line):
    with pytest.raises(ConfigError, match=rf"cfg.json:{line}"):
        parse_config(text, "cfg.json")


def test_config_semantic_errors():
    with pytest.raises(ConfigError):
        parse_config('{"mode": "turbo"}')
    with pytest.raises(ConfigError):
        parse_config('{"channel": {"drop_probability": 2}}')
    with pytest.raises(ConfigError):
        parse_config('{"latency": {"diagnostics": 50}}')


def test_relative_paths_resolved(tmp_path):
    (tmp_path / "c.json").write_text('{"tag_file": "tag.json"}')
    assert load_config(tmp_path / "c.json").tag_file == str(tmp_path / "tag.json")


def read_outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_deterministic(tmp_path):
    cfg = RunConfig(seed=5, iterations=10, ccbs=2, channel={"drop_probability": 0.05})
    simulate(cfg, tmp_path / "a")
    simulate(cfg, tmp_path / "b")
    a, b = read_outputs(tmp_path / "a"), read_outputs(tmp_path / "b")
    assert a == b
    assert {"ledger.csv", "summary.json", "transcript.txt", "session_keys.json"} <= set(a)
    assert "samples_ccb0.log" in a and "samples_ccb1.log" in a


def test_seed_changes_output(tmp_path):
    simulate(RunConfig(seed=1, iterations=2), tmp_path / "a")
    simulate(RunConfig(seed=2, iterations=2), tmp_path / "b")
    assert read_outputs(tmp_path / "a")["summary.json"] != read_outputs(tmp_path / "b")["summary.json"]


def test_zero_iterations_is_init_only():
    (s,) = simulate(RunConfig(iterations=0))["ccbs"]
    assert s["init"]["total_ms"] == 534.2 and s["cycles"]["count"] == 0


def test_multi_ccb_ledger_prefixed(tmp_path):
    simulate(RunConfig(iterations=1, ccbs=3), tmp_path)
    lines = (tmp_path / "ledger.csv").read_text().splitlines()
    assert lines[0] == "phase,start_ms,end_ms,energy_mJ,outcome"
    assert sum(1 for l in lines if l.startswith("phase,")) == 1
    assert {l.split("/")[0] for l in lines[1:]} == {"ccb0", "ccb1", "ccb2"}


def test_profile_drives_samples(tmp_path):
    from nfcbms.battery import ProfilePoint, dump_profile

    (tmp_path / "p.json").write_text(dump_profile([ProfilePoint(0, (5000,) + (3700,) * 13, 7000)]))
    (tmp_path / "c.json").write_text('{"profile": "p.json", "iterations": 1}')
    out = tmp_path / "out"
    simulate(load_config(tmp_path / "c.json"), out)
    from nfcbms.ccb import MonitoringSample
    from nfcbms.securelog import LogStore, SecurityModule, SessionKeys

    hsm = SecurityModule()
    hsm.insert_keys(SessionKeys.from_json(json.loads((out / "session_keys.json").read_text())["ccb0"]))
    (entry,) = LogStore(out / "samples.log").scan(hsm)
    sample = MonitoringSample.from_bytes(entry.sample)
    # over-temperature marks every cell
    assert sample.cell_diagnostics[0].fault_flags == 0b101
    assert sample.pack.fault_bitmap == (1 << 14) - 1 | (1 << 16) and sample.temperature_centiC == 7000


def test_auth_failure_reported(tmp_path):
    (s,) = simulate(RunConfig(iterations=3, allow_list=["00" * 8]))["ccbs"]
    assert s["outcome"] == "init_failed:AuthFailed" and s["phase"] == "shutdown"
