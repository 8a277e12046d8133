"""Command-line interface: validate, replay, sim, run."""

from __future__ import annotations

import json

import pytest

from facekey.cli import main
from facekey.profiles import builtin_profiles, profile_document, serialize_profile
from facekey.simcal import script_document, sequential_episode_script
from facekey.sinks import parse_event_log

PROFILES = builtin_profiles()


def _write_profile(tmp_path, profile, mutate=None):
    doc = profile_document(profile)
    if mutate:
        mutate(doc)
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def _write_script(tmp_path):
    script = sequential_episode_script(list(PROFILES["table1-default"].rules))
    path = tmp_path / "script.json"
    path.write_text(json.dumps(script_document(script)), encoding="utf-8")
    return path


def test_validate_accepts_builtin_document(tmp_path, capsys):
    path = _write_profile(tmp_path, PROFILES["fps"])
    assert main(["validate", str(path)]) == 0
    assert "ok:" in capsys.readouterr().out


def test_validate_rejects_bad_document(tmp_path, capsys):
    path = _write_profile(
        tmp_path, PROFILES["fps"], mutate=lambda d: d.__setitem__("initial_mode", "ghost")
    )
    assert main(["validate", str(path)]) == 1
    assert "error:" in capsys.readouterr().out


def test_validate_prints_warnings(tmp_path, capsys):
    def mutate(doc):
        doc["rules"][0]["conditions"] = [{"au": 6, "above": 2.0}]

    path = _write_profile(tmp_path, PROFILES["fps"], mutate=mutate)
    assert main(["validate", str(path)]) == 0
    assert "warning:" in capsys.readouterr().out


def test_sim_generate_then_replay_pipeline(tmp_path, capsys):
    script_path = _write_script(tmp_path)
    frames_path = tmp_path / "frames.csv"
    assert main(["sim", "generate", str(script_path), "--out", str(frames_path)]) == 0
    assert frames_path.exists()

    events_path = tmp_path / "events.log"
    triggers_path = tmp_path / "triggers.csv"
    assert (
        main(
            [
                "replay",
                str(frames_path),
                "--profile",
                "table1-default",
                "--out",
                str(events_path),
                "--triggers",
                str(triggers_path),
            ]
        )
        == 0
    )
    events = parse_event_log(events_path)
    downs = [e.key for e in events if e.edge == "down"]
    assert downs == ["1", "2", "3", "4", "5", "6"]
    trigger_lines = triggers_path.read_text().strip().splitlines()
    assert [line.split(",")[1] for line in trigger_lines] == [
        "happiness", "sadness", "disgust", "wide-eyes", "pucker", "jaw-drop",
    ]


def test_sim_run_reports_metrics(tmp_path, capsys):
    script_path = _write_script(tmp_path)
    assert main(["sim", "run", str(script_path)]) == 0
    out = capsys.readouterr().out
    assert "false_positives,0" in out
    assert "misses,0" in out
    assert "mean_latency,4.000" in out


def test_sim_sweep_writes_grid(tmp_path, capsys):
    script = sequential_episode_script([PROFILES["table1-default"].rules[0]])
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script_document(script)), encoding="utf-8")
    out_path = tmp_path / "sweep.csv"
    assert (
        main(
            [
                "sim", "sweep", str(script_path),
                "--au", "6,12",
                "--thresholds", "1.0:4.0:1.0",
                "--k", "1,5",
                "--out", str(out_path),
            ]
        )
        == 0
    )
    lines = out_path.read_text().strip().splitlines()
    assert len(lines) == 1 + 4 * 2  # header + grid


def test_export_profiles_matches_builtins(tmp_path):
    assert main(["export-profiles", "--out-dir", str(tmp_path / "profiles")]) == 0
    for name, profile in PROFILES.items():
        path = tmp_path / "profiles" / f"{name}.json"
        assert path.read_text(encoding="utf-8") == serialize_profile(profile)


def test_run_replay_collect_prints_events(tmp_path, capsys):
    script_path = _write_script(tmp_path)
    frames_path = tmp_path / "frames.csv"
    main(["sim", "generate", str(script_path), "--out", str(frames_path)])
    capsys.readouterr()
    assert (
        main(
            [
                "run",
                "--profile", "table1-default",
                "--source", f"replay:{frames_path}",
                "--sink", "collect",
                "--listen", "off",
                "--no-pace",
            ]
        )
        == 0
    )
    lines = [l for l in capsys.readouterr().out.splitlines() if l]
    assert len(lines) == 12  # six taps, down+up each
    assert lines[0].split(",")[1:3] == ["1", "down"]


def test_run_rejects_bad_source(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--profile", "table1-default", "--source", "webcam:0"])


def test_run_missing_replay_file_fails(tmp_path):
    rc = main(
        [
            "run",
            "--profile", "table1-default",
            "--source", f"replay:{tmp_path}/missing.csv",
            "--listen", "off",
        ]
    )
    assert rc == 2


def test_profile_argument_accepts_path(tmp_path, capsys):
    path = _write_profile(tmp_path, PROFILES["car-racing"])
    script = sequential_episode_script(PROFILES["car-racing"].rules[:1])
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script_document(script)), encoding="utf-8")
    assert main(["sim", "run", str(script_path), "--profile", str(path)]) == 0
    assert "misses,0" in capsys.readouterr().out
