"""Tracker record parsing: clamping, defaults, round-trip."""

from __future__ import annotations

import random

import pytest

from facekey.aus import AU_IDS
from facekey.frames import (
    AUFrame,
    HeaderError,
    RecordParseError,
    canonical_header,
    neutral_frame,
    parse_tracker_record,
    serialize_frame,
)

from conftest import make_frame


def _row_for(header: list[str], values: dict[str, str], default: str = "0") -> list[str]:
    return [values.get(col, default) for col in header]


HEADER = canonical_header()


def test_happiness_row_parses_intensities():
    row = _row_for(HEADER, {"frame": "1", "timestamp": "0.033", "confidence": "0.98",
                            "AU06_r": "2.5", "AU12_r": "2.4"})
    frame = parse_tracker_record(HEADER, row)
    assert frame.intensity[6] == 2.5
    assert frame.intensity[12] == 2.4
    assert frame.frame_index == 1
    assert frame.timestamp_ms == 33
    assert frame.confidence == 0.98


def test_all_zero_row_is_neutral():
    row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "1.0"})
    frame = parse_tracker_record(HEADER, row)
    assert all(not frame.presence[au] for au in AU_IDS)
    assert all(frame.intensity[au] == 0.0 for au in AU_IDS)


def test_out_of_range_intensity_clamps_to_scale():
    row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "1.0", "AU01_r": "5.7"})
    frame = parse_tracker_record(HEADER, row)
    assert frame.intensity[1] == 5.0
    row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "1.0", "AU01_r": "-0.3"})
    assert parse_tracker_record(HEADER, row).intensity[1] == 0.0


def test_confidence_clamps_to_unit_interval():
    row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "1.7"})
    assert parse_tracker_record(HEADER, row).confidence == 1.0


def test_presence_threshold_is_half():
    for raw, expected in (("1", True), ("0", False), ("0.5", True), ("0.49", False)):
        row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "1", "AU12_c": raw})
        assert parse_tracker_record(HEADER, row).presence[12] is expected


def test_missing_au_columns_default_to_absent():
    header = ["frame", "timestamp", "confidence", "AU06_r"]
    frame = parse_tracker_record(header, ["0", "0", "1.0", "3.0"])
    assert frame.intensity[6] == 3.0
    assert frame.intensity[12] == 0.0
    assert frame.presence[6] is False


def test_extra_and_whitespace_columns_tolerated():
    # real tracker output pads with a space after each comma and carries
    # pose/gaze columns we do not use
    header = ["frame", " face_id", " timestamp", " confidence", " success", " gaze_0_x", " AU06_r", " AU06_c"]
    frame = parse_tracker_record(header, ["3", "0", "0.1", "0.9", "1", "0.2", "2.2", "1"])
    assert frame.frame_index == 3
    assert frame.timestamp_ms == 100
    assert frame.intensity[6] == 2.2
    assert frame.presence[6] is True


def test_missing_mandatory_column_is_header_error():
    with pytest.raises(HeaderError, match="confidence"):
        parse_tracker_record(["frame", "timestamp"], ["0", "0"])


def test_malformed_numeric_names_column_and_row():
    row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "1", "AU06_r": "oops"})
    with pytest.raises(RecordParseError) as exc_info:
        parse_tracker_record(HEADER, row, row_index=7)
    assert "AU06_r" in str(exc_info.value)
    assert "7" in str(exc_info.value)


def test_nan_field_rejected():
    row = _row_for(HEADER, {"frame": "0", "timestamp": "0", "confidence": "nan"})
    with pytest.raises(RecordParseError):
        parse_tracker_record(HEADER, row)


def test_row_width_mismatch_rejected():
    with pytest.raises(RecordParseError):
        parse_tracker_record(HEADER, ["0", "0"])


def test_clamping_totality_on_random_finite_inputs():
    rng = random.Random(20240311)
    for _ in range(1000):
        values = {"frame": "0", "timestamp": "0.0",
                  "confidence": str(rng.uniform(-10, 10))}
        for au in rng.sample(AU_IDS, 6):
            values[f"AU{au:02d}_r"] = str(rng.uniform(-100, 100))
        frame = parse_tracker_record(HEADER, _row_for(HEADER, values))
        assert 0.0 <= frame.confidence <= 1.0
        for au in AU_IDS:
            assert 0.0 <= frame.intensity[au] <= 5.0


def test_serialize_parse_round_trip_exact_at_six_decimals():
    rng = random.Random(99)
    for _ in range(200):
        original = make_frame(
            frame_index=rng.randrange(10_000),
            timestamp_ms=rng.randrange(10_000_000),
            confidence=round(rng.uniform(0, 1), 6),
            intensity={au: round(rng.uniform(0, 5), 6) for au in rng.sample(AU_IDS, 5)},
            presence={au: rng.random() < 0.5 for au in AU_IDS},
        )
        parsed = parse_tracker_record(canonical_header(), serialize_frame(original))
        assert parsed == original


def test_serialize_parse_round_trip_within_tolerance_for_arbitrary_floats():
    rng = random.Random(7)
    for _ in range(200):
        original = make_frame(
            frame_index=rng.randrange(1000),
            timestamp_ms=rng.randrange(1_000_000),
            confidence=rng.uniform(0, 1),
            intensity={au: rng.uniform(0, 5) for au in AU_IDS},
        )
        parsed = parse_tracker_record(canonical_header(), serialize_frame(original))
        assert parsed.frame_index == original.frame_index
        assert parsed.timestamp_ms == original.timestamp_ms
        assert abs(parsed.confidence - original.confidence) <= 1e-6
        for au in AU_IDS:
            assert abs(parsed.intensity[au] - original.intensity[au]) <= 1e-6


def test_neutral_frame_helper():
    frame = neutral_frame(5, 165)
    assert frame.frame_index == 5
    assert not any(frame.presence.values())


def test_negative_frame_index_rejected():
    with pytest.raises(ValueError):
        AUFrame(-1, 0, 1.0, {au: False for au in AU_IDS}, {au: 0.0 for au in AU_IDS})
