import pytest

from pppmsg import BDS, GPS, ClockCorrection, CodeBias, OrbitCorrection
from pppstore import CorrectionSet
from results_store import (
    HEADERS,
    PRODUCT_CORRECTIONS,
    PRODUCT_MESSAGES,
    PRODUCT_SETS,
    correction_row,
    detect_product,
    message_row,
    product_path,
    read_jsonl,
    rows_to_frame,
    set_row,
    write_jsonl,
)

ORBIT = OrbitCorrection(BDS, 19, 17703, 0.04, -0.64, None, iod=3, iodssr=1)
CLOCK = ClockCorrection(BDS, 19, 17712, 1.2, iod=3, iodssr=1, iodp=3)


def test_product_path():
    assert product_path("out/run1", PRODUCT_SETS).as_posix() == "out/run1_sets.jsonl"
    assert product_path("run1", "integrity", ".csv").name == "run1_integrity.csv"


def test_correction_rows():
    row = correction_row(ORBIT, source_prn=59, time=17712.0)
    assert list(row) == HEADERS[PRODUCT_CORRECTIONS]
    assert row["type"] == "orbit"
    assert row["available"] is False
    clock = correction_row(CLOCK)
    assert clock["type"] == "clock" and clock["c0"] == 1.2 and clock["iodp"] == 3
    bias = correction_row(CodeBias(BDS, 19, 17703, ((0, 0.17), (4, None))))
    assert bias["biases"] == [[0, 0.17], [4, None]]
    assert bias["available"] is False
    with pytest.raises(TypeError):
        correction_row("orbit")


def test_set_row():
    matched = CorrectionSet(GPS, 5, 1, 3, 3, 17664, ORBIT, CLOCK)
    row = set_row(matched, source_prn=60)
    assert set(row) == set(HEADERS[PRODUCT_SETS])
    assert row["orbit_epoch"] == 17703 and row["clock_epoch"] == 17712
    assert row["biases"] is None


def test_jsonl_round_trip(tmp_path):
    rows = [message_row(4, 17712, "ab", source_prn=59, time=17712.0, iterations=1),
            message_row(6, None, "cd", source_prn=59, time=17713.0)]
    path = tmp_path / "run_messages.jsonl"
    assert write_jsonl(rows, path) == 2
    frame = read_jsonl(path)
    assert frame["classification"].tolist() == ["implemented", "recognized_unimplemented"]
    assert detect_product(frame) == PRODUCT_MESSAGES


def test_empty_and_corrupt_jsonl(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_jsonl(path).empty
    path.write_text('{"a": 1}\nnot json\n')
    with pytest.raises(ValueError, match=":2:"):
        read_jsonl(path)


def test_detect_product():
    assert detect_product(rows_to_frame([correction_row(CLOCK)], PRODUCT_CORRECTIONS)) == PRODUCT_CORRECTIONS
    assert detect_product(rows_to_frame([], PRODUCT_SETS)) == PRODUCT_SETS
    assert detect_product(rows_to_frame([], PRODUCT_MESSAGES)) == PRODUCT_MESSAGES
    assert detect_product(rows_to_frame([], PRODUCT_CORRECTIONS).drop(columns=["type"])) is None
