import pandas as pd
import pytest

from integrity import REPORT_COLUMNS, abnormal_time, completeness, integrity_report


def _rows(kind, epochs, system="BDS", prn=19, available=True):
    return [{"system": system, "prn": prn, "epoch": e, "type": kind, "available": available} for e in epochs]


@pytest.mark.parametrize("total, abnormal, expected", [
    (3839, 30, 99.22),
    (815, 48, 94.11),
    (3647, 366, 89.96),
    (100, 0, 100.0),
    (100, 250, 0.0),
])
def test_completeness(total, abnormal, expected):
    assert completeness(total, abnormal) == expected


def test_completeness_of_empty_span():
    assert completeness(0, 0) == 100.0


def test_stale_clock_epoch():
    assert abnormal_time([100, 106, 124], [], 100, 124, 6) == 12


def test_unavailable_epochs_count_one_interval():
    assert abnormal_time([0, 6, 12], [6], 0, 12, 6) == 6


def test_missing_record_type_is_wholly_abnormal():
    assert abnormal_time([], [], 10, 70, 6) == 60


def test_report_for_stale_clock():
    records = _rows("clock", [100, 106, 124]) + _rows("orbit", [100, 124])
    report = integrity_report(records)
    assert list(report.columns) == REPORT_COLUMNS
    row = report.iloc[0]
    assert row["total_s"] == 24
    assert row["clock_abnormal_s"] == 12
    assert row["clock_completeness"] == 50.0
    assert row["orbit_abnormal_s"] == 0
    assert row["orbit_completeness"] == 100.0


def test_regular_stream_is_complete():
    clocks = _rows("clock", range(0, 600, 6), system="GPS", prn=5)
    orbits = _rows("orbit", range(0, 600, 48), system="GPS", prn=5)
    row = integrity_report(pd.DataFrame(clocks + orbits)).iloc[0]
    assert row["clock_completeness"] == 100.0
    assert row["orbit_completeness"] == 100.0


def test_unavailable_flag_in_report():
    records = _rows("clock", [0, 6, 12, 18]) + _rows("clock", [24], available=False) + _rows("clock", [30])
    row = integrity_report(records).iloc[0]
    assert row["clock_abnormal_s"] == 6
    assert row["clock_completeness"] == 80.0


def test_stream_across_midnight():
    records = _rows("clock", [86388, 86394, 0, 6])
    row = integrity_report(records).iloc[0]
    assert row["total_s"] == 18
    assert row["clock_abnormal_s"] == 0


def test_window_limits_the_span():
    records = _rows("clock", range(0, 120, 6)) + _rows("orbit", [0, 48, 96])
    row = integrity_report(records, window=(30, 60)).iloc[0]
    assert row["epoch_start"] == 30
    assert row["epoch_end"] == 60
    assert row["clock_abnormal_s"] == 0
    with pytest.raises(ValueError):
        integrity_report(records, window=(60, 30))


def test_satellites_reported_separately():
    records = _rows("clock", [0, 6, 12]) + _rows("clock", [0, 12], prn=21)
    report = integrity_report(records)
    assert report["prn"].tolist() == [19, 21]
    assert report["clock_abnormal_s"].tolist() == [0, 6]


def test_empty_and_malformed_input():
    assert integrity_report([]).empty
    with pytest.raises(ValueError):
        integrity_report([{"system": "BDS", "prn": 1, "epoch": 0}])
