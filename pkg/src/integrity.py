"""
Integrity report
Abnormal time and completeness per satellite from the correction-record
stream. A record type is abnormal while its epoch has not advanced within
its update interval, and for every epoch whose correction is unavailable.
"""
import logging

import pandas as pd

from pppmsg import unwrap_epochs

_logger = logging.getLogger(__name__)

UPDATE_INTERVAL_S = {"orbit": 48, "clock": 6}
REPORT_COLUMNS = [
    "system", "prn", "epoch_start", "epoch_end", "total_s",
    "orbit_abnormal_s", "orbit_completeness", "clock_abnormal_s", "clock_completeness",
]


def completeness(total_s, abnormal_s):
    """Percent of normal time, rounded to two decimals."""
    if total_s <= 0:
        return 100.0 if abnormal_s <= 0 else 0.0
    ratio = (total_s - min(abnormal_s, total_s)) / total_s
    return round(ratio * 100, 2)


def abnormal_time(epochs, unavailable, first, last, interval):
    """
    Seconds of abnormal time for one record type of one satellite.
    epochs: distinct sorted epochs seen; unavailable: the subset whose
    correction was flagged unavailable; first/last bound the satellite's
    coverage.
    """
    if not epochs:
        return last - first
    points = [first] + list(epochs) + [last]
    stale = sum(b - a - interval for a, b in zip(points, points[1:]) if b - a > interval)
    return stale + interval * len(unavailable)


def _prepare(records):
    if isinstance(records, pd.DataFrame):
        frame = records.copy()
    else:
        frame = pd.DataFrame(list(records))
    if frame.empty:
        return frame
    missing = {"system", "prn", "epoch", "type"} - set(frame.columns)
    if missing:
        raise ValueError(f"correction records lack columns {sorted(missing)}")
    if "available" not in frame.columns:
        frame["available"] = True
    frame = frame[frame["type"].isin(list(UPDATE_INTERVAL_S))]
    return frame.reset_index(drop=True)


def integrity_report(records, window=None):
    """
    Completeness table with one row per satellite.
    records: DataFrame or iterable of dicts with system, prn, epoch, type
    ("orbit" or "clock") and available. window: optional (start, end)
    epoch range, inclusive, in the unwrapped epoch scale of the stream.
    """
    frame = _prepare(records)
    if frame.empty:
        _logger.warning("No orbit or clock records to assess")
        return pd.DataFrame(columns=REPORT_COLUMNS)
    if window is not None:
        start, end = window
        if end < start:
            raise ValueError(f"empty window {window}")
    rows = []
    for (system, prn), group in frame.groupby(["system", "prn"], sort=True):
        group = group.assign(epoch=unwrap_epochs(group["epoch"]))
        if window is not None:
            group = group[(group["epoch"] >= start) & (group["epoch"] <= end)]
            if group.empty:
                continue
        first, last = int(group["epoch"].min()), int(group["epoch"].max())
        if window is not None:
            first, last = max(first, start), min(last, end)
        total = last - first
        row = {"system": system, "prn": int(prn), "epoch_start": first, "epoch_end": last, "total_s": total}
        for kind, interval in UPDATE_INTERVAL_S.items():
            subset = group[group["type"] == kind]
            availability = subset.groupby("epoch")["available"].any()
            epochs = sorted(int(e) for e in availability.index)
            unavailable = [int(e) for e, ok in availability.items() if not ok]
            abnormal = abnormal_time(epochs, unavailable, first, last, interval)
            row[f"{kind}_abnormal_s"] = abnormal
            row[f"{kind}_completeness"] = completeness(total, abnormal)
        _logger.debug(
            "%s%02d: %d s, orbit %d s abnormal, clock %d s abnormal",
            system[0], prn, total, row["orbit_abnormal_s"], row["clock_abnormal_s"],
        )
        rows.append(row)
    report = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    _logger.info("Integrity report over %d satellites", len(report))
    return report
