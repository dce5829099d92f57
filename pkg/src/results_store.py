"""
Product files
Row layouts and JSON-lines / CSV read-write for the correction stream,
matched correction sets, message dumps and the analysis tables.
"""
import json
import logging
from pathlib import Path

import pandas as pd

from pppmsg import ClockCorrection, CodeBias, OrbitCorrection, classify

_logger = logging.getLogger(__name__)

PRODUCT_CORRECTIONS = "corrections"
PRODUCT_SETS = "sets"
PRODUCT_MESSAGES = "messages"
PRODUCT_SCHEDULE = "schedule"
PRODUCT_DEVIATIONS = "deviations"
PRODUCT_INTEGRITY = "integrity"

HEADERS = {
    PRODUCT_CORRECTIONS: [
        "system", "prn", "epoch", "type", "iod", "available", "radial", "along", "cross",
        "c0", "biases", "iodssr", "iodp", "iodn", "ura_index", "orphaned", "source_prn", "time",
    ],
    PRODUCT_SETS: [
        "system", "prn", "iodssr", "iodp", "iod", "mask_epoch", "orbit_epoch", "clock_epoch",
        "radial", "along", "cross", "c0", "biases", "source_prn", "time",
    ],
    PRODUCT_MESSAGES: [
        "time", "source_prn", "mestype", "epoch", "classification", "timestamp_ms",
        "ldpc_iterations", "bits",
    ],
}


def product_path(prefix, product, suffix=".jsonl"):
    prefix = Path(prefix)
    return prefix.with_name(f"{prefix.name}_{product}{suffix}")


def correction_row(record, source_prn=None, time=None, orphaned=False):
    """Flat row for an orbit, clock or bias record."""
    row = {h: None for h in HEADERS[PRODUCT_CORRECTIONS]}
    row.update({
        "system": record.system, "prn": record.prn, "epoch": record.epoch,
        "iodssr": record.iodssr, "orphaned": orphaned, "source_prn": source_prn, "time": time,
    })
    if isinstance(record, OrbitCorrection):
        row.update({
            "type": "orbit", "iod": record.iod, "available": record.available,
            "radial": record.radial, "along": record.along, "cross": record.cross,
            "iodn": record.iodn, "ura_index": record.ura_index,
        })
    elif isinstance(record, ClockCorrection):
        row.update({
            "type": "clock", "iod": record.iod, "available": record.available,
            "c0": record.c0, "iodp": record.iodp,
        })
    elif isinstance(record, CodeBias):
        row.update({
            "type": "bias", "available": all(b is not None for _, b in record.biases),
            "biases": [[mode, bias] for mode, bias in record.biases],
        })
    else:
        raise TypeError(f"no correction row for {type(record).__name__}")
    return row


def set_row(matched, source_prn=None, time=None):
    return {
        "system": matched.system, "prn": matched.prn, "iodssr": matched.iodssr,
        "iodp": matched.iodp, "iod": matched.iod, "mask_epoch": matched.mask_epoch,
        "orbit_epoch": matched.orbit.epoch, "clock_epoch": matched.clock.epoch,
        "radial": matched.orbit.radial, "along": matched.orbit.along, "cross": matched.orbit.cross,
        "c0": matched.clock.c0,
        "biases": [[m, b] for m, b in matched.bias.biases] if matched.bias else None,
        "source_prn": source_prn, "time": time,
    }


def message_row(mestype, epoch, bits_hex, source_prn=None, time=None, timestamp_ms=None, iterations=None):
    return {
        "time": time, "source_prn": source_prn, "mestype": mestype, "epoch": epoch,
        "classification": classify(mestype), "timestamp_ms": timestamp_ms,
        "ldpc_iterations": iterations, "bits": bits_hex,
    }


def write_jsonl(rows, path):
    """One JSON object per line; returns the row count."""
    path = Path(path)
    count = 0
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=False) + "\n")
            count += 1
    _logger.info("Wrote %d rows to %s", count, path)
    return count


def read_jsonl(path):
    """DataFrame of a JSON-lines product; an empty file gives an empty frame."""
    path = Path(path)
    rows = []
    with path.open() as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{number}: {e}") from e
    return pd.DataFrame(rows)


def rows_to_frame(rows, product):
    """DataFrame in the product's column order"""
    return pd.DataFrame(list(rows), columns=HEADERS[product])


def detect_product(frame):
    """Which product a loaded table is, from its columns."""
    columns = set(frame.columns)
    if "mestype" in columns:
        return PRODUCT_MESSAGES
    if "mask_epoch" in columns:
        return PRODUCT_SETS
    if {"type", "epoch"} <= columns:
        return PRODUCT_CORRECTIONS
    return None


def write_csv(frame, path):
    frame.to_csv(path, index=False)
    _logger.info("Wrote %s (%d rows)", path, len(frame))
