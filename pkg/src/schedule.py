"""
Broadcast schedule
Generation of one 48 s message cycle and analysis of received message
sequences against the frame-arrangement rules.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace

import pandas as pd

from pppmsg import (
    MES_BIAS,
    MES_CLOCK,
    MES_MASK,
    MES_NULL,
    MES_ORBIT,
    SECONDS_PER_DAY,
    CLOCKS_PER_MESSAGE,
    BiasMessage,
    ClockEntry,
    ClockMessage,
    NullMessage,
    OrbitMessage,
    epoch_diff,
    satellite_name,
    unwrap_epochs,
)

_logger = logging.getLogger(__name__)

CYCLE_S = 48
UNIT_S = 3
UNITS_PER_CYCLE = 15
TAIL_S = 2
CLOCK_EPOCH_STEP_S = 6
ORBIT_EPOCH_LAG_S = 7
ORBITS_PER_MESSAGE = 6
BIASES_PER_MESSAGE = 3
MAX_CLOCK_SUBTYPES = 3
UNIT_PATTERN = (MES_CLOCK, None, MES_CLOCK)     # None marks the 2/3/63 stream
X_TYPES = (MES_ORBIT, MES_BIAS, MES_NULL)

RULES = {
    1: "one type 1 per 48 s cycle",
    2: "fifteen 3 s units then a 2 s tail after type 1",
    3: "type 4 alternates with the 2/3/63 stream inside a unit",
    4: "type 4 epochs advance every 6 s",
    5: "types 2 and 3 share one epoch per cycle",
    6: "type 63 fills the last 2 s",
}


class ScheduleError(ValueError):
    """Correction state that cannot be scheduled."""


# ==================== GENERATION ====================

@dataclass
class CorrectionState:
    """Everything a cycle broadcasts; clocks drift linearly from reference_epoch."""
    mask: object
    orbits: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    clocks: dict = field(default_factory=dict)          # (system, prn) -> ClockEntry
    clock_rates: dict = field(default_factory=dict)     # (system, prn) -> m/s
    reference_epoch: int = 0

    def clock_entry(self, sat, epoch):
        entry = self.clocks.get(sat)
        if entry is None:
            return ClockEntry(0, None)
        if entry.c0 is None:
            return entry
        rate = self.clock_rates.get(sat, 0.0)
        return ClockEntry(entry.iod, entry.c0 + rate * epoch_diff(epoch, self.reference_epoch))


@dataclass
class ScheduledMessage:
    slot: int
    time: int
    content: object

    @property
    def mestype(self):
        return self.content.mestype

    @property
    def epoch(self):
        return getattr(self.content, "epoch", None)


@dataclass
class ScheduleCycle:
    start_epoch: int
    messages: list
    overflow: list = field(default_factory=list)


def _chunks(items, size):
    return [items[i:i + size] for i in range(0, len(items), size)]


def _wrap(epoch):
    return epoch % SECONDS_PER_DAY


def cycle_layout():
    """Message type per slot, None where the 2/3/63 stream goes."""
    layout = [MES_MASK]
    for _ in range(UNITS_PER_CYCLE):
        layout.extend(UNIT_PATTERN)
    layout.extend([MES_NULL] * TAIL_S)
    return layout


def generate_schedule(state, start_epoch):
    """One 48 s cycle of content, slot 0 being the type-1 mask."""
    if state.mask is None or not state.mask.ordered():
        raise ScheduleError("correction state needs a mask with at least one satellite")
    start_epoch = _wrap(start_epoch)
    mask = replace(state.mask, epoch=start_epoch)
    overflow = []
    lag_epoch = _wrap(start_epoch - ORBIT_EPOCH_LAG_S)

    stream = []
    for chunk in _chunks(list(state.biases), BIASES_PER_MESSAGE):
        stream.append(BiasMessage(lag_epoch, mask.iodssr, tuple(replace(r, epoch=lag_epoch) for r in chunk)))
    for chunk in _chunks(list(state.orbits), ORBITS_PER_MESSAGE):
        stream.append(OrbitMessage(lag_epoch, mask.iodssr, tuple(replace(r, epoch=lag_epoch) for r in chunk)))
    x_slots = UNITS_PER_CYCLE
    if len(stream) > x_slots:
        for msg in stream[x_slots:]:
            overflow.extend(
                f"type {msg.mestype} {satellite_name(r.system, r.prn)}" for r in msg.records
            )
        stream = stream[:x_slots]
    stream.extend([NullMessage()] * (x_slots - len(stream)))

    order = mask.ordered()
    subtypes = math.ceil(len(order) / CLOCKS_PER_MESSAGE)
    if subtypes > MAX_CLOCK_SUBTYPES:
        overflow.extend(
            f"type {MES_CLOCK} {satellite_name(*sat)}" for sat in order[MAX_CLOCK_SUBTYPES * CLOCKS_PER_MESSAGE:]
        )
        subtypes = MAX_CLOCK_SUBTYPES
    if overflow:
        _logger.warning("Cycle at %d: %d record(s) do not fit and were dropped", start_epoch, len(overflow))

    messages = []
    clock_count = 0
    x_iter = iter(stream)
    for slot, mestype in enumerate(cycle_layout()):
        if mestype == MES_MASK:
            content = mask
        elif mestype is None:
            content = next(x_iter)
        elif mestype == MES_CLOCK:
            subtype = clock_count % subtypes
            clock_count += 1
            epoch = _wrap(start_epoch + CLOCK_EPOCH_STEP_S * (slot // CLOCK_EPOCH_STEP_S))
            sats = order[subtype * CLOCKS_PER_MESSAGE:(subtype + 1) * CLOCKS_PER_MESSAGE]
            entries = [state.clock_entry(sat, epoch) for sat in sats]
            entries += [ClockEntry(0, 0.0)] * (CLOCKS_PER_MESSAGE - len(entries))
            content = ClockMessage(epoch, mask.iodssr, mask.iodp, subtype, tuple(entries))
        else:
            content = NullMessage()
        messages.append(ScheduledMessage(slot, _wrap(start_epoch + slot), content))
    return ScheduleCycle(start_epoch, messages, overflow)


# ==================== ANALYSIS ====================

@dataclass
class Deviation:
    source_prn: int
    time: int
    rule: int
    detail: str


@dataclass
class SourceReport:
    source_prn: int
    type_counts: dict
    type1_spacings: list
    epoch_intervals: dict
    offset_23: list
    gaps: list
    deviations: list
    parameters: dict


@dataclass
class ScheduleReport:
    sources: dict

    @property
    def deviations(self):
        return [d for report in self.sources.values() for d in report.deviations]

    def summary_frame(self):
        rows = []
        for prn, report in sorted(self.sources.items()):
            row = {"source_prn": prn}
            for mestype in (MES_MASK, MES_ORBIT, MES_BIAS, MES_CLOCK, MES_NULL):
                row[f"count_type{mestype}"] = report.type_counts.get(mestype, 0)
            row.update({f"param_{k}": v for k, v in report.parameters.items()})
            row["gaps"] = len(report.gaps)
            row["deviations"] = len(report.deviations)
            rows.append(row)
        return pd.DataFrame(rows)

    def deviation_frame(self):
        return pd.DataFrame(
            [{"source_prn": d.source_prn, "time": d.time, "rule": d.rule,
              "rule_text": RULES[d.rule], "detail": d.detail} for d in self.deviations],
            columns=["source_prn", "time", "rule", "rule_text", "detail"],
        )


def _mode(values):
    return Counter(values).most_common(1)[0][0] if values else None


def _distinct_steps(epochs):
    distinct = []
    for epoch in epochs:
        if epoch is None:
            continue
        if not distinct or epoch != distinct[-1]:
            distinct.append(epoch)
    return [epoch_diff(b, a) for a, b in zip(distinct, distinct[1:])]


def _analyze_source(prn, frame):
    # arrival order decides which day a second belongs to
    frame = frame.assign(time=unwrap_epochs(frame["time"]))
    frame = frame.sort_values("time", kind="stable").drop_duplicates("time", keep="last")
    times = frame["time"].astype(int).tolist()
    types = frame["mestype"].astype(int).tolist()
    epochs = [None if pd.isna(e) else int(e) for e in frame["epoch"]]
    deviations = []
    gaps = [(a, b, b - a - 1) for a, b in zip(times, times[1:]) if b - a > 1]
    if times and times[-1] - times[0] + 1 < CYCLE_S:
        _logger.warning("Source PRN %d: only %d s of messages, need %d", prn, times[-1] - times[0] + 1, CYCLE_S)

    def gap_between(a, b):
        return any(a < g[0] + 1 <= b for g in gaps)

    type1_times = [t for t, m in zip(times, types) if m == MES_MASK]
    spacings = [b - a for a, b in zip(type1_times, type1_times[1:])]
    received = set(times)
    for a, spacing in zip(type1_times, spacings):
        # a lost second where the next type 1 was due explains the spacing
        if spacing != CYCLE_S and (a + CYCLE_S) in received:
            deviations.append(Deviation(prn, a + spacing, 1, f"type 1 spacing {spacing} s"))

    by_time = dict(zip(times, zip(types, epochs)))
    layout = cycle_layout()
    offsets = []
    for t0 in type1_times:
        mask_epoch = by_time[t0][1]
        lag_epochs = set()
        for slot in range(1, CYCLE_S):
            if t0 + slot not in by_time:
                continue
            mestype, epoch = by_time[t0 + slot]
            expected = layout[slot]
            if mestype == MES_MASK:
                deviations.append(Deviation(prn, t0 + slot, 1, f"extra type 1 at slot {slot}"))
                continue
            if mestype not in (MES_CLOCK,) + X_TYPES:
                deviations.append(Deviation(prn, t0 + slot, 2, f"type {mestype} at slot {slot}"))
            elif expected == MES_NULL and mestype != MES_NULL:
                deviations.append(Deviation(prn, t0 + slot, 6, f"type {mestype} in the tail at slot {slot}"))
            elif expected == MES_CLOCK and mestype != MES_CLOCK:
                deviations.append(Deviation(prn, t0 + slot, 3, f"type {mestype} where type 4 belongs (slot {slot})"))
            elif expected is None and mestype not in X_TYPES:
                deviations.append(Deviation(prn, t0 + slot, 3, f"type {mestype} where 2/3/63 belongs (slot {slot})"))
            if mestype in (MES_ORBIT, MES_BIAS) and epoch is not None:
                lag_epochs.add(epoch)
        if len(lag_epochs) > 1:
            deviations.append(Deviation(prn, t0, 5, f"types 2/3 carry epochs {sorted(lag_epochs)}"))
        if lag_epochs and mask_epoch is not None:
            offsets.append(epoch_diff(mask_epoch, min(lag_epochs)))

    intervals = {}
    for mestype in (MES_MASK, MES_ORBIT, MES_BIAS, MES_CLOCK):
        intervals[mestype] = _distinct_steps([e for e, m in zip(epochs, types) if m == mestype])
    clock_times = [t for t, m in zip(times, types) if m == MES_CLOCK]
    clock_epochs = [e for e, m in zip(epochs, types) if m == MES_CLOCK]
    for prev_t, t, prev, epoch in zip(clock_times, clock_times[1:], clock_epochs, clock_epochs[1:]):
        if epoch is None or prev is None or epoch == prev:
            continue
        step = epoch_diff(epoch, prev)
        if step != CLOCK_EPOCH_STEP_S and not gap_between(prev_t, t):
            deviations.append(Deviation(prn, t, 4, f"type 4 epoch gap {step} s"))

    parameters = {
        "cycle_s": _mode(spacings),
        "type4_epoch_step_s": _mode(intervals[MES_CLOCK]),
        "orbit_epoch_step_s": _mode(intervals[MES_ORBIT] + intervals[MES_BIAS]),
        "offset_23_s": _mode(offsets),
        "units": None,
        "tail_s": None,
    }
    complete = [t0 for t0 in type1_times if all(t0 + s in by_time for s in range(CYCLE_S))]
    if complete:
        t0 = complete[0]
        cycle_types = [by_time[t0 + s][0] for s in range(CYCLE_S)]
        tail = 0
        while tail < CYCLE_S - 1 and cycle_types[CYCLE_S - 1 - tail] == MES_NULL:
            tail += 1
        parameters["tail_s"] = tail
        parameters["units"] = (CYCLE_S - 1 - tail) // UNIT_S

    return SourceReport(
        source_prn=prn,
        type_counts=dict(Counter(types)),
        type1_spacings=spacings,
        epoch_intervals=intervals,
        offset_23=offsets,
        gaps=[(_wrap(a), _wrap(b), n) for a, b, n in gaps],
        deviations=[replace(d, time=_wrap(d.time)) for d in deviations],
        parameters=parameters,
    )


def analyze_schedule(messages):
    """
    Per-source schedule report. messages: DataFrame or iterable of records
    with time (s), source_prn, mestype and epoch (None when absent).
    """
    if isinstance(messages, pd.DataFrame):
        frame = messages
    else:
        frame = pd.DataFrame(
            [
                m if isinstance(m, dict) else
                {"time": m.time, "source_prn": m.source_prn, "mestype": m.mestype, "epoch": m.epoch}
                for m in messages
            ],
            columns=["time", "source_prn", "mestype", "epoch"],
        )
    if frame.empty:
        return ScheduleReport({})
    frame = frame.astype({"epoch": "object"})
    sources = {
        int(prn): _analyze_source(int(prn), group) for prn, group in frame.groupby("source_prn")
    }
    for report in sources.values():
        _logger.info(
            "Source PRN %d: %d messages, %d gaps, %d deviations",
            report.source_prn, sum(report.type_counts.values()), len(report.gaps), len(report.deviations),
        )
    return ScheduleReport(sources)


def cycle_records(cycle, source_prn):
    """Analyzer input rows for a generated cycle."""
    return [
        {"time": m.time, "source_prn": source_prn, "mestype": m.mestype, "epoch": m.epoch}
        for m in cycle.messages
    ]
