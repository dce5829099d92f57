"""
Correction store
Latest mask, orbit, clock and bias state per satellite, and emission of
IOD-matched correction sets.
"""
import logging
import threading
from dataclasses import dataclass, field

from pppmsg import (
    BiasMessage,
    ClockMessage,
    NullMessage,
    OrbitMessage,
    SatelliteMask,
    SkippedMessage,
)

_logger = logging.getLogger(__name__)


@dataclass
class StoredRecord:
    record: object
    received: float = None
    orphaned: bool = False


@dataclass(frozen=True)
class CorrectionSet:
    system: str
    prn: int
    iodssr: int
    iodp: int
    iod: int
    mask_epoch: int
    orbit: object
    clock: object
    bias: object = None

    @property
    def orbit_available(self):
        return self.orbit.available

    @property
    def clock_available(self):
        return self.clock.available

    @property
    def key(self):
        return (self.orbit.epoch, self.clock.epoch, self.iod, self.iodssr, self.iodp)


@dataclass
class IngestResult:
    sets: list = field(default_factory=list)
    records: list = field(default_factory=list)      # StoredRecords touched by this message


class CorrectionStore:
    """
    Single writer; every mutation holds the lock, readers take snapshots.
    Records for satellites outside the active mask are kept and flagged.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.mask = None
        self.orbits = {}
        self.clocks = {}
        self.biases = {}
        self._pending_clocks = {}      # subtype -> ClockMessage awaiting a mask with its iodp
        self._emitted = {}

    def ingest(self, content, received=None):
        with self._lock:
            result = IngestResult()
            if isinstance(content, SatelliteMask):
                self._ingest_mask(content, received, result)
            elif isinstance(content, OrbitMessage):
                for record in content.records:
                    result.records.append(self._put(self.orbits, record, received))
                self._match([(r.system, r.prn) for r in content.records], result)
            elif isinstance(content, ClockMessage):
                self._ingest_clock(content, received, result)
            elif isinstance(content, BiasMessage):
                for record in content.records:
                    result.records.append(self._put(self.biases, record, received))
            elif isinstance(content, (NullMessage, SkippedMessage)):
                pass
            else:
                raise TypeError(f"cannot ingest {type(content).__name__}")
            return result

    def _put(self, table, record, received):
        sat = (record.system, record.prn)
        stored = StoredRecord(record, received, orphaned=self.mask is None or sat not in self.mask)
        if stored.orphaned:
            _logger.debug("Orphaned %s for %s%02d", type(record).__name__, record.system, record.prn)
        table[sat] = stored
        return stored

    def _ingest_mask(self, mask, received, result):
        self.mask = mask
        for table in (self.orbits, self.clocks, self.biases):
            for sat, stored in table.items():
                stored.orphaned = sat not in mask
        for subtype, pending in list(self._pending_clocks.items()):
            if pending.iodp == mask.iodp:
                del self._pending_clocks[subtype]
                self._resolve_clock(pending, received, result)
        self._match(mask.ordered(), result)

    def _ingest_clock(self, msg, received, result):
        if self.mask is None or msg.iodp != self.mask.iodp:
            self._pending_clocks[msg.subtype] = msg
            _logger.debug("Clock subtype %d held until a mask with IODP %d", msg.subtype, msg.iodp)
            return
        self._resolve_clock(msg, received, result)

    def _resolve_clock(self, msg, received, result):
        corrections = msg.resolve(self.mask)
        for record in corrections:
            result.records.append(self._put(self.clocks, record, received))
        self._match([(r.system, r.prn) for r in corrections], result)

    def _match(self, satellites, result):
        mask = self.mask
        if mask is None:
            return
        for sat in satellites:
            if sat not in mask or sat not in self.orbits or sat not in self.clocks:
                continue
            orbit = self.orbits[sat].record
            clock = self.clocks[sat].record
            if not (orbit.iodssr == clock.iodssr == mask.iodssr):
                continue
            if clock.iodp != mask.iodp or clock.iod != orbit.iod:
                continue
            bias = self.biases.get(sat)
            matched = CorrectionSet(
                system=sat[0], prn=sat[1], iodssr=mask.iodssr, iodp=mask.iodp, iod=orbit.iod,
                mask_epoch=mask.epoch, orbit=orbit, clock=clock, bias=bias.record if bias else None,
            )
            if self._emitted.get(sat) == matched.key:
                continue
            self._emitted[sat] = matched.key
            result.sets.append(matched)

    def snapshot(self):
        with self._lock:
            return {
                "mask": self.mask,
                "orbits": {k: v.record for k, v in self.orbits.items()},
                "clocks": {k: v.record for k, v in self.clocks.items()},
                "biases": {k: v.record for k, v in self.biases.items()},
            }


def ingest_message(store, msg, received=None):
    """Update the store; returns the correction sets this message completed."""
    return store.ingest(msg, received).sets
