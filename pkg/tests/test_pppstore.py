import pytest

from pppmsg import (
    BDS,
    GPS,
    ClockEntry,
    ClockMessage,
    NullMessage,
    OrbitCorrection,
    OrbitMessage,
    SatelliteMask,
)
from pppstore import CorrectionStore, ingest_message

MASK = SatelliteMask(0, 1, 3, {BDS: (19, 21), GPS: (5,)})


def _orbit(prn=19, iod=2, epoch=10, system=BDS, iodssr=1):
    record = OrbitCorrection(system, prn, epoch, 0.1, -0.2, 0.05, iod=iod, iodssr=iodssr)
    return OrbitMessage(epoch, iodssr, (record,))


def _clock(iods=(2, 2, 2), epoch=12, iodp=3, iodssr=1):
    entries = tuple(ClockEntry(iod, 0.0032 * (k + 1)) for k, iod in enumerate(iods))
    return ClockMessage(epoch, iodssr, iodp, 0, entries)


def test_mask_orbit_clock_emits_one_set():
    store = CorrectionStore()
    assert ingest_message(store, MASK) == []
    assert ingest_message(store, _orbit()) == []
    sets = ingest_message(store, _clock())
    assert len(sets) == 1
    matched = sets[0]
    assert (matched.system, matched.prn) == (BDS, 19)
    assert matched.iod == 2
    assert matched.mask_epoch == 0
    assert matched.clock.c0 == pytest.approx(0.0032)
    assert matched.orbit_available and matched.clock_available


def test_iod_mismatch_holds_back_set():
    store = CorrectionStore()
    ingest_message(store, MASK)
    ingest_message(store, _orbit(iod=2))
    assert ingest_message(store, _clock(iods=(5, 2, 2))) == []
    # the orbit catches up with the clock's IOD
    sets = ingest_message(store, _orbit(iod=5, epoch=58))
    assert [s.iod for s in sets] == [5]


def test_iodssr_mismatch_holds_back_set():
    store = CorrectionStore()
    ingest_message(store, MASK)
    ingest_message(store, _orbit(iodssr=2))
    assert ingest_message(store, _clock()) == []


def test_repeated_message_is_idempotent():
    store = CorrectionStore()
    for content in (MASK, _orbit(), _clock()):
        ingest_message(store, content)
    before = store.snapshot()
    assert ingest_message(store, _clock()) == []
    assert ingest_message(store, _orbit()) == []
    assert ingest_message(store, NullMessage()) == []
    assert store.snapshot() == before


def test_new_clock_epoch_emits_again():
    store = CorrectionStore()
    for content in (MASK, _orbit(), _clock()):
        ingest_message(store, content)
    sets = ingest_message(store, _clock(epoch=18))
    assert [s.clock.epoch for s in sets] == [18]


def test_record_outside_mask_is_orphaned():
    store = CorrectionStore()
    ingest_message(store, MASK)
    result = store.ingest(_orbit(prn=30))
    assert result.records[0].orphaned
    assert result.sets == []
    # a mask that adds the satellite adopts the record
    store.ingest(SatelliteMask(48, 1, 3, {BDS: (19, 21, 30), GPS: (5,)}))
    assert not store.orbits[(BDS, 30)].orphaned


def test_record_before_any_mask_is_orphaned():
    store = CorrectionStore()
    result = store.ingest(_orbit(), received=3.0)
    assert result.records[0].orphaned
    assert result.records[0].received == 3.0


def test_clock_waits_for_mask_with_its_iodp():
    store = CorrectionStore()
    ingest_message(store, _orbit())
    assert ingest_message(store, _clock(iodp=4)) == []
    assert store.clocks == {}
    assert ingest_message(store, MASK) == []
    sets = ingest_message(store, SatelliteMask(48, 1, 4, MASK.satellites))
    assert [(s.system, s.prn) for s in sets] == [(BDS, 19)]
    assert sets[0].iodp == 4


def test_unknown_content_rejected():
    with pytest.raises(TypeError):
        CorrectionStore().ingest("not a message")
