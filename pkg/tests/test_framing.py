import numpy as np
import pytest

from framing import (
    CODE_SYMBOLS,
    FRAME_LEN,
    INVERTED,
    NORMAL,
    FramingError,
    PreambleHit,
    bits_to_symbols,
    confirm_frame_start,
    extract_frame,
    find_preambles,
    frame_bits,
    frames_from_stream,
    prn_field_matches,
)
from tracking import SymbolStream


def _stream(rng, prn=59, frames=4, lead=0):
    bits = [rng.integers(0, 2, lead)]
    code_bits = []
    for _ in range(frames):
        payload = rng.integers(0, 2, CODE_SYMBOLS)
        code_bits.append(payload)
        bits.append(frame_bits(prn, payload))
    return bits_to_symbols(np.concatenate(bits)).astype(np.float64), code_bits


def test_frame_layout():
    bits = frame_bits(59, np.zeros(CODE_SYMBOLS))
    assert len(bits) == FRAME_LEN
    assert bits[:16].tolist() == [1, 1, 1, 0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0]
    assert bits[16:22].tolist() == [1, 1, 1, 0, 1, 1]
    with pytest.raises(FramingError):
        frame_bits(59, np.zeros(CODE_SYMBOLS - 1))


def test_four_frames_confirmed_at_frame_spacing(rng):
    symbols, _ = _stream(rng)
    sync = confirm_frame_start(find_preambles(symbols), 59)
    assert [h.position for h in sync.confirmed] == [0, 1000, 2000, 3000]
    assert all(h.polarity == NORMAL for h in sync.confirmed)


def test_frames_recover_code_symbols(rng):
    symbols, code_bits = _stream(rng, lead=137)
    frames, _ = frames_from_stream(symbols, 59)
    assert [f.start for f in frames] == [137, 1137, 2137, 3137]
    for frame, payload in zip(frames, code_bits):
        assert frame.prn_field == 59
        assert ((frame.code_symbols < 0).astype(np.uint8) == payload).all()


def test_inverted_stream_gives_identical_frames(rng):
    symbols, _ = _stream(rng, lead=21)
    normal, _ = frames_from_stream(symbols, 59)
    inverted, _ = frames_from_stream(-symbols, 59)
    assert len(inverted) == len(normal) == 4
    for a, b in zip(normal, inverted):
        assert b.polarity == INVERTED
        assert b.prn_field == a.prn_field
        assert (a.code_symbols == b.code_symbols).all()
        assert (a.reserved == b.reserved).all()


def test_inverted_prn_field_sums_to_63(rng):
    symbols, _ = _stream(rng)
    hits = [h for h in find_preambles(-symbols) if h.position == 0]
    assert hits[0].polarity == INVERTED
    assert hits[0].prn_field == 63 - 59
    assert prn_field_matches(hits[0], 59)


def test_foreign_prn_field_is_rejected(rng):
    symbols, _ = _stream(rng, prn=60)
    sync = confirm_frame_start(find_preambles(symbols), 59)
    assert sync.confirmed == []
    assert sync.rejected_prn == 4


def test_unpaired_preamble_is_rejected(rng):
    symbols, _ = _stream(rng, frames=1)
    sync = confirm_frame_start(find_preambles(symbols), 59)
    assert sync.confirmed == []
    assert sync.rejected_unpaired >= 1


def test_truncated_last_frame(rng):
    symbols, _ = _stream(rng, frames=3)
    frames, sync = frames_from_stream(symbols[:2500], 59)
    assert [h.position for h in sync.confirmed] == [0, 1000, 2000]
    assert len(frames) == 2
    with pytest.raises(FramingError):
        extract_frame(symbols[:2500], PreambleHit(2000, NORMAL, 16), 59)


def test_frame_timestamp_from_symbol_stream(rng):
    symbols, _ = _stream(rng, frames=2, lead=5)
    stream = SymbolStream.from_values(59, symbols)
    stream.timestamps_ms += 100.0
    frames, _ = frames_from_stream(stream, 59)
    assert frames[0].timestamp_ms == 105.0
    assert frames[1].timestamp_ms == 1105.0
