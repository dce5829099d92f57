"""
Frame synchronization
Preamble search on hard-decided symbols, 1 s partner confirmation and the
PRN field check, then slicing of 1000-symbol frames.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from tracking import SymbolStream

_logger = logging.getLogger(__name__)

PREAMBLE = 0xEB90
PREAMBLE_LEN = 16
PRN_LEN = 6
RESERVED_LEN = 6
CODE_SYMBOLS = 972
FRAME_LEN = PREAMBLE_LEN + PRN_LEN + RESERVED_LEN + CODE_SYMBOLS     # 1000
PRN_SUM = 63

NORMAL = "normal"
INVERTED = "inverted"

PREAMBLE_BITS = np.array([(PREAMBLE >> (PREAMBLE_LEN - 1 - i)) & 1 for i in range(PREAMBLE_LEN)], dtype=np.uint8)
PREAMBLE_SYMBOLS = 1 - 2 * PREAMBLE_BITS.astype(np.int64)


class FramingError(ValueError):
    """Not enough symbols to cut a frame."""


@dataclass(frozen=True)
class PreambleHit:
    position: int
    polarity: str
    correlation: int
    prn_field: int = None       # as received, before polarity correction


@dataclass
class Frame:
    start: int
    polarity: str
    prn_field: int
    reserved: np.ndarray
    code_symbols: np.ndarray
    source_prn: int
    timestamp_ms: float = 0.0
    preamble: np.ndarray = field(default=None, repr=False)


@dataclass
class SyncResult:
    confirmed: list
    rejected_prn: int = 0
    rejected_unpaired: int = 0


def _values(symbols):
    return symbols.values if isinstance(symbols, SymbolStream) else np.asarray(symbols, dtype=np.float64)


def bits_to_int(bits):
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def int_to_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def find_preambles(symbols):
    """Positions where all 16 hard decisions match the preamble or its negation."""
    values = _values(symbols)
    if len(values) < PREAMBLE_LEN:
        return []
    hard = np.where(values < 0, -1, 1)
    corr = np.correlate(hard, PREAMBLE_SYMBOLS, mode="valid")
    hits = []
    for position in np.nonzero(np.abs(corr) == PREAMBLE_LEN)[0]:
        position = int(position)
        polarity = NORMAL if corr[position] > 0 else INVERTED
        field_start = position + PREAMBLE_LEN
        prn_field = None
        if field_start + PRN_LEN <= len(values):
            prn_field = bits_to_int(hard[field_start:field_start + PRN_LEN] < 0)
        hits.append(PreambleHit(position, polarity, int(corr[position]), prn_field))
    return hits


def prn_field_matches(hit, source_prn):
    if hit.prn_field is None:
        return True
    if hit.polarity == NORMAL:
        return hit.prn_field == source_prn
    return hit.prn_field + source_prn == PRN_SUM


def confirm_frame_start(hits, source_prn):
    """Keep hits with a same-polarity partner 1000 symbols away and a consistent PRN field."""
    keyed = {(h.position, h.polarity) for h in hits}
    result = SyncResult(confirmed=[])
    for hit in hits:
        paired = (hit.position + FRAME_LEN, hit.polarity) in keyed or \
            (hit.position - FRAME_LEN, hit.polarity) in keyed
        if not paired:
            result.rejected_unpaired += 1
            continue
        if not prn_field_matches(hit, source_prn):
            result.rejected_prn += 1
            _logger.warning(
                "PRN %d: frame at %d dropped, PRN field %s (%s)",
                source_prn, hit.position, hit.prn_field, hit.polarity,
            )
            continue
        result.confirmed.append(hit)
    _logger.debug(
        "PRN %d: %d hits, %d confirmed, %d unpaired, %d PRN mismatches",
        source_prn, len(hits), len(result.confirmed), result.rejected_unpaired, result.rejected_prn,
    )
    return result


def extract_frame(symbols, start, source_prn=None):
    """Slice one frame at a confirmed start, flipping inverted frames."""
    values = _values(symbols)
    if start.position + FRAME_LEN > len(values):
        raise FramingError(
            f"frame at {start.position} needs {FRAME_LEN} symbols, only {len(values) - start.position} left"
        )
    frame = values[start.position:start.position + FRAME_LEN]
    if start.polarity == INVERTED:
        frame = -frame
    hard = (frame < 0).astype(np.uint8)
    cursor = PREAMBLE_LEN
    prn_field = bits_to_int(hard[cursor:cursor + PRN_LEN])
    cursor += PRN_LEN
    reserved = hard[cursor:cursor + RESERVED_LEN].copy()
    cursor += RESERVED_LEN
    timestamp = 0.0
    if isinstance(symbols, SymbolStream):
        timestamp = float(symbols.timestamps_ms[start.position])
        source_prn = source_prn if source_prn is not None else symbols.prn
    return Frame(
        start=start.position,
        polarity=start.polarity,
        prn_field=prn_field,
        reserved=reserved,
        code_symbols=frame[cursor:].copy(),
        source_prn=source_prn,
        timestamp_ms=timestamp,
        preamble=hard[:PREAMBLE_LEN].copy(),
    )


def frames_from_stream(symbols, source_prn):
    """All extractable frames of a stream and the sync bookkeeping."""
    sync = confirm_frame_start(find_preambles(symbols), source_prn)
    frames = []
    for hit in sync.confirmed:
        try:
            frames.append(extract_frame(symbols, hit, source_prn))
        except FramingError as e:
            _logger.debug("PRN %d: %s", source_prn, e)
    return frames, sync


# ==================== TRANSMIT SIDE ====================

def frame_bits(source_prn, code_bits, reserved=0):
    """1000 bits: preamble, PRN, reserved flags, 972 LDPC code bits."""
    code_bits = np.asarray(code_bits, dtype=np.uint8)
    if len(code_bits) != CODE_SYMBOLS:
        raise FramingError(f"need {CODE_SYMBOLS} code bits, got {len(code_bits)}")
    return np.concatenate([
        PREAMBLE_BITS,
        int_to_bits(source_prn, PRN_LEN),
        int_to_bits(reserved, RESERVED_LEN),
        code_bits,
    ])


def bits_to_symbols(bits):
    """Bit 0 -> +1, bit 1 -> -1."""
    return (1 - 2 * np.asarray(bits, dtype=np.int8)).astype(np.int8)
