"""
Ranging codes
Gold codes from two 13-stage Fibonacci LFSRs, extended to 10230 chips.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

_logger = logging.getLogger(__name__)

STAGES = 13
LFSR_PERIOD = 2 ** STAGES - 1        # 8191
CODE_LENGTH = 10230
CHIP_RATE_HZ = 10.23e6
CODE_PERIOD_S = CODE_LENGTH / CHIP_RATE_HZ   # 1 ms

DEFAULT_TABLE_PATH = Path(__file__).parent.parent / "data" / "synthetic_code_table.txt"


class CodeTableError(ValueError):
    """Bad code-table line, unknown PRN or unusable LFSR spec."""


@dataclass(frozen=True)
class LfsrSpec:
    taps: frozenset
    initial_state: tuple

    def __post_init__(self):
        if not self.taps:
            raise CodeTableError("LFSR needs at least one tap")
        if any(not 1 <= t <= STAGES for t in self.taps):
            raise CodeTableError(f"taps must be stages 1..{STAGES}: {sorted(self.taps)}")
        if len(self.initial_state) != STAGES or any(b not in (0, 1) for b in self.initial_state):
            raise CodeTableError(f"initial state must be {STAGES} binary values")

    @classmethod
    def parse(cls, taps_text, seed_text):
        try:
            taps = frozenset(int(t) for t in taps_text.split(","))
        except ValueError as e:
            raise CodeTableError(f"bad taps {taps_text!r}") from e
        if len(seed_text) != STAGES or set(seed_text) - {"0", "1"}:
            raise CodeTableError(f"seed must be {STAGES} binary digits, got {seed_text!r}")
        return cls(taps, tuple(int(c) for c in seed_text))


@dataclass(frozen=True)
class CodeEntry:
    prn: int
    lfsr1: LfsrSpec
    lfsr2: LfsrSpec
    phase_offset: int


@dataclass(frozen=True)
class RangingCode:
    prn: int
    chips: np.ndarray

    @property
    def duration_s(self):
        return len(self.chips) / CHIP_RATE_HZ


@dataclass(frozen=True, eq=False)
class CodeTable:
    entries: tuple

    def __post_init__(self):
        prns = [e.prn for e in self.entries]
        if len(prns) != len(set(prns)):
            raise CodeTableError(f"duplicate PRNs in code table: {prns}")

    @property
    def prns(self):
        return sorted(e.prn for e in self.entries)

    def entry(self, prn):
        for e in self.entries:
            if e.prn == prn:
                return e
        raise CodeTableError(f"PRN {prn} not in code table (have {self.prns})")

    def __contains__(self, prn):
        return any(e.prn == prn for e in self.entries)


# ==================== LFSR ====================

def _state_int(spec):
    # stage 1 is bit 0
    return sum(bit << i for i, bit in enumerate(spec.initial_state))


def lfsr_sequence(spec, length):
    """Output of stage 13, one bit per shift."""
    state = _state_int(spec)
    if state == 0:
        raise CodeTableError("all-zero LFSR state never leaves zero")
    tap_mask = sum(1 << (t - 1) for t in spec.taps)
    top = STAGES - 1
    full = (1 << STAGES) - 1
    out = np.empty(length, dtype=np.uint8)
    for k in range(length):
        out[k] = (state >> top) & 1
        feedback = bin(state & tap_mask).count("1") & 1
        state = ((state << 1) | feedback) & full
    return out


def lfsr_period(spec):
    """State-cycle length, capped at one maximal period."""
    state = start = _state_int(spec)
    if state == 0:
        raise CodeTableError("all-zero LFSR state never leaves zero")
    tap_mask = sum(1 << (t - 1) for t in spec.taps)
    full = (1 << STAGES) - 1
    for step in range(1, LFSR_PERIOD + 1):
        feedback = bin(state & tap_mask).count("1") & 1
        state = ((state << 1) | feedback) & full
        if state == start:
            return step
    return None


def is_maximal(spec):
    return lfsr_period(spec) == LFSR_PERIOD


# ==================== CODES ====================

@lru_cache(maxsize=None)
def _gold_chips(entry):
    a = lfsr_sequence(entry.lfsr1, LFSR_PERIOD)
    b = lfsr_sequence(entry.lfsr2, LFSR_PERIOD)
    k = np.arange(CODE_LENGTH)
    bits = a[k % LFSR_PERIOD] ^ b[(k + entry.phase_offset) % LFSR_PERIOD]
    chips = (1 - 2 * bits.astype(np.int8)).astype(np.int8)
    chips.setflags(write=False)
    return chips


def generate_code(prn, table):
    """Chip k = a[k] xor b[k + phase], continued cyclically past 8191; 0 -> +1."""
    return RangingCode(prn=prn, chips=_gold_chips(table.entry(prn)))


def sample_code(chips, sample_rate_hz, n_samples, start_chip=0.0, chip_rate_hz=CHIP_RATE_HZ):
    """Code values at each sample instant, starting at a fractional chip."""
    positions = start_chip + np.arange(n_samples) * (chip_rate_hz / sample_rate_hz)
    return chips[np.floor(positions).astype(np.int64) % len(chips)]


def circular_correlation(a, b):
    """corr[k] = sum_n a[n] * b[n + k] over one period."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.real(np.fft.ifft(np.conj(np.fft.fft(a)) * np.fft.fft(b)))


# ==================== TABLE FILE ====================

def parse_code_table(text):
    entries = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise CodeTableError(
                f"line {number}: expected 'prn taps1 seed1 taps2 seed2 phase_offset', got {line!r}"
            )
        try:
            prn, phase = int(parts[0]), int(parts[5])
        except ValueError as e:
            raise CodeTableError(f"line {number}: {e}") from e
        entries.append(CodeEntry(
            prn=prn,
            lfsr1=LfsrSpec.parse(parts[1], parts[2]),
            lfsr2=LfsrSpec.parse(parts[3], parts[4]),
            phase_offset=phase,
        ))
    if not entries:
        raise CodeTableError("code table is empty")
    return CodeTable(tuple(entries))


def read_code_table(path=None):
    path = Path(path) if path else DEFAULT_TABLE_PATH
    try:
        text = path.read_text()
    except OSError as e:
        raise CodeTableError(f"cannot read code table {path}: {e}") from e
    table = parse_code_table(text)
    _logger.info("Loaded code table %s: PRNs %s", path, table.prns)
    return table
