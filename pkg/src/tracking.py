"""
Tracking
Per-millisecond early/prompt/late correlation with a carrier-aided DLL
and a Costas PLL. One soft symbol (prompt I) per code period.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from prncode import CHIP_RATE_HZ, CODE_LENGTH, generate_code
from rfchain import B2B_CARRIER_HZ

_logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_LOCK_LOST = "lock_lost"
STATUS_END_OF_DATA = "end_of_data"


@dataclass(frozen=True)
class LoopParameters:
    early_late_spacing: float = 0.5     # chips, early to late
    dll_bandwidth_hz: float = 2.0
    dll_damping: float = 0.7
    dll_gain: float = 1.0
    pll_bandwidth_hz: float = 25.0
    pll_damping: float = 0.7
    pll_gain: float = 0.25
    integration_s: float = 1e-3
    prepass_ms: int = 20
    lock_threshold: float = 0.5
    lock_dwell_ms: int = 500
    lock_settle_ms: int = 200
    lock_smoothing: float = 0.02


@dataclass
class SymbolStream:
    prn: int
    timestamps_ms: np.ndarray
    values: np.ndarray
    i_power: np.ndarray
    q_power: np.ndarray

    def __len__(self):
        return len(self.values)

    def negated(self):
        return SymbolStream(self.prn, self.timestamps_ms, -self.values, self.i_power, self.q_power)

    def hard(self):
        """Bits with positive soft value -> 0."""
        return (self.values < 0).astype(np.uint8)

    @classmethod
    def from_values(cls, prn, values):
        values = np.asarray(values, dtype=np.float64)
        return cls(prn, np.arange(len(values), dtype=np.float64), values, values ** 2, np.zeros(len(values)))


@dataclass
class TrackingOutput:
    prn: int
    symbols: SymbolStream
    pll_lock: np.ndarray
    dll_error: np.ndarray
    status: str = STATUS_OK
    carrier_hz: np.ndarray = field(default=None, repr=False)

    def iq_power_ratio(self, start_ms=1000, length_ms=1000):
        q = self.symbols.q_power[start_ms:start_ms + length_ms]
        i = self.symbols.i_power[start_ms:start_ms + length_ms]
        return float(q.mean() / i.mean()) if len(i) else math.nan


def loop_coefficients(bandwidth_hz, damping, gain):
    """tau1, tau2 of a second-order loop from its noise bandwidth."""
    wn = bandwidth_hz * 8 * damping / (4 * damping ** 2 + 1)
    return gain / wn ** 2, 2 * damping / wn


def costas_error(prompt):
    """Phase error in cycles, insensitive to the data sign."""
    if prompt.real == 0:
        return 0.0
    return math.atan(prompt.imag / prompt.real) / (2 * math.pi)


def dll_error(early, late, spacing):
    """Non-coherent early-minus-late, scaled to chips; negative when the replica lags."""
    e, l = abs(early), abs(late)
    if e + l == 0:
        return 0.0
    d = spacing / 2
    return -(1 - d) * (e - l) / (e + l)


class _SampleCursor:
    """Absolute-index reads over a stream of SampleBlocks."""

    def __init__(self, blocks):
        self._blocks = iter(blocks)
        self._buffer = np.zeros(0, dtype=np.complex64)
        self._start = 0
        self.sample_rate = None
        self.center_offset = 0.0

    def _pull(self):
        block = next(self._blocks, None)
        if block is None:
            return False
        if self.sample_rate is None:
            self.sample_rate = block.sample_rate
            self.center_offset = block.center_offset
            self._start = block.start_index
        self._buffer = np.concatenate([self._buffer, block.samples])
        return True

    @property
    def first_index(self):
        return self._start

    def prime(self):
        if self.sample_rate is None and not self._pull():
            return False
        return True

    def read(self, start, n):
        while self._start + len(self._buffer) < start + n:
            if not self._pull():
                return None
        offset = start - self._start
        if offset < 0:
            raise ValueError(f"sample {start} already released")
        return self._buffer[offset:offset + n]

    def release(self, upto):
        drop = upto - self._start
        if drop > 0:
            self._buffer = self._buffer[drop:]
            self._start = upto


class TrackingChannel:
    """Sequential DLL/PLL state machine for one PRN."""

    def __init__(self, prn, chips, sample_rate, center_offset, doppler_hz, params=None):
        self.prn = prn
        self.chips = np.asarray(chips, dtype=np.float32)
        self.params = params or LoopParameters()
        self.sample_rate = sample_rate
        self.center_offset = center_offset
        self.carrier_base = center_offset + doppler_hz
        self.carr_freq = self.carrier_base
        self.code_freq = self._aided_code_freq(0.0)
        self.rem_code_phase = 0.0
        self.rem_carr_phase = 0.0
        self.code_nco = 0.0
        self.carr_nco = 0.0
        self.old_code_error = 0.0
        self.old_carr_error = 0.0
        self.tau1_code, self.tau2_code = loop_coefficients(
            self.params.dll_bandwidth_hz, self.params.dll_damping, self.params.dll_gain)
        self.tau1_carr, self.tau2_carr = loop_coefficients(
            self.params.pll_bandwidth_hz, self.params.pll_damping, self.params.pll_gain)

    def _aided_code_freq(self, code_nco):
        doppler = self.carr_freq - self.center_offset
        return CHIP_RATE_HZ * (1 + doppler / B2B_CARRIER_HZ) - code_nco

    def block_size(self):
        step = self.code_freq / self.sample_rate
        return int(math.ceil((CODE_LENGTH - self.rem_code_phase) / step))

    def correlate(self, samples, spacing=None):
        """Early, prompt, late over one code period; advances remainders."""
        d = (self.params.early_late_spacing if spacing is None else spacing) / 2
        n = len(samples)
        step = self.code_freq / self.sample_rate
        tcode = self.rem_code_phase + step * np.arange(n)
        phase = self.rem_carr_phase + 2 * np.pi * self.carr_freq / self.sample_rate * np.arange(n)
        baseband = samples * np.exp(-1j * phase)
        prompt_code = self.chips[np.floor(tcode).astype(np.int64) % CODE_LENGTH]
        early_code = self.chips[np.floor(tcode + d).astype(np.int64) % CODE_LENGTH]
        late_code = self.chips[np.floor(tcode - d).astype(np.int64) % CODE_LENGTH]
        early = complex(np.dot(baseband, early_code))
        prompt = complex(np.dot(baseband, prompt_code))
        late = complex(np.dot(baseband, late_code))
        self.rem_code_phase = tcode[-1] + step - CODE_LENGTH
        self.rem_carr_phase = float((phase[-1] + 2 * np.pi * self.carr_freq / self.sample_rate) % (2 * np.pi))
        return early, prompt, late

    def update_loops(self, early, prompt, late):
        pdi = self.params.integration_s
        carr_error = costas_error(prompt)
        self.carr_nco += (self.tau2_carr / self.tau1_carr) * (carr_error - self.old_carr_error) \
            + carr_error * (pdi / self.tau1_carr)
        self.old_carr_error = carr_error
        self.carr_freq = self.carrier_base + self.carr_nco

        code_error = dll_error(early, late, self.params.early_late_spacing)
        self.code_nco += (self.tau2_code / self.tau1_code) * (code_error - self.old_code_error) \
            + code_error * (pdi / self.tau1_code)
        self.old_code_error = code_error
        self.code_freq = self._aided_code_freq(self.code_nco)
        return carr_error, code_error


def _fine_carrier(prompts, period_s):
    """Frequency and phase (mod pi) from data-squared prompts."""
    z2 = np.asarray(prompts) ** 2
    df = float(np.angle(np.sum(z2[1:] * np.conj(z2[:-1]))) / (4 * np.pi * period_s))
    k = np.arange(len(z2))
    theta = float(np.angle(np.sum(z2 * np.exp(-4j * np.pi * df * (k * period_s + period_s / 2)))) / 2)
    return df, theta


def track(blocks, init, codes, params=None, max_ms=None):
    """
    Track one PRN from its acquisition result until the data ends or
    lock is lost; the 180 degree ambiguity is left to framing.
    """
    if not init.detected:
        raise ValueError(f"PRN {init.prn} was not detected; nothing to track")
    params = params or LoopParameters()
    cursor = _SampleCursor(blocks)
    if not cursor.prime():
        raise ValueError("no samples to track")
    chips = generate_code(init.prn, codes).chips
    fs = cursor.sample_rate
    start = cursor.first_index + init.code_phase

    # open-loop pre-pass refines the carrier, then the same samples are re-read
    probe = TrackingChannel(init.prn, chips, fs, cursor.center_offset, init.doppler, params)
    prompts = []
    position = start
    for _ in range(params.prepass_ms):
        n = probe.block_size()
        samples = cursor.read(position, n)
        if samples is None:
            break
        prompts.append(probe.correlate(samples)[1])
        position += n
    channel = TrackingChannel(init.prn, chips, fs, cursor.center_offset, init.doppler, params)
    if len(prompts) >= 2:
        df, theta = _fine_carrier(prompts, CODE_LENGTH / probe.code_freq)
        channel.carrier_base += df
        channel.carr_freq = channel.carrier_base
        channel.code_freq = channel._aided_code_freq(0.0)
        channel.rem_carr_phase = theta % (2 * np.pi)
        _logger.debug("PRN %d: fine carrier %+.1f Hz, phase %.2f rad", init.prn, df, theta)

    times, values, i_pow, q_pow, lock, dll_errs, freqs = [], [], [], [], [], [], []
    smooth_i = smooth_q = None
    below = 0
    status = STATUS_OK
    position = start
    alpha = params.lock_smoothing
    while max_ms is None or len(values) < max_ms:
        n = channel.block_size()
        samples = cursor.read(position, n)
        if samples is None:
            status = STATUS_END_OF_DATA
            break
        early, prompt, late = channel.correlate(samples)
        _, code_error = channel.update_loops(early, prompt, late)
        times.append(1000.0 * position / fs)
        values.append(prompt.real)
        i_pow.append(prompt.real ** 2)
        q_pow.append(prompt.imag ** 2)
        dll_errs.append(code_error)
        freqs.append(channel.carr_freq)
        if smooth_i is None:
            smooth_i, smooth_q = prompt.real ** 2, prompt.imag ** 2
        else:
            smooth_i += alpha * (prompt.real ** 2 - smooth_i)
            smooth_q += alpha * (prompt.imag ** 2 - smooth_q)
        total = smooth_i + smooth_q
        metric = (smooth_i - smooth_q) / total if total > 0 else 0.0
        lock.append(metric)
        position += n
        cursor.release(position)
        if len(values) > params.lock_settle_ms and metric < params.lock_threshold:
            below += 1
            if below >= params.lock_dwell_ms:
                status = STATUS_LOCK_LOST
                _logger.warning("PRN %d: lock lost after %d ms", init.prn, len(values))
                break
        else:
            below = 0
    _logger.info("PRN %d: tracked %d ms (%s)", init.prn, len(values), status)
    return TrackingOutput(
        prn=init.prn,
        symbols=SymbolStream(
            prn=init.prn,
            timestamps_ms=np.asarray(times),
            values=np.asarray(values),
            i_power=np.asarray(i_pow),
            q_power=np.asarray(q_pow),
        ),
        pll_lock=np.asarray(lock),
        dll_error=np.asarray(dll_errs),
        status=status,
        carrier_hz=np.asarray(freqs),
    )
