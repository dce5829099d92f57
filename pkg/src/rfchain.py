"""
Sample-domain front end
Baseband sample blocks, the B2b-I signal simulator and IQ file I/O.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from prncode import CHIP_RATE_HZ, CODE_LENGTH, generate_code

_logger = logging.getLogger(__name__)

B2B_CARRIER_HZ = 1207.14e6
L1_CARRIER_HZ = 1575.42e6
SPEED_OF_LIGHT = 299792458.0
SYMBOL_RATE = 1000
MAX_DOPPLER_HZ = 5000.0
AMPLITUDE = 1 / math.sqrt(2)

FORMAT_FLOAT = "float"
FORMAT_INT8 = "int8_iq"
FORMAT_PACKED2 = "packed2_iq"
FILE_FORMATS = (FORMAT_INT8, FORMAT_PACKED2)

INT8_TARGET_RMS = 32.0
PACKED2_THRESHOLD = 0.9
HEADER_SUFFIX = ".hdr"


class SampleFormatError(ValueError):
    """Unknown format tag or unreadable sample file."""


class ScenarioError(ValueError):
    """Scenario validation failure; carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ==================== TYPES ====================

@dataclass(frozen=True, eq=False)
class SampleBlock:
    samples: np.ndarray
    sample_rate: float
    center_offset: float = 0.0
    quantization: str = FORMAT_FLOAT
    start_index: int = 0

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate

    @property
    def samples_per_code(self):
        return int(round(self.sample_rate * CODE_LENGTH / CHIP_RATE_HZ))


@dataclass
class SatelliteSignal:
    prn: int
    symbols: np.ndarray          # +1/-1, one per millisecond
    doppler_hz: float = 0.0
    code_phase_chips: float = 0.0
    cn0_dbhz: float = math.inf
    carrier_phase_rad: float = 0.0


@dataclass
class SimScenario:
    satellites: list
    duration_s: float
    sample_rate_hz: float = 30.69e6
    center_offset_hz: float = 0.0
    quantization: str = FORMAT_FLOAT
    seed: int = 0
    block_ms: int = 100

    def problems(self, codes=None):
        found = []
        if self.duration_s <= 0:
            found.append(f"duration must be positive, got {self.duration_s}")
        if self.sample_rate_hz <= 2 * CHIP_RATE_HZ:
            found.append(
                f"sample rate {self.sample_rate_hz:.0f} Hz is below twice the chipping rate"
            )
        if self.quantization not in (FORMAT_FLOAT,) + FILE_FORMATS:
            found.append(f"unknown quantization {self.quantization!r}")
        if not self.satellites:
            found.append("scenario has no satellites")
        for sat in self.satellites:
            if abs(sat.doppler_hz) > MAX_DOPPLER_HZ:
                found.append(f"PRN {sat.prn}: Doppler {sat.doppler_hz} Hz outside +/-{MAX_DOPPLER_HZ:.0f}")
            if codes is not None and sat.prn not in codes:
                found.append(f"PRN {sat.prn}: not in code table")
        return found

    def validate(self, codes=None):
        found = self.problems(codes)
        if found:
            raise ScenarioError(found)

    @property
    def total_samples(self):
        return int(round(self.duration_s * self.sample_rate_hz))


@dataclass
class _Emitter:
    chips: np.ndarray
    symbols: np.ndarray
    amplitude: float
    code_rate: float
    carrier_hz: float
    code_phase_chips: float
    carrier_phase_rad: float = field(default=0.0)


# ==================== PHYSICS ====================

def velocity_to_doppler(v_kmh, carrier_hz=B2B_CARRIER_HZ):
    """Doppler (Hz) for a line-of-sight velocity in km/h."""
    return v_kmh / 3.6 / SPEED_OF_LIGHT * carrier_hz


def code_rate_for_doppler(doppler_hz, carrier_hz=B2B_CARRIER_HZ):
    return CHIP_RATE_HZ * (1 + doppler_hz / carrier_hz)


def noise_variance(scenario):
    """Complex noise power per sample set by the strongest satellite's C/N0."""
    cn0_max = max(s.cn0_dbhz for s in scenario.satellites)
    if math.isinf(cn0_max):
        return 0.0
    return AMPLITUDE ** 2 * scenario.sample_rate_hz / 10 ** (cn0_max / 10)


def expected_component_rms(scenario):
    cn0_max = max(s.cn0_dbhz for s in scenario.satellites)
    signal = 0.0
    for sat in scenario.satellites:
        rel = 0.0 if math.isinf(cn0_max) else sat.cn0_dbhz - cn0_max
        signal += AMPLITUDE ** 2 * 10 ** (rel / 10)
    return math.sqrt((signal + noise_variance(scenario)) / 2)


# ==================== SIMULATION ====================

def _emitters(scenario, codes):
    cn0_max = max(s.cn0_dbhz for s in scenario.satellites)
    emitters = []
    for sat in scenario.satellites:
        rel = 0.0 if math.isinf(cn0_max) else sat.cn0_dbhz - cn0_max
        emitters.append(_Emitter(
            chips=generate_code(sat.prn, codes).chips.astype(np.float32),
            symbols=np.asarray(sat.symbols, dtype=np.float32),
            amplitude=AMPLITUDE * 10 ** (rel / 20),
            code_rate=code_rate_for_doppler(sat.doppler_hz),
            carrier_hz=scenario.center_offset_hz + sat.doppler_hz,
            code_phase_chips=sat.code_phase_chips,
            carrier_phase_rad=sat.carrier_phase_rad,
        ))
    return emitters


def _emit(emitter, t):
    code_pos = emitter.code_rate * t - emitter.code_phase_chips
    chip_index = np.floor(code_pos).astype(np.int64) % CODE_LENGTH
    symbol_index = np.floor_divide(code_pos, CODE_LENGTH).astype(np.int64)
    inside = (symbol_index >= 0) & (symbol_index < len(emitter.symbols))
    data = np.ones(len(t), dtype=np.float32)
    data[inside] = emitter.symbols[symbol_index[inside]]
    phase = 2 * np.pi * emitter.carrier_hz * t + emitter.carrier_phase_rad
    return emitter.amplitude * data * emitter.chips[chip_index] * np.exp(1j * phase)


def simulate_blocks(scenario, codes, rng=None):
    """Yield the scenario as SampleBlocks of block_ms each."""
    scenario.validate(codes)
    rng = rng if rng is not None else np.random.default_rng(scenario.seed)
    emitters = _emitters(scenario, codes)
    sigma = math.sqrt(noise_variance(scenario) / 2)
    rms = expected_component_rms(scenario)
    total = scenario.total_samples
    step = int(round(scenario.sample_rate_hz * scenario.block_ms / 1000))
    _logger.info(
        "Simulating %d PRN(s) for %.1f s at %.2f MHz (noise sigma %.3f)",
        len(emitters), scenario.duration_s, scenario.sample_rate_hz / 1e6, sigma,
    )
    for start in range(0, total, step):
        n = min(step, total - start)
        t = (start + np.arange(n)) / scenario.sample_rate_hz
        samples = np.zeros(n, dtype=np.complex128)
        for emitter in emitters:
            samples += _emit(emitter, t)
        if sigma > 0:
            samples += sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        if scenario.quantization != FORMAT_FLOAT:
            samples = quantize(samples, scenario.quantization, rms)
        yield SampleBlock(
            samples=samples.astype(np.complex64),
            sample_rate=scenario.sample_rate_hz,
            center_offset=scenario.center_offset_hz,
            quantization=scenario.quantization,
            start_index=start,
        )


def simulate(scenario, codes, rng=None):
    """Whole scenario as one SampleBlock; use simulate_blocks for long runs."""
    blocks = list(simulate_blocks(scenario, codes, rng))
    return SampleBlock(
        samples=np.concatenate([b.samples for b in blocks]),
        sample_rate=scenario.sample_rate_hz,
        center_offset=scenario.center_offset_hz,
        quantization=scenario.quantization,
    )


# ==================== QUANTIZATION ====================

def _packed2_levels(x, threshold):
    return np.where(np.abs(x) > threshold, 3.0, 1.0) * np.where(x < 0, -1.0, 1.0)


def quantize(samples, fmt, component_rms):
    """Dequantized samples as the file formats would store them."""
    if fmt == FORMAT_INT8:
        gain = INT8_TARGET_RMS / component_rms
        return (encode_int8(samples, gain).astype(np.float32).view(np.complex64).astype(np.complex128)) / gain
    if fmt == FORMAT_PACKED2:
        thr = PACKED2_THRESHOLD * component_rms
        return _packed2_levels(samples.real, thr) + 1j * _packed2_levels(samples.imag, thr)
    raise SampleFormatError(f"unknown quantization {fmt!r}")


def encode_int8(samples, gain):
    """Interleaved I,Q signed bytes."""
    out = np.empty(2 * len(samples), dtype=np.int8)
    out[0::2] = np.clip(np.round(samples.real * gain), -127, 127)
    out[1::2] = np.clip(np.round(samples.imag * gain), -127, 127)
    return out


def decode_int8(raw, gain=1.0):
    values = np.frombuffer(raw, dtype=np.int8).astype(np.float32)
    return (values[0::2] + 1j * values[1::2]).astype(np.complex64) / np.float32(gain)


def _sign_magnitude(x, threshold):
    return ((x < 0).astype(np.uint8) << 1) | (np.abs(x) > threshold).astype(np.uint8)


def packed2_nibbles(samples, threshold):
    """One nibble per sample: Q<<2 | I, each as sign<<1 | magnitude."""
    return _sign_magnitude(samples.real, threshold) | (_sign_magnitude(samples.imag, threshold) << 2)


def pack_nibbles(nibbles):
    """Two nibbles per byte, earliest in the low nibble; an odd count is zero padded."""
    if len(nibbles) % 2:
        nibbles = np.append(nibbles, 0)
    return (nibbles[0::2] | (nibbles[1::2] << 4)).astype(np.uint8)


def encode_packed2(samples, threshold):
    return pack_nibbles(packed2_nibbles(samples, threshold))


_PACKED2_DECODE = np.array([1.0, 3.0, -1.0, -3.0], dtype=np.float32)


def decode_packed2(raw):
    data = np.frombuffer(raw, dtype=np.uint8)
    nibbles = np.empty(2 * len(data), dtype=np.uint8)
    nibbles[0::2] = data & 0x0F
    nibbles[1::2] = data >> 4
    return (_PACKED2_DECODE[nibbles & 0x3] + 1j * _PACKED2_DECODE[nibbles >> 2]).astype(np.complex64)


# ==================== FILE I/O ====================

def header_path(path):
    path = Path(path)
    return path.with_name(path.name + HEADER_SUFFIX)


def write_header(path, sample_rate, fmt, center_offset=0.0, gain=None, sample_count=None):
    lines = [f"sample_rate_hz={sample_rate:.6f}", f"format={fmt}", f"center_offset_hz={center_offset:.6f}"]
    if gain is not None:
        lines.append(f"gain={gain:.9g}")
    if sample_count is not None:
        lines.append(f"sample_count={sample_count}")
    header_path(path).write_text("\n".join(lines) + "\n")


def read_header(path):
    hdr = header_path(path)
    if not hdr.exists():
        raise SampleFormatError(f"missing sidecar header {hdr}")
    values = {}
    for line in hdr.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SampleFormatError(f"bad header line {line!r} in {hdr}")
        values[key.strip()] = value.strip()
    try:
        header = {
            "sample_rate_hz": float(values["sample_rate_hz"]),
            "format": values["format"],
            "center_offset_hz": float(values.get("center_offset_hz", 0.0)),
            "gain": float(values["gain"]) if "gain" in values else None,
            "sample_count": int(values["sample_count"]) if "sample_count" in values else None,
        }
    except (KeyError, ValueError) as e:
        raise SampleFormatError(f"incomplete header {hdr}: {e}") from e
    if header["format"] not in FILE_FORMATS:
        raise SampleFormatError(f"unknown format tag {header['format']!r}")
    return header


def write_samples(blocks, path, fmt, component_rms=None):
    """Write blocks in a file format plus its sidecar header; returns sample count."""
    if fmt not in FILE_FORMATS:
        raise SampleFormatError(f"unknown format tag {fmt!r}")
    path = Path(path)
    count = 0
    gain = None
    first = None
    # packed2 bytes hold sample pairs; an odd sample waits for the next block
    carry = np.empty(0, dtype=np.uint8)
    with path.open("wb") as fh:
        for block in blocks:
            if first is None:
                first = block
            rms = component_rms or float(np.sqrt(np.mean(np.abs(block.samples) ** 2) / 2)) or 1.0
            if fmt == FORMAT_INT8:
                gain = gain or INT8_TARGET_RMS / rms
                fh.write(encode_int8(block.samples, gain).tobytes())
            else:
                nibbles = np.concatenate([carry, packed2_nibbles(block.samples, PACKED2_THRESHOLD * rms)])
                even = len(nibbles) // 2 * 2
                fh.write(pack_nibbles(nibbles[:even]).tobytes())
                carry = nibbles[even:]
            count += len(block)
        if len(carry):
            fh.write(pack_nibbles(carry).tobytes())
    if first is None:
        raise SampleFormatError("no samples to write")
    write_header(path, first.sample_rate, fmt, first.center_offset, gain, count)
    _logger.info("Wrote %d samples to %s (%s)", count, path, fmt)
    return count


def ingest(path, fmt=None, block_samples=1 << 20):
    """Lazily yield SampleBlocks from a sample file and its sidecar header."""
    path = Path(path)
    header = read_header(path)
    if fmt is not None and fmt != header["format"]:
        if fmt not in FILE_FORMATS:
            raise SampleFormatError(f"unknown format tag {fmt!r}")
        raise SampleFormatError(f"format {fmt!r} does not match header {header['format']!r}")
    fmt = header["format"]
    bytes_per_sample = 2 if fmt == FORMAT_INT8 else 0.5
    chunk = int(block_samples * bytes_per_sample) // 2 * 2 or 2
    start = 0
    with path.open("rb") as fh:
        while True:
            raw = fh.read(chunk)
            if not raw:
                break
            if fmt == FORMAT_INT8:
                if len(raw) % 2:
                    _logger.warning("Dropping partial trailing sample in %s", path)
                    raw = raw[:-1]
                    if not raw:
                        break
                samples = decode_int8(raw, header["gain"] or 1.0)
            else:
                samples = decode_packed2(raw)
            if header["sample_count"] is not None:
                # packed2 pads the last byte
                samples = samples[: max(header["sample_count"] - start, 0)]
                if not len(samples):
                    break
            yield SampleBlock(
                samples=samples,
                sample_rate=header["sample_rate_hz"],
                center_offset=header["center_offset_hz"],
                quantization=fmt,
                start_index=start,
            )
            start += len(samples)
