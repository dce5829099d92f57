"""
Pipeline
Transmit side: correction schedule to per-PRN symbol streams and sample
files. Receive side: acquire, track, frame, LDPC, CRC, parse and ingest.
"""
import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from acquisition import acquire
from demo_data import demo_states
from framing import FRAME_LEN, bits_to_symbols, frame_bits, frames_from_stream
from ldpc6481 import bits_to_symbols as bits_to_gf_symbols
from ldpc6481 import decode_soft_bits, encode, symbols_to_bits
from pppmsg import MES_MASK, MessageError, SkippedMessage, parse_message, serialize_message
from pppstore import CorrectionStore
from prncode import CHIP_RATE_HZ
from results_store import (
    PRODUCT_CORRECTIONS,
    PRODUCT_MESSAGES,
    PRODUCT_SETS,
    correction_row,
    message_row,
    product_path,
    set_row,
    write_jsonl,
)
from rfchain import (
    FORMAT_FLOAT,
    SatelliteSignal,
    SimScenario,
    SampleBlock,
    expected_component_rms,
    ingest,
    simulate_blocks,
    write_samples,
)
from schedule import CYCLE_S, generate_schedule
from tracking import STATUS_END_OF_DATA, SymbolStream, track
from utils import bits_to_hex

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_SIGNAL = 2

SAMPLES_SUFFIX = ".bin"
SYMBOLS_SUFFIX = ".npz"
MESSAGE_BITS = 486


# ==================== TRANSMIT ====================

@dataclass
class FrameTruth:
    source_prn: int
    index: int
    start_symbol: int
    start_ms: float
    time: int
    mestype: int
    epoch: int
    bits: str
    complete: bool


@dataclass
class Transmission:
    symbols: dict                    # prn -> +1/-1 per millisecond
    frames: list
    messages: list                   # one ScheduledMessage per frame slot
    overflow: list = field(default_factory=list)


def encode_message(content, tables):
    """Frame body bits and the 972 LDPC code bits for one message."""
    body = serialize_message(content, tables.schema)
    codeword = encode(bits_to_gf_symbols(body), tables.g)
    return body, symbols_to_bits(codeword)


def frames_needed(spec):
    return max(1, math.ceil((spec.duration_s * 1000 - spec.lead_symbols) / FRAME_LEN))


def build_transmission(spec, tables, states=None):
    """
    Symbols every satellite of the scenario broadcasts. All sources carry
    the same message sequence, as the GEO satellites do.
    """
    n_frames = frames_needed(spec)
    cycles = math.ceil(n_frames / CYCLE_S)
    states = states or demo_states(spec.corrections_seed, spec.start_epoch, cycles)
    messages, overflow = [], []
    for k in range(cycles):
        cycle = generate_schedule(states[k % len(states)], spec.start_epoch + CYCLE_S * k)
        messages.extend(cycle.messages)
        overflow.extend(cycle.overflow)
    messages = messages[:n_frames]
    encoded = [encode_message(m.content, tables) for m in messages]

    symbols, frames = {}, []
    lead = np.ones(spec.lead_symbols, dtype=np.int8)
    for sat in spec.satellites:
        parts = [lead]
        delay_ms = 1000.0 * sat.code_phase_chips / CHIP_RATE_HZ
        for i, (msg, (body, code_bits)) in enumerate(zip(messages, encoded)):
            parts.append(bits_to_symbols(frame_bits(sat.prn, code_bits)))
            start = spec.lead_symbols + i * FRAME_LEN
            frames.append(FrameTruth(
                source_prn=sat.prn, index=i, start_symbol=start, start_ms=start + delay_ms,
                time=msg.time, mestype=msg.mestype, epoch=msg.epoch, bits=bits_to_hex(body),
                complete=start + FRAME_LEN + delay_ms <= spec.duration_s * 1000,
            ))
        symbols[sat.prn] = np.concatenate(parts)
    _logger.info(
        "Transmission: %d frames x %d source(s), %d overflowed record(s)",
        n_frames, len(spec.satellites), len(overflow),
    )
    return Transmission(symbols, frames, messages, overflow)


@dataclass
class SimulationResult:
    samples_path: Path
    truth_path: Path
    messages_path: Path
    sample_count: int
    transmission: Transmission


def scenario_for(spec, transmission, seed):
    return SimScenario(
        satellites=[
            SatelliteSignal(
                prn=sat.prn,
                symbols=transmission.symbols[sat.prn],
                doppler_hz=sat.doppler_hz,
                code_phase_chips=sat.code_phase_chips,
                cn0_dbhz=sat.cn0_dbhz,
            )
            for sat in spec.satellites
        ],
        duration_s=spec.duration_s,
        sample_rate_hz=spec.sample_rate_hz,
        center_offset_hz=spec.center_offset_hz,
        quantization=FORMAT_FLOAT,
        seed=seed,
        block_ms=spec.block_ms,
    )


def run_simulate(spec, tables, seed, out_prefix):
    """Sample file, sidecar header, truth JSON and transmitted-message dump."""
    out_prefix = Path(out_prefix)
    transmission = build_transmission(spec, tables)
    scenario = scenario_for(spec, transmission, seed)
    scenario.validate(tables.codes)
    samples_path = out_prefix.with_name(out_prefix.name + SAMPLES_SUFFIX)
    count = write_samples(
        simulate_blocks(scenario, tables.codes),
        samples_path,
        spec.format,
        component_rms=expected_component_rms(scenario),
    )
    truth = {
        "seed": seed,
        "sample_rate_hz": spec.sample_rate_hz,
        "format": spec.format,
        "duration_s": spec.duration_s,
        "start_epoch": spec.start_epoch,
        "lead_symbols": spec.lead_symbols,
        "satellites": [
            {**asdict(sat), "code_phase_samples": sat.code_phase_chips * spec.sample_rate_hz / CHIP_RATE_HZ}
            for sat in spec.satellites
        ],
        "frames": [asdict(f) for f in transmission.frames],
        "overflow": transmission.overflow,
    }
    truth_path = product_path(out_prefix, "truth", ".json")
    truth_path.write_text(json.dumps(truth, indent=1))
    messages_path = product_path(out_prefix, PRODUCT_MESSAGES)
    write_jsonl(
        (message_row(f.mestype, f.epoch, f.bits, f.source_prn, f.time) for f in transmission.frames),
        messages_path,
    )
    _logger.info("Simulation written: %s, %s", samples_path, truth_path)
    return SimulationResult(samples_path, truth_path, messages_path, count, transmission)


def read_truth(path):
    return json.loads(Path(path).read_text())


# ==================== RECEIVE ====================

@dataclass
class DecodedMessage:
    source_prn: int
    timestamp_ms: float
    time: int
    iterations: int
    bits: np.ndarray = field(repr=False)
    content: object = None
    mestype: int = None
    epoch: int = None


@dataclass
class ChannelReport:
    prn: int
    detected: bool = False
    doppler_hz: float = None
    code_phase_samples: int = None
    code_phase_chips: float = None
    peak_metric: float = None
    tracking_status: str = None
    tracked_ms: int = 0
    iq_power_ratio: float = None
    frames_found: int = 0
    frames_ldpc_converged: int = 0
    frames_crc_passed: int = 0
    iterations: dict = field(default_factory=dict)
    messages_by_type: dict = field(default_factory=dict)
    anomalies: list = field(default_factory=list)


@dataclass
class RunReport:
    channels: dict = field(default_factory=dict)
    sets_emitted: int = 0
    records_emitted: int = 0

    @property
    def frames_decoded(self):
        return sum(c.frames_crc_passed for c in self.channels.values())

    @property
    def iteration_histogram(self):
        total = Counter()
        for channel in self.channels.values():
            total.update(channel.iterations)
        return dict(sorted(total.items()))

    @property
    def exit_code(self):
        return EXIT_OK if self.frames_decoded else EXIT_NO_SIGNAL

    def to_dict(self):
        return {
            "channels": {str(prn): asdict(c) for prn, c in sorted(self.channels.items())},
            "frames_decoded": self.frames_decoded,
            "iteration_histogram": {str(k): v for k, v in self.iteration_histogram.items()},
            "sets_emitted": self.sets_emitted,
            "records_emitted": self.records_emitted,
        }


def acquisition_block(path, integration_ms):
    """Leading samples of a file, enough for the acquisition integration."""
    collected = []
    have = 0
    need = None
    first = None
    for block in ingest(path):
        if first is None:
            first = block
            need = (integration_ms + 1) * block.samples_per_code
        collected.append(block.samples)
        have += len(block)
        if have >= need:
            break
    if first is None:
        return None
    return SampleBlock(
        samples=np.concatenate(collected)[:need],
        sample_rate=first.sample_rate,
        center_offset=first.center_offset,
        quantization=first.quantization,
    )


def decode_symbols(symbols, tables, itr_max, report):
    """Frames, LDPC and CRC over one channel's symbol stream."""
    frames, sync = frames_from_stream(symbols, report.prn)
    report.frames_found = len(frames)
    if sync.rejected_prn:
        report.anomalies.append(f"{sync.rejected_prn} frame(s) with a foreign PRN field")
    iterations = Counter()
    decoded = []
    for frame in frames:
        soft = frame.code_symbols
        scale = np.mean(np.abs(soft))
        result = decode_soft_bits(soft / scale if scale > 0 else soft, tables.h, itr_max)
        iterations[result.iterations_used] += 1
        if not result.converged:
            _logger.debug("PRN %d: frame at %d did not converge", report.prn, frame.start)
            continue
        report.frames_ldpc_converged += 1
        bits = symbols_to_bits(result.message)[:MESSAGE_BITS]
        try:
            parsed = parse_message(bits, tables.schema, source_prn=report.prn)
        except MessageError as e:
            report.anomalies.append(f"frame at {frame.timestamp_ms:.0f} ms: {e}")
            _logger.warning("PRN %d: frame at %.0f ms dropped: %s", report.prn, frame.timestamp_ms, e)
            continue
        report.frames_crc_passed += 1
        content = parsed.content
        decoded.append(DecodedMessage(
            source_prn=report.prn,
            timestamp_ms=frame.timestamp_ms,
            time=0,
            iterations=result.iterations_used,
            bits=bits,
            content=content,
            mestype=parsed.message.mestype,
            epoch=parsed.message.epoch,
        ))
    report.iterations = dict(sorted(iterations.items()))
    report.messages_by_type = dict(sorted(Counter(m.mestype for m in decoded).items()))
    _anchor_times(decoded)
    return decoded


def _anchor_times(decoded):
    """Message times in seconds of day, anchored on the first decoded mask when there is one."""
    if not decoded:
        return
    anchor = next((m for m in decoded if m.mestype == MES_MASK and m.epoch is not None), None)
    ref_ms, ref_time = (anchor.timestamp_ms, anchor.epoch) if anchor else (decoded[0].timestamp_ms, 0)
    for m in decoded:
        m.time = ref_time + int(round((m.timestamp_ms - ref_ms) / 1000.0))


def decode_channel(path, init, tables, config):
    """Track one acquired PRN through to parsed messages."""
    report = ChannelReport(
        prn=init.prn,
        detected=init.detected,
        doppler_hz=init.doppler,
        code_phase_samples=init.code_phase,
        code_phase_chips=init.code_phase_chips,
        peak_metric=init.peak_metric,
    )
    if not init.detected:
        return report, [], None
    output = track(ingest(path), init, tables.codes, config.tracking, config.max_ms)
    report.tracking_status = output.status
    report.tracked_ms = len(output.symbols)
    report.iq_power_ratio = output.iq_power_ratio()
    if output.status != STATUS_END_OF_DATA:
        report.anomalies.append(f"tracking ended: {output.status}")
    return report, decode_symbols(output.symbols, tables, config.itr_max, report), output.symbols


@dataclass
class DecodeResultSet:
    report: RunReport
    messages: list
    correction_rows: list
    set_rows: list
    symbols: dict = field(default_factory=dict)


def ingest_decoded(messages, report):
    """Run decoded messages through one store in time order."""
    store = CorrectionStore()
    corrections, sets = [], []
    last = {}
    for m in sorted(messages, key=lambda m: (m.timestamp_ms, m.source_prn)):
        if isinstance(m.content, SkippedMessage):
            continue
        result = store.ingest(m.content, received=m.time)
        for stored in result.records:
            record = stored.record
            key = (type(record).__name__, record.system, record.prn)
            if last.get(key) == record:
                continue
            last[key] = record
            corrections.append(correction_row(record, m.source_prn, m.time, stored.orphaned))
        sets.extend(set_row(s, m.source_prn, m.time) for s in result.sets)
    report.records_emitted = len(corrections)
    report.sets_emitted = len(sets)
    _logger.info("Store: %d correction records, %d matched sets", len(corrections), len(sets))
    return corrections, sets


def run_decode(config, tables, path, prns=None):
    """Acquire every requested PRN, then decode the detected channels."""
    path = Path(path)
    report = RunReport()
    if path.suffix == SYMBOLS_SUFFIX:
        streams = load_symbols(path)
        messages = []
        for prn, stream in sorted(streams.items()):
            if prns and prn not in prns:
                continue
            channel = ChannelReport(prn=prn, detected=True, tracked_ms=len(stream))
            report.channels[prn] = channel
            messages.extend(decode_symbols(stream, tables, config.itr_max, channel))
        corrections, sets = ingest_decoded(messages, report)
        return DecodeResultSet(report, messages, corrections, sets, streams)

    prns = list(prns or config.prns or tables.codes.prns)
    block = acquisition_block(path, config.acquisition.integration_ms)
    if block is None:
        _logger.warning("%s holds no samples", path)
        return DecodeResultSet(report, [], [], [])
    inits = [acquire(block, prn, tables.codes, config.acquisition) for prn in prns]
    for init in inits:
        if not init.detected:
            report.channels[init.prn] = ChannelReport(prn=init.prn, detected=False, peak_metric=init.peak_metric)
    detected = [i for i in inits if i.detected]
    if not detected:
        _logger.warning("No PRN acquired in %s", path)
        return DecodeResultSet(report, [], [], [])

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda init: decode_channel(path, init, tables, config), detected))
    messages, streams = [], {}
    for channel, decoded, symbols in results:
        report.channels[channel.prn] = channel
        messages.extend(decoded)
        if symbols is not None:
            streams[channel.prn] = symbols
    corrections, sets = ingest_decoded(messages, report)
    return DecodeResultSet(report, messages, corrections, sets, streams)


def write_decode_products(result, out_prefix, dump_symbols=False):
    """Correction stream, matched sets, message dump and the run report."""
    out_prefix = Path(out_prefix)
    write_jsonl(result.correction_rows, product_path(out_prefix, PRODUCT_CORRECTIONS))
    write_jsonl(result.set_rows, product_path(out_prefix, PRODUCT_SETS))
    write_jsonl(
        (
            message_row(m.mestype, m.epoch, bits_to_hex(m.bits), m.source_prn, m.time,
                        round(m.timestamp_ms, 3), m.iterations)
            for m in sorted(result.messages, key=lambda m: (m.source_prn, m.timestamp_ms))
        ),
        product_path(out_prefix, PRODUCT_MESSAGES),
    )
    report_path = product_path(out_prefix, "report", ".json")
    report_path.write_text(json.dumps(result.report.to_dict(), indent=1))
    if dump_symbols and result.symbols:
        save_symbols(result.symbols, out_prefix.with_name(out_prefix.name + "_symbols" + SYMBOLS_SUFFIX))
    return report_path


def save_symbols(streams, path):
    arrays = {}
    for prn, stream in streams.items():
        arrays[f"values_{prn}"] = stream.values
        arrays[f"timestamps_{prn}"] = stream.timestamps_ms
    np.savez_compressed(path, **arrays)
    _logger.info("Symbol dump for PRNs %s written to %s", sorted(streams), path)


def load_symbols(path):
    """Symbol dump written by save_symbols: prn -> SymbolStream."""
    streams = {}
    with np.load(path) as data:
        for key in data.files:
            if not key.startswith("values_"):
                continue
            prn = int(key.split("_", 1)[1])
            values = data[key]
            timestamps = data[f"timestamps_{prn}"] if f"timestamps_{prn}" in data.files else np.arange(len(values))
            streams[prn] = SymbolStream(prn, np.asarray(timestamps, dtype=np.float64), values, values ** 2,
                                        np.zeros(len(values)))
    return streams
