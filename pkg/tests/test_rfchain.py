import math

import numpy as np
import pytest

from rfchain import (
    B2B_CARRIER_HZ,
    FORMAT_INT8,
    FORMAT_PACKED2,
    L1_CARRIER_HZ,
    SampleBlock,
    SampleFormatError,
    SatelliteSignal,
    ScenarioError,
    SimScenario,
    decode_packed2,
    encode_packed2,
    expected_component_rms,
    ingest,
    noise_variance,
    read_header,
    simulate,
    simulate_blocks,
    velocity_to_doppler,
    write_header,
    write_samples,
)

FS = 30.69e6


def _scenario(duration_s=0.01, cn0=math.inf, **kwargs):
    sat = SatelliteSignal(prn=59, symbols=np.ones(20), doppler_hz=-29.0, code_phase_chips=100.0, cn0_dbhz=cn0)
    return SimScenario(satellites=[sat], duration_s=duration_s, sample_rate_hz=FS, **kwargs)


def test_doppler_per_kmh_at_l1():
    assert velocity_to_doppler(1.0, L1_CARRIER_HZ) == pytest.approx(1.46, rel=0.01)


def test_doppler_per_kmh_at_b2b():
    assert velocity_to_doppler(1.0, B2B_CARRIER_HZ) == pytest.approx(1.12, rel=0.01)
    assert velocity_to_doppler(-100.0) == pytest.approx(-100 * velocity_to_doppler(1.0))


def test_noise_power_from_cn0():
    scenario = _scenario(cn0=45.0)
    assert noise_variance(scenario) == pytest.approx(0.5 * FS / 10 ** 4.5)
    assert noise_variance(_scenario()) == 0.0


def test_noiseless_signal_has_unit_envelope(codes):
    block = simulate(_scenario(), codes)
    assert len(block) == int(round(0.01 * FS))
    assert np.abs(block.samples) == pytest.approx(np.full(len(block), 1 / math.sqrt(2)), rel=1e-5)


def test_streaming_matches_single_block(codes):
    scenario = _scenario(duration_s=0.02, cn0=50.0, block_ms=5, seed=3)
    blocks = list(simulate_blocks(scenario, codes))
    assert len(blocks) == 4
    assert [b.start_index for b in blocks] == [0, 153450, 306900, 460350]
    whole = simulate(scenario, codes)
    assert np.allclose(np.concatenate([b.samples for b in blocks]), whole.samples)


def test_scenario_problems_are_listed_together(codes):
    sat = SatelliteSignal(prn=1, symbols=np.ones(5), doppler_hz=9000.0)
    scenario = SimScenario(satellites=[sat], duration_s=0.0, sample_rate_hz=FS)
    with pytest.raises(ScenarioError) as info:
        scenario.validate(codes)
    problems = info.value.problems
    assert len(problems) == 3
    assert any("duration" in p for p in problems)
    assert any("Doppler" in p for p in problems)
    assert any("code table" in p for p in problems)


def test_packed2_levels():
    samples = np.array([0.5 + 2.0j, -0.5 - 2.0j, 2.0 - 0.1j, -2.0 + 0.1j])
    decoded = decode_packed2(encode_packed2(samples, 1.0).tobytes())
    assert decoded.tolist() == [1 + 3j, -1 - 3j, 3 - 1j, -3 + 1j]


@pytest.mark.parametrize("fmt", [FORMAT_INT8, FORMAT_PACKED2])
def test_file_round_trip(codes, tmp_path, fmt):
    scenario = _scenario(duration_s=0.004, cn0=50.0, block_ms=2, seed=1)
    path = tmp_path / "samples.bin"
    count = write_samples(simulate_blocks(scenario, codes), path, fmt, expected_component_rms(scenario))
    assert count == scenario.total_samples
    header = read_header(path)
    assert header["format"] == fmt
    assert header["sample_rate_hz"] == pytest.approx(FS)
    blocks = list(ingest(path, block_samples=50000))
    assert sum(len(b) for b in blocks) == count
    assert blocks[1].start_index == len(blocks[0])


def test_int8_restores_scale(codes, tmp_path):
    scenario = _scenario(duration_s=0.002)
    original = simulate(scenario, codes).samples
    path = tmp_path / "samples.bin"
    write_samples([simulate(scenario, codes)], path, FORMAT_INT8, expected_component_rms(scenario))
    restored = np.concatenate([b.samples for b in ingest(path)])
    assert read_header(path)["gain"] is not None
    gain = read_header(path)["gain"]
    assert np.abs(restored.real - original.real).max() <= 0.5 / gain + 1e-6
    assert np.abs(restored.imag - original.imag).max() <= 0.5 / gain + 1e-6


def test_partial_trailing_sample_dropped(tmp_path, caplog):
    path = tmp_path / "odd.bin"
    path.write_bytes(bytes([1, 2, 3, 4, 5]))
    write_header(path, FS, FORMAT_INT8)
    blocks = list(ingest(path))
    assert sum(len(b) for b in blocks) == 2
    assert "partial trailing sample" in caplog.text


def test_unknown_format_tag(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"\x00\x00")
    with pytest.raises(SampleFormatError):
        list(ingest(path))
    write_header(path, FS, FORMAT_INT8)
    with pytest.raises(SampleFormatError):
        list(ingest(path, fmt="int16_iq"))
    header_text = (tmp_path / "x.bin.hdr").read_text().replace(FORMAT_INT8, "int4")
    (tmp_path / "x.bin.hdr").write_text(header_text)
    with pytest.raises(SampleFormatError):
        read_header(path)


def test_packed2_odd_blocks_stay_aligned(tmp_path):
    signs = np.array([1, 1, 1, -1, 1, 1])
    samples = (0.5 * signs + 0.5j * signs).astype(np.complex64)
    blocks = [SampleBlock(samples[:3], FS), SampleBlock(samples[3:], FS)]
    path = tmp_path / "odd.bin"
    assert write_samples(blocks, path, FORMAT_PACKED2, component_rms=1.0) == 6
    assert path.stat().st_size == 3
    assert read_header(path)["sample_count"] == 6
    restored = np.concatenate([b.samples for b in ingest(path)])
    assert np.sign(restored.real).tolist() == signs.tolist()
    assert np.sign(restored.imag).tolist() == signs.tolist()


def test_packed2_odd_total_is_trimmed(tmp_path):
    samples = np.array([0.5, -0.5, 2.0], dtype=np.complex64)
    path = tmp_path / "odd.bin"
    assert write_samples([SampleBlock(samples, FS)], path, FORMAT_PACKED2, component_rms=1.0) == 3
    assert path.stat().st_size == 2
    restored = np.concatenate([b.samples for b in ingest(path)])
    assert restored.real.tolist() == [1.0, -1.0, 3.0]
