import math

import numpy as np
import pytest

from acquisition import AcquisitionResult, acquire
from rfchain import SampleBlock, SatelliteSignal, SimScenario, noise_variance, simulate, simulate_blocks
from tracking import (
    STATUS_END_OF_DATA,
    STATUS_LOCK_LOST,
    SymbolStream,
    costas_error,
    dll_error,
    loop_coefficients,
    track,
)

FS = 30.69e6


def _scenario(symbols, duration_s, cn0=math.inf):
    sat = SatelliteSignal(prn=59, symbols=symbols, doppler_hz=-29.0, code_phase_chips=1234.5, cn0_dbhz=cn0)
    return SimScenario(satellites=[sat], duration_s=duration_s, sample_rate_hz=FS, seed=5)


def test_loop_coefficients():
    tau1, tau2 = loop_coefficients(25.0, 0.7, 0.25)
    wn = 25.0 * 8 * 0.7 / (4 * 0.49 + 1)
    assert tau1 == pytest.approx(0.25 / wn ** 2)
    assert tau2 == pytest.approx(1.4 / wn)


def test_dll_error_sign():
    # early stronger than late: replica lags the signal
    assert dll_error(1.0, 0.5, 0.5) < 0
    assert dll_error(0.5, 1.0, 0.5) > 0
    assert dll_error(0.7, 0.7, 0.5) == 0.0
    assert dll_error(0.0, 0.0, 0.5) == 0.0


def test_costas_error_ignores_data_sign():
    z = complex(1.0, 0.2)
    assert costas_error(z) == pytest.approx(costas_error(-z))
    assert costas_error(complex(0.0, 1.0)) == 0.0


def test_symbol_stream_helpers():
    stream = SymbolStream.from_values(59, [0.5, -2.0, 1.0])
    assert stream.hard().tolist() == [0, 1, 0]
    assert stream.negated().hard().tolist() == [1, 0, 1]
    assert len(stream) == 3


def test_undetected_result_cannot_be_tracked(codes):
    init = AcquisitionResult(prn=59, detected=False, doppler=0.0, code_phase=0, peak_metric=1.0)
    with pytest.raises(ValueError):
        track([], init, codes)


@pytest.mark.slow
def test_noiseless_tracking_recovers_symbols(codes, rng):
    symbols = rng.choice([-1.0, 1.0], 700)
    scenario = _scenario(symbols, 0.6)
    init = acquire(simulate(_scenario(symbols, 0.012), codes), 59, codes)
    assert init.detected
    output = track(simulate_blocks(scenario, codes), init, codes)
    assert output.status == STATUS_END_OF_DATA
    assert len(output.symbols) >= 590
    settled = slice(50, len(output.symbols))
    hard = np.sign(output.symbols.values[settled])
    truth = symbols[settled]
    # carrier phase is only known modulo pi
    polarity = 1.0 if hard[0] == truth[0] else -1.0
    assert (hard * polarity == truth).all()
    assert output.iq_power_ratio(start_ms=200, length_ms=300) < 0.1
    assert np.abs(output.dll_error[300:]).mean() < 0.1
    assert output.symbols.timestamps_ms[0] == pytest.approx(1000 * 3703 / FS, abs=0.05)


def _aligned_errors(values, truth):
    hard = np.sign(values)
    polarity = 1.0 if (hard == truth).mean() >= 0.5 else -1.0
    return int((hard * polarity != truth).sum())


@pytest.mark.slow
def test_symbol_error_rate_at_45_dbhz(codes, rng):
    symbols = rng.choice([-1.0, 1.0], 5100)
    scenario = _scenario(symbols, 5.0, cn0=45.0)
    init = acquire(simulate(_scenario(symbols, 0.012, cn0=45.0), codes), 59, codes)
    assert init.detected
    output = track(simulate_blocks(scenario, codes), init, codes)
    assert output.status == STATUS_END_OF_DATA
    settled = slice(1000, len(output.symbols))
    errors = _aligned_errors(output.symbols.values[settled], symbols[settled])
    assert errors <= 1e-3 * (len(output.symbols) - 1000)
    assert output.iq_power_ratio(start_ms=1000, length_ms=1000) < 0.1


@pytest.mark.slow
def test_vanishing_signal_ends_with_lock_lost(codes, rng):
    symbols = rng.choice([-1.0, 1.0], 500)
    scenario = _scenario(symbols, 0.4, cn0=45.0)
    init = acquire(simulate(_scenario(symbols, 0.012, cn0=45.0), codes), 59, codes)
    blocks = list(simulate_blocks(scenario, codes))
    sigma = math.sqrt(noise_variance(scenario) / 2)
    start = scenario.total_samples
    step = int(0.1 * FS)
    for _ in range(15):
        noise = sigma * (rng.standard_normal(step) + 1j * rng.standard_normal(step))
        blocks.append(SampleBlock(noise.astype(np.complex64), FS, start_index=start))
        start += step
    output = track(blocks, init, codes)
    assert output.status == STATUS_LOCK_LOST
    assert 400 < len(output.symbols) < 1500
    assert _aligned_errors(output.symbols.values[100:350], symbols[100:350]) == 0
