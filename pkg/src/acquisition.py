"""
Acquisition
Parallel code-phase search in the frequency domain over a Doppler grid.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from prncode import CHIP_RATE_HZ, generate_code, sample_code

_logger = logging.getLogger(__name__)

DOPPLER_RANGE_HZ = 1000.0
DOPPLER_STEP_HZ = 250.0
INTEGRATION_MS = 10
MIN_CODE_PERIODS = 2
DETECTION_THRESHOLD = 2.0


class AcquisitionError(ValueError):
    """Input block or search grid unusable."""


@dataclass(frozen=True)
class AcquisitionSearch:
    doppler_range_hz: float = DOPPLER_RANGE_HZ
    doppler_step_hz: float = DOPPLER_STEP_HZ
    integration_ms: int = INTEGRATION_MS
    threshold: float = DETECTION_THRESHOLD
    center_hz: float = 0.0

    def doppler_bins(self):
        if self.doppler_step_hz <= 0:
            raise AcquisitionError(f"Doppler step must be positive, got {self.doppler_step_hz}")
        count = int(math.floor(self.doppler_range_hz / self.doppler_step_hz + 1e-9))
        return self.center_hz + self.doppler_step_hz * np.arange(-count, count + 1)


@dataclass
class AcquisitionResult:
    prn: int
    detected: bool
    doppler: float
    code_phase: int
    peak_metric: float
    samples_per_code: int = 0
    sample_rate: float = 0.0

    @property
    def code_phase_chips(self):
        return self.code_phase * CHIP_RATE_HZ / self.sample_rate if self.sample_rate else 0.0


def frequency_domain_correlation(samples, replica_fft):
    """Circular correlation of each row against the replica; peak index = code delay."""
    return np.fft.ifft(np.fft.fft(samples, axis=-1) * np.conj(replica_fft), axis=-1)


def _second_peak(row, peak_index, guard):
    masked = row.copy()
    idx = (peak_index + np.arange(-guard, guard + 1)) % len(row)
    masked[idx] = 0.0
    return masked.max()


def acquire(block, prn, codes, search=None):
    """
    Non-coherent search over the Doppler grid, centred on the block's IF.
    code_phase is the sample index where the code period starts.
    """
    search = search or AcquisitionSearch()
    spc = block.samples_per_code
    periods = min(search.integration_ms, len(block) // spc)
    if periods < MIN_CODE_PERIODS:
        raise AcquisitionError(
            f"block holds {len(block)} samples, need at least {MIN_CODE_PERIODS} code periods ({MIN_CODE_PERIODS * spc})"
        )
    bins = search.doppler_bins()
    replica = sample_code(generate_code(prn, codes).chips, block.sample_rate, spc).astype(np.complex64)
    replica_fft = np.fft.fft(replica)
    data = block.samples[: periods * spc]
    t = np.arange(periods * spc) / block.sample_rate

    grid = np.empty((len(bins), spc))
    for i, doppler in enumerate(bins):
        wipe = np.exp(-2j * np.pi * (block.center_offset + doppler) * t)
        chunks = (data * wipe).reshape(periods, spc)
        grid[i] = (np.abs(frequency_domain_correlation(chunks, replica_fft)) ** 2).sum(axis=0)

    row, col = np.unravel_index(int(np.argmax(grid)), grid.shape)
    guard = int(math.ceil(block.sample_rate / CHIP_RATE_HZ))
    second = _second_peak(grid[row], col, guard)
    metric = float(grid[row, col] / second) if second > 0 else math.inf
    result = AcquisitionResult(
        prn=prn,
        detected=metric >= search.threshold,
        doppler=float(bins[row]),
        code_phase=int(col),
        peak_metric=metric,
        samples_per_code=spc,
        sample_rate=block.sample_rate,
    )
    _logger.info(
        "PRN %d: %s (Doppler %+.0f Hz, code phase %d samples, metric %.2f)",
        prn, "detected" if result.detected else "not detected", result.doppler, result.code_phase, metric,
    )
    return result


def acquire_all(block, prns, codes, search=None):
    return {prn: acquire(block, prn, codes, search) for prn in prns}
