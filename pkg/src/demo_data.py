"""
Demo correction state
Seeded orbit, clock and code-bias corrections for the satellites the
simulator broadcasts when a scenario carries none of its own.
"""
import logging
from dataclasses import replace

import numpy as np

from pppmsg import BDS, GPS, ClockEntry, CodeBias, OrbitCorrection, SatelliteMask
from schedule import CorrectionState

_logger = logging.getLogger(__name__)

DEMO_SATELLITES = {
    BDS: (19, 21, 22, 29, 34, 35, 38, 39, 40, 44),
    GPS: (2, 5, 6, 7, 9, 12, 13, 15, 18, 19, 25, 29, 30),
}
DEMO_BIAS_MODES = (0, 1, 2, 4, 5, 7, 8, 12)
DEMO_IODSSR = 1
DEMO_IODP = 3

# LSBs of the default schema; demo values sit on the grid so they survive a round trip
ORBIT_RADIAL_LSB = 0.0016
ORBIT_ALONG_LSB = 0.0064
CLOCK_LSB = 0.0016
BIAS_LSB = 0.017


def _on_grid(value, lsb):
    return round(round(value / lsb) * lsb, 6)


def _orbit(rng, system, prn, iod):
    return OrbitCorrection(
        system, prn, 0,
        radial=_on_grid(rng.uniform(-0.5, 0.5), ORBIT_RADIAL_LSB),
        along=_on_grid(rng.uniform(-1.5, 1.5), ORBIT_ALONG_LSB),
        cross=_on_grid(rng.uniform(-1.0, 1.0), ORBIT_ALONG_LSB),
        iod=iod,
        iodn=int(rng.integers(0, 1024)),
        ura_index=int(rng.integers(0, 64)),
        iodssr=DEMO_IODSSR,
    )


def demo_state(seed=0, reference_epoch=0, satellites=None):
    """Full correction state; code biases only for BDS, as broadcast."""
    rng = np.random.default_rng(seed)
    satellites = satellites or DEMO_SATELLITES
    mask = SatelliteMask(reference_epoch, DEMO_IODSSR, DEMO_IODP, {k: tuple(v) for k, v in satellites.items()})
    orbits, biases, clocks, rates = [], [], {}, {}
    for system, prn in mask.ordered():
        iod = int(rng.integers(0, 8))
        orbits.append(_orbit(rng, system, prn, iod))
        clocks[(system, prn)] = ClockEntry(iod, _on_grid(rng.uniform(-3.0, 3.0), CLOCK_LSB))
        rates[(system, prn)] = float(rng.uniform(-2e-3, 2e-3))
        if system == BDS:
            modes = sorted(rng.choice(DEMO_BIAS_MODES, size=4, replace=False).tolist())
            biases.append(CodeBias(
                system, prn, 0,
                tuple((int(m), _on_grid(rng.uniform(-4.0, 4.0), BIAS_LSB)) for m in modes),
                DEMO_IODSSR,
            ))
    _logger.debug("Demo state: %d satellites, %d bias records", len(orbits), len(biases))
    return CorrectionState(
        mask=mask, orbits=orbits, biases=biases, clocks=clocks,
        clock_rates=rates, reference_epoch=reference_epoch,
    )


def advance_state(state, seed, epoch):
    """
    Next issue of the orbits: IODs step by one and components take a small
    random walk. Clocks follow with the same IOD and are re-referenced.
    """
    rng = np.random.default_rng(seed)
    orbits = []
    clocks = {}
    for orbit in state.orbits:
        sat = (orbit.system, orbit.prn)
        iod = (orbit.iod + 1) % 8
        orbits.append(replace(
            orbit,
            iod=iod,
            radial=_on_grid(orbit.radial + rng.normal(0, 0.01), ORBIT_RADIAL_LSB),
            along=_on_grid(orbit.along + rng.normal(0, 0.02), ORBIT_ALONG_LSB),
            cross=_on_grid(orbit.cross + rng.normal(0, 0.02), ORBIT_ALONG_LSB),
        ))
        current = state.clock_entry(sat, epoch)
        c0 = None if current.c0 is None else _on_grid(current.c0, CLOCK_LSB)
        clocks[sat] = ClockEntry(iod, c0)
    return replace(state, orbits=orbits, clocks=clocks, reference_epoch=epoch)


def demo_states(seed, start_epoch, cycles, satellites=None):
    """One state per 48 s cycle, starting at start_epoch."""
    state = demo_state(seed, start_epoch, satellites)
    states = [state]
    for k in range(1, cycles):
        state = advance_state(state, seed * 1000 + k, start_epoch + 48 * k)
        states.append(state)
    return states
