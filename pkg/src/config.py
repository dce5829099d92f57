"""
Configuration
Pipeline settings and simulation scenarios, both read from TOML.
"""
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from acquisition import AcquisitionSearch
from ldpc6481 import ITR_MAX_DEFAULT, LdpcError, load_code
from pppmsg import SchemaError, read_schema
from prncode import CodeTableError, read_code_table
from rfchain import FILE_FORMATS, FORMAT_INT8, SatelliteSignal, ScenarioError, SimScenario
from tracking import LoopParameters

_logger = logging.getLogger(__name__)

CONFIG_ENV = "B2B_CONFIG"
DEFAULT_GEO_PRNS = (59, 60, 61)


class ConfigError(ValueError):
    """Unreadable or inconsistent configuration."""


@dataclass
class Tables:
    codes: object
    h: object
    g: object
    schema: object


@dataclass
class PipelineConfig:
    code_table: str = ""
    h_matrix: str = ""
    schema: str = ""
    acquisition: AcquisitionSearch = field(default_factory=AcquisitionSearch)
    tracking: LoopParameters = field(default_factory=LoopParameters)
    itr_max: int = ITR_MAX_DEFAULT
    prns: tuple = ()
    workers: int = 1
    max_ms: int = None
    source: str = "defaults"

    def with_overrides(self, **overrides):
        """Copy with the non-None overrides applied (command-line flags)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def load_tables(self):
        """Load every referenced table now, before any samples are read."""
        try:
            codes = read_code_table(self.code_table or None)
            h, g = load_code(self.h_matrix or None)
            schema = read_schema(self.schema or None)
        except (CodeTableError, LdpcError, SchemaError) as e:
            raise ConfigError(f"{self.source}: {e}") from e
        _logger.info(
            "Tables loaded: %d PRNs, %s H matrix, schema types %s",
            len(codes.prns), "synthetic" if not self.h_matrix else self.h_matrix, sorted(schema.types),
        )
        return Tables(codes, h, g, schema)


def _section(data, name, source):
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{source}: [{name}] must be a table")
    return value


def _dataclass_from(cls, values, source, section):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"{source}: unknown keys in [{section}]: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"{source}: [{section}]: {e}") from e


def _resolve(base, value):
    if not value:
        return ""
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def _read_toml(path, error):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as e:
        raise error(f"cannot read {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise error(f"{path}: {e}") from e


def parse_config(data, source="<config>", base=Path(".")):
    tables = _section(data, "tables", source)
    decoder = _section(data, "decoder", source)
    run = _section(data, "run", source)
    config = PipelineConfig(
        code_table=_resolve(base, tables.get("code_table", "")),
        h_matrix=_resolve(base, tables.get("h_matrix", "")),
        schema=_resolve(base, tables.get("schema", "")),
        acquisition=_dataclass_from(AcquisitionSearch, _section(data, "acquisition", source), source, "acquisition"),
        tracking=_dataclass_from(LoopParameters, _section(data, "tracking", source), source, "tracking"),
        itr_max=int(decoder.get("itr_max", ITR_MAX_DEFAULT)),
        prns=tuple(int(p) for p in run.get("prns", ())),
        workers=int(run.get("workers", 1)),
        max_ms=run.get("max_ms"),
        source=source,
    )
    if config.itr_max < 1:
        raise ConfigError(f"{source}: itr_max must be at least 1")
    if config.workers < 1:
        raise ConfigError(f"{source}: workers must be at least 1")
    return config


def load_config(path=None):
    """
    Config from the given path, else from $B2B_CONFIG, else built-in
    defaults. Relative table paths resolve against the config's directory.
    """
    path = path or os.getenv(CONFIG_ENV)
    if not path:
        _logger.info("No config given, using built-in defaults")
        return PipelineConfig()
    path = Path(path)
    config = parse_config(_read_toml(path, ConfigError), str(path), path.parent)
    _logger.info("Loaded config %s", path)
    return config


# ==================== SCENARIOS ====================

@dataclass
class SatelliteSpec:
    prn: int
    cn0_dbhz: float = 45.0
    doppler_hz: float = 0.0
    code_phase_chips: float = 0.0


@dataclass
class ScenarioSpec:
    satellites: list
    duration_s: float
    sample_rate_hz: float = 30.69e6
    center_offset_hz: float = 0.0
    format: str = FORMAT_INT8
    start_epoch: int = 0
    lead_symbols: int = 0
    block_ms: int = 100
    corrections_seed: int = 0


def parse_scenario(data, source="<scenario>", codes=None):
    """
    ScenarioSpec from TOML data; every problem found is reported at once.
    Signal checks come from SimScenario.problems; code-table membership
    only when codes are given.
    """
    problems = []
    sats = []
    for i, entry in enumerate(data.get("satellites", [])):
        if "prn" not in entry:
            problems.append(f"satellite {i}: missing prn")
            continue
        try:
            sats.append(SatelliteSpec(
                prn=int(entry["prn"]),
                cn0_dbhz=float(entry.get("cn0_dbhz", 45.0)),
                doppler_hz=float(entry.get("doppler_hz", 0.0)),
                code_phase_chips=float(entry.get("code_phase_chips", 0.0)),
            ))
        except (TypeError, ValueError) as e:
            problems.append(f"satellite {i}: {e}")
    if not sats and not problems:
        problems.append("scenario has no satellites")
    fmt = data.get("format", FORMAT_INT8)
    if fmt not in FILE_FORMATS:
        problems.append(f"format must be one of {FILE_FORMATS}, got {fmt!r}")
    duration = data.get("duration_s")
    if duration is None:
        problems.append("missing duration_s")
    elif duration <= 0:
        problems.append(f"duration must be positive, got {duration}")
    lead = data.get("lead_symbols", 0)
    if lead < 0:
        problems.append(f"lead_symbols must be >= 0, got {lead}")
    start_epoch = data.get("start_epoch", 0)
    if not 0 <= start_epoch < 86400:
        problems.append(f"start_epoch must be a second of day, got {start_epoch}")
    sample_rate = data.get("sample_rate_hz", 30.69e6)
    try:
        sample_rate = float(sample_rate)
    except (TypeError, ValueError):
        problems.append(f"sample_rate_hz must be a number, got {sample_rate!r}")
        sample_rate = None
    if sats and sample_rate is not None:
        # duration and format are checked above
        provisional = SimScenario(
            satellites=[SatelliteSignal(prn=s.prn, symbols=(), doppler_hz=s.doppler_hz) for s in sats],
            duration_s=1.0,
            sample_rate_hz=sample_rate,
        )
        problems.extend(provisional.problems(codes))
    corrections = data.get("corrections", {})
    if problems:
        raise ScenarioError([f"{source}: {p}" for p in problems])
    return ScenarioSpec(
        satellites=sats,
        duration_s=float(duration),
        sample_rate_hz=sample_rate,
        center_offset_hz=float(data.get("center_offset_hz", 0.0)),
        format=fmt,
        start_epoch=int(start_epoch),
        lead_symbols=int(lead),
        block_ms=int(data.get("block_ms", 100)),
        corrections_seed=int(corrections.get("seed", 0)),
    )


def load_scenario(path, codes=None):
    path = Path(path)
    return parse_scenario(_read_toml(path, ConfigError), str(path), codes)
