"""
PPP-B2b messages
Schema-driven bit-field codec for message types 1-4 and 63, with typed
content for masks, orbit, code-bias and clock corrections.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from bitstring import BitArray, Bits, ConstBitStream, ReadError

from crc24q import BODY_BITS, FRAME_BITS, crc24q_compute, crc_to_bits

_logger = logging.getLogger(__name__)

TYPE_BITS = 6
PAYLOAD_BITS = 456
CRC_BITS = 24
SECONDS_PER_DAY = 86400

MES_MASK = 1
MES_ORBIT = 2
MES_BIAS = 3
MES_CLOCK = 4
MES_NULL = 63
IMPLEMENTED_TYPES = (MES_MASK, MES_ORBIT, MES_BIAS, MES_CLOCK, MES_NULL)
UNIMPLEMENTED_TYPES = (5, 6, 7)
CLOCKS_PER_MESSAGE = 23

CLASS_IMPLEMENTED = "implemented"
CLASS_UNIMPLEMENTED = "recognized_unimplemented"
CLASS_RESERVED = "reserved"

BDS = "BDS"
GPS = "GPS"
GAL = "GAL"
GLO = "GLO"

# slot ranges: 1-63 BDS, 64-100 GPS, 101-137 Galileo, 138-174 GLONASS
SLOT_SYSTEMS = ((BDS, 1, 63), (GPS, 64, 37), (GAL, 101, 37), (GLO, 138, 37))
MASK_FIELDS = {BDS: "mask_bds", GPS: "mask_gps", GAL: "mask_gal", GLO: "mask_glo"}
SYSTEM_ORDER = (BDS, GPS, GAL, GLO)

EXPECTED_BIAS_MODES = frozenset({0, 1, 2, 4, 5, 7, 8, 12})
DEFAULT_SCHEMA_PATH = Path(__file__).parent.parent / "data" / "default_schema.txt"


class SchemaError(ValueError):
    """Malformed schema text or a type whose widths do not sum to 456."""


class MessageError(ValueError):
    """Bad frame body or content that cannot be encoded."""


# ==================== SCHEMA ====================

@dataclass(frozen=True)
class FieldSpec:
    name: str
    width: int
    signed: bool
    scale: float = 1.0
    unit: str = "-"
    sentinel: int = None

    @property
    def min_code(self):
        return -(1 << (self.width - 1)) if self.signed else 0

    @property
    def max_code(self):
        return (1 << (self.width - 1)) - 1 if self.signed else (1 << self.width) - 1

    @property
    def total_width(self):
        return self.width

    def decode(self, raw):
        if self.sentinel is not None and raw == self.sentinel:
            return None
        return raw if self.scale == 1 else raw * self.scale

    def encode(self, value):
        if value is None:
            if self.sentinel is None:
                raise MessageError(f"{self.name}: no sentinel defined for an unavailable value")
            return self.sentinel
        raw = int(value) if self.scale == 1 else int(round(value / self.scale))
        if not self.min_code <= raw <= self.max_code or raw == self.sentinel:
            raise MessageError(
                f"{self.name}={value} {self.unit} outside the representable range "
                f"[{self.min_code}, {self.max_code}] x {self.scale}"
            )
        return raw

    @property
    def is_reserved(self):
        return self.name.startswith("reserved")


@dataclass(frozen=True)
class RepeatSpec:
    name: str
    count: int
    fields: tuple

    @property
    def total_width(self):
        return self.count * sum(f.total_width for f in self.fields)

    def find(self, name):
        return _find(self.fields, name)


@dataclass(frozen=True)
class TypeSchema:
    mestype: int
    name: str
    fields: tuple

    @property
    def total_width(self):
        return sum(f.total_width for f in self.fields)

    def find(self, name):
        return _find(self.fields, name)


def _find(fields, name):
    for spec in fields:
        if spec.name == name:
            return spec
    raise SchemaError(f"schema has no field or group named {name!r}")


@dataclass(frozen=True, eq=False)
class MessageSchema:
    types: dict

    def __getitem__(self, mestype):
        try:
            return self.types[mestype]
        except KeyError:
            raise SchemaError(f"schema does not define message type {mestype}") from None

    def __contains__(self, mestype):
        return mestype in self.types


def _parse_field(tokens, number):
    if len(tokens) not in (5, 6):
        raise SchemaError(f"line {number}: expected 'name width signed|unsigned scale unit [sentinel=N]'")
    name, width, kind, scale, unit = tokens[:5]
    if kind not in ("signed", "unsigned"):
        raise SchemaError(f"line {number}: signedness must be signed or unsigned, got {kind!r}")
    sentinel = None
    if len(tokens) == 6:
        key, _, value = tokens[5].partition("=")
        if key != "sentinel":
            raise SchemaError(f"line {number}: unknown option {tokens[5]!r}")
        sentinel = int(value)
    try:
        spec = FieldSpec(name, int(width), kind == "signed", float(scale), unit, sentinel)
    except ValueError as e:
        raise SchemaError(f"line {number}: {e}") from e
    if spec.width <= 0:
        raise SchemaError(f"line {number}: width must be positive")
    if sentinel is not None and not spec.min_code <= sentinel <= spec.max_code:
        raise SchemaError(f"line {number}: sentinel {sentinel} does not fit {spec.width} bits")
    return spec


def parse_schema(text):
    """
    Schema text: `type N name` opens a message type; field lines follow;
    `repeat K name` ... `end` groups fields repeated K times.
    """
    types = {}
    current = None
    stack = []
    for number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue
        head = tokens[0]
        if head == "type":
            if stack:
                raise SchemaError(f"line {number}: unterminated repeat before new type")
            if len(tokens) != 3:
                raise SchemaError(f"line {number}: expected 'type N name'")
            current = (int(tokens[1]), tokens[2], [])
            if current[0] in types:
                raise SchemaError(f"line {number}: type {current[0]} defined twice")
            types[current[0]] = current
            continue
        if current is None:
            raise SchemaError(f"line {number}: field outside a type block")
        target = stack[-1][2] if stack else current[2]
        if head == "repeat":
            if len(tokens) != 3:
                raise SchemaError(f"line {number}: expected 'repeat K name'")
            group = (tokens[2], int(tokens[1]), [])
            target.append(group)
            stack.append(group)
        elif head == "end":
            if not stack:
                raise SchemaError(f"line {number}: 'end' without 'repeat'")
            stack.pop()
        else:
            target.append(_parse_field(tokens, number))
    if stack:
        raise SchemaError("unterminated repeat at end of schema")

    def freeze(items):
        out = []
        for item in items:
            if isinstance(item, tuple):
                out.append(RepeatSpec(item[0], item[1], freeze(item[2])))
            else:
                out.append(item)
        return tuple(out)

    schema = MessageSchema({
        mestype: TypeSchema(mestype, name, freeze(fields)) for mestype, (_, name, fields) in types.items()
    })
    for type_schema in schema.types.values():
        if type_schema.total_width != PAYLOAD_BITS:
            raise SchemaError(
                f"type {type_schema.mestype} fields sum to {type_schema.total_width} bits, need {PAYLOAD_BITS}"
            )
    return schema


def read_schema(path=None):
    path = Path(path) if path else DEFAULT_SCHEMA_PATH
    try:
        text = path.read_text()
    except OSError as e:
        raise SchemaError(f"cannot read schema {path}: {e}") from e
    schema = parse_schema(text)
    _logger.info("Loaded message schema %s: types %s", path, sorted(schema.types))
    return schema


# ==================== GENERIC CODEC ====================

def _read_fields(stream, fields):
    values = {}
    for spec in fields:
        if isinstance(spec, RepeatSpec):
            values[spec.name] = [_read_fields(stream, spec.fields) for _ in range(spec.count)]
            continue
        kind = "int" if spec.signed else "uint"
        raw = stream.read(f"{kind}:{spec.width}")
        if not spec.is_reserved:
            values[spec.name] = spec.decode(raw)
    return values


def _write_fields(out, fields, values):
    for spec in fields:
        if isinstance(spec, RepeatSpec):
            groups = values.get(spec.name, [])
            if len(groups) > spec.count:
                raise MessageError(f"{spec.name}: {len(groups)} entries, room for {spec.count}")
            for i in range(spec.count):
                _write_fields(out, spec.fields, groups[i] if i < len(groups) else {})
            continue
        raw = 0 if spec.is_reserved else spec.encode(values.get(spec.name, 0))
        if spec.signed:
            out.append(Bits(int=raw, length=spec.width))
        else:
            out.append(Bits(uint=raw, length=spec.width))


def epoch_diff(a, b):
    """a - b in seconds, wrapped into a +/-12 h window."""
    half = SECONDS_PER_DAY // 2
    return (a - b + half) % SECONDS_PER_DAY - half


def unwrap_epochs(epochs):
    """Seconds of day in stream order made monotonic across midnight."""
    out = []
    for epoch in epochs:
        if not out:
            out.append(int(epoch))
        else:
            out.append(out[-1] + epoch_diff(int(epoch), out[-1] % SECONDS_PER_DAY))
    return out


# ==================== SATELLITES ====================

def slot_to_satellite(slot):
    for system, first, count in SLOT_SYSTEMS:
        if first <= slot < first + count:
            return system, slot - first + 1
    return None


def satellite_to_slot(system, prn):
    for name, first, count in SLOT_SYSTEMS:
        if name == system and 1 <= prn <= count:
            return first + prn - 1
    raise MessageError(f"no slot for {system} PRN {prn}")


SYSTEM_PREFIX = {BDS: "C", GPS: "G", GAL: "E", GLO: "R"}


def satellite_name(system, prn):
    return f"{SYSTEM_PREFIX[system]}{prn:02d}"


# ==================== TYPED CONTENT ====================

@dataclass(frozen=True)
class SatelliteMask:
    epoch: int
    iodssr: int
    iodp: int
    satellites: dict = field(default_factory=dict)    # system -> tuple of PRNs

    mestype = MES_MASK

    def ordered(self):
        """Masked satellites in clock-addressing order."""
        return [(system, prn) for system in SYSTEM_ORDER for prn in self.satellites.get(system, ())]

    def __contains__(self, sat):
        system, prn = sat
        return prn in self.satellites.get(system, ())

    def __eq__(self, other):
        if not isinstance(other, SatelliteMask):
            return NotImplemented
        return (self.epoch, self.iodssr, self.iodp, self.ordered()) == \
            (other.epoch, other.iodssr, other.iodp, other.ordered())

    def __hash__(self):
        return hash((self.epoch, self.iodssr, self.iodp, tuple(self.ordered())))


@dataclass(frozen=True)
class OrbitCorrection:
    system: str
    prn: int
    epoch: int
    radial: float
    along: float
    cross: float
    iod: int
    iodn: int = 0
    ura_index: int = 0
    iodssr: int = 0

    @property
    def available(self):
        return None not in (self.radial, self.along, self.cross)


@dataclass(frozen=True)
class ClockCorrection:
    system: str
    prn: int
    epoch: int
    c0: float
    iod: int
    iodssr: int = 0
    iodp: int = 0

    @property
    def available(self):
        return self.c0 is not None


@dataclass(frozen=True)
class CodeBias:
    system: str
    prn: int
    epoch: int
    biases: tuple        # (mode, meters or None)
    iodssr: int = 0

    @property
    def unexpected(self):
        return self.system != BDS or any(mode not in EXPECTED_BIAS_MODES for mode, _ in self.biases)


@dataclass(frozen=True)
class OrbitMessage:
    epoch: int
    iodssr: int
    records: tuple
    mestype = MES_ORBIT


@dataclass(frozen=True)
class BiasMessage:
    epoch: int
    iodssr: int
    records: tuple
    mestype = MES_BIAS


@dataclass(frozen=True)
class ClockEntry:
    iod: int
    c0: float


@dataclass(frozen=True)
class ClockMessage:
    epoch: int
    iodssr: int
    iodp: int
    subtype: int
    entries: tuple
    mestype = MES_CLOCK

    def resolve(self, mask):
        """ClockCorrections for the masked satellites this subtype addresses."""
        order = mask.ordered()
        base = self.subtype * CLOCKS_PER_MESSAGE
        out = []
        for i, entry in enumerate(self.entries):
            if base + i >= len(order):
                break
            system, prn = order[base + i]
            out.append(ClockCorrection(system, prn, self.epoch, entry.c0, entry.iod, self.iodssr, self.iodp))
        return out


@dataclass(frozen=True)
class NullMessage:
    mestype = MES_NULL


@dataclass(frozen=True)
class SkippedMessage:
    mestype: int
    classification: str


@dataclass
class PppMessage:
    mestype: int
    payload: np.ndarray = field(repr=False)
    crc: int
    epoch: int = None
    source_prn: int = None
    time: float = None

    @property
    def body_bits(self):
        return np.concatenate([_int_bits(self.mestype, TYPE_BITS), self.payload])

    @property
    def frame_bits(self):
        return np.concatenate([self.body_bits, crc_to_bits(self.crc)])


@dataclass
class ParsedMessage:
    message: PppMessage
    content: object


def classify(mestype):
    if mestype in IMPLEMENTED_TYPES:
        return CLASS_IMPLEMENTED
    if mestype in UNIMPLEMENTED_TYPES:
        return CLASS_UNIMPLEMENTED
    return CLASS_RESERVED


# ==================== TYPE BUILDERS ====================

def _mask_from_values(values, type_schema):
    satellites = {}
    for system, name in MASK_FIELDS.items():
        spec = type_schema.find(name)
        bits = values[name]
        prns = tuple(k for k in range(1, spec.width + 1) if (bits >> (spec.width - k)) & 1)
        if prns:
            satellites[system] = prns
    return SatelliteMask(values["epoch"], values["iodssr"], values["iodp"], satellites)


def _mask_to_values(mask, type_schema):
    values = {"epoch": mask.epoch, "iodssr": mask.iodssr, "iodp": mask.iodp}
    for system, name in MASK_FIELDS.items():
        spec = type_schema.find(name)
        bits = 0
        for prn in mask.satellites.get(system, ()):
            if not 1 <= prn <= spec.width:
                raise MessageError(f"{system} PRN {prn} does not fit the {spec.width}-bit mask")
            bits |= 1 << (spec.width - prn)
        values[name] = bits
    return values


def _orbit_from_values(values):
    records = []
    for group in values["satellites"]:
        sat = slot_to_satellite(group["slot"])
        if sat is None:
            continue
        radial, along, cross = group["radial"], group["along"], group["cross"]
        if None in (radial, along, cross):
            radial = along = cross = None
        records.append(OrbitCorrection(
            sat[0], sat[1], values["epoch"], radial, along, cross,
            iod=group["iodcorr"], iodn=group["iodn"], ura_index=group["ura"], iodssr=values["iodssr"],
        ))
    return OrbitMessage(values["epoch"], values["iodssr"], tuple(records))


def _orbit_to_values(msg):
    return {
        "epoch": msg.epoch,
        "iodssr": msg.iodssr,
        "satellites": [
            {
                "slot": satellite_to_slot(r.system, r.prn), "iodn": r.iodn, "iodcorr": r.iod,
                "radial": r.radial, "along": r.along, "cross": r.cross, "ura": r.ura_index,
            }
            for r in msg.records
        ],
    }


def _bias_from_values(values):
    records = []
    for group in values["satellites"][: values["numsat"]]:
        sat = slot_to_satellite(group["slot"])
        if sat is None:
            continue
        biases = tuple((b["mode"], b["bias"]) for b in group["biases"][: group["numcb"]])
        records.append(CodeBias(sat[0], sat[1], values["epoch"], biases, values["iodssr"]))
    return BiasMessage(values["epoch"], values["iodssr"], tuple(records))


def _bias_to_values(msg):
    return {
        "epoch": msg.epoch,
        "iodssr": msg.iodssr,
        "numsat": len(msg.records),
        "satellites": [
            {
                "slot": satellite_to_slot(r.system, r.prn),
                "numcb": len(r.biases),
                "biases": [{"mode": mode, "bias": bias} for mode, bias in r.biases],
            }
            for r in msg.records
        ],
    }


def _clock_from_values(values):
    entries = tuple(ClockEntry(g["iodcorr"], g["c0"]) for g in values["clocks"])
    return ClockMessage(values["epoch"], values["iodssr"], values["iodp"], values["subtype"], entries)


def _clock_to_values(msg, type_schema):
    count = type_schema.find("clocks").count
    if len(msg.entries) != count:
        raise MessageError(f"clock subtype carries exactly {count} entries, got {len(msg.entries)}")
    return {
        "epoch": msg.epoch,
        "iodssr": msg.iodssr,
        "iodp": msg.iodp,
        "subtype": msg.subtype,
        "clocks": [{"iodcorr": e.iod, "c0": e.c0} for e in msg.entries],
    }


def _to_values(content, type_schema):
    if isinstance(content, SatelliteMask):
        return _mask_to_values(content, type_schema)
    if isinstance(content, OrbitMessage):
        return _orbit_to_values(content)
    if isinstance(content, BiasMessage):
        return _bias_to_values(content)
    if isinstance(content, ClockMessage):
        return _clock_to_values(content, type_schema)
    if isinstance(content, NullMessage):
        return {}
    raise MessageError(f"cannot serialize {type(content).__name__}")


def _from_values(mestype, values, type_schema):
    if mestype == MES_MASK:
        return _mask_from_values(values, type_schema)
    if mestype == MES_ORBIT:
        return _orbit_from_values(values)
    if mestype == MES_BIAS:
        return _bias_from_values(values)
    if mestype == MES_CLOCK:
        return _clock_from_values(values)
    return NullMessage()


# ==================== PARSE / SERIALIZE ====================

def _int_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _to_bits(array):
    return Bits(bytes=np.packbits(np.asarray(array, dtype=np.uint8)).tobytes(), length=len(array))


def _from_bits(bits):
    return np.unpackbits(np.frombuffer(bits.tobytes(), dtype=np.uint8))[: len(bits)]


def parse_message(bits, schema, source_prn=None, time=None):
    """
    Verify the CRC of a 486-bit frame body and dispatch on its type.
    Types 5-7 and reserved codes come back as SkippedMessage.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if len(bits) != FRAME_BITS:
        raise MessageError(f"frame body must be {FRAME_BITS} bits, got {len(bits)}")
    if crc24q_compute(bits) != 0:
        raise MessageError("CRC-24Q check failed")
    stream = ConstBitStream(_to_bits(bits))
    mestype = stream.read(f"uint:{TYPE_BITS}")
    payload = bits[TYPE_BITS:BODY_BITS].copy()
    crc = _to_bits(bits[BODY_BITS:]).uint
    message = PppMessage(mestype, payload, crc, source_prn=source_prn, time=time)
    classification = classify(mestype)
    if classification != CLASS_IMPLEMENTED:
        _logger.debug("Skipping message type %d (%s)", mestype, classification)
        return ParsedMessage(message, SkippedMessage(mestype, classification))
    type_schema = schema[mestype]
    try:
        values = _read_fields(stream, type_schema.fields)
    except ReadError as e:
        raise SchemaError(f"type {mestype}: schema overruns the payload: {e}") from e
    message.epoch = values.get("epoch")
    return ParsedMessage(message, _from_values(mestype, values, type_schema))


def serialize_message(content, schema):
    """486-bit frame body (type, payload, CRC) for typed content."""
    type_schema = schema[content.mestype]
    out = BitArray()
    out.append(Bits(uint=content.mestype, length=TYPE_BITS))
    _write_fields(out, type_schema.fields, _to_values(content, type_schema))
    body = _from_bits(out)
    if len(body) != BODY_BITS:
        raise SchemaError(f"type {content.mestype} encoded to {len(body)} bits, expected {BODY_BITS}")
    return np.concatenate([body, crc_to_bits(crc24q_compute(body))])
