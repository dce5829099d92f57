"""
CRC-24Q
Cyclic redundancy check over the 462-bit message body (type + data).

Register conventions: MSB-first, zero initial value, no reflection,
no final XOR. Input is a bit sequence since the body is not byte aligned.
"""
import numpy as np

# g(x) = x^24 + x^23 + x^18 + x^17 + x^14 + x^11 + x^10 + x^7 + x^6 + x^5 + x^4 + x^3 + x + 1
GENERATOR_TERMS = (0, 1, 3, 4, 5, 6, 7, 10, 11, 14, 17, 18, 23, 24)
POLY = sum(1 << i for i in GENERATOR_TERMS)      # 0x1864CFB
POLY_LOW = POLY & 0xFFFFFF                        # 0x864CFB
CRC_BITS = 24
MASK = (1 << CRC_BITS) - 1

BODY_BITS = 462
FRAME_BITS = BODY_BITS + CRC_BITS


class CrcError(ValueError):
    """Raised for a body of the wrong length or a CRC value outside 24 bits."""


def _build_table():
    table = []
    for byte in range(256):
        crc = byte << 16
        for _ in range(8):
            crc <<= 1
            if crc & 0x1000000:
                crc ^= POLY_LOW
        table.append(crc & MASK)
    return tuple(table)


CRC_TABLE = _build_table()


def _as_bits(bits):
    return np.asarray(bits, dtype=np.uint8).ravel()


def crc24q_bitwise(bits):
    """Bit-serial long division, one input bit per step."""
    crc = 0
    for bit in _as_bits(bits):
        top = (crc >> 23) & 1
        crc = (crc << 1) & MASK
        if top ^ int(bit):
            crc ^= POLY_LOW
    return crc


def crc24q_compute(bits):
    """Table-driven over whole bytes with a bit-serial tail."""
    bits = _as_bits(bits)
    whole = len(bits) // 8 * 8
    crc = 0
    if whole:
        for byte in np.packbits(bits[:whole]):
            crc = ((crc << 8) & MASK) ^ CRC_TABLE[((crc >> 16) ^ int(byte)) & 0xFF]
    for bit in bits[whole:]:
        top = (crc >> 23) & 1
        crc = (crc << 1) & MASK
        if top ^ int(bit):
            crc ^= POLY_LOW
    return crc


def crc24q_bytes(data):
    """CRC over a byte string, as RTCM framing uses it."""
    crc = 0
    for byte in data:
        crc = ((crc << 8) & MASK) ^ CRC_TABLE[((crc >> 16) ^ byte) & 0xFF]
    return crc


def crc_to_bits(crc):
    return np.array([(crc >> (CRC_BITS - 1 - i)) & 1 for i in range(CRC_BITS)], dtype=np.uint8)


def crc24q_verify(message_bits, crc):
    """True when the body followed by its CRC divides evenly."""
    body = _as_bits(message_bits)
    if len(body) != BODY_BITS:
        raise CrcError(f"message body must be {BODY_BITS} bits, got {len(body)}")
    crc = int(crc)
    if not 0 <= crc <= MASK:
        raise CrcError(f"CRC value {crc:#x} does not fit 24 bits")
    return crc24q_compute(np.concatenate([body, crc_to_bits(crc)])) == 0


def crc24q_check_frame(frame_bits):
    """Verify a 486-bit frame body (type, data, crc)."""
    frame = _as_bits(frame_bits)
    if len(frame) != FRAME_BITS:
        raise CrcError(f"frame must be {FRAME_BITS} bits, got {len(frame)}")
    return crc24q_compute(frame) == 0


# ==================== GF(2) POLYNOMIALS ====================

def gf2_poly_divmod(dividend, divisor):
    """Quotient and remainder of two GF(2) polynomials held as ints."""
    if divisor == 0:
        raise ZeroDivisionError("division by the zero polynomial")
    quotient = 0
    shift = dividend.bit_length() - divisor.bit_length()
    while shift >= 0 and dividend:
        if dividend >> (shift + divisor.bit_length() - 1) & 1:
            quotient |= 1 << shift
            dividend ^= divisor << shift
        shift -= 1
    return quotient, dividend
