"""
Utility functions for reports and product files
"""
from io import BytesIO

import numpy as np
import pandas as pd

SHEET_NAME_MAX = 31


def format_number(value):
    """Format number with commas"""
    if value is None:
        return "0"
    try:
        return f"{float(value):,.0f}"
    except (TypeError, ValueError):
        return "0"


def format_percentage(value):
    """Format as percentage with two decimals"""
    if value is None:
        return "0.00%"
    try:
        return f"{float(value):.2f}%"
    except (TypeError, ValueError):
        return "0.00%"


def format_epoch(seconds):
    """Seconds of day as HH:MM:SS"""
    if seconds is None:
        return "--:--:--"
    seconds = int(seconds) % 86400
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"


def bits_to_hex(bits):
    """Bit array as hex, zero-padded on the right to whole bytes"""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    return np.packbits(bits).tobytes().hex()


def hex_to_bits(text, length):
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    return np.unpackbits(raw)[:length].astype(np.uint8)


def export_to_excel(frames, path=None):
    """
    Write one sheet per DataFrame. frames: {sheet name: DataFrame}.
    Returns the bytes buffer when no path is given.
    """
    output = path if path is not None else BytesIO()
    with pd.ExcelWriter(output, engine="openpyxl") as writer:
        for name, frame in frames.items():
            frame.to_excel(writer, index=False, sheet_name=name[:SHEET_NAME_MAX])
    if path is None:
        output.seek(0)
    return output
