"""
64-ary LDPC(162,81)
Parity-check matrix loading, generator derivation, systematic encoding,
syndrome checks and symbol-domain min-sum decoding over GF(64).

Codewords are laid out information first: positions 0..80 carry the
message, 81..161 the parity.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from gf64 import BITS_PER_SYMBOL, INV_TABLE, MUL_TABLE, SIZE

_logger = logging.getLogger(__name__)

N_ROWS = 81
N_COLS = 162
K_INFO = 81
INFO_FIRST = True
ITR_MAX_DEFAULT = 10
SYNTHETIC_SEED = 6481
FILE_HEADER = "ldpc-h"

_BIT_WEIGHTS = 1 << np.arange(BITS_PER_SYMBOL - 1, -1, -1)
# _SYMBOL_BITS[a, i] is bit i (transmission order) of symbol a
_SYMBOL_BITS = ((np.arange(SIZE)[:, None] & _BIT_WEIGHTS[None, :]) > 0).astype(np.int8)
_BIT_SIGNS = 1 - 2 * _SYMBOL_BITS
_XOR_INDEX = np.arange(SIZE)[:, None] ^ np.arange(SIZE)[None, :]
_FORCED_COST = 1e6


class LdpcError(ValueError):
    """Malformed parity-check data or a rank-deficient matrix."""

    def __init__(self, message, pivot_row=None):
        super().__init__(message)
        self.pivot_row = pivot_row


# ==================== TYPES ====================

@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Sparse H: (row, col, element) triples, elements nonzero."""
    entries: tuple
    rows: int = N_ROWS
    cols: int = N_COLS

    def __post_init__(self):
        seen = set()
        for row, col, value in self.entries:
            if not (0 <= row < self.rows and 0 <= col < self.cols):
                raise LdpcError(f"entry ({row}, {col}) outside {self.rows}x{self.cols}")
            if not 1 <= value < SIZE:
                raise LdpcError(f"element {value} at ({row}, {col}) must be in 1..63")
            if (row, col) in seen:
                raise LdpcError(f"duplicate entry at ({row}, {col})")
            seen.add((row, col))

    def dense(self):
        matrix = np.zeros((self.rows, self.cols), dtype=np.uint8)
        for row, col, value in self.entries:
            matrix[row, col] = value
        return matrix

    @classmethod
    def from_dense(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.uint8)
        rows, cols = np.nonzero(matrix)
        entries = tuple((int(r), int(c), int(matrix[r, c])) for r, c in zip(rows, cols))
        return cls(entries, rows=matrix.shape[0], cols=matrix.shape[1])

    @cached_property
    def graph(self):
        return _DecoderGraph(self)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Dense systematic G = [I | P]."""
    matrix: np.ndarray

    @property
    def parity_block(self):
        return self.matrix[:, K_INFO:]


@dataclass
class ReceivedSequence:
    """Per-position log reliabilities; the most likely symbol has the largest entry."""
    reliabilities: np.ndarray

    def __post_init__(self):
        self.reliabilities = np.asarray(self.reliabilities, dtype=np.float64)
        if self.reliabilities.shape != (N_COLS, SIZE):
            raise LdpcError(f"reliabilities must be {N_COLS}x{SIZE}, got {self.reliabilities.shape}")
        if not np.all(np.isfinite(self.reliabilities)):
            raise LdpcError("reliabilities must be finite")

    @classmethod
    def from_soft_bits(cls, soft_bits):
        """Lift signed bit soft values (positive = bit 0) into symbol reliabilities."""
        soft = np.asarray(soft_bits, dtype=np.float64)
        if soft.size != N_COLS * BITS_PER_SYMBOL:
            raise LdpcError(f"expected {N_COLS * BITS_PER_SYMBOL} soft bits, got {soft.size}")
        return cls(soft.reshape(N_COLS, BITS_PER_SYMBOL) @ _BIT_SIGNS.T.astype(np.float64))

    @classmethod
    def from_codeword(cls, codeword, confidence=1.0):
        bits = symbols_to_bits(codeword)
        return cls.from_soft_bits(confidence * (1.0 - 2.0 * bits))


@dataclass
class DecodeResult:
    message: np.ndarray
    iterations_used: int
    converged: bool
    codeword: np.ndarray = field(repr=False, default=None)


# ==================== LOADING ====================

def _spec_rows(spec):
    rows = []
    for line in spec.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([int(tok) for tok in line.replace(",", " ").split()])
    return rows


def load_parity_matrix(index_spec, element_spec, one_based=False):
    """
    Build H from an index matrix (column positions per row) and an element
    matrix (GF(64) values per row), one text line per row.
    """
    index_rows = _spec_rows(index_spec)
    element_rows = _spec_rows(element_spec)
    if len(index_rows) != N_ROWS or len(element_rows) != N_ROWS:
        raise LdpcError(
            f"expected {N_ROWS} rows, got {len(index_rows)} index / {len(element_rows)} element rows"
        )
    entries = []
    offset = 1 if one_based else 0
    for row, (cols, values) in enumerate(zip(index_rows, element_rows)):
        if len(cols) != len(values):
            raise LdpcError(f"row {row}: {len(cols)} indices but {len(values)} elements")
        for col, value in zip(cols, values):
            if value == 0:
                raise LdpcError(f"row {row}: element 0 at declared nonzero column {col}")
            entries.append((row, col - offset, value))
    return ParityCheckMatrix(tuple(entries))


def parse_parity_text(text):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise LdpcError("empty parity-check file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != FILE_HEADER:
        raise LdpcError(f"bad header {lines[0]!r}, expected '{FILE_HEADER} {N_ROWS} {N_COLS}'")
    if (int(header[1]), int(header[2])) != (N_ROWS, N_COLS):
        raise LdpcError(f"dimension mismatch: file declares {header[1]}x{header[2]}")
    entries = []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise LdpcError(f"line {number}: expected 'row col element', got {line!r}")
        entries.append(tuple(int(p) for p in parts))
    return ParityCheckMatrix(tuple(entries))


def read_parity_file(path):
    h = parse_parity_text(Path(path).read_text())
    _logger.info("Loaded parity-check matrix %s (%d nonzeros)", path, len(h.entries))
    return h


def write_parity_file(h, path):
    lines = [f"{FILE_HEADER} {h.rows} {h.cols}"]
    lines += [f"{r} {c} {v}" for r, c, v in sorted(h.entries)]
    Path(path).write_text("\n".join(lines) + "\n")


# ==================== SYNTHETIC MATRIX ====================

def _regular_pattern(rng, col_weight=3):
    """Column-weight-3 pattern with no 4-cycles, 3 entries per row in each half."""
    used_pairs = set()
    pattern = []
    for half in (range(K_INFO, N_COLS), range(K_INFO)):
        degree = np.zeros(N_ROWS, dtype=int)
        for col in half:
            order = np.lexsort((rng.random(N_ROWS), degree))
            chosen = []
            for row in order:
                if degree[row] >= col_weight + 1:
                    continue
                if any((min(row, r), max(row, r)) in used_pairs for r in chosen):
                    continue
                chosen.append(int(row))
                if len(chosen) == col_weight:
                    break
            if len(chosen) < col_weight:
                return None
            for i, a in enumerate(chosen):
                degree[a] += 1
                for b in chosen[i + 1:]:
                    used_pairs.add((min(a, b), max(a, b)))
            pattern.extend((row, col) for row in chosen)
    return pattern


def synthetic_parity_matrix(seed=SYNTHETIC_SEED, max_attempts=64):
    """Regular column-weight-3 H whose parity half is invertible."""
    rng = np.random.default_rng(seed)
    for attempt in range(max_attempts):
        pattern = _regular_pattern(rng)
        if pattern is None:
            continue
        for _ in range(8):
            values = rng.integers(1, SIZE, size=len(pattern))
            h = ParityCheckMatrix(tuple((r, c, int(v)) for (r, c), v in zip(pattern, values)))
            try:
                derive_generator(h)
            except LdpcError:
                continue
            _logger.debug("Synthetic H found after %d pattern attempts", attempt + 1)
            return h
    raise LdpcError(f"no invertible synthetic matrix within {max_attempts} attempts")


# ==================== GENERATOR ====================

def _gf_solve(left, right, name="matrix"):
    """Reduce [left | right] until left is the identity; returns left^-1 right."""
    a = np.concatenate([left, right], axis=1).astype(np.uint8)
    n = left.shape[0]
    for pivot in range(n):
        candidates = np.nonzero(a[pivot:, pivot])[0]
        if candidates.size == 0:
            raise LdpcError(f"{name} is singular at pivot row {pivot}", pivot_row=pivot)
        swap = pivot + int(candidates[0])
        if swap != pivot:
            a[[pivot, swap]] = a[[swap, pivot]]
        a[pivot] = MUL_TABLE[INV_TABLE[a[pivot, pivot]], a[pivot]]
        factors = a[:, pivot].copy()
        factors[pivot] = 0
        rows = np.nonzero(factors)[0]
        if rows.size:
            a[rows] ^= MUL_TABLE[factors[rows][:, None], a[pivot][None, :]]
    return a[:, n:]


def derive_generator(h):
    """Systematic G with G H^T = 0, information symbols first."""
    dense = h.dense()
    info, parity = dense[:, :K_INFO], dense[:, K_INFO:]
    # parity symbols = block @ message
    block = _gf_solve(parity, info, f"parity half of H (columns {K_INFO}-{N_COLS - 1})")
    matrix = np.zeros((K_INFO, N_COLS), dtype=np.uint8)
    matrix[:, :K_INFO] = np.eye(K_INFO, dtype=np.uint8)
    matrix[:, K_INFO:] = block.T
    matrix.setflags(write=False)
    return GeneratorMatrix(matrix)


def gf_matmul(a, b):
    """Dense matrix product over GF(64)."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    products = MUL_TABLE[a[:, :, None], b[None, :, :]]
    return np.bitwise_xor.reduce(products, axis=1)


# ==================== ENCODE / CHECK ====================

def encode(message, g):
    message = np.asarray(message, dtype=np.uint8)
    if message.shape != (K_INFO,):
        raise LdpcError(f"message must hold {K_INFO} symbols, got {message.shape}")
    return np.bitwise_xor.reduce(MUL_TABLE[message[:, None], g.matrix], axis=0)


def syndrome(codeword, h):
    codeword = np.asarray(codeword, dtype=np.uint8)
    graph = h.graph
    out = np.zeros(h.rows, dtype=np.uint8)
    np.bitwise_xor.at(out, graph.rows, MUL_TABLE[graph.values, codeword[graph.cols]])
    return out


def bits_to_symbols(bits):
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % BITS_PER_SYMBOL:
        raise LdpcError(f"bit count {bits.size} is not a multiple of {BITS_PER_SYMBOL}")
    return (bits.reshape(-1, BITS_PER_SYMBOL) @ _BIT_WEIGHTS).astype(np.uint8)


def symbols_to_bits(symbols):
    symbols = np.asarray(symbols, dtype=np.uint8).ravel()
    return _SYMBOL_BITS[symbols].astype(np.uint8).ravel()


# ==================== DECODER ====================

class _DecoderGraph:
    """Edge arrays and per-degree check groups for one H."""

    def __init__(self, h):
        ordered = sorted(h.entries)
        self.rows = np.array([e[0] for e in ordered], dtype=np.intp)
        self.cols = np.array([e[1] for e in ordered], dtype=np.intp)
        self.values = np.array([e[2] for e in ordered], dtype=np.uint8)
        self.n_cols = h.cols
        # weighted value x = h*c, so incoming messages are read at h^-1 x
        self.perm_in = MUL_TABLE[INV_TABLE[self.values]].astype(np.intp)
        self.perm_out = MUL_TABLE[self.values].astype(np.intp)
        starts = np.searchsorted(self.rows, np.arange(h.rows))
        ends = np.searchsorted(self.rows, np.arange(h.rows), side="right")
        groups = {}
        for row in range(h.rows):
            degree = int(ends[row] - starts[row])
            if degree:
                groups.setdefault(degree, []).append(np.arange(starts[row], ends[row]))
        self.groups = {d: np.stack(edges) for d, edges in groups.items()}


def _min_convolve(a, b):
    """(a (+) b)[x] = min_y a[y] + b[x ^ y], batched on the leading axis."""
    return (a[:, :, None] + b[:, _XOR_INDEX]).min(axis=1)


def _check_update(graph, q):
    weighted = np.take_along_axis(q, graph.perm_in, axis=1)
    out = np.empty_like(weighted)
    for degree, edges in graph.groups.items():
        msgs = weighted[edges]                        # (checks, degree, 64)
        if degree == 1:
            # a lone neighbour is forced to zero
            forced = np.full_like(msgs, _FORCED_COST)
            forced[:, :, 0] = 0.0
            out[edges] = forced
            continue
        forward = [msgs[:, 0]]
        for k in range(1, degree - 1):
            forward.append(_min_convolve(forward[-1], msgs[:, k]))
        backward = [msgs[:, degree - 1]]
        for k in range(degree - 2, 0, -1):
            backward.append(_min_convolve(msgs[:, k], backward[-1]))
        backward.reverse()                            # backward[k] covers k+1..d-1
        result = np.empty_like(msgs)
        result[:, 0] = backward[0]
        result[:, degree - 1] = forward[degree - 2]
        for k in range(1, degree - 1):
            result[:, k] = _min_convolve(forward[k - 1], backward[k])
        out[edges] = result
    out = np.take_along_axis(out, graph.perm_out, axis=1)
    return out - out.min(axis=1, keepdims=True)


def decode(y, h, itr_max=ITR_MAX_DEFAULT):
    """
    Min-sum decoding in the cost domain. The initial hard decision counts
    as iteration 1; failure is returned with converged=False.
    """
    if itr_max < 1:
        raise LdpcError(f"itr_max must be >= 1, got {itr_max}")
    graph = h.graph
    reliab = y.reliabilities
    channel = reliab.max(axis=1, keepdims=True) - reliab
    hard = channel.argmin(axis=1).astype(np.uint8)
    iteration = 1
    converged = not syndrome(hard, h).any()
    if not converged:
        q = channel[graph.cols]
        while iteration < itr_max:
            iteration += 1
            r = _check_update(graph, q)
            total = channel.copy()
            np.add.at(total, graph.cols, r)
            hard = total.argmin(axis=1).astype(np.uint8)
            if not syndrome(hard, h).any():
                converged = True
                break
            q = total[graph.cols] - r
            q -= q.min(axis=1, keepdims=True)
    assert not converged or not syndrome(hard, h).any()
    return DecodeResult(
        message=hard[:K_INFO].copy(),
        iterations_used=iteration,
        converged=converged,
        codeword=hard,
    )


def decode_soft_bits(soft_bits, h, itr_max=ITR_MAX_DEFAULT):
    """Decode 972 code-symbol soft values straight from framing."""
    return decode(ReceivedSequence.from_soft_bits(soft_bits), h, itr_max)


@lru_cache(maxsize=4)
def synthetic_code(seed=SYNTHETIC_SEED):
    """(H, G) pair for the built-in synthetic matrix."""
    h = synthetic_parity_matrix(seed)
    return h, derive_generator(h)


def load_code(path=None):
    """(H, G) from a parity-check file, or the synthetic pair when path is empty."""
    if not path:
        return synthetic_code()
    h = read_parity_file(path)
    return h, derive_generator(h)
