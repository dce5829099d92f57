import numpy as np
import pytest

from gf64 import SIZE
from ldpc6481 import (
    K_INFO,
    N_COLS,
    N_ROWS,
    LdpcError,
    ParityCheckMatrix,
    ReceivedSequence,
    bits_to_symbols,
    decode,
    decode_soft_bits,
    derive_generator,
    encode,
    gf_matmul,
    load_parity_matrix,
    parse_parity_text,
    symbols_to_bits,
    syndrome,
    write_parity_file,
)


def _random_message(rng):
    return rng.integers(0, SIZE, K_INFO).astype(np.uint8)


def test_synthetic_matrix_shape(code_pair):
    h, _ = code_pair
    dense = h.dense()
    assert dense.shape == (N_ROWS, N_COLS)
    assert ((dense > 0).sum(axis=0) == 3).all()


def test_generator_is_systematic_and_orthogonal(code_pair):
    h, g = code_pair
    assert (g.matrix[:, :K_INFO] == np.eye(K_INFO, dtype=np.uint8)).all()
    assert not gf_matmul(g.matrix, h.dense().T).any()


def test_encode_gives_codewords(code_pair, rng):
    h, g = code_pair
    for _ in range(20):
        message = _random_message(rng)
        codeword = encode(message, g)
        assert (codeword[:K_INFO] == message).all()
        assert not syndrome(codeword, h).any()


def test_encode_is_linear(code_pair, rng):
    _, g = code_pair
    for _ in range(50):
        a, b = _random_message(rng), _random_message(rng)
        assert (encode(a ^ b, g) == encode(a, g) ^ encode(b, g)).all()


def test_any_single_symbol_change_breaks_the_syndrome(code_pair, rng):
    h, g = code_pair
    codeword = encode(_random_message(rng), g)
    for position in range(N_COLS):
        corrupted = codeword.copy()
        corrupted[position] ^= int(rng.integers(1, SIZE))
        assert syndrome(corrupted, h).any()


def test_all_zero_message(code_pair):
    h, g = code_pair
    codeword = encode(np.zeros(K_INFO, dtype=np.uint8), g)
    assert not codeword.any()
    result = decode(ReceivedSequence.from_codeword(codeword), h)
    assert result.converged
    assert result.iterations_used == 1
    assert not result.message.any()


@pytest.mark.slow
def test_noiseless_round_trip(code_pair, rng):
    h, g = code_pair
    iterations = []
    for _ in range(1000):
        message = _random_message(rng)
        result = decode(ReceivedSequence.from_codeword(encode(message, g)), h)
        assert result.converged
        assert (result.message == message).all()
        iterations.append(result.iterations_used)
    assert set(iterations) == {1}


@pytest.mark.slow
def test_single_symbol_errors_are_corrected(code_pair, rng):
    h, g = code_pair
    successes = 0
    trials = 1000
    for _ in range(trials):
        message = _random_message(rng)
        codeword = encode(message, g)
        soft = 1.0 - 2.0 * symbols_to_bits(codeword)
        position = int(rng.integers(0, N_COLS))
        wrong = codeword[position] ^ int(rng.integers(1, SIZE))
        wrong_bits = symbols_to_bits([wrong])
        soft[position * 6:(position + 1) * 6] = 1.0 - 2.0 * wrong_bits
        result = decode_soft_bits(soft, h)
        if result.converged:
            assert not syndrome(result.codeword, h).any()
        if result.converged and (result.message == message).all():
            successes += 1
    assert successes / trials >= 0.99


def test_converged_implies_zero_syndrome(code_pair, rng):
    h, g = code_pair
    for _ in range(20):
        codeword = encode(_random_message(rng), g)
        soft = 1.0 - 2.0 * symbols_to_bits(codeword) + rng.normal(0, 0.6, N_COLS * 6)
        result = decode_soft_bits(soft, h)
        if result.converged:
            assert not syndrome(result.codeword, h).any()
        else:
            assert result.iterations_used == 10


def test_garbage_input_fails_without_raising(code_pair, rng):
    h, _ = code_pair
    result = decode_soft_bits(rng.normal(0, 1, N_COLS * 6), h, itr_max=3)
    assert result.iterations_used <= 3
    assert result.message.shape == (K_INFO,)


def test_itr_max_must_be_positive(code_pair, rng):
    h, g = code_pair
    with pytest.raises(LdpcError):
        decode(ReceivedSequence.from_codeword(encode(_random_message(rng), g)), h, itr_max=0)


def test_bit_symbol_conversion_is_msb_first():
    assert bits_to_symbols([1, 0, 0, 0, 0, 0]).tolist() == [32]
    assert symbols_to_bits([1]).tolist() == [0, 0, 0, 0, 0, 1]
    with pytest.raises(LdpcError):
        bits_to_symbols([1, 0, 1])


def test_singular_parity_half_reports_pivot_row():
    # columns K_INFO.. carry only row 0, so the parity half is rank 1
    entries = [(r, r % K_INFO, 1) for r in range(N_ROWS)] + [(0, K_INFO + c, 1) for c in range(N_COLS - K_INFO)]
    h = ParityCheckMatrix(tuple(entries))
    with pytest.raises(LdpcError) as info:
        derive_generator(h)
    assert info.value.pivot_row == 1
    assert "parity half" in str(info.value)


def test_matrix_validation():
    with pytest.raises(LdpcError):
        ParityCheckMatrix(((0, N_COLS, 1),))
    with pytest.raises(LdpcError):
        ParityCheckMatrix(((0, 0, 64),))
    with pytest.raises(LdpcError):
        ParityCheckMatrix(((0, 0, 1), (0, 0, 2)))


def test_index_element_loading(code_pair):
    h, _ = code_pair
    rows = {}
    for r, c, v in sorted(h.entries):
        rows.setdefault(r, []).append((c, v))
    index_spec = "\n".join(" ".join(str(c + 1) for c, _ in rows[r]) for r in range(N_ROWS))
    element_spec = "\n".join(" ".join(str(v) for _, v in rows[r]) for r in range(N_ROWS))
    loaded = load_parity_matrix(index_spec, element_spec, one_based=True)
    assert (loaded.dense() == h.dense()).all()


def test_index_element_row_count_mismatch():
    with pytest.raises(LdpcError):
        load_parity_matrix("1 2 3", "1 2 3")


def test_parity_file_round_trip(code_pair, tmp_path):
    h, _ = code_pair
    path = tmp_path / "h.txt"
    write_parity_file(h, path)
    assert (parse_parity_text(path.read_text()).dense() == h.dense()).all()


def test_parity_file_bad_header():
    with pytest.raises(LdpcError):
        parse_parity_text("ldpc-h 80 162\n0 0 1\n")
