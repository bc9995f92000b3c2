import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqsat import codec
from eqsat.cipher import Ciphertext, encrypt_message
from eqsat.codec import (
    CT_HEADER_SIZE,
    HEADER_SIZE,
    deserialize_ciphertext,
    deserialize_private_key,
    deserialize_public_key,
    export_dimacs,
    literal_field_width,
    pack_fields,
    parse_dimacs,
    payload_sizes,
    serialize_ciphertext,
    serialize_private_key,
    serialize_public_key,
    unpack_fields,
)
from eqsat.errors import ContractError, FormatError
from eqsat.keygen import generate_keypair, generate_keypair_divided
from eqsat.model import Mode, Params, PrivateKey, PublicKey
from eqsat.rng import deterministic

from conftest import FULL_M2, FULL_M3, SMALL_M4, TINY

FULL_1024 = FULL_M2.replace(n=1024, e=1536)


def test_header_layout():
    assert HEADER_SIZE == 30 and CT_HEADER_SIZE == 38
    sk = PrivateKey([True, False, True], TINY.replace(n=3, k=1, m=1, e=1))
    data = serialize_private_key(sk)
    assert data[:4] == b"EQSK" and data[4] == 1 and data[5] == 2
    assert data[HEADER_SIZE:] == bytes([0b10100000])


@pytest.mark.parametrize("params, sk, pk", [(FULL_M2, 64, 25600), (FULL_1024, 128, 56320)])
def test_key_sizes(params, sk, pk):
    sizes = payload_sizes(params)
    assert sizes["sk"] == sk and sizes["pk"] == pk


def test_full_key_serializes_to_formula_size(full_keys):
    pk, sk = full_keys
    assert len(serialize_public_key(pk)) - HEADER_SIZE == 25600
    assert len(serialize_private_key(sk)) - HEADER_SIZE == 64


def test_ciphertext_sizes():
    assert payload_sizes(FULL_M2)["ct_block"] == 512
    assert payload_sizes(FULL_M3)["ct_message"] == 32768
    assert payload_sizes(FULL_M2)["ct_message"] == 512 * 256


@pytest.mark.parametrize("n, width", [(8, 4), (9, 5), (16, 5), (512, 10), (1024, 11), (1, 1)])
def test_literal_width(n, width):
    assert literal_field_width(n) == width


def test_literal_field_encoding():
    # width 4 at n=8: code = (variable - 1) * 2 + negated
    codes = np.array([0, 3, 4, 7])
    data = pack_fields(codes, 4)
    assert data == bytes([0b00000011, 0b01000111])
    assert unpack_fields(data, 4, 4).tolist() == codes.tolist()


def test_nonzero_padding_rejected():
    with pytest.raises(FormatError):
        unpack_fields(bytes([0b00010001]), 1, 3)


def test_empty_ciphertext_is_header_only(tiny_keys):
    pk, sk = tiny_keys
    data = serialize_ciphertext(encrypt_message(pk, b"", rng=deterministic(0)))
    assert len(data) == CT_HEADER_SIZE
    assert deserialize_ciphertext(data).counts.shape == (0, 16)


def test_overflowing_counts_are_a_contract_error(tiny_keys):
    ct = encrypt_message(tiny_keys[0], b"\x01", rng=deterministic(0))
    counts = ct.counts.copy()
    counts[0, 0] = 16
    with pytest.raises(ContractError):
        serialize_ciphertext(Ciphertext(ct.params, 8, counts))


def test_bare_private_key():
    sk = PrivateKey([True] * 9)
    data = serialize_private_key(sk)
    assert data[5] == 0
    back = deserialize_private_key(data)
    assert back == sk and back.params is None


def test_round_trip_random_objects():
    rng = deterministic(99)
    small = [TINY, Params(k=2, n=16, m=4, e=12, b=2, mode=Mode.M3),
             Params(k=3, n=9, m=3, e=4), SMALL_M4]
    for i in range(1000):
        params = small[i % len(small)]
        if params.mode is Mode.M4:
            pk, sk = generate_keypair_divided(params, rng)
        else:
            pk, sk = generate_keypair(params, rng)
        assert deserialize_public_key(serialize_public_key(pk)) == pk
        assert deserialize_private_key(serialize_private_key(sk)) == sk
        ct = encrypt_message(pk, rng.bytes(int(rng.integers(0, 6))), rng=rng, params=params)
        assert deserialize_ciphertext(serialize_ciphertext(ct)) == ct


def test_m4_public_key_round_trip(m4_keys):
    pk, _ = m4_keys
    data = serialize_public_key(pk)
    assert len(data) - HEADER_SIZE == payload_sizes(SMALL_M4)["pk"]
    back = deserialize_public_key(data)
    assert back == pk and back.groups.tolist() == pk.groups.tolist()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 255), max_size=40), st.integers(1, 16))
def test_pack_unpack_property(values, width):
    values = [v % (1 << width) for v in values]
    data = pack_fields(np.array(values, dtype=np.int64), width)
    assert len(data) == -(-len(values) * width // 8)
    assert unpack_fields(data, len(values), width).tolist() == values


# --- malformed input ----------------------------------------------------------

DESERIALIZERS = [deserialize_private_key, deserialize_public_key, deserialize_ciphertext]


@pytest.mark.parametrize("fn", DESERIALIZERS)
def test_random_bytes_raise_format_error(fn):
    rng = deterministic(7)
    for _ in range(500):
        data = rng.bytes(int(rng.integers(0, 80)))
        with pytest.raises(FormatError):
            fn(data)


@pytest.mark.parametrize("fn", DESERIALIZERS)
def test_non_bytes_rejected(fn):
    with pytest.raises(FormatError):
        fn("EQPK")


def test_truncation_and_mutation(tiny_keys):
    pk, sk = tiny_keys
    ct = encrypt_message(pk, b"hi", rng=deterministic(0))
    for fn, data in ((deserialize_public_key, serialize_public_key(pk)),
                     (deserialize_private_key, serialize_private_key(sk)),
                     (deserialize_ciphertext, serialize_ciphertext(ct))):
        for cut in range(len(data)):
            with pytest.raises(FormatError):
                fn(data[:cut])
        with pytest.raises(FormatError):
            fn(data + b"\x00")
        bad_version = bytearray(data)
        bad_version[4] = 9
        with pytest.raises(FormatError):
            fn(bytes(bad_version))
        bad_magic = b"XXXX" + data[4:]
        with pytest.raises(FormatError):
            fn(bad_magic)


def test_bit_flips_never_escape(tiny_keys):
    pk, sk = tiny_keys
    rng = deterministic(3)
    data = serialize_public_key(pk)
    for _ in range(500):
        mutated = bytearray(data)
        pos = int(rng.integers(0, len(data)))
        mutated[pos] ^= 1 << int(rng.integers(0, 8))
        try:
            deserialize_public_key(bytes(mutated))
        except FormatError:
            pass


def test_huge_declared_sizes_do_not_allocate():
    header = codec._HEADER.pack(b"EQCT", 1, 2, 4, 20, 512, 1, 768, 4)
    data = header + (2**62).to_bytes(8, "little")
    with pytest.raises(FormatError):
        deserialize_ciphertext(data)
    header = codec._HEADER.pack(b"EQSK", 1, 0, 0, 0, 2**32 - 1, 0, 0, 0)
    with pytest.raises(FormatError):
        deserialize_private_key(header)


def test_duplicate_variable_in_clause_rejected(tiny_keys):
    pk, _ = tiny_keys
    clauses = pk.clauses.copy()
    clauses[0, 1] = clauses[0, 0] ^ 1  # x and not x in one clause
    data = codec._header(codec.PK_MAGIC, pk.params, pk.n) + pack_fields(clauses, 4)
    with pytest.raises(FormatError):
        deserialize_public_key(data)


# --- DIMACS -----------------------------------------------------------------

def fixed_tiny_key():
    # literal codes for x1 ¬x2 x3 ¬x4 and friends, n=8, k=2, m=2
    rows = [[0, 3, 4, 7], [1, 2, 5, 6], [8, 11, 12, 15], [9, 10, 13, 14],
            [0, 3, 8, 11], [1, 2, 9, 10], [4, 7, 12, 15], [5, 6, 13, 14]]
    return PublicKey(TINY, np.array(rows))


def test_dimacs_text():
    text = export_dimacs(fixed_tiny_key())
    lines = text.splitlines()
    assert "p cnf 8 8" in lines
    assert "1 -2 3 -4 0" in lines
    assert all(line.startswith("c") for line in lines[:lines.index("p cnf 8 8")])


def test_dimacs_round_trip(tiny_keys, m4_keys):
    for pk in (tiny_keys[0], m4_keys[0]):
        num_vars, clauses, labels = parse_dimacs(export_dimacs(pk))
        assert num_vars == pk.n
        codes = [sorted((abs(x) - 1) * 2 + (x < 0) for x in c) for c in clauses]
        assert codes == pk.clauses.tolist()
        if pk.divided:
            assert labels == ["K_TRUE"] * (len(pk) // 2) + ["K_PLUS1_TRUE"] * (len(pk) // 2)
        else:
            assert labels == [None] * len(pk)


@pytest.mark.parametrize("text", ["", "1 2 0\n", "p cnf 2 1\n1 2\n", "p cnf 2 2\n1 2 0\n",
                                  "p cnf 2 1\n1 x 0\n", "p dnf 2 1\n1 0\n"])
def test_dimacs_parse_errors(text):
    with pytest.raises(FormatError):
        parse_dimacs(text)
