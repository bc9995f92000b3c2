"""Binary key/ciphertext formats and DIMACS export.

Every file starts with a fixed header::

    magic (4 bytes) | version (u8) | mode (u8) | k m n b e q (u32 LE each)

ciphertexts append ``message_bit_length`` (u64 LE). Payloads are bit-packed
MSB-first and zero-padded to a whole byte. A private key written without
parameters stores zeros in every header field except ``n`` (mode 0).
"""

from __future__ import annotations

import struct

import numpy as np

from .cipher import Ciphertext, block_count
from .errors import ContractError, EqSatError, FormatError
from .model import GroupLabel, Mode, Params, PrivateKey, PublicKey

VERSION = 1
PK_MAGIC = b"EQPK"
SK_MAGIC = b"EQSK"
CT_MAGIC = b"EQCT"

_HEADER = struct.Struct("<4sBB6I")
_BIT_LENGTH = struct.Struct("<Q")
_GROUP_SIZES = struct.Struct("<2I")
HEADER_SIZE = _HEADER.size
CT_HEADER_SIZE = _HEADER.size + _BIT_LENGTH.size


def literal_field_width(n: int) -> int:
    """Bits per packed literal: ``ceil(log2 n)`` for the variable plus a sign bit."""
    return (n - 1).bit_length() + 1


def pack_fields(values: np.ndarray, width: int) -> bytes:
    values = np.asarray(values, dtype=np.uint64).reshape(-1)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1)).tobytes()


def unpack_fields(data: bytes, count: int, width: int) -> np.ndarray:
    """Inverse of `pack_fields`; the caller has checked the length already."""
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits[count * width:].any():
        raise FormatError("nonzero padding bits after the last field")
    fields = bits[:count * width].reshape(count, width).astype(np.int64)
    return fields @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64))


def _header(magic: bytes, params: Params | None, n: int) -> bytes:
    if params is None:
        return _HEADER.pack(magic, VERSION, 0, 0, 0, n, 0, 0, 0)
    p = params
    return _HEADER.pack(magic, VERSION, int(p.mode), p.k, p.m, p.n, p.b, p.e, p.q)


def _read_header(data: bytes, magic: bytes) -> tuple[int, tuple[int, ...]]:
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise FormatError("expected bytes")
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated header: {len(data)} < {_HEADER.size} bytes")
    found, version, mode, *fields = _HEADER.unpack_from(data)
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    return mode, tuple(fields)


def _params_from(mode: int, fields: tuple[int, ...]) -> Params:
    k, m, n, b, e, q = fields
    try:
        return Params(k=k, n=n, m=m, e=e, b=b, q=q, mode=Mode(mode))
    except (EqSatError, ValueError) as exc:
        raise FormatError(f"invalid header parameters: {exc}") from exc


def _expect_length(data: bytes, offset: int, payload: int) -> bytes:
    if len(data) - offset != payload:
        raise FormatError(f"payload is {len(data) - offset} bytes, expected {payload}")
    return bytes(data[offset:])


def serialize_private_key(sk: PrivateKey, params: Params | None = None) -> bytes:
    params = params or sk.params
    return _header(SK_MAGIC, params, sk.n) + np.packbits(sk.assignment).tobytes()


def deserialize_private_key(data: bytes) -> PrivateKey:
    mode, fields = _read_header(data, SK_MAGIC)
    n = fields[2]
    if mode == 0:
        if any(fields[i] for i in (0, 1, 3, 4, 5)):
            raise FormatError("bare private key header must zero every field except n")
        params = None
    else:
        params = _params_from(mode, fields)
    if n < 1:
        raise FormatError("private key needs n >= 1")
    payload = _expect_length(data, _HEADER.size, -(-n // 8))
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    if bits[n:].any():
        raise FormatError("nonzero padding bits after the last variable")
    return PrivateKey(bits[:n].astype(bool), params)


def serialize_public_key(pk: PublicKey) -> bytes:
    out = [_header(PK_MAGIC, pk.params, pk.n)]
    if pk.divided:
        size = len(pk) // 2
        out.append(_GROUP_SIZES.pack(size, size))
    out.append(pack_fields(pk.clauses, literal_field_width(pk.n)))
    return b"".join(out)


def deserialize_public_key(data: bytes) -> PublicKey:
    mode, fields = _read_header(data, PK_MAGIC)
    params = _params_from(mode, fields)
    offset = _HEADER.size
    groups = None
    if params.mode is Mode.M4:
        if len(data) < offset + _GROUP_SIZES.size:
            raise FormatError("truncated group sizes")
        k_size, k1_size = _GROUP_SIZES.unpack_from(data, offset)
        if k_size != k1_size or k_size != params.group_size:
            raise FormatError(f"group sizes {k_size}/{k1_size} do not match params")
        offset += _GROUP_SIZES.size
        clause_total = 2 * k_size
        groups = np.repeat([GroupLabel.K_TRUE, GroupLabel.K_PLUS1_TRUE], k_size)
    else:
        clause_total = params.clause_count
    width = literal_field_width(params.n)
    field_count = clause_total * params.clause_width
    payload = _expect_length(data, offset, -(-field_count * width // 8))
    codes = unpack_fields(payload, field_count, width)
    if codes.size and codes.max() >= 2 * params.n:
        raise FormatError(f"literal field decodes to a variable beyond n={params.n}")
    try:
        return PublicKey(params, codes.reshape(clause_total, params.clause_width), groups)
    except EqSatError as exc:
        raise FormatError(f"invalid public key: {exc}") from exc


def serialize_ciphertext(ct: Ciphertext) -> bytes:
    p = ct.params
    if ct.counts.size and ct.counts.max() > p.count_limit:
        raise ContractError(f"a count exceeds {p.q} bits; encryption should have resampled")
    header = _header(CT_MAGIC, p, p.n) + _BIT_LENGTH.pack(ct.message_bit_length)
    return header + pack_fields(ct.counts, p.q)


def deserialize_ciphertext(data: bytes) -> Ciphertext:
    mode, fields = _read_header(data, CT_MAGIC)
    params = _params_from(mode, fields)
    if len(data) < CT_HEADER_SIZE:
        raise FormatError("truncated message length")
    (bit_length,) = _BIT_LENGTH.unpack_from(data, _HEADER.size)
    blocks = block_count(bit_length, params)
    field_count = blocks * 2 * params.n
    payload = _expect_length(data, CT_HEADER_SIZE, -(-field_count * params.q // 8))
    counts = unpack_fields(payload, field_count, params.q).reshape(blocks, 2 * params.n)
    try:
        return Ciphertext(params, bit_length, counts)
    except EqSatError as exc:
        raise FormatError(f"invalid ciphertext: {exc}") from exc


def payload_sizes(params: Params, message_bits: int = 256) -> dict[str, int]:
    """Closed-form payload sizes in bytes, headers excluded."""
    width = literal_field_width(params.n)
    pk_bits = params.clause_count * params.clause_width * width
    if params.mode is Mode.M4:
        pk_bits += 8 * _GROUP_SIZES.size
    block_bits = 2 * params.q * params.n
    return {
        "sk": -(-params.n // 8),
        "pk": -(-pk_bits // 8),
        "ct_block": -(-block_bits // 8),
        "ct_message": -(-block_count(message_bits, params) * block_bits // 8),
    }


def export_dimacs(pk: PublicKey) -> str:
    if len(pk) == 0:
        raise FormatError("cannot export an empty key")
    p = pk.params
    lines = [
        f"c eqsat k={p.k} m={p.m} n={p.n} mode={p.mode} width={p.clause_width}",
        "c equilibrium condition: each clause has exactly k TRUE literals"
        + (" (k+1 in the K_PLUS1_TRUE group)" if pk.divided else ""),
        "c the exactly-k cardinality constraint is not encoded; plain clauses only",
        f"p cnf {p.n} {len(pk)}",
    ]
    signed = np.where(pk.clauses & 1, -(pk.clauses // 2 + 1), pk.clauses // 2 + 1)
    for i, row in enumerate(signed):
        if pk.groups is not None:
            lines.append(f"c group {GroupLabel(pk.groups[i]).name}")
        lines.append(" ".join(map(str, row.tolist())) + " 0")
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> tuple[int, list[list[int]], list[str | None]]:
    """Read DIMACS CNF text back as (variable count, clauses, group labels).

    Group labels come from ``c group NAME`` comments preceding a clause and are
    None when absent.
    """
    num_vars = num_clauses = None
    clauses: list[list[int]] = []
    labels: list[str | None] = []
    pending_label = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("c"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == "group":
                pending_label = parts[2]
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError(f"invalid problem line: {line}")
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        if num_vars is None:
            raise FormatError("clause before the problem line")
        try:
            literals = [int(x) for x in line.split()]
        except ValueError:
            raise FormatError(f"non-integer literal in: {line}") from None
        if not literals or literals[-1] != 0:
            raise FormatError(f"clause must end with 0: {line}")
        clauses.append(literals[:-1])
        labels.append(pending_label)
        pending_label = None
    if num_vars is None:
        raise FormatError("missing problem line")
    if len(clauses) != num_clauses:
        raise FormatError(f"header declares {num_clauses} clauses, found {len(clauses)}")
    return num_vars, clauses, labels
