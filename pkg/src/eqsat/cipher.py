"""Block encryption (modes M2, M3, M4) and whole-message chunking.

Blocks are produced in chunks of `CHUNK_BLOCKS`; chunk ``i`` of a message
draws from substream ``i`` of a per-message root, so threaded and sequential
runs give identical ciphertexts for the same generator state.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import CorruptCiphertextError, EncryptionError, ParameterError, ShapeError
from .model import (
    COUNT_DTYPE,
    GroupLabel,
    LiteralSpectrum,
    Mode,
    Params,
    PrivateKey,
    PublicKey,
)
from .rng import draw_entropy, resolve, substream

CHUNK_BLOCKS = 64
M2_RESAMPLES = 64
OVERFLOW_RESAMPLES = 4096
M3_ATTEMPTS = 4096


@dataclass(frozen=True, eq=False)
class CiphertextBlock:
    spectrum: LiteralSpectrum

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CiphertextBlock):
            return NotImplemented
        return self.spectrum == other.spectrum


@dataclass(frozen=True, eq=False)
class Ciphertext:
    """Header fields plus one spectrum row per plaintext unit."""

    params: Params
    message_bit_length: int
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=COUNT_DTYPE)
        if counts.size == 0:
            counts = counts.reshape(0, 2 * self.params.n)
        if counts.ndim != 2 or counts.shape[1] != 2 * self.params.n:
            raise ShapeError(f"ciphertext rows must hold 2n={2 * self.params.n} counts")
        expected = block_count(self.message_bit_length, self.params)
        if counts.shape[0] != expected:
            raise ShapeError(
                f"{self.message_bit_length} message bits need {expected} blocks, got {counts.shape[0]}"
            )
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def mode(self) -> Mode:
        return self.params.mode

    @property
    def blocks(self) -> list[CiphertextBlock]:
        return [CiphertextBlock(LiteralSpectrum(row)) for row in self.counts]

    def __len__(self) -> int:
        return self.counts.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ciphertext):
            return NotImplemented
        return (
            self.params == other.params
            and self.message_bit_length == other.message_bit_length
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None  # type: ignore[assignment]


def block_count(bit_length: int, params: Params) -> int:
    return -(-bit_length // params.bits_per_block)


class _KeyContext:
    """Arrays derived once per public key for the extraction kernels."""

    def __init__(self, pk: PublicKey):
        self.lits = np.ascontiguousarray(pk.clauses, dtype=np.int32)
        self.n = pk.n
        self.all_pool = np.arange(len(pk), dtype=np.int32)
        flat = self.lits.reshape(-1)
        order = np.argsort(flat, kind="stable")
        self.occ_idx = (order // self.lits.shape[1]).astype(np.int32)
        usage = np.bincount(flat, minlength=2 * pk.n)
        self.occ_ptr = np.concatenate([[0], np.cumsum(usage)]).astype(np.int64)
        self.usage = usage
        sizes = np.stack([usage[0::2], usage[1::2]], axis=1)
        self.size_classes, inverse = np.unique(sizes, axis=0, return_inverse=True)
        self.size_class_of = inverse.reshape(-1)
        if pk.groups is not None:
            self.k_pool = np.nonzero(pk.groups == GroupLabel.K_TRUE)[0].astype(np.int32)
            self.k1_pool = np.nonzero(pk.groups == GroupLabel.K_PLUS1_TRUE)[0].astype(np.int32)


def _context(pk: PublicKey) -> _KeyContext:
    ctx = pk.__dict__.get("_cipher_ctx")
    if ctx is None:
        ctx = _KeyContext(pk)
        object.__setattr__(pk, "_cipher_ctx", ctx)
    return ctx


def resolve_params(pk: PublicKey, mode=None, params: Params | None = None, **overrides) -> Params:
    """Encryption parameters: the key's own, optionally overridden.

    M2 and M3 share one key shape, so either mode may use an M2/M3 key; M4
    needs a divided key.
    """
    base = params or pk.params
    changes = {name: value for name, value in overrides.items() if value is not None}
    if mode is not None:
        changes["mode"] = Mode.parse(mode)
    target = changes.get("mode", base.mode)
    if target is Mode.M2:
        changes["b"] = 1
    if (target is Mode.M4) != pk.divided:
        raise ParameterError(f"mode {target} cannot use a {pk.params.mode} key")
    result = base.replace(**changes) if changes else base
    if (result.k, result.n, result.m) != (pk.params.k, pk.params.n, pk.params.m):
        raise ParameterError("encryption params disagree with the key's k, n or m")
    return result


def _swap_pairs(counts: np.ndarray, variables: np.ndarray) -> None:
    """Exchange (a_j, b_j) in every row; exactly one swap per row."""
    rows = np.arange(counts.shape[0])
    pos = 2 * variables
    a = counts[rows, pos].copy()
    counts[rows, pos] = counts[rows, pos + 1]
    counts[rows, pos + 1] = a


def _pick_uniform(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniformly chosen True column of each row."""
    keys = rng.random(mask.shape)
    keys[~mask] = -1.0
    return keys.argmax(axis=1)


def _extract(ctx: _KeyContext, rows: int, e: int, rng) -> np.ndarray:
    out = np.zeros((rows, 2 * ctx.n), dtype=COUNT_DTYPE)
    u = rng.random((rows, e))
    _kernels.draw_from_pool(ctx.lits, ctx.all_pool, np.full(rows, e, np.int64),
                            np.zeros(rows, np.int64), u, out)
    return out


def _encrypt_m2(ctx: _KeyContext, params: Params, bits: np.ndarray, rng) -> np.ndarray:
    rows = bits.size
    counts = np.zeros((rows, 2 * ctx.n), dtype=COUNT_DTYPE)
    eligible = np.zeros((rows, ctx.n), dtype=bool)
    unqualified = np.zeros(rows, dtype=np.int64)
    overflowed = np.zeros(rows, dtype=np.int64)
    pending = np.arange(rows)
    while pending.size:
        sub = _extract(ctx, pending.size, params.e, rng)
        a, b = sub[:, 0::2], sub[:, 1::2]
        want_equal = (bits[pending] == 1)[:, None]
        mask = np.where(want_equal, a == b, a != b)
        qualified = mask.any(axis=1)
        fits = sub.max(axis=1, initial=0) <= params.count_limit
        ok = qualified & fits
        counts[pending[ok]] = sub[ok]
        eligible[pending[ok]] = mask[ok]
        unqualified[pending[~qualified]] += 1
        overflowed[pending[qualified & ~fits]] += 1
        pending = pending[~ok]
        if (unqualified >= M2_RESAMPLES).any():
            raise EncryptionError(f"no qualifying pair in {M2_RESAMPLES} extractions")
        if (overflowed >= OVERFLOW_RESAMPLES).any():
            raise EncryptionError(f"counts overflow q={params.q} bits in {OVERFLOW_RESAMPLES} extractions")
    _swap_pairs(counts, _pick_uniform(eligible, rng))
    return counts


@lru_cache(maxsize=1024)
def _offset_table(pos: int, neg: int, rest: int, e: int, p: int, limit: int):
    """Conditional law of (#clauses with x_j, #clauses with ¬x_j) in a uniform
    e-subset, given their difference is ±p and both fit ``limit``."""
    def log_comb(total, take):
        if take < 0 or take > total:
            return -math.inf
        return math.lgamma(total + 1) - math.lgamma(take + 1) - math.lgamma(total - take + 1)

    pairs, logw = [], []
    for a in range(min(pos, limit) + 1):
        for b in {a - p, a + p}:
            if 0 <= b <= min(neg, limit):
                w = log_comb(pos, a) + log_comb(neg, b) + log_comb(rest, e - a - b)
                if w > -math.inf:
                    pairs.append((a, b))
                    logw.append(w)
    if not pairs:
        return None
    logw = np.array(logw)
    weights = np.exp(logw - logw.max())
    return np.array(pairs, dtype=np.int64), np.cumsum(weights) / weights.sum()


def _encrypt_m3(ctx: _KeyContext, params: Params, values: np.ndarray, rng) -> np.ndarray:
    rows = values.size
    n_clauses = ctx.lits.shape[0]
    counts = np.zeros((rows, 2 * ctx.n), dtype=COUNT_DTYPE)
    chosen = np.zeros(rows, dtype=np.int64)
    attempts = np.zeros(rows, dtype=np.int64)
    pending = np.arange(rows)
    while pending.size:
        variables = np.empty(pending.size, dtype=np.int64)
        pos_take = np.empty(pending.size, dtype=np.int64)
        neg_take = np.empty(pending.size, dtype=np.int64)
        for p in np.unique(values[pending]):
            sel = np.nonzero(values[pending] == p)[0]
            tables = [
                _offset_table(int(pos), int(neg), n_clauses - int(pos) - int(neg),
                              params.e, int(p), params.count_limit)
                for pos, neg in ctx.size_classes
            ]
            feasible = np.array([t is not None for t in tables])[ctx.size_class_of]
            if not feasible.any():
                raise EncryptionError(f"no variable can carry offset {p} with these params")
            variables[sel] = _pick_uniform(np.tile(feasible, (sel.size, 1)), rng)
            draws = rng.random(sel.size)
            classes = ctx.size_class_of[variables[sel]]
            for cls in np.unique(classes):
                pairs, cdf = tables[cls]
                hit = classes == cls
                idx = np.minimum(np.searchsorted(cdf, draws[hit], side="right"), len(cdf) - 1)
                pos_take[sel[hit]] = pairs[idx, 0]
                neg_take[sel[hit]] = pairs[idx, 1]
        sub = np.zeros((pending.size, 2 * ctx.n), dtype=COUNT_DTYPE)
        u = rng.random((pending.size, params.e))
        _kernels.draw_conditioned(ctx.lits, ctx.occ_ptr, ctx.occ_idx, variables,
                                  pos_take, neg_take, u, sub)
        ok = sub.max(axis=1, initial=0) <= params.count_limit
        counts[pending[ok]] = sub[ok]
        chosen[pending[ok]] = variables[ok]
        attempts[pending[~ok]] += 1
        pending = pending[~ok]
        if (attempts >= M3_ATTEMPTS).any():
            raise EncryptionError(f"no extraction fits q={params.q} bits in {M3_ATTEMPTS} attempts")
    _swap_pairs(counts, chosen)
    return counts


def _encrypt_m4(ctx: _KeyContext, params: Params, values: np.ndarray, rng) -> np.ndarray:
    rows = values.size
    counts = np.zeros((rows, 2 * ctx.n), dtype=COUNT_DTYPE)
    attempts = np.zeros(rows, dtype=np.int64)
    pending = np.arange(rows)
    while pending.size:
        p = values[pending].astype(np.int64)
        sub = np.zeros((pending.size, 2 * ctx.n), dtype=COUNT_DTYPE)
        u = rng.random((pending.size, params.e))
        _kernels.draw_from_pool(ctx.lits, ctx.k_pool, p, np.zeros_like(p), u, sub)
        _kernels.draw_from_pool(ctx.lits, ctx.k1_pool, params.e - p, p, u, sub)
        ok = sub.max(axis=1, initial=0) <= params.count_limit
        counts[pending[ok]] = sub[ok]
        attempts[pending[~ok]] += 1
        pending = pending[~ok]
        if (attempts >= OVERFLOW_RESAMPLES).any():
            raise EncryptionError(f"counts overflow q={params.q} bits in {OVERFLOW_RESAMPLES} extractions")
    return counts


_ENCRYPTORS = {Mode.M2: _encrypt_m2, Mode.M3: _encrypt_m3, Mode.M4: _encrypt_m4}


def encrypt_blocks(pk: PublicKey, values, params: Params | None = None, rng=None) -> np.ndarray:
    """Encrypt each plaintext unit in ``values`` with one fresh extraction.

    Returns the ``(len(values), 2n)`` count rows. ``rng`` is consumed directly
    (no substreams); see `encrypt_message` for the chunked path.
    """
    params = params or pk.params
    values = np.asarray(values, dtype=np.int64).reshape(-1)
    limit = 1 << params.bits_per_block
    if values.size and (values.min() < 0 or values.max() >= limit):
        raise ParameterError(f"block values must lie in 0..{limit - 1}")
    return _ENCRYPTORS[params.mode](_context(pk), params, values, resolve(rng))


def encrypt_bit_m2(pk: PublicKey, bit: int, rng=None, params: Params | None = None) -> CiphertextBlock:
    params = resolve_params(pk, Mode.M2, params)
    return CiphertextBlock(LiteralSpectrum(encrypt_blocks(pk, [bit], params, rng)[0]))


def encrypt_block_m3(pk: PublicKey, p: int, rng=None, params: Params | None = None) -> CiphertextBlock:
    params = resolve_params(pk, Mode.M3, params)
    return CiphertextBlock(LiteralSpectrum(encrypt_blocks(pk, [p], params, rng)[0]))


def encrypt_block_m4(pk: PublicKey, p: int, rng=None, params: Params | None = None) -> CiphertextBlock:
    params = resolve_params(pk, Mode.M4, params)
    return CiphertextBlock(LiteralSpectrum(encrypt_blocks(pk, [p], params, rng)[0]))


def _measures(counts: np.ndarray, sk: PrivateKey, params: Params) -> np.ndarray:
    if counts.shape[-1] != 2 * sk.n or sk.n != params.n:
        raise ShapeError(f"block of {counts.shape[-1] // 2} variables, key of {sk.n}, params n={params.n}")
    # a row sums to e * width, so the stored dtype usually suffices and avoids a copy
    dtype = counts.dtype
    if dtype.kind not in "iu" or params.e * params.clause_width >= np.iinfo(dtype).max:
        dtype = np.dtype(np.int64)
    return (counts.astype(dtype, copy=False) @ sk.solution_vector().astype(dtype)).astype(np.int64)


def decrypt_values(counts: np.ndarray, sk: PrivateKey, params: Params) -> np.ndarray:
    """Recover the plaintext unit of every row of ``counts``."""
    counts = np.atleast_2d(counts)
    t = _measures(counts, sk, params)
    k, e = params.k, params.e
    if params.mode is Mode.M2:
        return (t == k * e).astype(np.int64)
    if params.mode is Mode.M3:
        values = np.abs(t - k * e)
        upper = 1 << params.b
    else:
        values = (k + 1) * e - t
        upper = e
    bad = np.nonzero((values < 0) | (values >= upper))[0]
    if bad.size:
        i = int(bad[0])
        raise CorruptCiphertextError(
            f"block {i} decodes to {int(values[i])}, outside 0..{upper - 1}", block_index=i
        )
    return values


def decrypt_bit_m2(block: CiphertextBlock, sk: PrivateKey, params: Params) -> int:
    return int(decrypt_values(block.spectrum.counts, sk, params.replace(mode=Mode.M2, b=1))[0])


def decrypt_block_m3(block: CiphertextBlock, sk: PrivateKey, params: Params) -> int:
    return int(decrypt_values(block.spectrum.counts, sk, params.replace(mode=Mode.M3))[0])


def decrypt_block_m4(block: CiphertextBlock, sk: PrivateKey, params: Params) -> int:
    return int(decrypt_values(block.spectrum.counts, sk, params.replace(mode=Mode.M4))[0])


def split_message(plaintext: bytes, width: int) -> np.ndarray:
    """Big-endian ``width``-bit segments of ``plaintext``, zero-padded at the tail."""
    bits = np.unpackbits(np.frombuffer(bytes(plaintext), dtype=np.uint8))
    pad = (-bits.size) % width
    bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)]).reshape(-1, width)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def join_message(values: np.ndarray, width: int, bit_length: int) -> bytes:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    bits = ((np.asarray(values, dtype=np.int64)[:, None] >> shifts) & 1).reshape(-1)
    return np.packbits(bits[:bit_length].astype(np.uint8)).tobytes()


def encrypt_message(pk: PublicKey, plaintext: bytes, mode=None, rng=None,
                    params: Params | None = None, threads: int = 1) -> Ciphertext:
    params = resolve_params(pk, mode, params)
    values = split_message(plaintext, params.bits_per_block)
    rng = resolve(rng)
    root = draw_entropy(rng)
    ctx = _context(pk)
    encrypt = _ENCRYPTORS[params.mode]
    chunks = [values[i:i + CHUNK_BLOCKS] for i in range(0, values.size, CHUNK_BLOCKS)]

    def work(item):
        index, chunk = item
        return encrypt(ctx, params, chunk, substream(rng, root, index))

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, enumerate(chunks)))
    else:
        parts = [work(item) for item in enumerate(chunks)]
    counts = np.concatenate(parts) if parts else np.zeros((0, 2 * pk.n), COUNT_DTYPE)
    return Ciphertext(params, 8 * len(plaintext), counts)


def decrypt_message(ct: Ciphertext, sk: PrivateKey) -> bytes:
    values = decrypt_values(ct.counts, sk, ct.params) if len(ct) else np.zeros(0, np.int64)
    return join_message(values, ct.params.bits_per_block, ct.message_bit_length)
