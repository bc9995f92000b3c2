"""Desk-scale experiments: exhaustive key recovery, wrong-key decryption,
search-space arithmetic, spectrum statistics and timing benchmarks."""

from __future__ import annotations

import csv
import gc
import io
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import cipher, codec
from .errors import ParameterError
from .keygen import expected_true_counts, generate_keypair, generate_keypair_divided
from .model import Mode, Params, PrivateKey, PublicKey
from .rng import resolve

BRUTE_FORCE_LIMIT = 24
_ENUM_CHUNK = 1 << 16


def brute_force_keys(pk: PublicKey, max_n: int = BRUTE_FORCE_LIMIT) -> set[PrivateKey]:
    """Every assignment under which each clause has its required TRUE count.

    Enumerates all ``2^n`` assignments directly, independent of the generator.
    """
    n = pk.n
    if n > max_n:
        raise ParameterError(f"refusing to enumerate 2^{n} assignments (limit n <= {max_n})")
    variables = pk.clauses >> 1
    negated = (pk.clauses & 1).astype(bool)
    targets = expected_true_counts(pk)
    shifts = np.arange(n, dtype=np.int64)
    found: set[PrivateKey] = set()
    for start in range(0, 1 << n, _ENUM_CHUNK):
        ints = np.arange(start, min(start + _ENUM_CHUNK, 1 << n), dtype=np.int64)
        assignments = ((ints[:, None] >> shifts) & 1).astype(bool)
        for vars_, neg, target in zip(variables, negated, targets):
            true_count = (assignments[:, vars_] ^ neg).sum(axis=1)
            assignments = assignments[true_count == target]
            if not len(assignments):
                break
        found.update(PrivateKey(row) for row in assignments)
    return found


def random_key_ber(pk: PublicKey, sk_true: PrivateKey, trials: int, rng=None,
                   params: Params | None = None, strategy: str = "random") -> float:
    """Bit-error rate of mode-M2 decryption with keys other than the planted one.

    ``strategy`` picks the decryption key per trial: ``"random"`` (fresh
    uniform key), ``"true"`` (``sk_true`` itself) or ``"flip"`` (``sk_true``
    with one uniformly chosen variable inverted).
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if pk.divided:
        raise ParameterError("the wrong-key experiment uses mode m2 keys")
    rng = resolve(rng)
    params = cipher.resolve_params(pk, Mode.M2, params)
    bits = rng.integers(0, 2, size=trials)
    counts = cipher.encrypt_blocks(pk, bits, params, rng).astype(np.int64)
    if strategy == "random":
        keys = rng.integers(0, 2, size=(trials, pk.n)).astype(bool)
    elif strategy == "true":
        keys = np.broadcast_to(sk_true.assignment, (trials, pk.n))
    elif strategy == "flip":
        keys = np.tile(sk_true.assignment, (trials, 1))
        rows = np.arange(trials)
        flip = rng.integers(0, pk.n, size=trials)
        keys[rows, flip] = ~keys[rows, flip]
    else:
        raise ParameterError(f"unknown strategy {strategy!r}")
    solution = np.empty((trials, 2 * pk.n), dtype=np.int64)
    solution[:, 0::2] = keys
    solution[:, 1::2] = ~keys
    decoded = ((counts * solution).sum(axis=1) == params.k * params.e).astype(int)
    return float(np.mean(decoded != bits))


def log2_binomial(total: int, take: int) -> float:
    if not 0 <= take <= total:
        raise ParameterError(f"cannot choose {take} of {total}")
    return (math.lgamma(total + 1) - math.lgamma(take + 1) - math.lgamma(total - take + 1)) / math.log(2)


def search_space_bits(params: Params, e: int | None = None) -> float:
    """log2 of the number of distinct e-clause extractions from the key."""
    return log2_binomial(params.clause_count, params.e if e is None else e)


@dataclass
class SpectrumStats:
    trials: int
    max_count: int
    overflow_fraction: float
    mean_abs_difference: float
    difference_histogram: np.ndarray


def spectrum_stats(pk: PublicKey, e: int, trials: int, rng=None, q: int | None = None) -> SpectrumStats:
    """Count statistics of plain (unswapped) e-clause extractions."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if not 0 <= e <= len(pk):
        raise ParameterError(f"e={e} outside 0..{len(pk)}")
    rng = resolve(rng)
    q = pk.params.q if q is None else q
    counts = cipher._extract(cipher._context(pk), trials, e, rng)
    diffs = np.abs(counts[:, 0::2] - counts[:, 1::2])
    return SpectrumStats(
        trials=trials,
        max_count=int(counts.max(initial=0)),
        overflow_fraction=float((counts.max(axis=1, initial=0) > (1 << q) - 1).mean()),
        mean_abs_difference=float(diffs.mean()) if diffs.size else 0.0,
        difference_histogram=np.bincount(diffs.reshape(-1), minlength=pk.params.m + 1),
    )


def formula_sizes(params: Params, message_bits: int = 256) -> dict[str, float]:
    """Closed-form size estimates in bytes, as quoted for the reference parameters.

    The public-key formula assumes every literal is used ``m`` times, which a
    divided key only approximates.
    """
    n, m, q = params.n, params.m, params.q
    block_bits = 2 * q * n
    return {
        "sk": n / 8,
        "pk": 2 * m * n * (math.log2(n) + 1) / 8,
        "ct_block": block_bits / 8,
        "ct_message": block_bits / 8 * message_bits / params.bits_per_block,
    }


@dataclass
class BenchRow:
    mode: str
    params: str
    metric: str
    value: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def add(self, params: Params, metric: str, value: float) -> None:
        self.rows.append(BenchRow(str(params.mode), params_label(params), metric, float(value)))

    def value(self, params: Params, metric: str) -> float:
        label = params_label(params)
        for row in self.rows:
            if row.params == label and row.metric == metric:
                return row.value
        raise KeyError((label, metric))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["mode", "params", "metric", "value"])
        for row in self.rows:
            writer.writerow([row.mode, row.params, row.metric, f"{row.value:.6g}"])
        return buf.getvalue()


def params_label(params: Params) -> str:
    p = params
    return f"k={p.k} b={p.b} m={p.m} n={p.n} e={p.e} q={p.q}"


def _median_ms(fn, repetitions: int) -> float:
    """Median of ``repetitions`` timed calls after one untimed warm-up.

    The garbage collector is paused while timing, as ``timeit`` does.
    """
    fn()
    gc.collect()
    enabled = gc.isenabled()
    gc.disable()
    try:
        samples = []
        for _ in range(repetitions):
            start = time.perf_counter()
            fn()
            samples.append((time.perf_counter() - start) * 1000)
    finally:
        if enabled:
            gc.enable()
    return statistics.median(samples)


def run_bench(params_set, repetitions: int = 30, rng=None, message_bits: int = 256) -> BenchReport:
    """Median wall-clock timings and serialized sizes for each parameter tuple.

    Each timed operation runs once untimed first, so kernel compilation and
    cold caches are excluded.
    """
    report = BenchReport()
    if repetitions <= 0:
        return report
    rng = resolve(rng)
    for params in params_set:
        generate = generate_keypair_divided if params.mode is Mode.M4 else generate_keypair
        pk, sk = generate(params, rng)
        message = rng.bytes(message_bits // 8)
        ct = cipher.encrypt_message(pk, message, rng=rng, params=params)

        report.add(params, "keygen_ms", _median_ms(lambda: generate(params, rng), repetitions))
        report.add(params, "encrypt_ms",
                   _median_ms(lambda: cipher.encrypt_message(pk, message, rng=rng, params=params),
                              repetitions))
        report.add(params, "decrypt_ms",
                   _median_ms(lambda: cipher.decrypt_message(ct, sk), repetitions))

        measured = {
            "sk": len(codec.serialize_private_key(sk)) - codec.HEADER_SIZE,
            "pk": len(codec.serialize_public_key(pk)) - codec.HEADER_SIZE,
            "ct_block": len(codec.pack_fields(ct.counts[:1], params.q)),
            "ct_message": len(codec.serialize_ciphertext(ct)) - codec.CT_HEADER_SIZE,
        }
        formula = formula_sizes(params, message_bits)
        for name, size in measured.items():
            report.add(params, f"{name}_bytes", size)
            report.add(params, f"{name}_formula_bytes", formula[name])
        report.add(params, "header_bytes", codec.HEADER_SIZE)
    return report


def scaling_ratio(report: BenchReport, small: Params, large: Params, metric: str = "decrypt_ms") -> float:
    return report.value(large, metric) / report.value(small, metric)
