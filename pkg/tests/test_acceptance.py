"""End-to-end acceptance checks. Each test appends one PASS/FAIL line that is
printed in the terminal summary."""

import itertools

import numpy as np
from eqsat import codec
from eqsat.analysis import brute_force_keys, random_key_ber, run_bench, scaling_ratio
from eqsat.cipher import (
    decrypt_message,
    decrypt_values,
    encrypt_blocks,
    encrypt_message,
)
from eqsat.errors import EqSatError
from eqsat.keygen import generate_keypair, verify_keypair
from eqsat.model import Params, build_spectrum, measure
from eqsat.rng import deterministic

from conftest import ACCEPTANCE_RESULTS, FULL_M2, FULL_M3, SMALL_M4

MESSAGES = 10_000
MESSAGE_BYTES = 32


def record(number, title, ok, detail=""):
    ACCEPTANCE_RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}"
                              + (f": {detail}" if detail else ""))
    return ok


def test_1_zero_decryption_failures(full_keys, m4_keys):
    rng = deterministic(101)
    failures = {}
    for name, (pk, sk), params in (("m2", full_keys, FULL_M2), ("m3", full_keys, FULL_M3),
                                   ("m4", m4_keys, SMALL_M4)):
        bad = 0
        for _ in range(MESSAGES):
            message = rng.bytes(MESSAGE_BYTES)
            ct = encrypt_message(pk, message, rng=rng, params=params)
            bad += decrypt_message(ct, sk) != message
        failures[name] = bad
    ok = not any(failures.values())
    record(1, "zero decryption failures", ok,
           " ".join(f"{k}={v}/{MESSAGES}" for k, v in failures.items()))
    assert ok, failures


def test_2_k_true_invariant():
    params = Params(k=4, n=64, m=8, e=16)
    failed = [seed for seed in range(100)
              if not verify_keypair(*generate_keypair(params, deterministic(seed))).passed]
    ok = not failed
    record(2, "k-TRUE invariant", ok, f"{100 - len(failed)}/100 keypairs verified")
    assert ok, failed


def test_3_measure_identity(tiny_keys):
    pk, sk = tiny_keys
    measures = [measure(build_spectrum(pk.clauses[list(idx)], pk.n), sk)
                for idx in itertools.combinations(range(len(pk)), 3)]
    ok = len(measures) == 56 and set(measures) == {6}
    record(3, "measure identity", ok, f"{len(measures)} extractions, measures {sorted(set(measures))}")
    assert ok


def test_4_brute_force_oracle():
    params = Params(k=2, n=16, m=4, e=10)
    pk, sk = generate_keypair(params, deterministic(404))
    keys = brute_force_keys(pk)
    bits = deterministic(405).integers(0, 2, size=1000)
    counts = encrypt_blocks(pk, bits, params, deterministic(406))
    planted = decrypt_values(counts, sk, params)
    agree = all(np.array_equal(decrypt_values(counts, key, params), planted) for key in keys)
    ok = sk in keys and sk.complement() in keys and agree and np.array_equal(planted, bits)
    record(4, "brute-force oracle", ok, f"{len(keys)} keys recovered, all decrypt identically={agree}")
    assert ok


def test_5_payload_sizes(full_keys):
    pk512, sk512 = full_keys
    big = FULL_M2.replace(n=1024, e=1536)
    pk1024, sk1024 = generate_keypair(big, deterministic(5))
    ct_block = encrypt_message(pk512, b"\x80", rng=deterministic(0), params=FULL_M2)
    message = deterministic(1).bytes(32)
    ct_m3 = encrypt_message(pk512, message, rng=deterministic(2), params=FULL_M3)

    def body(data, header=codec.HEADER_SIZE):
        return len(data) - header

    measured = {
        "sk512": body(codec.serialize_private_key(sk512)),
        "sk1024": body(codec.serialize_private_key(sk1024)),
        "pk512": body(codec.serialize_public_key(pk512)),
        "pk1024": body(codec.serialize_public_key(pk1024)),
        # eight M2 blocks for one byte; every block has the same packed size
        "ct_block": body(codec.serialize_ciphertext(ct_block), codec.CT_HEADER_SIZE) // len(ct_block),
        "ct_m3_256": body(codec.serialize_ciphertext(ct_m3), codec.CT_HEADER_SIZE),
    }
    expected = {"sk512": 64, "sk1024": 128, "pk512": 25_600, "pk1024": 56_320,
                "ct_block": 512, "ct_m3_256": 32_768}
    ok = measured == expected
    record(5, "payload sizes", ok, " ".join(f"{k}={v}" for k, v in measured.items()))
    assert ok, measured


def test_6_m4_inversion(m4_keys):
    pk, sk = m4_keys
    values = np.repeat(np.arange(16), 10)
    counts = encrypt_blocks(pk, values, SMALL_M4, deterministic(6))
    decoded = decrypt_values(counts, sk, SMALL_M4)
    ok = np.array_equal(decoded, values)
    record(6, "m4 inversion p=(k+1)e-t", ok, f"p in 0..15, {len(values)} blocks")
    assert ok


def test_7_wrong_key_ber(full_keys):
    pk, sk = full_keys
    ber = random_key_ber(pk, sk, 2000, deterministic(7), params=FULL_M2)
    ok = abs(ber - 0.5) <= 0.05
    record(7, "wrong-key BER", ok, f"ber={ber:.4f} (target 0.50 +/- 0.05)")
    assert ok


def test_8_performance():
    large = FULL_M2.replace(n=1024, e=1536)
    report = run_bench([FULL_M2, large], repetitions=30, rng=deterministic(8))
    enc = report.value(FULL_M2, "encrypt_ms")
    dec = report.value(FULL_M2, "decrypt_ms")
    ratio = scaling_ratio(report, FULL_M2, large)
    ok = enc < 50 and dec < 5 and ratio <= 2.5
    record(8, "performance sanity", ok,
           f"encrypt={enc:.2f}ms decrypt={dec:.3f}ms decrypt scaling x{ratio:.2f}")
    assert ok


def test_9_codec_fuzz(tiny_keys):
    pk, sk = tiny_keys
    valid = {
        codec.deserialize_private_key: codec.serialize_private_key(sk),
        codec.deserialize_public_key: codec.serialize_public_key(pk),
        codec.deserialize_ciphertext: codec.serialize_ciphertext(
            encrypt_message(pk, b"fuzz", rng=deterministic(0))),
    }
    rng = deterministic(9)
    crashes, accepted = [], 0
    for fn, good in valid.items():
        for i in range(MESSAGES):
            kind = i % 3
            if kind == 0:  # raw noise
                data = rng.bytes(int(rng.integers(0, 96)))
            elif kind == 1:  # right magic and version, random remainder
                data = good[:5] + rng.bytes(int(rng.integers(0, 96)))
            else:  # a valid file with random bytes overwritten
                buf = bytearray(good)
                for pos in rng.integers(0, len(buf), size=int(rng.integers(1, 4))):
                    buf[pos] = int(rng.integers(0, 256))
                data = bytes(buf[:int(rng.integers(len(buf) // 2, len(buf) + 1))])
            try:
                fn(data)
                accepted += 1
            except EqSatError:
                pass
            except Exception as exc:  # noqa: BLE001 - anything else is a crash
                crashes.append((fn.__name__, type(exc).__name__, data))
    ok = not crashes
    record(9, "codec fuzz contract", ok,
           f"{3 * MESSAGES} inputs, {len(crashes)} crashes, {accepted} accepted as valid")
    assert ok, crashes[:5]
