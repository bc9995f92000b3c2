"""Key pair generation and verification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError, ParameterError
from .model import GroupLabel, Mode, Params, PrivateKey, PublicKey
from .rng import resolve

CLAUSE_ATTEMPTS = 64
PARTITION_PASSES = 256


@dataclass
class LiteralPool:
    """Literals of one polarity class with ``m`` copies each, in draw order."""

    remaining: np.ndarray
    true_class: bool
    position: int = 0

    @classmethod
    def build(cls, codes: np.ndarray, m: int, true_class: bool, rng) -> "LiteralPool":
        return cls(rng.permutation(np.repeat(codes, m)), true_class)

    def peek(self, count: int) -> np.ndarray:
        return self.remaining[self.position:self.position + count]

    def take(self, count: int) -> None:
        self.position += count

    def reshuffle_tail(self, rng) -> None:
        self.remaining[self.position:] = rng.permutation(self.remaining[self.position:])

    @property
    def left(self) -> int:
        return self.remaining.size - self.position


def _partition(sk: PrivateKey, m: int, plan: list[tuple[int, int]], rng) -> np.ndarray:
    """Cut the TRUE and FALSE pools into clauses following ``plan``.

    Each plan entry gives how many literals the clause takes from the TRUE
    pool and from the FALSE pool.
    """
    true_codes = sk.true_codes()
    false_codes = true_codes ^ 1
    for _ in range(PARTITION_PASSES):
        pools = (LiteralPool.build(true_codes, m, True, rng),
                 LiteralPool.build(false_codes, m, False, rng))
        rows = []
        for from_true, from_false in plan:
            for _ in range(CLAUSE_ATTEMPTS):
                candidate = np.concatenate([pools[0].peek(from_true), pools[1].peek(from_false)])
                if len(set((candidate >> 1).tolist())) == candidate.size:
                    break
                pools[0].reshuffle_tail(rng)
                pools[1].reshuffle_tail(rng)
            else:
                break
            pools[0].take(from_true)
            pools[1].take(from_false)
            rows.append(candidate)
        else:
            return np.array(rows, dtype=np.int32)
    raise GenerationError(
        f"no clause partition found after {PARTITION_PASSES} passes; retry with a new seed"
    )


def generate_keypair(params: Params, rng=None) -> tuple[PublicKey, PrivateKey]:
    """Generate a 2k-CNF public key of k-TRUE clauses and its private key.

    Every literal is used exactly ``m`` times, giving ``m*n/k`` clauses.
    """
    if params.mode is Mode.M4:
        raise ParameterError("mode m4 keys come from generate_keypair_divided")
    rng = resolve(rng)
    sk = PrivateKey.random(params.n, rng, params)
    plan = [(params.k, params.k)] * params.clause_count
    return PublicKey(params, _partition(sk, params.m, plan, rng)), sk


def generate_keypair_divided(params: Params, rng=None) -> tuple[PublicKey, PrivateKey]:
    """Generate a divided (2k+1)-CNF key for mode M4.

    Clauses alternate between the k-TRUE and (k+1)-TRUE group while drawing
    so both groups see the same pool state; literals left over once neither
    group can be extended are discarded.
    """
    if params.mode is not Mode.M4:
        raise ParameterError("generate_keypair_divided needs mode m4 params")
    rng = resolve(rng)
    k = params.k
    sk = PrivateKey.random(params.n, rng, params)
    plan = [(k, k + 1), (k + 1, k)] * params.group_size
    rows = _partition(sk, params.m, plan, rng)
    order = np.concatenate([np.arange(0, len(rows), 2), np.arange(1, len(rows), 2)])
    groups = np.repeat([GroupLabel.K_TRUE, GroupLabel.K_PLUS1_TRUE], params.group_size)
    return PublicKey(params, rows[order], groups), sk


@dataclass
class VerificationReport:
    passed: bool
    true_counts: np.ndarray
    expected_counts: np.ndarray
    contaminated: list[int] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


def true_literal_counts(pk: PublicKey, sk: PrivateKey) -> np.ndarray:
    """Number of TRUE literals in each clause of ``pk`` under ``sk``."""
    return sk.solution_vector()[pk.clauses].sum(axis=1)


def expected_true_counts(pk: PublicKey) -> np.ndarray:
    k = pk.params.k
    if pk.groups is None:
        return np.full(len(pk), k)
    return k + pk.groups.astype(np.int64)


def verify_keypair(pk: PublicKey, sk: PrivateKey) -> VerificationReport:
    """Check the hidden invariants a genuine key pair satisfies."""
    if pk.n != sk.n:
        return VerificationReport(False, np.zeros(0, int), np.zeros(0, int),
                                  failures=[f"key sizes differ: pk n={pk.n}, sk n={sk.n}"])
    counts = true_literal_counts(pk, sk)
    expected = expected_true_counts(pk)
    contaminated = np.nonzero(counts != expected)[0].tolist()
    failures = []
    if contaminated:
        failures.append(f"{len(contaminated)} contaminated clauses, first at index {contaminated[0]}")
    variables = pk.clauses >> 1
    if (variables[:, 1:] == variables[:, :-1]).any():
        failures.append("a clause repeats a variable")
    usage = pk.literal_usage()
    m = pk.params.m
    if pk.divided:
        if usage.max(initial=0) > m:
            failures.append(f"a literal is used more than m={m} times")
    elif (usage != m).any():
        failures.append(f"literal usage is not exactly m={m} for every literal")
    return VerificationReport(not failures, counts, expected, contaminated, failures)
