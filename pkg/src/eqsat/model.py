"""Value types and the spectrum/measure arithmetic.

A literal is identified by its canonical code ``(variable - 1) * 2 + negated``,
so a spectrum of ``n`` variables is a flat array of ``2n`` counts laid out as
``a_1, b_1, a_2, b_2, ...`` and indexing it by literal code gives that
literal's count. The same layout is used on the wire.
"""

from __future__ import annotations

import dataclasses
import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import MalformedClauseError, ParameterError, ShapeError

COUNT_DTYPE = np.int32


class Mode(enum.IntEnum):
    M2 = 2
    M3 = 3
    M4 = 4

    @classmethod
    def parse(cls, value: "Mode | int | str") -> "Mode":
        if isinstance(value, Mode):
            return value
        text = str(value).strip().lower().lstrip("m")
        try:
            return cls(int(text))
        except ValueError:
            raise ParameterError(f"unknown mode {value!r}; expected m2, m3 or m4") from None

    def __str__(self) -> str:
        return f"m{int(self)}"


@dataclass(frozen=True)
class Params:
    """System tuple ``(k, n, m, b, e, q, mode)``.

    ``k`` is half the width of an M2/M3 clause, ``m`` the number of times each
    literal is used by key generation, ``b`` plaintext bits per block, ``e``
    clauses extracted per block and ``q`` bits per serialized count.
    """

    k: int
    n: int
    m: int
    e: int
    b: int = 1
    q: int = 4
    mode: Mode = Mode.M2

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        for name in ("k", "n", "m", "b", "e", "q"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ParameterError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ParameterError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, int(value))
        if self.q > 16:
            raise ParameterError(f"q={self.q} exceeds the 16-bit count limit")
        if self.mode is Mode.M2 and self.b != 1:
            raise ParameterError("mode m2 encrypts one bit per block; b must be 1")
        if self.clause_width > self.n:
            raise ParameterError(
                f"clause width {self.clause_width} exceeds n={self.n} distinct variables"
            )
        if self.mode is Mode.M4:
            if self.e != 1 << self.b:
                raise ParameterError(f"mode m4 requires e = 2^b = {1 << self.b}, got e={self.e}")
            if self.e > self.group_size:
                raise ParameterError(
                    f"e={self.e} exceeds the per-group clause count {self.group_size}"
                )
        else:
            if (self.m * self.n) % self.k:
                raise ParameterError(f"k={self.k} does not divide m*n={self.m * self.n}")
            if self.mode is Mode.M3 and (1 << self.b) > self.m:
                raise ParameterError(f"mode m3 requires 2^b <= m, got b={self.b}, m={self.m}")
        if self.e > self.clause_count:
            raise ParameterError(f"e={self.e} exceeds the clause count {self.clause_count}")

    @property
    def clause_width(self) -> int:
        return 2 * self.k + 1 if self.mode is Mode.M4 else 2 * self.k

    @property
    def group_size(self) -> int:
        """Clauses per group of a divided key; only meaningful for M4."""
        return (self.m * self.n) // (2 * self.k + 1)

    @property
    def clause_count(self) -> int:
        if self.mode is Mode.M4:
            return 2 * self.group_size
        return self.m * self.n // self.k

    @property
    def bits_per_block(self) -> int:
        return 1 if self.mode is Mode.M2 else self.b

    @property
    def count_limit(self) -> int:
        return (1 << self.q) - 1

    def replace(self, **changes) -> "Params":
        return dataclasses.replace(self, **changes)


class Literal(NamedTuple):
    variable: int
    negated: bool = False

    @property
    def code(self) -> int:
        return (self.variable - 1) * 2 + int(self.negated)

    @classmethod
    def from_code(cls, code: int) -> "Literal":
        return cls(int(code) // 2 + 1, bool(code & 1))

    def __invert__(self) -> "Literal":
        return Literal(self.variable, not self.negated)

    def __str__(self) -> str:
        return f"{'¬' if self.negated else ''}x{self.variable}"


Clause = tuple[Literal, ...]


def make_clause(literals: Iterable[Literal], n: int | None = None) -> Clause:
    """Normalize literals into a clause sorted by canonical code."""
    lits = [Literal(int(lit[0]), bool(lit[1])) for lit in literals]
    variables = [lit.variable for lit in lits]
    if len(set(variables)) != len(variables):
        raise MalformedClauseError(f"clause repeats a variable: {variables}")
    if any(v < 1 or (n is not None and v > n) for v in variables):
        raise MalformedClauseError(f"clause variable out of range 1..{n}: {variables}")
    return tuple(sorted(lits, key=lambda lit: lit.code))


def clause_codes(clauses) -> np.ndarray:
    """Convert clauses to a 2-D array of literal codes.

    Accepts either an integer array of codes already or a sequence of
    sequences of `Literal`.
    """
    if isinstance(clauses, np.ndarray):
        return clauses.reshape(len(clauses), -1) if clauses.ndim != 2 else clauses
    clauses = list(clauses)
    if not clauses:
        return np.zeros((0, 0), dtype=np.int64)
    rows = [[Literal(*lit).code for lit in clause] for clause in clauses]
    if len({len(r) for r in rows}) == 1:
        return np.asarray(rows, dtype=np.int64)
    # ragged input; flatten into a single row (the spectrum only needs the multiset)
    return np.asarray([code for row in rows for code in row], dtype=np.int64)[None, :]


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class PrivateKey:
    """The solution vector: one truth value per variable ``x_1..x_n``.

    ``params`` is optional metadata carried through serialization.
    """

    assignment: np.ndarray
    params: Params | None = None

    def __post_init__(self) -> None:
        bits = np.array(self.assignment, dtype=bool).reshape(-1)
        if bits.size == 0:
            raise ShapeError("a private key needs at least one variable")
        if self.params is not None and self.params.n != bits.size:
            raise ShapeError(f"assignment has {bits.size} entries but params.n={self.params.n}")
        object.__setattr__(self, "assignment", _readonly(bits))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, params: Params | None = None) -> "PrivateKey":
        return cls(rng.integers(0, 2, size=n).astype(bool), params)

    @property
    def n(self) -> int:
        return self.assignment.size

    def solution_vector(self) -> np.ndarray:
        """Pair form ``[x_1, ¬x_1, ..., x_n, ¬x_n]`` as a 0/1 array of length 2n."""
        out = np.empty(2 * self.n, dtype=COUNT_DTYPE)
        out[0::2] = self.assignment
        out[1::2] = ~self.assignment
        return out

    def true_codes(self) -> np.ndarray:
        """Literal codes that evaluate TRUE under this key, one per variable."""
        return np.arange(self.n) * 2 + (~self.assignment).astype(np.int64)

    def complement(self) -> "PrivateKey":
        return PrivateKey(~self.assignment, self.params)

    def with_params(self, params: Params | None) -> "PrivateKey":
        return PrivateKey(self.assignment, params)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PrivateKey):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __hash__(self) -> int:
        return hash(np.packbits(self.assignment).tobytes() + self.n.to_bytes(8, "little"))

    def __repr__(self) -> str:
        bits = "".join("1" if x else "0" for x in self.assignment[:64])
        return f"PrivateKey(n={self.n}, bits={bits}{'...' if self.n > 64 else ''})"


def complement(sk: PrivateKey) -> PrivateKey:
    return sk.complement()


@dataclass(frozen=True, eq=False)
class LiteralSpectrum:
    """Occurrence counts of every literal in an extracted clause multiset."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=COUNT_DTYPE).reshape(-1)
        if counts.size % 2:
            raise ShapeError(f"a spectrum holds 2n counts, got {counts.size}")
        if (counts < 0).any():
            raise ShapeError("spectrum counts must be nonnegative")
        object.__setattr__(self, "counts", _readonly(counts))

    @classmethod
    def zeros(cls, n: int) -> "LiteralSpectrum":
        return cls(np.zeros(2 * n, dtype=COUNT_DTYPE))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]]) -> "LiteralSpectrum":
        return cls(np.asarray(pairs, dtype=COUNT_DTYPE).reshape(-1))

    @property
    def n(self) -> int:
        return self.counts.size // 2

    @property
    def pairs(self) -> np.ndarray:
        """``(n, 2)`` view of ``(a_j, b_j)``."""
        return self.counts.reshape(-1, 2)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LiteralSpectrum):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash(self.counts.tobytes())

    def __repr__(self) -> str:
        shown = ", ".join(f"({a},{b})" for a, b in self.pairs[:8])
        return f"LiteralSpectrum(n={self.n}, [{shown}{', ...' if self.n > 8 else ''}])"


def build_spectrum(clauses, n: int) -> LiteralSpectrum:
    """Count how often each literal occurs across ``clauses``."""
    codes = clause_codes(clauses).reshape(-1)
    if codes.size and (codes.min() < 0 or codes.max() >= 2 * n):
        bad = codes[(codes < 0) | (codes >= 2 * n)][0]
        raise MalformedClauseError(
            f"literal {Literal.from_code(int(bad))} is outside variables 1..{n}"
        )
    return LiteralSpectrum(np.bincount(codes, minlength=2 * n).astype(COUNT_DTYPE))


def measure(spectrum: LiteralSpectrum, sk: PrivateKey) -> int:
    """Satisfiability measure: total count of literals that are TRUE under ``sk``."""
    if spectrum.n != sk.n:
        raise ShapeError(f"spectrum has {spectrum.n} variables but key has {sk.n}")
    return int(spectrum.counts @ sk.solution_vector())


def swap_pair(spectrum: LiteralSpectrum, j: int) -> LiteralSpectrum:
    """Exchange ``a_j`` and ``b_j`` (``j`` is 1-based)."""
    if not 1 <= j <= spectrum.n:
        raise ShapeError(f"variable index {j} outside 1..{spectrum.n}")
    counts = spectrum.counts.copy()
    counts[2 * j - 2], counts[2 * j - 1] = counts[2 * j - 1], counts[2 * j - 2]
    return LiteralSpectrum(counts)


def pair_differences(spectrum: LiteralSpectrum) -> np.ndarray:
    pairs = spectrum.pairs
    return np.abs(pairs[:, 0] - pairs[:, 1])


class GroupLabel(enum.IntEnum):
    """Group tag of a divided (M4) key clause."""

    K_TRUE = 0
    K_PLUS1_TRUE = 1


@dataclass(frozen=True, eq=False)
class PublicKey:
    """A CNF over ``2n`` literals, stored as a ``(c, width)`` array of codes.

    Rows are kept sorted by literal code. A divided key additionally carries a
    per-clause `GroupLabel` array with the K_TRUE group stored first.
    """

    params: Params
    clauses: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = self.params
        codes = np.array(clause_codes(self.clauses), dtype=np.int32)
        if codes.size == 0:
            codes = codes.reshape(0, p.clause_width)
        if codes.ndim != 2 or codes.shape[1] != p.clause_width:
            raise ShapeError(f"clauses must have width {p.clause_width}, got shape {codes.shape}")
        if codes.size and (codes.min() < 0 or codes.max() >= 2 * p.n):
            raise MalformedClauseError(f"clause literal outside variables 1..{p.n}")
        codes = np.sort(codes, axis=1)
        variables = codes // 2
        if (variables[:, 1:] == variables[:, :-1]).any():
            row = int(np.nonzero((variables[:, 1:] == variables[:, :-1]).any(axis=1))[0][0])
            raise MalformedClauseError(f"clause {row} repeats a variable")
        object.__setattr__(self, "clauses", _readonly(codes))

        if p.mode is Mode.M4:
            if self.groups is None:
                raise ShapeError("a divided key needs group labels")
            groups = np.array(self.groups, dtype=np.uint8).reshape(-1)
            if groups.size != len(codes):
                raise ShapeError("one group label per clause is required")
            half = groups.size // 2
            if groups.size % 2 or (groups[:half] != 0).any() or (groups[half:] != 1).any():
                raise ShapeError("divided key groups must be equal-sized, K_TRUE first")
            object.__setattr__(self, "groups", _readonly(groups))
        elif self.groups is not None:
            raise ShapeError(f"mode {p.mode} keys carry no group labels")

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def divided(self) -> bool:
        return self.params.mode is Mode.M4

    def __len__(self) -> int:
        return len(self.clauses)

    def clause(self, index: int) -> Clause:
        return tuple(Literal.from_code(c) for c in self.clauses[index])

    def group(self, label: GroupLabel) -> np.ndarray:
        if self.groups is None:
            raise ShapeError("key is not divided")
        return self.clauses[self.groups == label]

    def literal_usage(self) -> np.ndarray:
        """Occurrences of each literal code across the whole key."""
        return np.bincount(self.clauses.reshape(-1), minlength=2 * self.n)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PublicKey):
            return NotImplemented
        same_groups = (self.groups is None and other.groups is None) or (
            self.groups is not None
            and other.groups is not None
            and np.array_equal(self.groups, other.groups)
        )
        return (
            self.params == other.params
            and np.array_equal(self.clauses, other.clauses)
            and same_groups
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"PublicKey(mode={self.params.mode}, n={self.n}, clauses={len(self)})"
