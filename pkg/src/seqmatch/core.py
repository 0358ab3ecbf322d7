"""Domain types shared across the library.

Alphabets are dense integer index sets 0..size-1; external symbol names are
mapped to indices by whoever produces the input files. All types here are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SUM_TOL = 1e-12          # accepted deviation of a probability vector from sum 1
RENORM_TOL = 1e-9        # beyond SUM_TOL but within this: renormalize; else reject
ALPHA_ROUND_TOL = 1e-9   # relative alpha drift tolerated before switching to N/n


class InputError(ValueError):
    """Invalid user-supplied configuration or data (CLI exit code 2)."""


class CapacityError(RuntimeError):
    """Requested enumeration exceeds the configured cap (CLI exit code 3)."""


class NumericError(ArithmeticError):
    """A numeric routine failed beyond its recovery budget (CLI exit code 3)."""


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 2:
            raise InputError(f"alphabet size must be an integer >= 2, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite alphabet.

    Entries must be non-negative and sum to one within SUM_TOL; sums off by
    at most RENORM_TOL are renormalized, anything worse is rejected so badly
    scaled input does not get silently fixed.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).copy()
        if p.ndim != 1 or p.size < 2:
            raise InputError("a distribution needs a 1-D vector of length >= 2")
        if np.any(p < 0):
            raise InputError(f"negative probability entry in {p!r}")
        s = float(p.sum())
        if abs(s - 1.0) > SUM_TOL:
            if abs(s - 1.0) <= RENORM_TOL:
                p = p / s
            else:
                raise InputError(f"probabilities sum to {s!r}, not 1")
        object.__setattr__(self, "probs", _freeze(p))

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @classmethod
    def bernoulli(cls, p: float) -> "Distribution":
        if not 0.0 <= p <= 1.0:
            raise InputError(f"Bernoulli parameter must be in [0, 1], got {p}")
        return cls(np.array([1.0 - p, p]))

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def dists_equal(a: Distribution, b: Distribution, atol: float = 1e-12) -> bool:
    return a.size == b.size and bool(np.max(np.abs(a.probs - b.probs)) <= atol)


@dataclass(frozen=True)
class EmpiricalType:
    """Symbol counts of one sequence; counts sum to the sequence length."""

    counts: np.ndarray
    length_n: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).copy()
        if c.ndim != 1 or np.any(c < 0):
            raise InputError("counts must be a 1-D vector of non-negative integers")
        if int(c.sum()) != int(self.length_n) or self.length_n <= 0:
            raise InputError(
                f"counts sum {int(c.sum())} != length_n {self.length_n}"
            )
        object.__setattr__(self, "counts", _freeze(c))
        object.__setattr__(self, "length_n", int(self.length_n))

    def as_distribution(self) -> Distribution:
        return Distribution(self.counts / self.length_n)


def empirical_type(seq: Sequence[int] | np.ndarray, alphabet: Alphabet) -> EmpiricalType:
    """Count symbol occurrences of `seq` over `alphabet`."""
    a = np.asarray(seq, dtype=np.int64)
    if a.ndim != 1 or a.size == 0:
        raise InputError("sequence must be a non-empty 1-D array of symbols")
    if a.min() < 0 or a.max() >= alphabet.size:
        raise InputError(
            f"symbol out of range [0, {alphabet.size}) in sequence"
        )
    counts = np.bincount(a, minlength=alphabet.size)
    return EmpiricalType(counts, a.size)


@dataclass(frozen=True)
class Database:
    """Ordered collection of same-length symbol sequences."""

    sequences: tuple
    seq_len: int
    alphabet: Alphabet

    def __post_init__(self):
        rows = []
        for s in self.sequences:
            a = np.asarray(s, dtype=np.int64).copy()
            if a.ndim != 1 or a.size != self.seq_len:
                raise InputError("all sequences in a database must share seq_len")
            if a.size == 0:
                raise InputError("empty sequence")
            if a.min() < 0 or a.max() >= self.alphabet.size:
                raise InputError("symbol out of alphabet range")
            rows.append(_freeze(a))
        if not rows:
            raise InputError("database needs at least one sequence")
        object.__setattr__(self, "sequences", tuple(rows))
        object.__setattr__(self, "seq_len", int(self.seq_len))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]], alphabet: Alphabet | None = None) -> "Database":
        mats = [np.asarray(r, dtype=np.int64) for r in rows]
        if not mats:
            raise InputError("database needs at least one sequence")
        if alphabet is None:
            alphabet = Alphabet(max(2, int(max(m.max() for m in mats)) + 1))
        return cls(tuple(mats), mats[0].size, alphabet)

    def __len__(self) -> int:
        return len(self.sequences)

    def types(self) -> list[EmpiricalType]:
        return [empirical_type(s, self.alphabet) for s in self.sequences]

    def type_matrix(self) -> np.ndarray:
        """Empirical distributions stacked as a (M, |X|) float matrix."""
        m = np.stack([np.bincount(s, minlength=self.alphabet.size) for s in self.sequences])
        return m / self.seq_len


@dataclass(frozen=True)
class MatchHypothesis:
    """A K-match: a bijection between K x-indices and K y-indices.

    Stored as the sorted tuple of (i, j) pairs; the (A, B, sigma) view is
    derived. Pair indices are 0-based.
    """

    pairs: tuple

    def __post_init__(self):
        ps = tuple(sorted((int(i), int(j)) for i, j in self.pairs))
        if not ps:
            raise InputError("a match hypothesis needs at least one pair")
        xs = [i for i, _ in ps]
        ys = [j for _, j in ps]
        if len(set(xs)) != len(xs) or len(set(ys)) != len(ys):
            raise InputError(f"pairs {ps} are not a bijection (repeated index)")
        if min(xs) < 0 or min(ys) < 0:
            raise InputError("negative index in match pairs")
        object.__setattr__(self, "pairs", ps)

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def a_set(self) -> frozenset:
        return frozenset(i for i, _ in self.pairs)

    @property
    def b_set(self) -> frozenset:
        return frozenset(j for _, j in self.pairs)

    @property
    def sigma(self) -> dict:
        return {i: j for i, j in self.pairs}

    @property
    def sigma_inv(self) -> dict:
        return {j: i for i, j in self.pairs}

    def intersection(self, other: "MatchHypothesis") -> frozenset:
        return frozenset(self.pairs) & frozenset(other.pairs)

    def difference(self, other: "MatchHypothesis") -> frozenset:
        return frozenset(self.pairs) - frozenset(other.pairs)

    def to_json(self) -> list:
        return [[i, j] for i, j in self.pairs]


@dataclass(frozen=True)
class ProblemConfig:
    """Problem sizes and the sequence-length ratio alpha = N/n.

    N is rounded to an integer; when rounding moves alpha by more than
    ALPHA_ROUND_TOL relative, the effective alpha = N/n is what every
    downstream computation uses (and `alpha_adjusted` is set).
    """

    m1: int
    m2: int
    alphabet: Alphabet
    alpha: float
    n: int
    big_n: int = field(init=False)
    alpha_eff: float = field(init=False)
    alpha_adjusted: bool = field(init=False)

    def __post_init__(self):
        if self.m1 < self.m2 or self.m2 < 1:
            raise InputError(f"need M1 >= M2 >= 1, got M1={self.m1}, M2={self.m2}")
        if self.alpha <= 0:
            raise InputError(f"alpha must be positive, got {self.alpha}")
        if self.n < 1:
            raise InputError(f"n must be >= 1, got {self.n}")
        big_n = int(round(self.n * self.alpha))
        if big_n < 1:
            raise InputError(f"N = round(n*alpha) = {big_n} must be >= 1")
        alpha_eff = big_n / self.n
        object.__setattr__(self, "big_n", big_n)
        object.__setattr__(self, "alpha_eff", alpha_eff)
        object.__setattr__(
            self, "alpha_adjusted",
            abs(alpha_eff - self.alpha) > ALPHA_ROUND_TOL * abs(self.alpha),
        )


# ---------------------------------------------------------------------------
# dists.json loading: {"alphabet_size": k, "P": [...], "Q": [...]} where each
# entry is either an explicit probability vector or the Bernoulli shorthand
# {"bern": p} (expands to [1-p, p]).
# ---------------------------------------------------------------------------

def parse_dist_entry(entry, alphabet_size: int | None = None) -> Distribution:
    if isinstance(entry, dict):
        if set(entry.keys()) != {"bern"}:
            raise InputError(f"unrecognized distribution entry {entry!r}")
        if alphabet_size not in (None, 2):
            raise InputError("Bernoulli shorthand requires alphabet_size 2")
        return Distribution.bernoulli(float(entry["bern"]))
    d = Distribution(np.asarray(entry, dtype=np.float64))
    if alphabet_size is not None and d.size != alphabet_size:
        raise InputError(
            f"distribution length {d.size} != alphabet_size {alphabet_size}"
        )
    return d


def load_dists(obj) -> tuple[Alphabet, list[Distribution], list[Distribution]]:
    """Parse a dists config (dict, JSON string, or path to a JSON file)."""
    if isinstance(obj, (str, bytes)):
        text = obj
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            try:
                with open(text) as fh:
                    obj = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot parse dists config: {exc}") from exc
    if not isinstance(obj, dict) or "P" not in obj or "Q" not in obj:
        raise InputError('dists config must be an object with "P" and "Q" lists')
    size = obj.get("alphabet_size")
    p_list = [parse_dist_entry(e, size) for e in obj["P"]]
    q_list = [parse_dist_entry(e, size) for e in obj["Q"]]
    if not p_list or not q_list:
        raise InputError("P and Q must be non-empty")
    sizes = {d.size for d in p_list} | {d.size for d in q_list}
    if len(sizes) != 1:
        raise InputError(f"distributions disagree on alphabet size: {sorted(sizes)}")
    k = sizes.pop()
    if size is not None and k != size:
        raise InputError(f"alphabet_size {size} != distribution length {k}")
    return Alphabet(k), p_list, q_list
