"""The matching tests: the known-K GLRT, the repeated single-match test, and
the two-phase test for an unknown number of matches.

All decisions are functions of the empirical types only. The batch_* helpers
run the identical decision logic over a leading trial axis; the public
single-database tests are thin wrappers around them, so the Monte Carlo
engine and the CLI exercise one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Database, InputError, MatchHypothesis
from .divergences import gjs_table
from .hypotheses import DEFAULT_CAP, HypothesisSpace, enumerate_space

ALPHA_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class TestConfig:
    """Thresholds for the tests; lam for known K, (lambda1, lambda2) for the
    two-phase test. threshold_k picks which K enters the finite-n threshold
    correction of the two-phase test: the current loop estimate ("khat") or
    the fixed maximum ("m2")."""

    lam: float | None = None
    lambda1: float | None = None
    lambda2: float | None = None
    k: int | None = None
    type_correction: bool = True
    threshold_k: str = "khat"

    def __post_init__(self):
        for name in ("lam", "lambda1", "lambda2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"threshold {name} must be >= 0, got {v}")
        if self.threshold_k not in ("khat", "m2"):
            raise InputError(f"threshold_k must be 'khat' or 'm2', got {self.threshold_k!r}")


@dataclass(frozen=True)
class Verdict:
    """Match(hypothesis, K) or Reject, plus scoring diagnostics."""

    matched: MatchHypothesis | None
    k: int | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_match(self) -> bool:
        return self.matched is not None

    def to_json(self) -> dict:
        return {
            "decision": "match" if self.is_match else "reject",
            "k": self.k,
            "pairs": self.matched.to_json() if self.matched else None,
            "diagnostics": {
                k: (v if not isinstance(v, float) or math.isfinite(v) else repr(v))
                for k, v in self.diagnostics.items()
            },
        }


def effective_threshold(lam: float, k: int, alphabet_size: int, n: int, alpha: float) -> float:
    """lambda_n = lambda + K*|X|*log((1+alpha)n + 1)/n."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    return lam + k * alphabet_size * math.log((1.0 + alpha) * n + 1.0) / n


def _alpha_used(x_db: Database, y_db: Database, alpha: float | None) -> float:
    eff = x_db.seq_len / y_db.seq_len
    if alpha is not None and abs(alpha - eff) > ALPHA_MATCH_TOL * max(1.0, abs(alpha)):
        # integer sequence lengths win; the caller's alpha was only nominal
        return eff
    return eff


def score(x_db: Database, y_db: Database, h: MatchHypothesis, alpha: float | None = None) -> float:
    """Sum of GJS divergences between matched empirical types."""
    if x_db.alphabet.size != y_db.alphabet.size:
        raise InputError("databases must share an alphabet")
    if max(h.a_set) >= len(x_db) or max(h.b_set) >= len(y_db):
        raise InputError("hypothesis indexes a sequence outside the databases")
    a = _alpha_used(x_db, y_db, alpha)
    table = gjs_table(x_db.type_matrix(), y_db.type_matrix(), a)
    return float(sum(table[i, j] for i, j in h.pairs))


# ---------------------------------------------------------------------------
# batch decision cores over empirical-type matrices
# tx: (B, M1, S), ty: (B, M2, S); a GJS table is (B, M1, M2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceIndex:
    """Gather indices for summing per-pair GJS values into hypothesis scores."""

    space: HypothesisSpace
    rows: np.ndarray  # (T_K, K) x-indices
    cols: np.ndarray  # (T_K, K) y-indices


def space_index(space: HypothesisSpace) -> SpaceIndex:
    rows = np.array([[i for i, _ in h.pairs] for h in space.hypotheses])
    cols = np.array([[j for _, j in h.pairs] for h in space.hypotheses])
    return SpaceIndex(space, rows, cols)


def batch_scores(table: np.ndarray, sidx: SpaceIndex) -> np.ndarray:
    """(B, M1, M2) GJS table -> (B, T_K) hypothesis scores."""
    return table[..., sidx.rows, sidx.cols].sum(axis=-1)


def batch_known_k(scores: np.ndarray, lam_n: float):
    """argmin index (lowest index on ties), second-min value, match mask."""
    l_star = scores.argmin(axis=-1)
    if scores.shape[-1] == 1:
        h = np.full(scores.shape[:-1], math.inf)
    else:
        part = np.partition(scores, 1, axis=-1)
        h = part[..., 1]
    return l_star, h, h > lam_n


def batch_simple(table: np.ndarray, lam_n_k1: float):
    """Repeated K=1 sub-tests, one per y-sequence (requires M2 = K).

    Returns (assigned, any_reject, inconsistent): assigned is (B, M2) with the
    x-index each y was matched to; rows with a sub-reject or a non-injective
    assignment are not a match.
    """
    i_star = table.argmin(axis=-2)                      # (B, M2)
    if table.shape[-2] == 1:
        h_j = np.full(table.shape[:-2] + table.shape[-1:], math.inf)
    else:
        h_j = np.partition(table, 1, axis=-2)[..., 1, :]  # (B, M2)
    sub_reject = h_j <= lam_n_k1
    any_reject = sub_reject.any(axis=-1)
    srt = np.sort(i_star, axis=-1)
    inconsistent = (np.diff(srt, axis=-1) == 0).any(axis=-1)
    return i_star, any_reject, inconsistent


def _threshold_k_value(mode: str, khat: int, m2: int) -> int:
    return khat if mode == "khat" else m2


def batch_two_phase(
    table: np.ndarray,
    spaces: dict[int, SpaceIndex],
    lambda1: float,
    lambda2: float,
    n: int,
    alpha: float,
    alphabet_size: int,
    type_correction: bool = True,
    threshold_k: str = "khat",
):
    """Scan khat = M2..1; at the first khat whose minimal score clears the
    first threshold, run the known-K decision at the second threshold.

    Returns (est_k, l_star, matched): est_k = 0 when the scan exhausts
    (reject with no match-count estimate); matched rows have l_star valid in
    spaces[est_k].
    """
    m2 = max(spaces)
    b = table.shape[0]
    est_k = np.zeros(b, dtype=np.int64)
    l_out = np.full(b, -1, dtype=np.int64)
    matched = np.zeros(b, dtype=bool)
    undecided = np.ones(b, dtype=bool)
    for khat in range(m2, 0, -1):
        if not undecided.any():
            break
        kt = _threshold_k_value(threshold_k, khat, m2)
        if type_correction:
            lam1_n = effective_threshold(lambda1, kt, alphabet_size, n, alpha)
            lam2_n = effective_threshold(lambda2, kt, alphabet_size, n, alpha)
        else:
            lam1_n, lam2_n = lambda1, lambda2
        scores = batch_scores(table, spaces[khat])
        trigger = undecided & (scores.min(axis=-1) <= lam1_n)
        if trigger.any():
            l_star, h, ok = batch_known_k(scores, lam2_n)
            est_k[trigger] = khat
            l_out[trigger] = l_star[trigger]
            matched[trigger] = ok[trigger]
            undecided &= ~trigger
    return est_k, l_out, matched


# ---------------------------------------------------------------------------
# public single-database tests
# ---------------------------------------------------------------------------

def _tables(x_db: Database, y_db: Database, alpha: float | None):
    if x_db.alphabet.size != y_db.alphabet.size:
        raise InputError("databases must share an alphabet")
    a = _alpha_used(x_db, y_db, alpha)
    tx = x_db.type_matrix()[None, ...]
    ty = y_db.type_matrix()[None, ...]
    return gjs_table(tx, ty, a), a


def unnikrishnan_test(
    x_db: Database,
    y_db: Database,
    k: int,
    lam: float,
    alpha: float | None = None,
    *,
    type_correction: bool = True,
    collect_scores: bool = False,
    cap: int = DEFAULT_CAP,
) -> Verdict:
    """Known-K GLRT: accept the minimal-score K-match when the second-smallest
    score exceeds the threshold, otherwise reject."""
    m1, m2 = len(x_db), len(y_db)
    if not 1 <= k <= m2:
        raise InputError(f"need 1 <= K <= M2, got K={k}, M2={m2}")
    if lam < 0:
        raise InputError(f"lambda must be >= 0, got {lam}")
    space = enumerate_space(m1, m2, k, cap=cap)
    table, a = _tables(x_db, y_db, alpha)
    scores = batch_scores(table, space_index(space))[0]
    n = y_db.seq_len
    lam_n = (
        effective_threshold(lam, k, x_db.alphabet.size, n, a)
        if type_correction
        else lam
    )
    l_star = int(scores.argmin())
    h = math.inf if space.count == 1 else float(np.partition(scores, 1)[1])
    diag = {
        "min_score": float(scores[l_star]),
        "second_min_score": h,
        "threshold": lam_n,
        "alpha_used": a,
    }
    if space.count == 1:
        diag["single_hypothesis"] = True
    if collect_scores:
        diag["scores"] = [float(s) for s in scores]
    if h > lam_n:
        return Verdict(space[l_star], k, diag)
    return Verdict(None, None, diag)


def simple_test(
    x_db: Database,
    y_db: Database,
    lam: float,
    alpha: float | None = None,
    *,
    type_correction: bool = True,
    cap: int = DEFAULT_CAP,
) -> Verdict:
    """Repeated K=1 GLRT, one run per y-sequence; assumes K = M2.

    Reject when any sub-test rejects; a non-injective assembly (two y's
    claiming the same x) cannot be a K-match and is a flagged reject.
    """
    m1, m2 = len(x_db), len(y_db)
    if lam < 0:
        raise InputError(f"lambda must be >= 0, got {lam}")
    table, a = _tables(x_db, y_db, alpha)
    n = y_db.seq_len
    lam_n = (
        effective_threshold(lam, 1, x_db.alphabet.size, n, a)
        if type_correction
        else lam
    )
    assigned, any_reject, inconsistent = batch_simple(table, lam_n)
    assigned = assigned[0]
    diag = {
        "threshold": lam_n,
        "alpha_used": a,
        "per_y_match": [int(i) for i in assigned],
    }
    if bool(any_reject[0]):
        return Verdict(None, None, diag)
    if bool(inconsistent[0]):
        diag["inconsistent_assignment"] = True
        return Verdict(None, None, diag)
    h = MatchHypothesis(tuple((int(assigned[j]), j) for j in range(m2)))
    return Verdict(h, m2, diag)


def two_phase_test(
    x_db: Database,
    y_db: Database,
    lambda1: float,
    lambda2: float,
    alpha: float | None = None,
    *,
    type_correction: bool = True,
    threshold_k: str = "khat",
    cap: int = DEFAULT_CAP,
) -> Verdict:
    """Unknown match count: estimate K by scanning M2..1 against the first
    threshold, then run the known-K test at the second threshold."""
    m1, m2 = len(x_db), len(y_db)
    if lambda1 < 0 or lambda2 < 0:
        raise InputError("lambda1 and lambda2 must be >= 0")
    table, a = _tables(x_db, y_db, alpha)
    spaces = {k: space_index(enumerate_space(m1, m2, k, cap=cap)) for k in range(1, m2 + 1)}
    est_k, l_star, matched = batch_two_phase(
        table,
        spaces,
        lambda1,
        lambda2,
        y_db.seq_len,
        a,
        x_db.alphabet.size,
        type_correction=type_correction,
        threshold_k=threshold_k,
    )
    khat = int(est_k[0])
    diag = {"estimated_k": khat, "alpha_used": a}
    if khat > 0:
        scores = batch_scores(table, spaces[khat])[0]
        diag["min_score"] = float(scores.min())
        diag["second_min_score"] = (
            math.inf if scores.size == 1 else float(np.partition(scores, 1)[1])
        )
    if bool(matched[0]):
        return Verdict(spaces[khat].space[int(l_star[0])], khat, diag)
    return Verdict(None, None, diag)
