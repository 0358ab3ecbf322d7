"""Information measures: KL, generalized Jensen-Shannon, Renyi, information
densities, and the weighted-KL minimizer with geometric-mean closed form.

All logarithms are natural (nats). KL may return +inf (absolutely continuous
failure); GJS is always finite. The 0*log 0 = 0 convention is enforced
explicitly everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Distribution, InputError

_TINY = 1e-300


def _check_same_alphabet(p: Distribution, q: Distribution) -> None:
    if p.size != q.size:
        raise InputError(f"alphabet mismatch: {p.size} vs {q.size}")


# -- raw ndarray kernels (hot paths operate on plain arrays) ----------------

def kl_arr(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    pm = p[mask]
    return float(np.sum(pm * np.log(pm / q[mask])))


def gjs_arr(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    m = (alpha * p + q) / (1.0 + alpha)
    v = alpha * kl_arr(p, m) + kl_arr(q, m)
    return v if v > 0.0 else 0.0  # clamp float noise; GJS is non-negative


def gjs_table(px: np.ndarray, qy: np.ndarray, alpha: float) -> np.ndarray:
    """GJS(px[i], qy[j], alpha) for all (i, j), broadcast over leading axes.

    px: (..., M1, S), qy: (..., M2, S) -> (..., M1, M2). Rows may contain
    zeros (empirical types); the mixture support covers both arguments.
    """
    p = px[..., :, None, :]
    q = qy[..., None, :, :]
    m = (alpha * p + q) / (1.0 + alpha)
    logm = np.log(np.maximum(m, _TINY))

    def _kl(x):
        t = np.where(x > 0, x * (np.log(np.maximum(x, _TINY)) - logm), 0.0)
        return t.sum(axis=-1)

    return np.maximum(alpha * _kl(p) + _kl(q), 0.0)


def i1_arr(p: np.ndarray, q: np.ndarray, alpha: float) -> np.ndarray:
    """First information density log((1+a)p/(ap+q)) per symbol; 0 where p=0."""
    den = alpha * p + q
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = np.log((1.0 + alpha) * p[mask] / den[mask])
    return out


def i2_arr(p: np.ndarray, q: np.ndarray, alpha: float) -> np.ndarray:
    den = alpha * p + q
    out = np.zeros_like(q)
    mask = q > 0
    out[mask] = np.log((1.0 + alpha) * q[mask] / den[mask])
    return out


# -- public typed operations -------------------------------------------------

def kl(p: Distribution, q: Distribution) -> float:
    """D(p||q) in nats; +inf when q misses mass where p has some."""
    _check_same_alphabet(p, q)
    return kl_arr(p.probs, q.probs)


def gjs(p: Distribution, q: Distribution, alpha: float) -> float:
    """Generalized Jensen-Shannon divergence
    alpha*D(p||m) + D(q||m) with m = (alpha*p + q)/(1+alpha)."""
    _check_same_alphabet(p, q)
    if alpha <= 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    return gjs_arr(p.probs, q.probs, alpha)


def renyi(p: Distribution, q: Distribution, gamma: float) -> float:
    """Renyi divergence of order gamma != 1: log(sum p^g q^(1-g))/(g-1)."""
    _check_same_alphabet(p, q)
    if gamma == 1.0:
        raise InputError("Renyi order 1 is the KL divergence; use kl()")
    pa, qa = p.probs, q.probs
    if gamma < 1.0:
        mask = (pa > 0) & (qa > 0)
        if not mask.any():
            return math.inf
        s = float(np.sum(pa[mask] ** gamma * qa[mask] ** (1.0 - gamma)))
    else:
        mask = pa > 0
        if np.any(qa[mask] <= 0):
            return math.inf
        s = float(np.sum(pa[mask] ** gamma * qa[mask] ** (1.0 - gamma)))
    return math.log(s) / (gamma - 1.0)


def info_density_1(x: int, p: Distribution, q: Distribution, alpha: float) -> float:
    """log((1+a)p(x) / (a p(x) + q(x))); requires p(x) > 0."""
    _check_same_alphabet(p, q)
    px, qx = float(p.probs[x]), float(q.probs[x])
    if px <= 0:
        from .core import NumericError

        raise NumericError(f"info_density_1 undefined at symbol {x}: p(x)=0")
    return math.log((1.0 + alpha) * px / (alpha * px + qx))


def info_density_2(x: int, p: Distribution, q: Distribution, alpha: float) -> float:
    """log((1+a)q(x) / (a p(x) + q(x))); requires q(x) > 0."""
    _check_same_alphabet(p, q)
    px, qx = float(p.probs[x]), float(q.probs[x])
    if qx <= 0:
        from .core import NumericError

        raise NumericError(f"info_density_2 undefined at symbol {x}: q(x)=0")
    return math.log((1.0 + alpha) * qx / (alpha * px + qx))


# -- weighted-KL minimization ------------------------------------------------

@dataclass(frozen=True)
class WeightedKlProblem:
    """min over a single distribution Psi of sum_i w_i * D(Psi || R_i)."""

    targets: tuple
    weights: tuple

    def __post_init__(self):
        ts = tuple(self.targets)
        ws = tuple(float(w) for w in self.weights)
        if len(ts) != len(ws) or not ts:
            raise InputError("targets and weights must be equally long and non-empty")
        if any(w <= 0 for w in ws):
            raise InputError("all weights must be positive")
        sizes = {t.size for t in ts}
        if len(sizes) != 1:
            raise InputError("targets must share one alphabet")
        object.__setattr__(self, "targets", ts)
        object.__setattr__(self, "weights", ws)


def min_weighted_kl(problem: WeightedKlProblem) -> tuple[float, Distribution | None]:
    """Closed form via stationarity: the argmin is the normalized weighted
    geometric mean of the targets and the value is -W*log(normalizer).

    Returns (+inf, None) when the targets' supports have empty intersection.
    """
    w = np.asarray(problem.weights)
    big_w = float(w.sum())
    mats = np.stack([t.probs for t in problem.targets])
    support = np.all(mats > 0, axis=0)
    if not support.any():
        return math.inf, None
    logg = np.full(mats.shape[1], -math.inf)
    logg[support] = np.sum(
        (w[:, None] / big_w) * np.log(mats[:, support]), axis=0
    )
    g = np.exp(logg)
    z = float(g.sum())
    value = -big_w * math.log(z)
    if -1e-12 < value < 0.0:
        value = 0.0
    return value, Distribution(g / z)
