"""Second-order (finite-n) analysis: score covariances, the tie set of
rival hypotheses attaining the minimal population score, the multivariate
Gaussian CDF, the reject quantile, and the calibrated threshold that pins the
false-reject probability near a target level.

Also exposes the non-asymptotic converse slack terms as plain numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri, roots_legendre
from scipy.stats import qmc

from .core import Distribution, InputError, MatchHypothesis, NumericError
from .divergences import i1_arr, i2_arr
from .exponents import min_rival_score, population_score
from .hypotheses import HypothesisSpace

PSD_RIDGE = 1e-10
_QMC_SEED = 20240801


def _cov_under(w: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    ef = float(np.sum(w * f))
    eg = float(np.sum(w * g))
    return float(np.sum(w * f * g)) - ef * eg


def score_covariance(
    p_dists, q_dists, h1: MatchHypothesis, h2: MatchHypothesis, alpha: float
) -> float:
    """Asymptotic covariance of the two hypotheses' score statistics: shared
    x-indices contribute alpha-weighted first-density covariances, shared
    y-indices second-density covariances, all summed exactly over the
    alphabet."""
    total = 0.0
    for i, j in h1.pairs:
        p = p_dists[i].probs
        for i2, j2 in h2.pairs:
            if i2 == i:
                f = i1_arr(p, q_dists[j].probs, alpha)
                g = i1_arr(p, q_dists[j2].probs, alpha)
                total += alpha * _cov_under(p, f, g)
            if j2 == j:
                q = q_dists[j].probs
                f = i2_arr(p_dists[i].probs, q, alpha)
                g = i2_arr(p_dists[i2].probs, q, alpha)
                total += _cov_under(q, f, g)
    return total


def tie_set(
    p_dists, q_dists, space: HypothesisSpace, l: int, alpha: float, tol: float = 1e-9
) -> list[int]:
    """Rival hypotheses whose population score ties the minimum within a
    relative tolerance, in ascending index order."""
    if space.count < 2:
        raise InputError("tie set needs at least two hypotheses")
    lam = min_rival_score(p_dists, q_dists, space, l, alpha)
    cut = lam + tol * (lam if lam > 0 else 1.0)
    return [
        t
        for t in range(space.count)
        if t != l and population_score(p_dists, q_dists, space[t], alpha) <= cut
    ]


def covariance_matrix(p_dists, q_dists, space, ties, alpha: float) -> np.ndarray:
    tau = len(ties)
    v = np.empty((tau, tau))
    for a in range(tau):
        for b in range(a, tau):
            v[a, b] = v[b, a] = score_covariance(
                p_dists, q_dists, space[ties[a]], space[ties[b]], alpha
            )
    return v


def _project_psd(cov: np.ndarray, budget: float = 1e-8):
    """Clip negative eigenvalues at zero (plus a ridge); error out when the
    most negative eigenvalue exceeds the regularization budget."""
    sym = 0.5 * (cov + cov.T)
    if not np.allclose(cov, cov.T, atol=1e-12 * max(1.0, float(np.abs(cov).max()))):
        raise InputError("covariance matrix must be symmetric")
    w, u = np.linalg.eigh(sym)
    scale = max(1.0, float(w.max(initial=0.0)))
    if w.min() < -budget * scale:
        raise NumericError(
            f"matrix is not PSD within budget: eigenvalues {w}, condition "
            f"{w.max() / max(abs(w.min()), 1e-300):.3e}"
        )
    if w.min() >= 0:
        return sym, False
    w = np.clip(w, 0.0, None) + PSD_RIDGE
    return (u * w) @ u.T, True


def _phi2(h: float, k: float, rho: float) -> float:
    """Standard bivariate normal CDF by Gauss-Legendre quadrature of the
    correlation-path integral; exact limits at |rho| = 1."""
    if rho >= 1.0 - 1e-12:
        return float(ndtr(min(h, k)))
    if rho <= -1.0 + 1e-12:
        return float(max(ndtr(h) + ndtr(k) - 1.0, 0.0))
    base = float(ndtr(h) * ndtr(k))
    if rho == 0.0:
        return base
    nodes, weights = roots_legendre(96)
    r = 0.5 * rho * (nodes + 1.0)
    w = 0.5 * rho * weights
    one_m = 1.0 - r * r
    integrand = np.exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_m)) / np.sqrt(one_m)
    return base + float(np.sum(w * integrand)) / (2.0 * math.pi)


def _qmc_mvn(upper: np.ndarray, chol: np.ndarray, n_pow: int = 14, batches: int = 8):
    """Genz sequential-conditioning estimate of P(Z <= upper) with a seeded
    scrambled Sobol sequence; returns (estimate, error estimate)."""
    d = upper.size
    sob = qmc.Sobol(d - 1, scramble=True, seed=_QMC_SEED)
    pts = sob.random(2**n_pow * batches)
    vals = np.empty(batches)
    m = 2**n_pow
    for b in range(batches):
        u = pts[b * m : (b + 1) * m]
        f = np.ones(m)
        ys = np.zeros((m, d))
        e_prev = np.full(m, ndtr(upper[0] / chol[0, 0]))
        f *= e_prev
        for i in range(1, d):
            q = np.clip(u[:, i - 1] * e_prev, 1e-15, 1 - 1e-15)
            ys[:, i - 1] = ndtri(q)
            mu = ys[:, :i] @ chol[i, :i]
            e_prev = ndtr((upper[i] - mu) / chol[i, i])
            f *= e_prev
        vals[b] = f.mean()
    est = float(vals.mean())
    err = 3.0 * float(vals.std(ddof=1)) / math.sqrt(batches)
    return est, err


def mvn_cdf(upper, mean=None, cov=None, *, abs_tol: float = 1e-6) -> float:
    """P(Z <= upper componentwise) for Z ~ N(mean, cov).

    tau = 1 uses the error function, tau = 2 deterministic quadrature,
    tau >= 3 seeded quasi-Monte Carlo (reproducible; error checked against
    abs_tol)."""
    upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    d = upper.size
    mean = np.zeros(d) if mean is None else np.atleast_1d(np.asarray(mean, dtype=np.float64))
    cov = np.eye(d) if cov is None else np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if mean.size != d or cov.shape != (d, d):
        raise InputError("mvn_cdf dimensions disagree")
    z = upper - mean
    cov, _ = _project_psd(cov)
    sig = np.sqrt(np.diag(cov))

    # degenerate coordinates are deterministic zeros: drop them
    live = sig > 1e-150
    if not live.all():
        if np.any(z[~live] < 0):
            return 0.0
        z, cov, sig = z[live], cov[np.ix_(live, live)], sig[live]
        d = z.size
        if d == 0:
            return 1.0

    if d == 1:
        return float(ndtr(z[0] / sig[0]))
    if d == 2:
        rho = float(cov[0, 1] / (sig[0] * sig[1]))
        rho = min(1.0, max(-1.0, rho))
        return _phi2(z[0] / sig[0], z[1] / sig[1], rho)

    ridged = cov + PSD_RIDGE * np.eye(d)
    chol = np.linalg.cholesky(ridged)
    for n_pow in (14, 16, 18):
        est, err = _qmc_mvn(z, chol, n_pow=n_pow)
        if err <= abs_tol:
            return est
    raise NumericError(f"mvn_cdf error estimate {err:.2e} above {abs_tol:.2e}")


def gaussian_reject_quantile(cov: np.ndarray, epsilon: float, *, tol: float = 1e-8) -> float:
    """inf over L of {Phi_tau(L*1; 0; cov) >= 1 - epsilon}: the centered
    Gaussian quantile governing the second-order threshold shift."""
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must be in (0, 1), got {epsilon}")
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    tau = cov.shape[0]
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if tau == 1:
        if sig[0] <= 1e-150:
            return 0.0
        return float(sig[0] * ndtri(1.0 - epsilon))
    target = 1.0 - epsilon
    span = 1.0 + 8.0 * float(sig.max())
    lo, hi = -span, span
    ones = np.ones(tau)

    def cdf(val):
        return mvn_cdf(val * ones, np.zeros(tau), cov)

    for _ in range(60):
        if cdf(lo) < target:
            break
        lo *= 2.0
    for _ in range(60):
        if cdf(hi) >= target:
            break
        hi *= 2.0
    if cdf(hi) < target:
        raise NumericError("quantile bracket failure")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def second_order_threshold(n: int, epsilon: float, big_lambda: float, nu: float) -> float:
    """Threshold Lambda - nu/sqrt(n) at which the false-reject probability is
    pinned near epsilon."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    return big_lambda - nu / math.sqrt(n)


@dataclass(frozen=True)
class SmallDevAnalysis:
    big_lambda: float
    tie_set: tuple
    tau: int
    cov_matrix: np.ndarray
    nu_star: float
    chi_star: float
    n: int
    epsilon: float
    psd_projected: bool


def analyze(
    p_dists,
    q_dists,
    space: HypothesisSpace,
    l: int,
    alpha: float,
    n: int,
    epsilon: float,
    tie_tol: float = 1e-9,
) -> SmallDevAnalysis:
    """Assemble the full second-order picture for hypothesis l."""
    big_lambda = min_rival_score(p_dists, q_dists, space, l, alpha)
    ties = tie_set(p_dists, q_dists, space, l, alpha, tol=tie_tol)
    raw = covariance_matrix(p_dists, q_dists, space, ties, alpha)
    cov, projected = _project_psd(raw)
    nu = gaussian_reject_quantile(cov, epsilon)
    chi = second_order_threshold(n, epsilon, big_lambda, nu)
    return SmallDevAnalysis(
        big_lambda=big_lambda,
        tie_set=tuple(ties),
        tau=len(ties),
        cov_matrix=cov,
        nu_star=nu,
        chi_star=chi,
        n=n,
        epsilon=epsilon,
        psd_projected=projected,
    )


def converse_slack(n: int, big_n: int, m1: int, m2: int, alphabet_size: int, lam: float) -> dict:
    """Non-asymptotic converse slack delta and the deflated threshold
    lambda - delta - log(n)/n; a negative result is reported as-is with a
    warning flag."""
    if n < 1 or big_n < 1:
        raise InputError("n and N must be >= 1")
    delta = (
        m1 * alphabet_size * math.log(big_n + 1.0) / big_n
        + m2 * alphabet_size * math.log(n + 1.0) / n
    )
    lam_tilde = lam - delta - math.log(n) / n
    return {
        "delta": delta,
        "lambda_tilde": lam_tilde,
        "negative_threshold": lam_tilde < 0,
    }
