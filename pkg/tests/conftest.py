import numpy as np

from seqmatch.core import Distribution, MatchHypothesis

B = Distribution.bernoulli


def random_binary_instance(rng, m1=None, m2=None, k=None):
    """A random (P, Q, hypothesis) triple with matched pairs equal and every
    other pair distinct (parameters kept >= 0.02 apart)."""
    m1 = int(m1 if m1 is not None else rng.integers(2, 5))
    m2 = int(m2 if m2 is not None else rng.integers(1, min(m1, 2) + 1))
    k = int(k if k is not None else rng.integers(1, m2 + 1))
    vals = rng.permutation(np.linspace(0.06, 0.94, 23))
    vals = np.clip(vals + rng.uniform(-0.01, 0.01, size=vals.size), 0.03, 0.97)
    p_params = vals[:m1]
    a_idx = sorted(rng.choice(m1, size=k, replace=False).tolist())
    b_idx = rng.permutation(rng.choice(m2, size=k, replace=False)).tolist()
    pairs = tuple(sorted(zip(a_idx, b_idx)))
    h = MatchHypothesis(pairs)
    q_params = [None] * m2
    for i, j in pairs:
        q_params[j] = p_params[i]
    spare = iter(vals[m1:])
    for j in range(m2):
        if q_params[j] is None:
            q_params[j] = next(spare)
    return [B(t) for t in p_params], [B(t) for t in q_params], h
