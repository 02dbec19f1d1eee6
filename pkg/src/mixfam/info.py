"""Entropies and divergences on finite alphabets (natural logarithms)."""

import numpy as np

SUM_TOL = 1e-12


def as_distribution(p, name="p"):
    """Validate ``p`` as a full-support probability vector and return it as floats."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(p <= 0):
        raise ValueError(
            f"{name} must have full support; use restrict_support() to drop zero entries"
        )
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def restrict_support(p):
    """Drop zero-probability points.

    Returns the renormalised restriction and the indices that were kept, so
    callers can reindex any companion arrays (features, channel rows).
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("negative probabilities")
    keep = np.flatnonzero(p > 0)
    if keep.size == 0:
        raise ValueError("empty support")
    q = p[keep]
    return q / q.sum(), keep


def _check_same_size(p, q):
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")


def _kl(p, q):
    return float(np.sum(p * (np.log(p) - np.log(q))))


def kl_divergence(p, q):
    """D(p||q) = sum_x p(x) (ln p(x) - ln q(x))."""
    p = as_distribution(p, "p")
    q = as_distribution(q, "q")
    _check_same_size(p, q)
    return max(_kl(p, q), 0.0)


def renyi_divergence(alpha, p, q):
    """Order-``alpha`` Renyi divergence (1/(alpha-1)) ln sum p^alpha q^(1-alpha)."""
    if not alpha > 0 or alpha == 1:
        raise ValueError("alpha must be positive and different from 1")
    p = as_distribution(p, "p")
    q = as_distribution(q, "q")
    _check_same_size(p, q)
    s = alpha * np.log(p) + (1.0 - alpha) * np.log(q)
    m = s.max()
    value = (m + np.log(np.exp(s - m).sum())) / (alpha - 1.0)
    return max(float(value), 0.0)


def entropy(p):
    p = as_distribution(p)
    return float(-np.sum(p * np.log(p)))


def conditional_entropy(joint, x_size):
    """H(X|Y) for a joint laid out row-major as joint[x * y_size + y]."""
    joint = np.asarray(joint, dtype=float)
    if joint.ndim != 1 or x_size <= 0 or joint.size % x_size:
        raise ValueError(f"joint of length {joint.size} is not divisible by x_size={x_size}")
    if np.any(joint < 0) or abs(joint.sum() - 1.0) > SUM_TOL:
        raise ValueError("joint is not a probability vector")
    pxy = joint.reshape(x_size, -1)
    py = pxy.sum(axis=0)
    mask = pxy > 0
    # H(X|Y) = -sum p(x,y) ln p(x|y)
    ratio = np.where(mask, pxy, 1.0) / np.where(py > 0, py, 1.0)[None, :]
    return float(-np.sum(np.where(mask, pxy * np.log(ratio), 0.0)))


def kl_rows(rows, q):
    """Row-wise D(rows[i] || q) with the 0 ln 0 = 0 convention on ``rows``."""
    rows = np.atleast_2d(rows)
    mask = rows > 0
    safe = np.where(mask, rows, 1.0)
    logq = np.log(np.where(q > 0, q, 1.0))
    terms = np.where(mask, rows * (np.log(safe) - logq), 0.0)
    return terms.sum(axis=-1)
