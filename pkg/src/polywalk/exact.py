"""Exact and direct-simulation results for simplex-supported random portfolios.

Varsi's recursion gives the exact fraction of simplex volume cut off by a
halfspace, i.e. the CDF of a linear statistic of a uniformly weighted
portfolio.  The samplers cover the Dirichlet family (Gamma normalization),
shadow Dirichlet pushforwards, and the multinomial bootstrap grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class LinearStatistic:
    """Coefficients z and threshold gamma of the event <w, z> <= gamma."""

    z: np.ndarray
    gamma: float


def varsi_cdf(z, gamma):
    """P(<w, z> <= gamma) for w uniform on the canonical simplex.

    Inputs are standardized (shift by min z, scale by the range) before the
    recursion so the working values stay in [-1, 1]; the simplex budget
    identity makes the statistic invariant to that.  Zero entries of
    u = z - gamma are grouped with the non-negatives, which Varsi's labeling
    admits.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 1:
        raise DimensionError("z must have at least one entry")
    lo = float(z.min())
    hi = float(z.max())
    if gamma < lo:
        return 0.0
    if gamma >= hi:
        return 1.0
    span = hi - lo  # gamma strictly inside (lo, hi) here, so span > 0
    u = (z - gamma) / span
    u_pos = u[u >= 0.0]
    u_neg = u[u < 0.0]
    A = np.zeros(u_pos.size + 1)
    A[0] = 1.0
    # in-place ascending-f sweep: A[f-1] is the current-sweep value, A[f] the
    # previous-sweep value, exactly as the recursion tableau requires
    for un in u_neg:
        for f in range(1, A.size):
            A[f] = (u_pos[f - 1] * A[f] - un * A[f - 1]) / (u_pos[f - 1] - un)
    return float(min(max(A[-1], 0.0), 1.0))


def rp_linear_cdf(z, gammas):
    """CDF curve of <w, z> on a sorted grid of thresholds."""
    gammas = np.asarray(gammas, dtype=float).ravel()
    if np.any(np.diff(gammas) < 0):
        raise ValueError("gamma grid must be sorted")
    values = np.array([varsi_cdf(z, g) for g in gammas])
    return np.maximum.accumulate(values)


def sample_dirichlet(alpha, k, seed):
    """k Dirichlet(alpha) rows via Gamma(alpha_i, 1) normalization."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    if np.any(alpha <= 0.0):
        raise ValueError("all alpha entries must be positive")
    rng = _as_rng(seed)
    x = rng.gamma(shape=alpha, scale=1.0, size=(int(k), alpha.size))
    return x / x.sum(axis=1, keepdims=True)


def sample_shadow_dirichlet(M, alpha, k, seed):
    """k shadow-Dirichlet rows: M times a Dirichlet(alpha) draw."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise DimensionError("M must be square")
    if abs(np.linalg.det(M)) < 1e-300:
        raise ValueError("M must be full rank")
    if not np.allclose(M.sum(axis=0), 1.0, atol=1e-10):
        raise ValueError("columns of M must sum to one")
    w = sample_dirichlet(alpha, k, seed)
    return w @ M.T


def monotone_M(n, descending=True):
    """Left-stochastic matrix whose shadow enforces strictly ordered weights.

    With ``descending`` (the default) column j carries 1/j in its first j
    rows, so M w has strictly decreasing entries w1 > w2 > ... > wn for any
    interior simplex point.  ``descending=False`` flips the orientation
    (zeros first, value 1/(n-k+1) in rows k..n), which orders ascending.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    M = np.zeros((n, n))
    for j in range(1, n + 1):
        M[:j, j - 1] = 1.0 / j
    if not descending:
        M = M[::-1, ::-1]
    return M


def sample_bootstrap_rp(n, m, p, k, seed):
    """k bootstrap portfolios: multinomial counts over n assets divided by m trials.

    Every entry is a multiple of 1/m and rows sum to one; m = 1 yields
    one-hot single-asset portfolios (the simplex vertices).
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.size != n:
        raise DimensionError("p must have n entries")
    if m < 1:
        raise ValueError("m must be at least 1")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise ValueError("p must lie on the simplex")
    rng = _as_rng(seed)
    counts = rng.multinomial(int(m), p / p.sum(), size=int(k))
    return counts / float(m)


def bootstrap_dirichlet_scale(n, m):
    """Concentration lambda(n, m) = (m-1)/n matching the m-out-of-n bootstrap.

    Dirichlet(1 * lambda) reproduces the variance of any linear statistic of
    the multinomial bootstrap with m trials and uniform probabilities.
    """
    return (m - 1) / n


def dirichlet_moments(alpha, z):
    """Exact mean and variance of <w, z> under Dirichlet(alpha)."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if alpha.size != z.size:
        raise DimensionError("alpha and z must have the same length")
    a0 = alpha.sum()
    mean = float(z @ alpha) / a0
    # Cov(w_i, w_j) = (delta_ij a_i a0 - a_i a_j) / (a0^2 (a0 + 1))
    zc = z - mean
    var = float(zc**2 @ alpha) / (a0 * (a0 + 1.0))
    return mean, var


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
