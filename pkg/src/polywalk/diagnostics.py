"""Convergence diagnostics gating production sampling runs.

The gate follows the thresholds PSRF < 1.1 and total effective sample size
above 0.95 times the effective dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

PSRF_THRESHOLD = 1.1
ESS_FRACTION = 0.95


def _as_chain_array(chains):
    chains = [np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
    d = chains[0].shape[1]
    for c in chains:
        if c.shape[1] != d:
            raise DimensionError("all chains must share dimensionality")
    return chains, d


def psrf(chains, split=True):
    """Per-dimension Gelman-Rubin potential scale reduction factor.

    sqrt((W (k-1)/k + B/k) / W) with B and W the between- and within-chain
    variances.  ``split=True`` halves every chain first (sensitive to
    non-stationarity inside a single chain); pass False for the classic
    two-sequence statistic.  Dimensions with zero within-chain variance
    return inf.
    """
    chains, d = _as_chain_array(chains)
    if len(chains) < 2:
        raise ValueError("PSRF needs at least two chains")
    if split:
        halves = []
        for c in chains:
            mid = c.shape[0] // 2
            halves.extend([c[:mid], c[mid : 2 * mid]])
        chains = halves
    k = min(c.shape[0] for c in chains)
    if k < 5:
        raise ValueError("chains too short for PSRF")
    stacked = np.stack([c[:k] for c in chains])  # (m, k, d)
    means = stacked.mean(axis=1)  # (m, d)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)  # (d,)
    between = k * means.var(axis=0, ddof=1)  # (d,)
    out = np.full(d, np.inf)
    ok = within > 0.0
    v_hat = (k - 1) / k * within[ok] + between[ok] / k
    out[ok] = np.sqrt(v_hat / within[ok])
    return out


def ess(chain):
    """Per-dimension effective sample size k / (1 + 2 sum of autocorrelations).

    Autocorrelations are accumulated with the initial-positive-sequence rule:
    lag pairs (rho_2t, rho_2t+1) are summed until the first pair with a
    negative sum.  A constant dimension reports 0.
    """
    chain = np.atleast_2d(np.asarray(chain, dtype=float))
    k, d = chain.shape
    if k < 100:
        raise ValueError("ESS needs at least 100 draws")
    out = np.zeros(d)
    for j in range(d):
        x = chain[:, j]
        var = x.var()
        if var == 0.0:
            continue
        rho = _autocorr(x - x.mean())
        s = 0.0
        t = 1
        while t + 1 < k:
            pair = rho[t] + rho[t + 1]
            if pair < 0.0:
                break
            s += pair
            t += 2
        out[j] = min(k / (1.0 + 2.0 * s), float(k))
    return out


def _autocorr(x):
    n = x.shape[0]
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    return acov / acov[0]


@dataclass
class GateReport:
    passed: bool
    psrf_max: float
    ess_total_min: float
    ess_required: float
    reasons: list = field(default_factory=list)


def gate(chains, n_effective_dim):
    """Pass/fail report: max-dimension PSRF < 1.1 and the minimum over
    dimensions of the total (summed over chains) ESS above 0.95 n."""
    chains, d = _as_chain_array(chains)
    r = psrf(chains)
    ess_total = np.sum([ess(c) for c in chains], axis=0)
    required = ESS_FRACTION * float(n_effective_dim)
    reasons = []
    psrf_max = float(np.max(r))
    ess_min = float(np.min(ess_total))
    if not psrf_max < PSRF_THRESHOLD:
        reasons.append(f"PSRF {psrf_max:.4f} >= {PSRF_THRESHOLD}")
    if not ess_min > required:
        reasons.append(f"total ESS {ess_min:.1f} <= {required:.1f}")
    return GateReport(
        passed=not reasons,
        psrf_max=psrf_max,
        ess_total_min=ess_min,
        ess_required=required,
        reasons=reasons,
    )
