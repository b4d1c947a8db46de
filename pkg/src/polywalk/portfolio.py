"""Translate investor constraints into a convex body and compute portfolio stats.

The budget equality is removed through the null-space embedding; bounds,
group bands, and factor bands become polytope facets in the embedded space,
and a variance cap becomes an embedded ellipsoid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InfeasibleBodyError
from .geometry import (
    ConvexBody,
    Ellipsoid,
    HPolytope,
    build_embedding,
    embed_body,
    interior_point,
)

WINSOR_CLIP = 3.0


@dataclass(frozen=True)
class ConstraintSpec:
    """Investor constraint set in asset space.

    ``lower`` / ``upper`` are absolute per-asset bounds; ``benchmark_band``
    instead bounds each weight within +-band of the benchmark weight (both
    can be combined).  ``sector_band`` bounds sector sums within +-band of
    the benchmark sector sums.  ``group_bounds`` are absolute
    (members, lo, hi) triples on sums of weights; ``factor_bounds`` are
    (factor index or name, lo, hi) on the portfolio factor score.  The
    variance cap is a number, or "benchmark" for the benchmark's ex-ante
    variance under the snapshot covariance.
    """

    long_only: bool = True
    budget: float = 1.0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    benchmark_band: float | None = None
    sector_band: float | None = None
    group_bounds: tuple = ()
    factor_bounds: tuple = ()
    variance_cap: float | str | None = None


@dataclass(frozen=True)
class MarketSnapshot:
    """Cross-sectional inputs at one rebalance date."""

    asset_ids: tuple
    benchmark: np.ndarray  # parent-index weights
    mean_returns: np.ndarray
    cov: np.ndarray
    scores: np.ndarray  # assets x factors, winsorized z-scores
    factor_names: tuple
    sectors: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.asset_ids)
        if self.benchmark.shape != (n,) or self.mean_returns.shape != (n,):
            raise DimensionError("benchmark / returns dimension mismatch")
        if self.cov.shape != (n, n):
            raise DimensionError("covariance dimension mismatch")
        if self.scores.shape[0] != n:
            raise DimensionError("score matrix dimension mismatch")

    @property
    def n_assets(self):
        return len(self.asset_ids)

    def factor_column(self, factor):
        if isinstance(factor, str):
            factor = self.factor_names.index(factor)
        return self.scores[:, factor]


def _constraint_rows(spec, snapshot):
    """Assemble asset-space inequality rows grouped by constraint family."""
    n = snapshot.n_assets
    groups = {}

    rows, offs = [], []
    lower = np.full(n, -np.inf) if spec.lower is None else np.asarray(spec.lower, float)
    upper = np.full(n, np.inf) if spec.upper is None else np.asarray(spec.upper, float)
    if spec.long_only:
        lower = np.maximum(lower, 0.0)
    if spec.benchmark_band is not None:
        lower = np.maximum(lower, snapshot.benchmark - spec.benchmark_band)
        upper = np.minimum(upper, snapshot.benchmark + spec.benchmark_band)
        if spec.long_only:
            lower = np.maximum(lower, 0.0)
    if np.any(lower > upper):
        bad = int(np.argmax(lower - upper))
        raise InfeasibleBodyError(f"asset bound interval empty for asset {bad}")
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if np.isfinite(upper[i]):
            rows.append(e)
            offs.append(upper[i])
        if np.isfinite(lower[i]):
            rows.append(-e)
            offs.append(-lower[i])
    groups["asset_bounds"] = (rows, offs)

    rows, offs = [], []
    if spec.sector_band is not None and snapshot.sectors is not None:
        for sec in np.unique(snapshot.sectors):
            ind = (snapshot.sectors == sec).astype(float)
            bm_sum = float(ind @ snapshot.benchmark)
            rows.append(ind)
            offs.append(bm_sum + spec.sector_band)
            rows.append(-ind)
            offs.append(-(bm_sum - spec.sector_band))
    for members, lo, hi in spec.group_bounds:
        ind = np.zeros(n)
        ind[list(members)] = 1.0
        rows.append(ind)
        offs.append(hi)
        rows.append(-ind)
        offs.append(-lo)
    groups["group_bounds"] = (rows, offs)

    rows, offs = [], []
    for factor, lo, hi in spec.factor_bounds:
        beta = snapshot.factor_column(factor)
        rows.append(beta)
        offs.append(hi)
        rows.append(-beta)
        offs.append(-lo)
    groups["factor_bounds"] = (rows, offs)
    return groups


def _variance_cap_value(spec, snapshot):
    if spec.variance_cap is None:
        return None
    if isinstance(spec.variance_cap, str):
        if spec.variance_cap != "benchmark":
            raise ValueError(f"unknown variance cap {spec.variance_cap!r}")
        return float(snapshot.benchmark @ snapshot.cov @ snapshot.benchmark)
    return float(spec.variance_cap)


def _assemble(groups, drop=()):
    rows, offs = [], []
    for name, (r, o) in groups.items():
        if name in drop:
            continue
        rows.extend(r)
        offs.extend(o)
    if not rows:
        return None
    return HPolytope(np.array(rows), np.array(offs))


def build_body(spec, snapshot):
    """Certified-nonempty embedded body for a constraint spec at a snapshot.

    Raises InfeasibleBodyError listing the constraint families whose removal
    restores feasibility when the full set admits no interior point.
    """
    n = snapshot.n_assets
    groups = _constraint_rows(spec, snapshot)
    cap = _variance_cap_value(spec, snapshot)

    B = np.ones((1, n))
    beq = np.array([spec.budget])
    anchor = snapshot.benchmark * spec.budget / snapshot.benchmark.sum()
    emb = build_embedding(B, beq, anchor)

    def embedded(drop=()):
        polytope = _assemble(groups, drop)
        ellipsoid = None
        if cap is not None and "variance_cap" not in drop:
            ellipsoid = Ellipsoid(snapshot.cov, cap)
        if polytope is None and ellipsoid is None:
            raise InfeasibleBodyError("constraint spec is empty")
        return embed_body(ConvexBody(polytope=polytope, ellipsoid=ellipsoid), emb)

    body = embedded()
    try:
        interior_point(body)
        return body, emb
    except InfeasibleBodyError:
        pass

    candidates = list(groups.keys()) + (["variance_cap"] if cap is not None else [])
    binding = []
    for name in candidates:
        try:
            interior_point(embedded(drop=(name,)))
            binding.append(name)
        except InfeasibleBodyError:
            continue
    raise InfeasibleBodyError(
        "constraint spec admits no interior point; "
        + (
            f"relaxing any of {binding} restores feasibility"
            if binding
            else "no single constraint family is responsible"
        ),
        binding=binding,
    )


def portfolio_stats(omega, snapshot):
    """Return, variance, and per-factor scores of a weight vector."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (snapshot.n_assets,):
        raise DimensionError("weight vector dimension mismatch")
    ret = float(omega @ snapshot.mean_returns)
    var = float(omega @ snapshot.cov @ omega)
    scores = omega @ snapshot.scores
    return ret, var, scores


def zscore_winsorize(raw, sectors=None, clip=WINSOR_CLIP):
    """Standardize to z-scores and winsorize at +-clip, sector-wise when labeled.

    Groups with fewer than two distinct values map to zeros (with a warning),
    since no cross-sectional ordering information exists there.
    """
    raw = np.asarray(raw, dtype=float)
    out = np.zeros_like(raw)
    if sectors is None:
        index_sets = [np.arange(raw.shape[0])]
    else:
        sectors = np.asarray(sectors)
        index_sets = [np.flatnonzero(sectors == s) for s in np.unique(sectors)]
    for idx in index_sets:
        x = raw[idx]
        sd = x.std()
        if sd == 0.0 or idx.size < 2:
            warnings.warn("constant score group winsorized to zeros", stacklevel=2)
            continue
        out[idx] = np.clip((x - x.mean()) / sd, -clip, clip)
    return out
