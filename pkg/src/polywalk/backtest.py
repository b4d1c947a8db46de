"""Rebalanced random-portfolio backtests with score-sorted path concatenation.

Every rebalance builds a constraint body from data available strictly before
the rebalance date, samples k portfolios (gated by convergence diagnostics),
simulates buy-and-hold daily returns until the next rebalance (weights float
with total returns), and chains periods rank-to-rank by factor score.  A
synthetic planted-factor market generator stands in for proprietary index
data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .densities import Dirichlet, Transformed, Uniform
from .diagnostics import gate
from .errors import DimensionError, InfeasibleBodyError, PolywalkError
from .portfolio import ConstraintSpec, MarketSnapshot, build_body, zscore_winsorize
from .walks import WalkConfig, sample

DEFAULT_FACTORS = ("value", "momentum", "quality", "size")
RIDGE_FRACTION = 1e-6


class MarketData:
    """Market history with access methods that keep look-ahead explicit.

    Estimation reads go through ``returns_window`` (strictly before a date);
    simulation reads go through ``forward_returns``.  Scores and benchmark
    weights are as-of lookups (most recent row at or before the date).
    """

    def __init__(self, returns, scores, benchmark, sectors=None, mask=None):
        self.returns = returns.sort_index()
        self.scores = {f: df.sort_index() for f, df in scores.items()}
        self.benchmark = benchmark.sort_index()
        self.sectors = sectors
        self.mask = mask.sort_index() if mask is not None else None
        self._validate()

    def _validate(self):
        cols = list(self.returns.columns)
        for f, df in self.scores.items():
            if list(df.columns) != cols:
                raise DimensionError(f"score columns for {f!r} do not match returns")
        if list(self.benchmark.columns) != cols:
            raise DimensionError("benchmark columns do not match returns")
        if self.returns.isna().any().any():
            raise ValueError("returns contain gaps inside the active window")

    @property
    def asset_ids(self):
        return tuple(self.returns.columns)

    @property
    def factor_names(self):
        return tuple(self.scores.keys())

    def returns_window(self, end, length):
        """The last ``length`` return rows strictly before ``end``."""
        window = self.returns.loc[self.returns.index < end]
        return window.iloc[-length:]

    def forward_returns(self, start, end):
        """Return rows with start <= date < end (end=None means to the last date)."""
        idx = self.returns.index
        stop = idx[-1] + pd.Timedelta(days=1) if end is None else end
        return self.returns.loc[(idx >= start) & (idx < stop)]

    def scores_asof(self, date):
        out = {}
        for f, df in self.scores.items():
            rows = df.loc[df.index <= date]
            if rows.empty:
                raise KeyError(f"no {f!r} scores at or before {date}")
            out[f] = rows.iloc[-1].to_numpy(dtype=float)
        return out

    def benchmark_asof(self, date):
        rows = self.benchmark.loc[self.benchmark.index <= date]
        if rows.empty:
            raise KeyError(f"no benchmark weights at or before {date}")
        w = rows.iloc[-1].to_numpy(dtype=float)
        return w / w.sum()

    def investable_asof(self, date):
        if self.mask is None:
            return np.ones(len(self.asset_ids), dtype=bool)
        rows = self.mask.loc[self.mask.index <= date]
        if rows.empty:
            return np.ones(len(self.asset_ids), dtype=bool)
        return rows.iloc[-1].to_numpy(dtype=bool)

    def rebalance_dates(self, min_history):
        """First trading day of each month with enough prior history."""
        idx = self.returns.index
        firsts = pd.Series(idx, index=idx).groupby(idx.to_period("M")).first()
        eligible = [d for d in firsts if (idx < d).sum() >= min_history]
        return [d for d in eligible if d < idx[-1]]


@dataclass(frozen=True)
class BacktestConfig:
    """Rebalance schedule, sampling settings, and constraint spec."""

    k: int = 64
    seed: int = 0
    sort_factor: str = "momentum"
    constraints: ConstraintSpec = field(default_factory=ConstraintSpec)
    walk: WalkConfig = field(default_factory=lambda: WalkConfig(kind="cdhr", burn_in=2000, thinning=20))
    target: str = "uniform"  # or "dirichlet_benchmark"
    alpha_scale: float = 1.0
    cov_lookback: int = 1260
    n_chains: int = 4
    momentum_window: tuple = (252, 21)  # 12-1 months in trading days

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1 (>= 2 for rank analysis)")


@dataclass
class BacktestResult:
    paths: pd.DataFrame  # daily returns, columns = score rank (1 = highest)
    path_scores: np.ndarray  # periods x k, aligned to path columns
    rebalance_dates: list
    skipped: list
    gate_failures: list
    gate_reports: list

    @property
    def exposures(self):
        """Mean per-path factor score across periods."""
        return self.path_scores.mean(axis=0)


def _ridged_cov(window):
    cov = np.cov(window.to_numpy(), rowvar=False, ddof=1)
    n = cov.shape[0]
    return cov + (RIDGE_FRACTION * np.trace(cov) / n) * np.eye(n)


def _snapshot(data, date, lookback):
    inv = data.investable_asof(date)
    ids = tuple(a for a, keep in zip(data.asset_ids, inv) if keep)
    window = data.returns_window(date, lookback)[list(ids)]
    if window.shape[0] < max(60, window.shape[1] // 4):
        raise InfeasibleBodyError("not enough history for covariance estimation")
    cov = _ridged_cov(window)
    raw = data.scores_asof(date)
    sectors = None
    if data.sectors is not None:
        sectors = np.asarray([data.sectors[a] for a in ids])
    scores = np.column_stack(
        [zscore_winsorize(raw[f][inv], sectors=sectors) for f in data.factor_names]
    )
    bm = data.benchmark_asof(date)[inv]
    return MarketSnapshot(
        asset_ids=ids,
        benchmark=bm / bm.sum(),
        mean_returns=window.mean().to_numpy(),
        cov=cov,
        scores=scores,
        factor_names=data.factor_names,
        sectors=sectors,
    )


def _make_target(config, snapshot, emb):
    if config.target == "uniform":
        return Uniform()
    if config.target == "dirichlet_benchmark":
        alpha = snapshot.benchmark * config.alpha_scale
        return Transformed(Dirichlet(alpha), emb)
    raise ValueError(f"unknown target {config.target!r}")


def _gated_sample(body, target, config, pool_size, period_seed):
    """Sample a pool, re-running once with doubled burn-in if the gate fails."""
    cfg = replace(config.walk, seed=period_seed)
    out = sample(body, target, cfg, k=pool_size, n_chains=config.n_chains)
    report = gate(out.chains(), body.dim)
    if report.passed:
        return out, report, False
    cfg = replace(cfg, burn_in=2 * max(cfg.burn_in, 1), seed=period_seed + 1)
    out = sample(body, target, cfg, k=pool_size, n_chains=config.n_chains)
    report = gate(out.chains(), body.dim)
    return out, report, not report.passed


def buy_and_hold_paths(weights, returns_block):
    """Daily returns of portfolios held without rebalancing (weights float).

    weights: (k, n) initial weights; returns_block: (T, n) daily returns.
    Returns (T, k) daily portfolio returns.
    """
    W = np.array(weights, dtype=float)
    R = np.asarray(returns_block, dtype=float)
    out = np.empty((R.shape[0], W.shape[0]))
    for t in range(R.shape[0]):
        growth = 1.0 + R[t]
        port = W @ R[t]
        out[t] = port
        W = W * growth / (1.0 + port)[:, None]
    return out


def run_backtest(data, config):
    """The rebalanced protocol: body, gated sampling, simulation, concatenation."""
    dates = data.rebalance_dates(config.cov_lookback)
    if not dates:
        raise PolywalkError("no rebalance dates with sufficient history")
    boundaries = list(dates) + [None]

    period_blocks = []  # (returns DataFrame block, per-portfolio scores)
    skipped, gate_failures, gate_reports = [], [], []
    open_block = None  # (weights, score vector, list of frames) while carrying forward

    for p, date in enumerate(dates):
        next_date = boundaries[p + 1]
        try:
            snapshot = _snapshot(data, date, config.cov_lookback)
            body, emb = build_body(config.constraints, snapshot)
            target = _make_target(config, snapshot, emb)
            pool_size = max(config.k, 100 * config.n_chains)
            pool, report, failed = _gated_sample(
                body, target, config, pool_size, config.seed + 7919 * p
            )
            gate_reports.append((date, report))
            if failed:
                gate_failures.append(date)
            pick = np.linspace(0, pool.lifted.shape[0] - 1, config.k).round().astype(int)
            weights = pool.lifted[pick]
            sort_beta = snapshot.factor_column(config.sort_factor)
            scores = weights @ sort_beta
            if open_block is not None:
                period_blocks.append(_close_block(open_block))
            open_block = {"weights": weights, "scores": scores, "frames": [], "ids": snapshot.asset_ids}
        except InfeasibleBodyError as err:
            skipped.append((date, str(err)))
            if open_block is None:
                continue  # nothing to carry forward yet

        fwd = data.forward_returns(date, next_date)
        if open_block is None or fwd.empty:
            continue
        block_returns = buy_and_hold_paths(
            open_block["weights"], fwd[list(open_block["ids"])].to_numpy()
        )
        open_block["frames"].append(pd.DataFrame(block_returns, index=fwd.index))
        # weights float across carried periods: advance them through this block
        open_block["weights"] = _float_weights(
            open_block["weights"], fwd[list(open_block["ids"])].to_numpy()
        )

    if open_block is not None:
        period_blocks.append(_close_block(open_block))
    if not period_blocks:
        raise PolywalkError("every rebalance was infeasible; nothing to report")

    paths, path_scores = concatenate_by_score(period_blocks)
    return BacktestResult(
        paths=paths,
        path_scores=path_scores,
        rebalance_dates=dates,
        skipped=skipped,
        gate_failures=gate_failures,
        gate_reports=gate_reports,
    )


def _close_block(open_block):
    frame = pd.concat(open_block["frames"], axis=0)
    return frame, np.asarray(open_block["scores"], dtype=float)


def _float_weights(weights, returns_block):
    W = np.array(weights, dtype=float)
    for t in range(returns_block.shape[0]):
        growth = 1.0 + returns_block[t]
        W = W * growth
        W = W / W.sum(axis=1, keepdims=True)
    return W


def concatenate_by_score(period_results):
    """Chain rank r in period t to rank r in period t+1.

    Each period's portfolio columns are sorted by descending factor score,
    ties broken by descending period return (deterministic).  Returns the
    concatenated daily return frame (columns rank_1..rank_k) and the sorted
    score matrix (periods x k).
    """
    k = None
    sorted_frames, sorted_scores = [], []
    for frame, scores in period_results:
        if k is None:
            k = scores.shape[0]
        elif scores.shape[0] != k:
            raise DimensionError("every period must hold the same number of portfolios")
        period_return = (1.0 + frame.to_numpy()).prod(axis=0)
        order = np.lexsort((-period_return, -scores))
        sorted_frames.append(pd.DataFrame(frame.to_numpy()[:, order], index=frame.index))
        sorted_scores.append(scores[order])
    paths = pd.concat(sorted_frames, axis=0)
    paths.columns = [f"rank_{i + 1}" for i in range(k)]
    return paths, np.vstack(sorted_scores)


def quintile_baseline(data, factor, weighting="equal", cov_lookback=252):
    """Five score-sorted quintile paths (classic sorting-based baseline)."""
    if weighting not in ("equal", "cap"):
        raise ValueError("weighting must be 'equal' or 'cap'")
    dates = data.rebalance_dates(cov_lookback)
    boundaries = list(dates) + [None]
    frames = []
    for p, date in enumerate(dates):
        inv = data.investable_asof(date)
        ids = [a for a, keep in zip(data.asset_ids, inv) if keep]
        if len(ids) < 5:
            raise PolywalkError("need at least five assets per rebalance")
        raw = data.scores_asof(date)[factor][inv]
        bm = data.benchmark_asof(date)[inv]
        order = np.lexsort((np.arange(len(ids)), -raw))  # ties: asset-id order
        buckets = np.array_split(order, 5)
        W = np.zeros((5, len(ids)))
        for q, members in enumerate(buckets):
            if weighting == "equal":
                W[q, members] = 1.0 / members.size
            else:
                W[q, members] = bm[members] / bm[members].sum()
        fwd = data.forward_returns(date, boundaries[p + 1])
        if fwd.empty:
            continue
        block = buy_and_hold_paths(W, fwd[ids].to_numpy())
        frames.append(pd.DataFrame(block, index=fwd.index))
    paths = pd.concat(frames, axis=0)
    paths.columns = [f"q{i + 1}" for i in range(5)]
    return paths


def _monthly(paths):
    grouped = (1.0 + paths).groupby(paths.index.to_period("M")).prod() - 1.0
    return grouped


def annualized_summary(paths):
    """Per-path annualized return and volatility from monthly compounding."""
    monthly = _monthly(paths)
    n_months = monthly.shape[0]
    total = (1.0 + monthly).prod(axis=0)
    ann_return = total ** (12.0 / n_months) - 1.0
    ann_vol = monthly.std(axis=0, ddof=1) * np.sqrt(12.0)
    return ann_return.to_numpy(), ann_vol.to_numpy(), monthly


def rescale_exposure(exposures):
    """Affine rescaling of path exposures onto [-1, 1]."""
    exposures = np.asarray(exposures, dtype=float)
    lo, hi = exposures.min(), exposures.max()
    if hi - lo < 1e-15:
        return np.zeros_like(exposures)
    return 2.0 * (exposures - lo) / (hi - lo) - 1.0


def report(paths, exposures, benchmark_path=None):
    """Summary statistics: annualized performance, exposure correlations,
    degree-two polynomial fit, and an optional information ratio."""
    ann_return, ann_vol, monthly = annualized_summary(paths)
    x = rescale_exposure(exposures)
    if np.ptp(x) > 0 and np.ptp(ann_return) > 0:
        corr_return = float(np.corrcoef(x, ann_return)[0, 1])
    else:
        corr_return = 0.0
    if np.ptp(x) > 0 and np.ptp(ann_vol) > 0:
        corr_vol = float(np.corrcoef(x, ann_vol)[0, 1])
    else:
        corr_vol = 0.0
    fit_return = np.polyfit(x, ann_return, 2) if np.ptp(x) > 0 else np.zeros(3)
    fit_vol = np.polyfit(x, ann_vol, 2) if np.ptp(x) > 0 else np.zeros(3)
    out = {
        "paths": list(paths.columns),
        "annualized_return": ann_return.tolist(),
        "annualized_volatility": ann_vol.tolist(),
        "exposure_scaled": x.tolist(),
        "correlation_exposure_return": corr_return,
        "correlation_exposure_volatility": corr_vol,
        "fit_return_quadratic": np.asarray(fit_return).tolist(),
        "fit_volatility_quadratic": np.asarray(fit_vol).tolist(),
    }
    if benchmark_path is not None:
        bench_monthly = _monthly(benchmark_path.to_frame("bench"))["bench"]
        aligned = monthly.sub(bench_monthly, axis=0).dropna()
        ir = aligned.mean(axis=0) / aligned.std(axis=0, ddof=1) * np.sqrt(12.0)
        out["information_ratio"] = ir.to_numpy().tolist()
    return out


def synth_market(
    n_assets,
    years,
    premia=None,
    seed=0,
    factor_names=DEFAULT_FACTORS,
    n_sectors=4,
    factor_vol=0.0005,
    idio_vol=0.015,
    score_persistence=0.97,
):
    """Synthetic factor-model market with planted factor premia.

    Daily returns follow r_i = sum_s beta_is f_s + eps_i where factor s has
    drift ``premia[s]`` per day per unit score.  Benchmark weights are
    capitalization-style: initial lognormal sizes floated with total returns
    (so the weight at a date only uses returns strictly before it).
    """
    if n_assets < 10:
        raise ValueError("synthetic market needs at least 10 assets")
    premia = dict(premia or {})
    rng = np.random.default_rng(seed)
    n_days = int(252 * years)
    dates = pd.bdate_range("2015-01-02", periods=n_days)
    ids = [f"A{i:03d}" for i in range(n_assets)]
    month_starts = pd.Series(dates, index=dates).groupby(dates.to_period("M")).first()

    loadings = {f: rng.standard_normal(n_assets) for f in factor_names}
    score_frames = {f: [] for f in factor_names}
    returns = np.empty((n_days, n_assets))
    current = {f: loadings[f] for f in factor_names}
    month_of_day = dates.to_period("M")
    months = month_of_day.unique()

    per_month_scores = {}
    for m in months:
        for f in factor_names:
            drift = rng.standard_normal(n_assets)
            current[f] = score_persistence * current[f] + np.sqrt(
                1 - score_persistence**2
            ) * drift
        per_month_scores[m] = {f: current[f].copy() for f in factor_names}

    for t, d in enumerate(dates):
        month = month_of_day[t]
        beta = per_month_scores[month]
        r = rng.standard_normal(n_assets) * idio_vol
        for f in factor_names:
            z = _zscore(beta[f])
            f_shock = premia.get(f, 0.0) + factor_vol * rng.standard_normal()
            r = r + z * f_shock
        returns[t] = r

    returns_df = pd.DataFrame(returns, index=dates, columns=ids)

    base_caps = np.exp(rng.normal(0.0, 0.8, n_assets))
    growth = np.vstack([np.ones(n_assets), (1.0 + returns[:-1]).cumprod(axis=0)])
    caps_before = base_caps * growth  # caps at each date from strictly prior returns
    bench_rows = []
    for d in month_starts:
        i = dates.get_loc(d)
        w = caps_before[i]
        bench_rows.append(w / w.sum())
    benchmark = pd.DataFrame(bench_rows, index=month_starts.values, columns=ids)

    scores = {
        f: pd.DataFrame(
            [_zscore(per_month_scores[m][f]) for m in months],
            index=month_starts.values,
            columns=ids,
        )
        for f in factor_names
    }
    sectors = pd.Series([f"S{i % n_sectors}" for i in range(n_assets)], index=ids)
    return MarketData(returns=returns_df, scores=scores, benchmark=benchmark, sectors=sectors)


def _zscore(x):
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)
