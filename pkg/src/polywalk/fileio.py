"""File formats: body/density/transform JSON, market CSVs, and TOML configs.

All machine-readable outputs carry a schema-version field.  CSV files start
with a ``# schema:`` comment line and are read back with ``comment='#'``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .backtest import BacktestConfig, MarketData
from .densities import Dirichlet, ShadowDirichlet, Transformed, Uniform
from .errors import DimensionError
from .geometry import ConvexBody, Ellipsoid, HPolytope, build_embedding, embed_body
from .portfolio import ConstraintSpec
from .rounding import RoundingTransform
from .walks import WalkConfig

SCHEMA_VERSION = 1


def load_body(path):
    """Body JSON {"A", "b", "Aeq", "beq", "E", "c"}; absent keys mean absent parts.

    With equality constraints present the returned body lives in the
    embedded (full-dimensional) space and the embedding is returned too.
    """
    spec = json.loads(Path(path).read_text())
    polytope = None
    if "A" in spec:
        polytope = HPolytope(np.array(spec["A"], dtype=float), np.array(spec["b"], dtype=float))
    ellipsoid = None
    if "E" in spec:
        ellipsoid = Ellipsoid(np.array(spec["E"], dtype=float), float(spec["c"]))
    if polytope is None and ellipsoid is None:
        raise ValueError("body file defines neither a polytope nor an ellipsoid")
    body = ConvexBody(polytope=polytope, ellipsoid=ellipsoid)
    emb = None
    if "Aeq" in spec:
        B = np.atleast_2d(np.array(spec["Aeq"], dtype=float))
        beq = np.atleast_1d(np.array(spec["beq"], dtype=float))
        x0, *_ = np.linalg.lstsq(B, beq, rcond=None)
        emb = build_embedding(B, beq, x0)
        body = embed_body(body, emb)
    return body, emb


def save_body(body, path):
    spec = {"schema_version": SCHEMA_VERSION}
    if body.polytope is not None:
        spec["A"] = body.polytope.A.tolist()
        spec["b"] = body.polytope.b.tolist()
    if body.ellipsoid is not None:
        spec["E"] = body.ellipsoid.E.tolist()
        spec["c"] = body.ellipsoid.c
        spec["center"] = body.ellipsoid.center.tolist()
    Path(path).write_text(json.dumps(spec, sort_keys=True, indent=1))


def load_density(token, emb=None, dim=None):
    """Density from a token ("flat"/"uniform") or a JSON spec file."""
    if token in ("flat", "uniform"):
        return Uniform()
    spec = json.loads(Path(token).read_text())
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return Uniform()
    scale = float(spec.get("alpha_scale", 1.0))
    if kind == "dirichlet":
        base = Dirichlet(np.array(spec["alpha"], dtype=float) * scale)
    elif kind == "shadow_dirichlet":
        base = ShadowDirichlet(
            np.array(spec["M"], dtype=float), np.array(spec["alpha"], dtype=float) * scale
        )
    else:
        raise ValueError(f"unknown density kind {kind!r}")
    if emb is not None:
        return Transformed(base, emb)
    if dim is not None and base.dim != dim:
        raise DimensionError("density dimension does not match the body")
    return base


def save_transform(transform, path):
    Path(path).write_text(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "Lmap": transform.Lmap.tolist(),
                "shift": transform.shift.tolist(),
                "log_det": transform.log_det,
            },
            sort_keys=True,
            indent=1,
        )
    )


def load_transform(path):
    spec = json.loads(Path(path).read_text())
    return RoundingTransform(
        Lmap=np.array(spec["Lmap"], dtype=float),
        shift=np.array(spec["shift"], dtype=float),
        log_det=float(spec["log_det"]),
    )


def write_samples_csv(path, rows, columns, kind="samples"):
    with open(path, "w") as fh:
        fh.write(f"# schema: polywalk-{kind}-v{SCHEMA_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for row in np.asarray(rows):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_samples_csv(path):
    return pd.read_csv(path, comment="#").to_numpy(dtype=float)


def write_json(path, payload):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1))


# ---------------------------------------------------------------------------
# market data directories


def market_to_dir(data, path):
    """Write returns/scores/benchmark/sectors CSVs in the long layout."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    ret = data.returns.stack()
    ret.index.names = ["date", "asset_id"]
    _write_long(path / "returns.csv", ret.rename("return").reset_index(), "returns")

    rows = []
    for factor, df in data.scores.items():
        s = df.stack()
        s.index.names = ["date", "asset_id"]
        frame = s.rename("score").reset_index()
        frame["factor"] = factor
        rows.append(frame[["date", "asset_id", "factor", "score"]])
    _write_long(path / "scores.csv", pd.concat(rows, axis=0), "scores")

    bench = data.benchmark.stack()
    bench.index.names = ["date", "asset_id"]
    _write_long(path / "benchmark.csv", bench.rename("weight").reset_index(), "benchmark")

    if data.sectors is not None:
        sec = data.sectors.rename("sector").rename_axis("asset_id").reset_index()
        _write_long(path / "sectors.csv", sec, "sectors")


def _write_long(path, frame, kind):
    with open(path, "w") as fh:
        fh.write(f"# schema: polywalk-{kind}-v{SCHEMA_VERSION}\n")
        frame.to_csv(fh, index=False)


def market_from_dir(path):
    path = Path(path)
    ret = pd.read_csv(path / "returns.csv", comment="#", parse_dates=["date"])
    returns = ret.pivot(index="date", columns="asset_id", values="return")
    sc = pd.read_csv(path / "scores.csv", comment="#", parse_dates=["date"])
    scores = {
        factor: grp.pivot(index="date", columns="asset_id", values="score")[returns.columns]
        for factor, grp in sc.groupby("factor")
    }
    bench = pd.read_csv(path / "benchmark.csv", comment="#", parse_dates=["date"])
    benchmark = bench.pivot(index="date", columns="asset_id", values="weight")[returns.columns]
    sectors = None
    sectors_path = path / "sectors.csv"
    if sectors_path.exists():
        sec = pd.read_csv(sectors_path, comment="#")
        sectors = sec.set_index("asset_id")["sector"]
    return MarketData(returns=returns, scores=scores, benchmark=benchmark, sectors=sectors)


# ---------------------------------------------------------------------------
# backtest TOML configuration


def backtest_config_from_toml(path, seed_override=None):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)

    bt = raw.get("backtest", {})
    walk_spec = raw.get("walk", {})
    target_spec = raw.get("target", {})
    cons_spec = raw.get("constraints", {})

    walk = WalkConfig(
        kind=walk_spec.get("kind", "cdhr"),
        burn_in=int(walk_spec.get("burn_in", 2000)),
        thinning=int(walk_spec.get("thinning", 20)),
        delta=walk_spec.get("delta"),
        tau=walk_spec.get("tau"),
        rho=walk_spec.get("rho"),
        radius=walk_spec.get("radius"),
        eta=walk_spec.get("eta"),
        leapfrog_steps=int(walk_spec.get("leapfrog_steps", 10)),
    )
    factor_bounds = tuple(
        (fb["factor"], float(fb["lower"]), float(fb["upper"]))
        for fb in cons_spec.get("factor_bounds", [])
    )
    group_bounds = tuple(
        (tuple(gb["members"]), float(gb["lower"]), float(gb["upper"]))
        for gb in cons_spec.get("group_bounds", [])
    )
    constraints = ConstraintSpec(
        long_only=bool(cons_spec.get("long_only", True)),
        budget=float(cons_spec.get("budget", 1.0)),
        lower=np.array(cons_spec["lower"], dtype=float) if "lower" in cons_spec else None,
        upper=np.array(cons_spec["upper"], dtype=float) if "upper" in cons_spec else None,
        benchmark_band=cons_spec.get("benchmark_band"),
        sector_band=cons_spec.get("sector_band"),
        group_bounds=group_bounds,
        factor_bounds=factor_bounds,
        variance_cap=cons_spec.get("variance_cap"),
    )
    seed = int(bt.get("seed", 0)) if seed_override is None else int(seed_override)
    return BacktestConfig(
        k=int(bt.get("k", 64)),
        seed=seed,
        sort_factor=bt.get("sort_factor", "momentum"),
        constraints=constraints,
        walk=walk,
        target=target_spec.get("kind", "uniform"),
        alpha_scale=float(target_spec.get("alpha_scale", 1.0)),
        cov_lookback=int(bt.get("cov_lookback", 1260)),
        n_chains=int(bt.get("n_chains", 4)),
    )
