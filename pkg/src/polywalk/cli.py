"""Batch command-line front door.

Subcommands: sample, cdf, round, diagnose, backtest, synth.  Every command
honors --seed end to end and produces byte-identical outputs when repeated
with the same arguments.  Errors are emitted as JSON on stderr with exit
codes 2 (usage), 3 (infeasible body), 4 (diagnostics gate failure), 5 (IO).
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .backtest import report, run_backtest, synth_market
from .diagnostics import ess, gate, psrf
from .errors import ConfigurationError, InfeasibleBodyError, PolywalkError
from .exact import rp_linear_cdf
from .rounding import round_isotropic
from .walks import WalkConfig, sample

EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_GATE = 4
EXIT_IO = 5


def _parser():
    parser = argparse.ArgumentParser(prog="polywalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a convex body with a geometric random walk")
    p.add_argument("--body", required=True, help="body JSON file")
    p.add_argument("--target", default="uniform", help="'uniform'/'flat' or a density JSON file")
    p.add_argument("--walk", default="har", help="baw|har|cdhr|biw|dikin|vaidya|john|rehmc")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("cdf", help="exact CDF of a linear statistic of a uniform RP")
    p.add_argument("--z", required=True, help="JSON file with {'z': [...]} or a bare array")
    p.add_argument("--gammas", required=True, help="grid 'start:stop:step' or a JSON array file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("round", help="bring a body into near-isotropic position")
    p.add_argument("--body", required=True)
    p.add_argument("--max-phases", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="transform JSON output")
    p.add_argument("--rounded-body", help="optional rounded-body JSON output")

    p = sub.add_parser("diagnose", help="convergence diagnostics on sample CSVs")
    p.add_argument("--chains", nargs="+", required=True, help="one CSV per chain (globs ok)")
    p.add_argument("--n-effective-dim", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("backtest", help="run the rebalanced RP backtest")
    p.add_argument("--config", required=True, help="TOML configuration")
    p.add_argument("--data", required=True, help="market data directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic planted-factor market")
    p.add_argument("--n-assets", type=int, default=50)
    p.add_argument("--years", type=float, default=5.0)
    p.add_argument("--premia", default="", help="comma list like 'momentum=0.001,size=-0.0005'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_sample(args):
    body, emb = fileio.load_body(args.body)
    target = fileio.load_density(args.target, emb=emb, dim=body.dim)
    cfg = WalkConfig(
        kind=args.walk,
        burn_in=args.burn_in,
        thinning=args.thinning,
        seed=args.seed,
    )
    out = sample(body, target, cfg, k=args.k, n_chains=args.chains, emb=emb)
    rows = out.lifted if out.lifted is not None else out.draws
    cols = [f"w_{i}" for i in range(rows.shape[1])]
    fileio.write_samples_csv(args.out, rows, cols, kind="samples")
    return 0


def _cmd_cdf(args):
    spec = json.loads(Path(args.z).read_text())
    z = np.array(spec["z"] if isinstance(spec, dict) else spec, dtype=float)
    if ":" in args.gammas:
        start, stop, step = (float(tok) for tok in args.gammas.split(":"))
        gammas = np.arange(start, stop + 0.5 * step, step)
    else:
        gammas = np.array(json.loads(Path(args.gammas).read_text()), dtype=float)
    probs = rp_linear_cdf(z, gammas)
    fileio.write_samples_csv(
        args.out, np.column_stack([gammas, probs]), ["gamma", "probability"], kind="cdf"
    )
    return 0


def _cmd_round(args):
    body, _ = fileio.load_body(args.body)
    cfg = WalkConfig(kind="biw", burn_in=300, thinning=2, seed=args.seed)
    transform, rounded, _ = round_isotropic(body, walk_cfg=cfg, max_phases=args.max_phases)
    fileio.save_transform(transform, args.out)
    if args.rounded_body:
        fileio.save_body(rounded, args.rounded_body)
    return 0


def _cmd_diagnose(args):
    paths = []
    for pattern in args.chains:
        hits = sorted(glob.glob(pattern))
        paths.extend(hits if hits else [pattern])
    chains = [fileio.read_samples_csv(p) for p in paths]
    n_eff = args.n_effective_dim if args.n_effective_dim is not None else chains[0].shape[1]
    r = psrf(chains)
    ess_total = np.sum([ess(c) for c in chains], axis=0)
    verdict = gate(chains, n_eff)
    fileio.write_json(
        args.out,
        {
            "psrf": r.tolist(),
            "ess_total": ess_total.tolist(),
            "gate_passed": verdict.passed,
            "gate_reasons": verdict.reasons,
            "n_effective_dim": n_eff,
        },
    )
    return 0 if verdict.passed else EXIT_GATE


def _cmd_backtest(args):
    config = fileio.backtest_config_from_toml(args.config, seed_override=args.seed)
    data = fileio.market_from_dir(args.data)
    result = run_backtest(data, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = result.paths
    with open(out_dir / "paths.csv", "w") as fh:
        fh.write(f"# schema: polywalk-paths-v{fileio.SCHEMA_VERSION}\n")
        fh.write(",".join(["date"] + list(paths.columns)) + "\n")
        dates = paths.index.strftime("%Y-%m-%d")
        values = paths.to_numpy()
        for i, day in enumerate(dates):
            fh.write(day + "," + ",".join(repr(float(x)) for x in values[i]) + "\n")

    summary = report(paths, result.exposures)
    summary["skipped_rebalances"] = [str(d) for d, _ in result.skipped]
    summary["gate_failures"] = [str(d) for d in result.gate_failures]
    summary["sort_factor"] = config.sort_factor
    fileio.write_json(out_dir / "summary.json", summary)
    return 0


def _cmd_synth(args):
    premia = {}
    if args.premia:
        for tok in args.premia.split(","):
            name, value = tok.split("=")
            premia[name.strip()] = float(value)
    data = synth_market(args.n_assets, args.years, premia=premia, seed=args.seed)
    fileio.market_to_dir(data, args.out)
    return 0


_COMMANDS = {
    "sample": _cmd_sample,
    "cdf": _cmd_cdf,
    "round": _cmd_round,
    "diagnose": _cmd_diagnose,
    "backtest": _cmd_backtest,
    "synth": _cmd_synth,
}


def _fail(code, err):
    payload = {"error": type(err).__name__, "message": str(err)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as err:
        return _fail(EXIT_IO, err)
    except InfeasibleBodyError as err:
        return _fail(EXIT_INFEASIBLE, err)
    except (ConfigurationError, ValueError, KeyError) as err:
        return _fail(EXIT_USAGE, err)
    except PolywalkError as err:
        return _fail(EXIT_USAGE, err)


if __name__ == "__main__":
    sys.exit(main())
