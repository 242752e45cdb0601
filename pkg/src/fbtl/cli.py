"""Command line interface: ``fbtl <subcommand> [options]``.

Subcommands ``gen-graph``, ``simulate``, ``estimate``, ``bound``,
``experiment`` and ``sc``. Numeric output uses 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import FbtlError
from .estimators import run_estimator
from .graphs import FAMILIES, gen_family, save_graph
from .metrics import l2_error, pd_error
from .model import sample_comparisons, sample_pairs

fmt = bench.format_number


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _add_common(p, seed=True, out=True, estimator=False, k=False, trials=False):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="base RNG seed (u64)")
    if out:
        p.add_argument("--out", default=None, help="output path or directory")
    if estimator:
        p.add_argument("--estimator", default=None, help="comma list of fbtl-ls, ols, rc")
    if k:
        p.add_argument("--k", type=int, default=None, help="comparisons per pair")
    if trials:
        p.add_argument("--trials", type=int, default=None, help="trials per schedule point")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbtl", description="f-BTL ranking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate a relation graph and save it as an edge list")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--param", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("simulate", help="draw a synthetic instance and comparison counts")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--param", type=int, default=None)
    rate = p.add_mutually_exclusive_group()
    rate.add_argument("--p", type=float, default=None, help="pair sampling rate")
    rate.add_argument("--c", type=float, default=None, help="rate as c * alpha log alpha / C(n,2)")
    p.add_argument("--coeff-mode", default="gaussian", choices=["gaussian", "uniform_simplex"])
    _add_common(p, k=True)

    p = sub.add_parser("estimate", help="run estimators on a features/counts bundle")
    p.add_argument("--features", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--truth", default=None, help="CSV 'item,theta' with true scores")
    _add_common(p, seed=False, estimator=True)

    p = sub.add_parser("bound", help="tabulate closed-form thresholds and the failure bound")
    p.add_argument("--family", required=True, help="family, or family:param, comma separated")
    p.add_argument("--n", required=True, help="comma list of item counts")
    p.add_argument("--delta", default="0.1", help="comma list of confidence levels")
    p.add_argument("--p-mult", default="1", help="comma list of multipliers of p_min")
    p.add_argument("--q-max", type=int, default=None)
    _add_common(p, seed=False)

    for name, help_ in (("experiment", "run an experiment from a config file"),
                        ("sc", "sample-complexity sweep from a config file")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--workers", type=int, default=None)
        _add_common(p, estimator=True, k=True, trials=True)
    return parser


def _cmd_gen_graph(args) -> int:
    g = gen_family(args.family, args.n, args.param, seed=args.seed or 0)
    if args.out:
        save_graph(g, args.out)
    print(f"n={g.n} edges={len(g.edges)} alpha={g.alpha} max_degree={g.max_degree}")
    return 0


def _cmd_simulate(args) -> int:
    ss = np.random.SeedSequence(args.seed or 0)
    inst_seed, pair_seed, cmp_seed = ss.spawn(3)
    inst = bench.make_instance(args.family, args.n, args.param, inst_seed, args.coeff_mode)
    F = inst.features
    if args.p is not None:
        p = args.p
    else:
        p = bench.sampling_rate(10.0 if args.c is None else args.c, F.alpha, F.n)
    K = args.k or 1000
    pairs = sample_pairs(F.n, p, pair_seed)
    if len(pairs) == 0:
        raise FbtlError(f"no pairs sampled at p={fmt(p)}")
    sample = sample_comparisons(pairs, inst.model, K, cmp_seed)
    bundle = bench.bundle_from_arrays(F.U, sample.pairs, sample.wins, sample.trials - sample.wins)
    out = Path(args.out or "simulated")
    bench.export_bundle(bundle, out)
    bench.write_csv(out / "theta.csv", ["item", "theta"],
                    [dict(item=i + 1, theta=t) for i, t in enumerate(inst.model.theta)])
    print(f"n={F.n} alpha={F.alpha} p={fmt(p)} m={len(pairs)} K={K} out={out}")
    return 0


def _read_truth(path, n) -> np.ndarray:
    theta = np.full(n, np.nan)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            theta[int(row["item"]) - 1] = float(row["theta"])
    return theta


def _cmd_estimate(args) -> int:
    bundle = bench.load_dataset(args.features, args.counts)
    names = bench.parse_estimators(args.estimator or "fbtl-ls,ols,rc")
    truth = _read_truth(args.truth, bundle.n) if args.truth else None
    rows = []
    estimates = {}
    for name in names:
        theta_hat = run_estimator(name, bundle.features, bundle.sample).theta_hat
        estimates[name] = theta_hat
        row = dict(estimator=name, n=bundle.n, alpha=bundle.features.alpha, m=bundle.sample.m,
                   pd_error=pd_error(theta_hat, bundle.P_star))
        if truth is not None:
            row["l2_error"] = l2_error(theta_hat, truth, center=name in bench.SHIFT_AMBIGUOUS)
        rows.append(row)
    cols = ["estimator", "n", "alpha", "m", "pd_error"] + (["l2_error"] if truth is not None else [])
    print(",".join(cols))
    for row in rows:
        print(",".join(fmt(row[c]) for c in cols))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        bench.write_csv(out / "estimates.csv", ["item"] + list(names), [
            dict(item=bundle.item_ids[i], **{nm: float(estimates[nm][i]) for nm in names})
            for i in range(bundle.n)
        ])
    return 0


def _parse_families(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        fam, _, param = tok.partition(":")
        out.append((fam, int(param) if param else None))
    return out


def _cmd_bound(args) -> int:
    text = bench.emit_bound_table(
        _parse_families(args.family), _int_list(args.n), _float_list(args.delta),
        _float_list(args.p_mult), q_max=args.q_max, path=args.out,
    )
    sys.stdout.write(text)
    return 0


def _load_config(args, expected=None):
    overrides = dict(seed=args.seed, out=args.out, trials=args.trials)
    if args.k is not None:
        overrides["K"] = args.k
    if args.estimator is not None:
        overrides["estimators"] = args.estimator
    if expected:
        overrides["experiment_type"] = expected
    return bench.ExperimentConfig.load(args.config, **overrides)


def _cmd_experiment(args) -> int:
    config = _load_config(args)
    result = bench.run_experiment(config, workers=args.workers)
    with open(result.paths["summary"]) as fh:
        sys.stdout.write(fh.read())
    return 0


def _cmd_sc(args) -> int:
    config = _load_config(args, expected="sc_sweep")
    result = bench.run_experiment(config, workers=args.workers)
    with open(result.paths["summary"]) as fh:
        sys.stdout.write(fh.read())
    return 0


COMMANDS = {
    "gen-graph": _cmd_gen_graph,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "bound": _cmd_bound,
    "experiment": _cmd_experiment,
    "sc": _cmd_sc,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FbtlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
