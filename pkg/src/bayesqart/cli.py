"""Command-line entry point: ``bayesqart {fit,predict,simulate,replicate}``.

Exit status is 0 on success, 2 for usage errors and 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import time

import numpy as np

from .classify import check_labels, fit_classifier, predict_proba
from .io import DataError, load_model, read_config, read_csv, save_model, write_csv, write_dataset
from .model import fit, predict_band, predict_quantile
from .sampler import SamplerConfig
from .simdata import GENERATORS, simulate
from .studies import STUDIES, replicate, summarize

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3

# flag -> SamplerConfig field
SAMPLER_FLAGS = {
    "seed": int, "tau": float, "trees": int, "burnin": int, "keep": int, "thin": int,
    "kappa": float, "psi1": float, "psi2": float, "alpha": float, "beta": float,
    "chains": int,
}
FIELD_OF = {"trees": "n_trees", "burnin": "burn_in"}


class UsageError(ValueError):
    pass


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sampler")
    for flag, typ in SAMPLER_FLAGS.items():
        g.add_argument(f"--{flag}", type=typ, default=None)
    g.add_argument("--phi-mode", choices=["paper", "consistent"], default=None)
    g.add_argument("--leaf-scale", choices=["auto", "sd", "variance"], default=None)
    g.add_argument("--fixed-phi", type=float, default=None)
    g.add_argument("--config", help="flat JSON file of sampler options; flags override it")


def build_config(args, **base) -> SamplerConfig:
    """Defaults, then ``base``, then the config file, then explicit flags."""
    values = dict(base)
    if args.config:
        values.update(read_config(args.config))
    for flag in SAMPLER_FLAGS:
        v = getattr(args, flag)
        if v is not None:
            values[FIELD_OF.get(flag, flag)] = v
    for flag in ("phi_mode", "leaf_scale", "fixed_phi"):
        v = getattr(args, flag)
        if v is not None:
            values[flag] = v
    names = {f.name for f in dataclasses.fields(SamplerConfig)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise UsageError(f"unknown config options: {', '.join(unknown)}")
    try:
        return SamplerConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _diagnostics(post, elapsed: float) -> str:
    acc = ", ".join(f"{k} {v:.3f}" for k, v in post.acceptance.items())
    lo, med, hi = np.quantile(post.phi, [0.025, 0.5, 0.975])
    return (f"snapshots {post.n_snapshots}, trees {post.n_trees}, {elapsed:.1f}s\n"
            f"acceptance: {acc}\n"
            f"phi: mean {post.phi.mean():.4g}, median {med:.4g}, 95% [{lo:.4g}, {hi:.4g}]")


def cmd_fit(args) -> int:
    classify = args.classify
    config = build_config(args, tau=0.5) if classify else build_config(args)
    data, dropped = read_csv(args.data, target=args.target)
    if dropped:
        print(f"dropped {dropped} rows with missing values", file=sys.stderr)
    t0 = time.perf_counter()
    if classify:
        try:
            check_labels(data.y)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        post = fit_classifier(data, config)
    else:
        if data.y.min() == data.y.max():
            raise DataError("the response is constant; nothing to fit")
        post = fit(data, config)
    save_model(post, args.model)
    print(_diagnostics(post, time.perf_counter() - t0), file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    post = load_model(args.model)
    data, dropped = read_csv(args.data, columns=post.columns or None)
    if dropped:
        print(f"dropped {dropped} rows with missing values", file=sys.stderr)
    if data.d != post.n_features:
        raise DataError(f"model expects {post.n_features} predictors, data has {data.d}")
    if post.kind == "classification":
        p = predict_proba(post, data.X)
        header = ["prob", "label"]
        rows = [[float(a), int(a >= args.threshold)] for a in p]
    else:
        q = predict_quantile(post, data.X, summary=args.summary)
        header = ["quantile"]
        cols = [q]
        if args.band is not None:
            lo, hi = predict_band(post, data.X, args.band)
            header += ["lower", "upper"]
            cols += [lo, hi]
        rows = np.column_stack(cols).tolist()
    if args.out:
        write_csv(args.out, header, rows)
    else:
        _write_stdout(header, rows)
    return EXIT_OK


def _write_stdout(header, rows) -> None:
    w = csv.writer(sys.stdout)
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])


def cmd_simulate(args) -> int:
    data = simulate(args.design, args.n, args.seed)
    write_dataset(args.out, data)
    return EXIT_OK


def cmd_replicate(args) -> int:
    config = build_config(args)
    t0 = time.perf_counter()
    results = replicate(args.study, reps=args.reps, seed=args.seed if args.seed is not None else 0,
                        config=config, fast=args.fast, convention=args.convention)
    if args.out:
        write_csv(args.out, ["study", "rep", "tau", "metric", "value"],
                  [[r.study, r.rep, r.tau, r.metric, r.value] for r in results])
    summary = summarize(results)
    _write_stdout(["study", "tau", "metric", "reps", "mean", "se"],
                  [[s["study"], s["tau"], s["metric"], s["reps"], s["mean"], s["se"]]
                   for s in summary])
    print(f"{time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayesqart",
                                description="Quantile regression and classification with "
                                            "Bayesian additive quantile trees.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model to a CSV file")
    f.add_argument("data", help="training CSV with a header row")
    f.add_argument("--target", required=True, help="response column")
    f.add_argument("--model", required=True, help="output model file")
    f.add_argument("--classify", action="store_true", help="binary 0/1 response")
    _add_sampler_flags(f)
    f.set_defaults(run=cmd_fit)

    pr = sub.add_parser("predict", help="predict from a saved model")
    pr.add_argument("data", help="CSV with the model's predictor columns")
    pr.add_argument("--model", required=True)
    pr.add_argument("--out", help="output CSV (default stdout)")
    pr.add_argument("--summary", choices=["mean", "median"], default="mean")
    pr.add_argument("--band", type=float, default=None, help="add a posterior band at this level")
    pr.add_argument("--threshold", type=float, default=0.5)
    pr.set_defaults(run=cmd_predict)

    s = sub.add_parser("simulate", help="write a simulated data set")
    s.add_argument("design", choices=sorted(GENERATORS))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(run=cmd_simulate)

    r = sub.add_parser("replicate", help="run a simulation study and print a summary table")
    r.add_argument("study", choices=sorted(STUDIES))
    r.add_argument("--reps", type=int, default=20)
    r.add_argument("--fast", action="store_true", help="5 replications, 500 kept draws")
    r.add_argument("--convention", choices=["standard", "printed"], default="standard",
                   help="check-loss argument: actual - pred (standard) or pred - actual")
    r.add_argument("--out", help="per-replication CSV")
    _add_sampler_flags(r)
    r.set_defaults(run=cmd_replicate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "band", None) is not None and not 0 < args.band < 1:
            raise UsageError("--band must lie in (0, 1)")
        if not 0 < getattr(args, "threshold", 0.5) < 1:
            raise UsageError("--threshold must lie in (0, 1)")
        return args.run(args)
    except UsageError as exc:
        print(f"bayesqart: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"bayesqart: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
