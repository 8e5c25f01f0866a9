"""Command-line front end: ingest | train | evaluate | predict | explain | synth.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import explain as ex
from .config import RunConfig
from .dataset import read_ratings, read_tags, write_ratings, write_tags, TagMatrix
from .errors import DataError, NumericError
from .evaluation import run_experiment
from .model import BalseModel, fit_balse
from .synth import SynthConfig, generate

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

logger = logging.getLogger("balse")


def _resolve(args) -> RunConfig:
    config = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        key: getattr(args, key, None)
        for key in ("ratings", "tags", "out", "seed", "threads", "rank", "lam", "sweeps",
                    "alpha", "gate_iters", "k", "valid_fraction", "cohort_threshold")
    }
    overrides["model_dir"] = getattr(args, "model", None)
    return config.update(**overrides)


def _require(value, flag):
    if value is None:
        raise DataError(f"{flag} is required (flag or config file)")
    return value


def _load_inputs(config: RunConfig, need_tags=True):
    ratings_path = _require(config.ratings, "--ratings")
    dataset = read_ratings(ratings_path)
    if config.tags is None:
        if need_tags:
            raise DataError("--tags is required (flag or config file)")
        return dataset, TagMatrix.empty(dataset.m)
    return dataset, read_tags(config.tags, dataset)


def _out_dir(config: RunConfig) -> Path:
    out = Path(_require(config.out, "--out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(config: RunConfig, out: Path):
    (out / "config.txt").write_text(config.to_text(), encoding="utf-8")


def cmd_ingest(args) -> int:
    config = _resolve(args)
    dataset, tags = _load_inputs(config, need_tags=False)
    no_tags = int((tags.values.sum(axis=1) == 0).sum()) if tags.t else dataset.m
    print(f"users={dataset.n} items={dataset.m} ratings={len(dataset)} tags={tags.t} "
          f"items_without_tags={no_tags} skipped_tag_rows={tags.skipped_rows}")
    if config.out:
        out = _out_dir(config)
        with open(out / "ratings.csv", "w", newline="", encoding="utf-8") as f:
            write_ratings(dataset, f)
        if tags.t:
            with open(out / "tags.csv", "w", newline="", encoding="utf-8") as f:
                write_tags(tags, dataset.item_ids, f)
    return 0


def cmd_train(args) -> int:
    config = _resolve(args)
    dataset, tags = _load_inputs(config)
    out = _out_dir(config)
    model = fit_balse(dataset, tags, config.als(), config.lasso(), config.gate_iters,
                      config.valid_fraction, config.seed, config.threads,
                      lr_start=config.lr_start, lr_decay=config.lr_decay, lr_every=config.lr_every)
    model.save(out)
    _echo_config(config, out)
    p = model.gate.params
    print(f"trained on {len(dataset)} ratings; gate beta={p.beta:.5f} gamma={p.gamma:.5f}; wrote {out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _resolve(args)
    dataset, tags = _load_inputs(config)
    out = _out_dir(config)
    report = run_experiment(dataset, tags, config.experiment())
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "gate.csv").write_text(report.gate_csv(), encoding="utf-8")
    table = report.to_table()
    (out / "report.txt").write_text(table, encoding="utf-8")
    _echo_config(config, out)
    print(table, end="")
    return 0


def cmd_predict(args) -> int:
    model = BalseModel.load(_require(args.model, "--model"))
    p = model.predict(args.user, args.item)
    print(f"user={args.user} item={args.item} item_count={p.item_count}")
    print(f"als={p.als:.6f} lasso={p.lasso:.6f} balse={p.blended:.6f} w={p.weight:.6f}")
    return 0


def cmd_explain(args) -> int:
    model = BalseModel.load(_require(args.model, "--model"))
    i = model.user_index(args.user)
    if not model.lasso.P[i].any():
        print(f"user {args.user}: no learned preferences")
        return 0
    names = model.tags.tag_names
    if args.item is None:
        profile = ex.taste_profile(model.lasso.P[i], names, args.k or 6, i)
        if args.format == "csv":
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(["side", "rank", "tag", "weight"])
            for side, items in (("positive", profile.top_positive), ("negative", profile.top_negative)):
                for rank, (tag, weight) in enumerate(items, 1):
                    w.writerow([side, rank, tag, repr(weight)])
        else:
            print(f"user {args.user}")
            for line in ex.profile_lines(profile):
                print("  " + line)
        return 0
    j = model.item_index(args.item)
    expl = ex.explain_prediction(model.lasso.P[i], model.tags.values[j], names, args.k or 3)
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["side", "rank", "tag", "contribution"])
        for side, rank, tag, c in ex.explanation_rows(expl):
            w.writerow([side, rank, tag, repr(c)])
        w.writerow(["total", "", "", repr(expl.total)])
    else:
        print(ex.render(expl, args.item))
        print(f"score={expl.score:.6f} clamped={expl.total:.6f}")
    return 0


def cmd_synth(args) -> int:
    out = Path(_require(args.out, "--out"))
    config = SynthConfig(
        n=args.n, m=args.m, t=args.t, rank=args.rank, density=args.density,
        cold_fraction=args.cold_fraction, tag_signal=args.tag_signal, noise_sd=args.noise_sd,
        poster_fraction=args.poster_fraction, quantize=args.quantize, seed=args.seed,
    )
    dataset, tags, truth = generate(config)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ratings.csv", "w", newline="", encoding="utf-8") as f:
        write_ratings(dataset, f)
    with open(out / "tags.csv", "w", newline="", encoding="utf-8") as f:
        write_tags(tags, dataset.item_ids, f)
    truth.save(out / "truth.npz", config)
    (out / "synth_config.json").write_text(config.to_json() + "\n", encoding="utf-8")
    print(f"wrote {len(dataset)} ratings, {tags.t} tags, {int(truth.cold_items.sum())} cold items to {out}")
    return 0


def _add_common(p, tags=True):
    p.add_argument("--ratings", help="ratings CSV (user,item,rating or user,item,value)")
    if tags:
        p.add_argument("--tags", help="tags CSV (item,tag,weight)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads for per-row solves")


def _add_hyper(p):
    p.add_argument("--rank", type=int)
    p.add_argument("--lam", type=float, help="ALS regularization")
    p.add_argument("--sweeps", type=int, help="ALS sweeps")
    p.add_argument("--alpha", type=float, help="LASSO L1 weight")
    p.add_argument("--gate-iters", type=int)
    p.add_argument("--valid-fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate inputs and optionally write normalized copies")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train ALS, LASSO and the gate; write a model directory")
    _add_common(p)
    _add_hyper(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="k-fold cohort RMSE report")
    _add_common(p)
    _add_hyper(p)
    p.add_argument("--k", type=int, help="number of folds")
    p.add_argument("--cohort-threshold", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="ALS, LASSO and blended prediction for one pair")
    p.add_argument("--model", required=True, help="model directory written by train")
    p.add_argument("--user", required=True)
    p.add_argument("--item", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="taste profile, or explanation for one item")
    p.add_argument("--model", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--item")
    p.add_argument("--k", type=int, help="tags per side (default 6 for profiles, 3 for items)")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("synth", help="write a planted synthetic dataset")
    d = SynthConfig()
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=d.seed)
    for name in ("n", "m", "t", "rank"):
        p.add_argument(f"--{name}", type=int, default=getattr(d, name))
    for name in ("density", "cold_fraction", "tag_signal", "noise_sd", "poster_fraction"):
        p.add_argument(f"--{name.replace('_', '-')}", type=float, default=getattr(d, name))
    p.add_argument("--quantize", action="store_true", help="snap values to the six rating levels")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        print(f"error: cannot access {name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
