"""Command-line surface for the toolkit.

Subcommands: ingest, recommend, evaluate, fairness, tune, export-vectors,
synth.  Bulk data travels as NDJSON, reports as JSON, tabular outputs as
CSV; report commands also render PNG figures next to their tables unless
--no-figures is given.  Exit codes: 0 success, 2 usage/validation error,
1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import fairness as fairness_mod
from . import metrics as metrics_mod
from . import recommend as recommend_mod
from . import synthetic as synthetic_mod
from . import tuning as tuning_mod
from . import vectors as vectors_mod
from .errors import ValidationError


def _add_common(parser: argparse.ArgumentParser, figures: bool = False) -> None:
    parser.add_argument("--out-dir", default=".", help="directory for all outputs")
    parser.add_argument("--seed", type=int, default=None, help="seed for stochastic commands")
    parser.add_argument(
        "--threads", type=int, default=max(1, os.cpu_count() or 1),
        help="worker threads for batch queries",
    )
    parser.add_argument("--config", default=None, help="JSON config with default option values")
    if figures:
        parser.add_argument(
            "--no-figures", action="store_true", help="skip PNG rendering next to report files"
        )


def _add_corpus_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus NDJSON path")
    parser.add_argument("--vocab", required=True, help="vocab JSON path")


def _add_generator_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-users", type=int, default=500)
    parser.add_argument("--n-items", type=int, default=200)
    parser.add_argument("--baskets-per-user", type=int, nargs=2, default=(4, 8), metavar=("LO", "HI"))
    parser.add_argument("--basket-size", type=int, nargs=2, default=(3, 10), metavar=("LO", "HI"))
    parser.add_argument("--popularity-skew", type=float, default=0.6)


def _add_decay_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--within-decay", type=float, default=1.0, help="basket decay inside a group")
    parser.add_argument("--group-decay", type=float, default=1.0, help="decay across temporal groups")
    parser.add_argument("--groups", type=int, default=1, help="number of temporal groups")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbrkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="CSV/synthetic transactions -> corpus + stats")
    _add_common(p)
    p.add_argument("--transactions", default=None, help="transaction CSV path")
    p.add_argument("--synthetic", action="store_true", help="generate transactions instead of reading")
    _add_generator_args(p)
    p.add_argument("--col-user", default="user_id")
    p.add_argument("--col-basket", default="basket_id")
    p.add_argument("--col-item", default="item_id")
    p.add_argument("--col-timestamp", default="timestamp")
    p.add_argument("--col-order", default="basket_order")
    p.add_argument("--dataset-preset", default=None, choices=sorted(corpus_mod.PREPROCESS_PRESETS),
                   help="named preprocessing thresholds")
    p.add_argument("--min-baskets", type=int, default=3)
    p.add_argument("--min-item-users", type=int, default=5)
    p.add_argument("--min-basket-size", type=int, default=1)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic transaction CSV")
    _add_common(p)
    _add_generator_args(p)
    p.add_argument("--out-file", default="transactions.csv")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("recommend", help="produce ranked predictions")
    _add_common(p)
    _add_corpus_inputs(p)
    p.add_argument("--model", required=True,
                   choices=[recommend_mod.MODEL_TOP_PERSONAL, recommend_mod.MODEL_TIFU_KNN])
    p.add_argument("--preset", default=None, help="named hyperparameter preset")
    p.add_argument("--preset-file", default=None, help="JSON hyperparameters (tuner output)")
    p.add_argument("--k", type=int, default=300, help="neighbor count")
    _add_decay_args(p)
    p.add_argument("--alpha", type=float, default=0.7, help="own-vector fusion weight")
    p.add_argument("--k-items", type=int, default=20, help="predicted basket size")
    p.add_argument("--no-pad", action="store_true", help="disable global-popularity padding")
    p.add_argument("--out-file", default="predictions.ndjson")
    p.set_defaults(handler=cmd_recommend)

    p = sub.add_parser("evaluate", help="score predictions against test baskets")
    _add_common(p, figures=True)
    _add_corpus_inputs(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--ks", type=int, nargs="+", default=list(metrics_mod.DEFAULT_KS))
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("fairness", help="bin per-user recall along trait axes")
    _add_common(p, figures=True)
    _add_corpus_inputs(p)
    p.add_argument("--per-user", required=True, help="per-user metrics CSV from evaluate")
    p.add_argument("--axis", default="all", choices=("all",) + fairness_mod.AXES)
    p.set_defaults(handler=cmd_fairness)

    p = sub.add_parser("tune", help="seeded hyperparameter search")
    _add_common(p, figures=True)
    _add_corpus_inputs(p)
    p.add_argument("--n-trials", type=int, default=tuning_mod.DEFAULT_N_TRIALS)
    p.add_argument("--mode", default="random", choices=("random", "grid"))
    p.add_argument("--space-k", type=int, nargs="+", default=list(tuning_mod.GRID_K))
    p.add_argument("--space-within", type=float, nargs="+", default=list(tuning_mod.GRID_DECAY))
    p.add_argument("--space-group", type=float, nargs="+", default=list(tuning_mod.GRID_DECAY))
    p.add_argument("--space-alpha", type=float, nargs="+", default=list(tuning_mod.GRID_ALPHA))
    p.add_argument("--space-groups", type=int, nargs="+", default=list(tuning_mod.GRID_GROUPS))
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser("export-vectors", help="export decayed user vectors as NDJSON")
    _add_common(p)
    _add_corpus_inputs(p)
    _add_decay_args(p)
    p.add_argument("--preset", default=None, help="take decay settings from a named preset")
    p.add_argument("--raw-pif", action="store_true", help="export raw frequency counts instead")
    p.add_argument("--validation-split", action="store_true",
                   help="vectors over tuning history (last history basket held out)")
    p.add_argument("--out-file", default="vectors.ndjson")
    p.set_defaults(handler=cmd_export_vectors)

    return parser


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _figures_dir(args: argparse.Namespace) -> Path:
    fig = _out_dir(args) / "figures"
    fig.mkdir(parents=True, exist_ok=True)
    return fig


def _require_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise ValidationError("--seed is required for stochastic commands")
    return args.seed


def _load_corpus(args: argparse.Namespace) -> corpus_mod.BasketCorpus:
    for path in (args.corpus, args.vocab):
        if not Path(path).exists():
            raise ValidationError(f"no such file: {path}")
    return corpus_mod.read_corpus(args.corpus, args.vocab)


def _resolve_hp(args: argparse.Namespace) -> recommend_mod.HyperParams:
    if args.preset is not None:
        preset = recommend_mod.PRESETS.get(args.preset)
        if preset is None:
            raise ValidationError(
                f"unknown preset {args.preset!r}; available: {sorted(recommend_mod.PRESETS)}"
            )
        return recommend_mod.HyperParams(
            k=preset.k, decay=preset.decay, alpha=preset.alpha, basket_size=args.k_items
        )
    if args.preset_file is not None:
        if not Path(args.preset_file).exists():
            raise ValidationError(f"no such file: {args.preset_file}")
        return tuning_mod.load_hp_json(args.preset_file, basket_size=args.k_items)
    return recommend_mod.HyperParams(
        k=args.k,
        decay=vectors_mod.DecayParams(
            within_decay=args.within_decay, group_decay=args.group_decay, groups=args.groups
        ),
        alpha=args.alpha,
        basket_size=args.k_items,
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.synthetic == (args.transactions is not None):
        raise ValidationError("pass exactly one of --transactions or --synthetic")
    if args.synthetic:
        rows = synthetic_mod.generate_synthetic(
            seed=_require_seed(args),
            n_users=args.n_users,
            n_items=args.n_items,
            baskets_per_user_range=tuple(args.baskets_per_user),
            basket_size_range=tuple(args.basket_size),
            popularity_skew=args.popularity_skew,
        )
    else:
        if not Path(args.transactions).exists():
            raise ValidationError(f"no such file: {args.transactions}")
        columns = corpus_mod.ColumnMap(
            user_id=args.col_user,
            basket_id=args.col_basket,
            item_id=args.col_item,
            timestamp=args.col_timestamp,
            basket_order=args.col_order,
        )
        rows = corpus_mod.read_transactions_csv(args.transactions, columns)

    thresholds = dict(
        min_baskets=args.min_baskets,
        min_item_users=args.min_item_users,
        min_basket_size=args.min_basket_size,
    )
    if args.dataset_preset is not None:
        thresholds = dict(corpus_mod.PREPROCESS_PRESETS[args.dataset_preset])
    built = corpus_mod.split(corpus_mod.preprocess(corpus_mod.ingest(rows), **thresholds))

    out = _out_dir(args)
    corpus_mod.write_corpus(built, out / "corpus.ndjson", out / "vocab.json")
    stats = corpus_mod.corpus_stats(built)
    with (out / "stats.json").open("w", encoding="utf-8") as fh:
        json.dump(stats.as_dict(), fh, indent=2)
        fh.write("\n")
    print(f"corpus: {stats.users} users, {stats.items} items, {stats.baskets} baskets")
    print(f"wrote {out / 'corpus.ndjson'}, {out / 'vocab.json'}, {out / 'stats.json'}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    rows = synthetic_mod.generate_synthetic(
        seed=_require_seed(args),
        n_users=args.n_users,
        n_items=args.n_items,
        baskets_per_user_range=tuple(args.baskets_per_user),
        basket_size_range=tuple(args.basket_size),
        popularity_skew=args.popularity_skew,
    )
    out = _out_dir(args) / args.out_file
    synthetic_mod.write_transactions_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_recommend(args: argparse.Namespace) -> int:
    built = _load_corpus(args)
    hp = _resolve_hp(args)
    predictions = recommend_mod.recommend_batch(
        built, args.model, hp, threads=args.threads, pad=not args.no_pad
    )
    out = _out_dir(args) / args.out_file
    recommend_mod.write_predictions(predictions, out)
    print(f"wrote {len(predictions)} predictions to {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    built = _load_corpus(args)
    if not Path(args.predictions).exists():
        raise ValidationError(f"no such file: {args.predictions}")
    predictions = recommend_mod.read_predictions(args.predictions)
    report = metrics_mod.evaluate(predictions, built, ks=args.ks)
    out = _out_dir(args)
    metrics_mod.write_report_json(report, out / "metrics.json")
    (out / "metrics.txt").write_text(report.text_table(), encoding="utf-8")
    metrics_mod.write_per_user_csv(report, out / "per_user_metrics.csv")
    if not args.no_figures:
        from . import plots

        plots.plot_metrics_report(report, _figures_dir(args) / "metrics.png")
    sys.stdout.write(report.text_table())
    return 0


def cmd_fairness(args: argparse.Namespace) -> int:
    built = _load_corpus(args)
    if not Path(args.per_user).exists():
        raise ValidationError(f"no such file: {args.per_user}")
    recalls = metrics_mod.read_per_user_recall(args.per_user, k=10)
    traits = fairness_mod.compute_traits(built)
    traits = [t for t in traits if t.user_id in recalls]
    if not traits:
        raise ValidationError("per-user CSV shares no users with the corpus")
    axes = fairness_mod.AXES if args.axis == "all" else (args.axis,)
    out = _out_dir(args)
    all_bins = []
    for axis in axes:
        bins = fairness_mod.bin_and_report(traits, recalls, axis)
        all_bins.append(bins)
        fairness_mod.write_bins_csv(bins, out / f"fairness_{axis}.csv")
        if not args.no_figures:
            from . import plots

            plots.plot_fairness_bins(bins, _figures_dir(args) / f"fairness_{axis}.png")
    fairness_mod.write_bins_json(all_bins, n_users=len(traits), path=out / "fairness.json")
    print(f"wrote fairness bins for {len(axes)} axis(es) over {len(traits)} users to {out}")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    built = _load_corpus(args)
    validation = tuning_mod.make_validation_split(built)
    space = tuning_mod.SearchSpace(
        k_choices=tuple(args.space_k),
        within_choices=tuple(args.space_within),
        group_choices=tuple(args.space_group),
        alpha_choices=tuple(args.space_alpha),
        groups_choices=tuple(args.space_groups),
    )
    if args.mode == "grid":
        best, trials = tuning_mod.grid_search(validation, space, threads=args.threads)
    else:
        best, trials = tuning_mod.random_search(
            validation, space, n_trials=args.n_trials, seed=_require_seed(args),
            threads=args.threads,
        )
    out = _out_dir(args)
    tuning_mod.write_trial_log(trials, out / "trials.csv")
    tuning_mod.write_best_hp(best, out / "best_hp.json")
    if not args.no_figures:
        from . import plots

        plots.plot_trial_log(trials, _figures_dir(args) / "tuning_trials.png")
    print(
        f"best trial {best.trial}: recall@10={best.recall_at_10:.6f} "
        f"{tuning_mod.hp_to_dict(best.hp)}"
    )
    return 0


def cmd_export_vectors(args: argparse.Namespace) -> int:
    built = _load_corpus(args)
    if args.validation_split:
        built = tuning_mod.make_validation_split(built)
    if args.preset is not None:
        preset = recommend_mod.PRESETS.get(args.preset)
        if preset is None:
            raise ValidationError(
                f"unknown preset {args.preset!r}; available: {sorted(recommend_mod.PRESETS)}"
            )
        decay = preset.decay
    else:
        decay = vectors_mod.DecayParams(
            within_decay=args.within_decay, group_decay=args.group_decay, groups=args.groups
        )
    if args.raw_pif:
        vecs = {
            rec.user_id: vectors_mod.pif_vector(rec.history, built.n_items)
            for rec in built.users
        }
    else:
        vecs = recommend_mod.build_user_vectors(built, decay)
    out = _out_dir(args) / args.out_file
    vectors_mod.write_vectors(vecs, out)
    print(f"wrote {len(vecs)} vectors to {out}")
    return 0


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Config file values become option defaults; explicit flags still win."""
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path is None:
        return
    if not Path(config_path).exists():
        raise ValidationError(f"no such config file: {config_path}")
    with Path(config_path).open(encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad config JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ValidationError("config must be a JSON object")
    subparsers = [
        action for action in parser._actions if isinstance(action, argparse._SubParsersAction)
    ]
    for sub_action in subparsers:
        for sub in sub_action.choices.values():
            known = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in config.items() if k in known})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
        args = parser.parse_args(argv)
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
