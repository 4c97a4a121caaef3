"""CLI for the latent-space basket predictor.

Subcommands: train-vae, encode, train-predictor, predict, novelty-report.
Everything flows through the toolkit interchange files: exported user
vectors in, predictions NDJSON out, scoreable by the primary `evaluate`
command unchanged.  Exit codes: 0 success, 2 usage/validation, 1 runtime.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

from . import io as vio
from .latent import encode_users, fuse_all
from .model import (
    KNN_K_PRESETS,
    VaeConfig,
    load_checkpoint,
    save_checkpoint,
)
from .predict import predict_baskets
from .train import TrainingError, train_predictor, train_vae


class UsageError(ValueError):
    pass


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such {what}: {path}")
    return p


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="basketvae", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-vae", help="fit the beta-VAE on exported user vectors")
    p.add_argument("--vectors", required=True, help="user-vector NDJSON (full history)")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--beta", type=float, default=4.0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--latent-dim", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--plateau-factor", type=float, default=0.5)
    p.add_argument("--plateau-patience", type=int, default=3)
    p.set_defaults(handler=cmd_train_vae)

    p = sub.add_parser("encode", help="latent vectors (mu) for every user")
    p.add_argument("--vae", required=True, help="VAE checkpoint")
    p.add_argument("--vectors", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--out-file", default="latents.ndjson")
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser(
        "train-predictor",
        help="fit the next-basket predictor on held-out-basket targets",
    )
    p.add_argument("--vae", required=True)
    p.add_argument("--vectors", required=True,
                   help="validation-split vector NDJSON (last history basket held out)")
    p.add_argument("--corpus", required=True, help="corpus NDJSON for the q-hot targets")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--plateau-factor", type=float, default=0.5)
    p.add_argument("--plateau-patience", type=int, default=3)
    p.set_defaults(handler=cmd_train_predictor)

    p = sub.add_parser("predict", help="top-s predictions through the predictor")
    p.add_argument("--vae", required=True)
    p.add_argument("--predictor", required=True)
    p.add_argument("--vectors", required=True, help="full-history vector NDJSON")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--out-file", default="predictions.ndjson")
    p.add_argument("--knn-k", type=int, default=0, help="latent neighbors; 0 = none")
    p.add_argument("--knn-preset", default=None, choices=sorted(KNN_K_PRESETS),
                   help="named per-dataset neighbor count")
    p.add_argument("--alpha", type=float, default=0.5, help="own-latent fusion weight")
    p.add_argument("--k-items", type=int, default=20)
    p.add_argument("--model-tag", default="vae")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser(
        "novelty-report",
        help="novelty-axis fairness bins via the primary toolkit CLI",
    )
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--per-user", required=True, help="per-user metrics CSV from evaluate")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(handler=cmd_novelty_report)

    return parser


def cmd_train_vae(args: argparse.Namespace) -> int:
    vectors = vio.read_vectors(_require(args.vectors, "vector file"))
    config = VaeConfig(
        latent_dim=args.latent_dim,
        beta=args.beta,
        vae_epochs=args.epochs,
        vae_lr=args.lr,
        batch_size=args.batch_size,
        plateau_factor=args.plateau_factor,
        plateau_patience=args.plateau_patience,
        seed=args.seed,
    )
    model, curve = train_vae(vectors, config)
    out = _out_dir(args)
    save_checkpoint(model, "vae", vectors.dim, config, out / "vae.pt")
    vio.write_loss_curve(curve, out / "vae_loss.csv")
    first, last = curve[0][3], curve[-1][3]
    print(f"trained VAE on {vectors.n_users} users: total loss {first:.6f} -> {last:.6f}")
    print(f"wrote {out / 'vae.pt'}, {out / 'vae_loss.csv'}")
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    model, _ = load_checkpoint(_require(args.vae, "checkpoint"), "vae")
    vectors = vio.read_vectors(_require(args.vectors, "vector file"))
    if vectors.dim != model.n_items:
        raise UsageError(f"vector dim {vectors.dim} != checkpoint dim {model.n_items}")
    latents = encode_users(model, vectors)
    out = _out_dir(args) / args.out_file
    vio.write_latents(latents, out)
    print(f"wrote {len(latents)} latents to {out}")
    return 0


def cmd_train_predictor(args: argparse.Namespace) -> int:
    vae, payload = load_checkpoint(_require(args.vae, "checkpoint"), "vae")
    vectors = vio.read_vectors(_require(args.vectors, "vector file"))
    if vectors.dim != vae.n_items:
        raise UsageError(f"vector dim {vectors.dim} != checkpoint dim {vae.n_items}")
    corpus = {rec.user_id: rec for rec in vio.read_corpus_lines(_require(args.corpus, "corpus"))}

    latents = encode_users(vae, vectors)
    import numpy as np

    inputs, targets = [], []
    for user_id in sorted(latents):
        rec = corpus.get(user_id)
        if rec is None:
            raise UsageError(f"vector user {user_id!r} missing from corpus")
        if not rec.history:
            raise UsageError(f"user {user_id!r} has no history baskets")
        # The exported validation vectors exclude the last history basket;
        # that basket is the training target.
        inputs.append(latents[user_id])
        targets.append(np.asarray(rec.history[-1], dtype=np.int64))

    config = VaeConfig(
        latent_dim=vae.latent_dim,
        predictor_epochs=args.epochs,
        predictor_lr=args.lr,
        dropout=args.dropout,
        batch_size=args.batch_size,
        plateau_factor=args.plateau_factor,
        plateau_patience=args.plateau_patience,
        seed=args.seed,
        beta=payload["config"].get("beta", 4.0),
    )
    model, curve = train_predictor(np.stack(inputs), targets, vae.n_items, config)
    out = _out_dir(args)
    save_checkpoint(model, "predictor", vae.n_items, config, out / "predictor.pt")
    vio.write_loss_curve(curve, out / "predictor_loss.csv")
    print(
        f"trained predictor on {len(targets)} users: loss {curve[0][3]:.6f} -> "
        f"{curve[-1][3]:.6f}"
    )
    print(f"wrote {out / 'predictor.pt'}, {out / 'predictor_loss.csv'}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    vae, _ = load_checkpoint(_require(args.vae, "checkpoint"), "vae")
    predictor, _ = load_checkpoint(_require(args.predictor, "checkpoint"), "predictor")
    vectors = vio.read_vectors(_require(args.vectors, "vector file"))
    if vectors.dim != vae.n_items:
        raise UsageError(f"vector dim {vectors.dim} != checkpoint dim {vae.n_items}")
    k = KNN_K_PRESETS[args.knn_preset] if args.knn_preset else args.knn_k
    if k < 0:
        raise UsageError(f"knn-k must be >= 0, got {k}")
    if not (0.0 <= args.alpha <= 1.0):
        raise UsageError(f"alpha must be in [0, 1], got {args.alpha}")

    latents = encode_users(vae, vectors)
    fused = fuse_all(latents, k=k, alpha=args.alpha)
    items = predict_baskets(predictor, fused, s=args.k_items)
    out = _out_dir(args) / args.out_file
    vio.write_predictions(items, out, model_tag=args.model_tag)
    print(f"wrote {len(items)} predictions (k={k}, alpha={args.alpha}) to {out}")
    return 0


def cmd_novelty_report(args: argparse.Namespace) -> int:
    for path, what in ((args.corpus, "corpus"), (args.vocab, "vocab"), (args.per_user, "CSV")):
        _require(path, what)
    result = subprocess.run(
        [
            sys.executable, "-m", "nbrkit", "fairness",
            "--corpus", args.corpus, "--vocab", args.vocab,
            "--per-user", args.per_user, "--axis", "novelty_share",
            "--out-dir", str(_out_dir(args)),
        ],
        capture_output=True,
        text=True,
    )
    sys.stdout.write(result.stdout)
    sys.stderr.write(result.stderr)
    return result.returncode


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except (UsageError, vio.InterchangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
