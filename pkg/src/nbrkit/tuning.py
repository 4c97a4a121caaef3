"""Seeded hyperparameter search optimizing validation Recall@10.

The validation split holds out each user's last history basket as the
tuning target; real test baskets never enter the tuning corpus.  Random
search draws uniformly from the fixed grid; an exhaustive mode enumerates
the full product for collapsed spaces.
"""

from __future__ import annotations

import csv
import itertools
import json
import random
import time
from dataclasses import dataclass
from pathlib import Path

from .corpus import BasketCorpus, UserRecord
from .errors import ValidationError
from .metrics import evaluate
from .recommend import MODEL_TIFU_KNN, HyperParams, recommend_batch
from .vectors import DecayParams

GRID_K = (100, 300, 500, 700, 900, 1100, 1300)
GRID_DECAY = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
GRID_ALPHA = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
GRID_GROUPS = tuple(range(2, 24))

DEFAULT_N_TRIALS = 200


@dataclass(frozen=True)
class SearchSpace:
    k_choices: tuple[int, ...] = GRID_K
    within_choices: tuple[float, ...] = GRID_DECAY
    group_choices: tuple[float, ...] = GRID_DECAY
    alpha_choices: tuple[float, ...] = GRID_ALPHA
    groups_choices: tuple[int, ...] = GRID_GROUPS

    def __post_init__(self) -> None:
        for name in ("k_choices", "within_choices", "group_choices", "alpha_choices", "groups_choices"):
            if not getattr(self, name):
                raise ValidationError(f"empty {name}")

    def contains(self, hp: HyperParams) -> bool:
        return (
            hp.k in self.k_choices
            and hp.decay.within_decay in self.within_choices
            and hp.decay.group_decay in self.group_choices
            and hp.alpha in self.alpha_choices
            and hp.decay.groups in self.groups_choices
        )

    def size(self) -> int:
        return (
            len(self.k_choices)
            * len(self.within_choices)
            * len(self.group_choices)
            * len(self.alpha_choices)
            * len(self.groups_choices)
        )


@dataclass(frozen=True)
class TrialResult:
    trial: int
    hp: HyperParams
    recall_at_10: float
    seconds: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.recall_at_10 <= 1.0):
            raise ValueError(f"recall out of range: {self.recall_at_10}")


def make_validation_split(corpus: BasketCorpus) -> BasketCorpus:
    """Tuning corpus: last history basket becomes the validation target.

    Users with only two history baskets are excluded from tuning (they stay
    in the real corpus for final evaluation); real test baskets are dropped
    here, so tuning cannot touch them by construction.
    """
    corpus.require_split()
    users = []
    for rec in corpus.users:
        if len(rec.history) < 3:
            continue
        users.append(
            UserRecord(
                user_id=rec.user_id,
                history=rec.history[:-1],
                test_basket=rec.history[-1],
            )
        )
    if not users:
        raise ValidationError("no users with enough history for a validation split")
    return BasketCorpus(item_ids=corpus.item_ids, users=tuple(users))


def _run_trial(
    corpus: BasketCorpus, trial: int, hp: HyperParams, threads: int
) -> TrialResult:
    start = time.perf_counter()
    predictions = recommend_batch(corpus, MODEL_TIFU_KNN, hp, threads=threads)
    report = evaluate(predictions, corpus, ks=(10,))
    return TrialResult(
        trial=trial,
        hp=hp,
        recall_at_10=report.means["recall@10"],
        seconds=time.perf_counter() - start,
    )


def _best_of(trials: list[TrialResult]) -> TrialResult:
    best = trials[0]
    for result in trials[1:]:
        if result.recall_at_10 > best.recall_at_10:  # ties keep the earliest
            best = result
    return best


def random_search(
    corpus: BasketCorpus,
    space: SearchSpace = SearchSpace(),
    n_trials: int = DEFAULT_N_TRIALS,
    seed: int = 0,
    basket_size: int = 10,
    threads: int = 1,
) -> tuple[TrialResult, list[TrialResult]]:
    """Uniform draws from the grid; the trial sequence depends only on seed.

    Parameters are drawn for all trials up front, so growing n_trials with
    the same seed extends the log without changing its prefix.
    """
    if n_trials < 1:
        raise ValidationError(f"n_trials must be >= 1, got {n_trials}")
    rng = random.Random(seed)
    settings = []
    for _ in range(n_trials):
        settings.append(
            HyperParams(
                k=rng.choice(space.k_choices),
                decay=DecayParams(
                    within_decay=rng.choice(space.within_choices),
                    group_decay=rng.choice(space.group_choices),
                    groups=rng.choice(space.groups_choices),
                ),
                alpha=rng.choice(space.alpha_choices),
                basket_size=basket_size,
            )
        )
    trials = [
        _run_trial(corpus, i, hp, threads) for i, hp in enumerate(settings)
    ]
    return _best_of(trials), trials


def grid_search(
    corpus: BasketCorpus,
    space: SearchSpace,
    basket_size: int = 10,
    threads: int = 1,
    max_trials: int = 10_000,
) -> tuple[TrialResult, list[TrialResult]]:
    """Exhaustive enumeration, intended for collapsed spaces."""
    if space.size() > max_trials:
        raise ValidationError(
            f"grid has {space.size()} points (> {max_trials}); collapse the space "
            "or use random search"
        )
    trials = []
    combos = itertools.product(
        space.k_choices,
        space.within_choices,
        space.group_choices,
        space.groups_choices,
        space.alpha_choices,
    )
    for i, (k, within, group, groups, alpha) in enumerate(combos):
        hp = HyperParams(
            k=k,
            decay=DecayParams(within_decay=within, group_decay=group, groups=groups),
            alpha=alpha,
            basket_size=basket_size,
        )
        trials.append(_run_trial(corpus, i, hp, threads))
    return _best_of(trials), trials


def write_trial_log(trials: list[TrialResult], path: str | Path) -> None:
    """CSV log; every column except `seconds` is seed-deterministic."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "k", "r_b", "r_g", "m", "alpha", "recall_at_10", "seconds"])
        for t in trials:
            writer.writerow(
                [
                    t.trial,
                    t.hp.k,
                    t.hp.decay.within_decay,
                    t.hp.decay.group_decay,
                    t.hp.decay.groups,
                    t.hp.alpha,
                    repr(t.recall_at_10),
                    f"{t.seconds:.3f}",
                ]
            )


def write_best_hp(best: TrialResult, path: str | Path) -> None:
    """Best setting as a JSON preset the CLI can load back."""
    payload = hp_to_dict(best.hp)
    payload["validation_recall_at_10"] = best.recall_at_10
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def hp_to_dict(hp: HyperParams) -> dict:
    return {
        "k": hp.k,
        "within_decay": hp.decay.within_decay,
        "group_decay": hp.decay.group_decay,
        "groups": hp.decay.groups,
        "alpha": hp.alpha,
    }


def hp_from_dict(obj: dict, basket_size: int = 20) -> HyperParams:
    try:
        return HyperParams(
            k=int(obj["k"]),
            decay=DecayParams(
                within_decay=float(obj["within_decay"]),
                group_decay=float(obj["group_decay"]),
                groups=int(obj["groups"]),
            ),
            alpha=float(obj["alpha"]),
            basket_size=basket_size,
        )
    except KeyError as exc:
        raise ValidationError(f"hyperparameter file missing key {exc}") from None


def load_hp_json(path: str | Path, basket_size: int = 20) -> HyperParams:
    with Path(path).open(encoding="utf-8") as fh:
        return hp_from_dict(json.load(fh), basket_size=basket_size)
