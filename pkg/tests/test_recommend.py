"""Personal Top Frequency, TIFU-KNN fusion, top-s selection, interchange."""

import json
import math
import random

import pytest

from nbrkit.corpus import global_popularity
from nbrkit.errors import ValidationError
from nbrkit.knn import KnnIndex
from nbrkit.recommend import (
    MODEL_TIFU_KNN,
    MODEL_TOP_PERSONAL,
    PRESETS,
    HyperParams,
    PredictionList,
    build_user_vectors,
    read_predictions,
    recommend_batch,
    select_top_s,
    tifu_knn_predict,
    top_personal,
    write_predictions,
)
from nbrkit.vectors import DecayParams, UserVector

from helpers import make_corpus, synthetic_corpus
from oracles import decayed_oracle, pif_oracle, select_oracle, top_personal_oracle


class TestSelectTopS:
    def test_tie_breaks_by_ascending_index(self):
        assert select_top_s({3: 0.5, 7: 0.5, 1: 0.9}, s=2) == [1, 3]

    def test_zero_scores_only_enter_via_padding(self):
        scores = {0: 0.0, 1: 0.4, 2: 0.0}
        assert select_top_s(scores, s=3, popularity=[2, 0, 1]) == [1, 2, 0]
        assert select_top_s(scores, s=3, popularity=[2, 0, 1], pad=False) == [1]

    def test_matches_sort_oracle_on_random_maps(self):
        rng = random.Random(23)
        popularity = list(range(30))
        rng.shuffle(popularity)
        for _ in range(200):
            scores = {
                i: rng.choice([0.0, rng.random(), rng.choice([0.25, 0.5])])
                for i in rng.sample(range(30), rng.randint(1, 20))
            }
            s = rng.randint(1, 12)
            assert select_top_s(scores, s, popularity) == select_oracle(scores, s, popularity)

    def test_non_finite_scores_rejected(self):
        with pytest.raises(ValidationError, match="non-finite"):
            select_top_s({0: math.nan}, s=1)

    def test_bad_s_rejected(self):
        with pytest.raises(ValidationError, match="s must be"):
            select_top_s({0: 1.0}, s=0)


class TestTopPersonal:
    def test_frequency_then_index_tie(self):
        corpus = make_corpus({"u": [[1, 2], [2, 3], [0]]}, n_items=5)
        rec = corpus.user("u")
        pred = top_personal(rec, s=2, dim=5)
        assert list(pred.items) == [2, 1]
        assert pred.model_tag == MODEL_TOP_PERSONAL

    def test_padding_with_global_popularity(self):
        users = {
            "lonely": [[4], [4], [4]],
            "v1": [[0, 1], [1], [0, 1]],
            "v2": [[1], [0], [1]],
        }
        corpus = make_corpus(users, n_items=5)
        popularity = global_popularity(corpus)
        pred = top_personal(corpus.user("lonely"), s=3, dim=5, popularity=popularity)
        assert list(pred.items)[0] == 4
        assert list(pred.items) == [4] + [i for i in popularity if i != 4][:2]

    def test_matches_count_and_sort_oracle(self):
        corpus = synthetic_corpus(seed=31, n_users=200, n_items=100)
        popularity = global_popularity(corpus)
        for rec in corpus.users:
            got = top_personal(rec, s=10, dim=corpus.n_items, popularity=popularity)
            want = top_personal_oracle([set(b) for b in rec.history], 10, popularity)
            assert list(got.items) == want


class TestTifuKnn:
    def test_alpha_one_equals_own_vector(self):
        corpus = synthetic_corpus(seed=7, n_users=30, n_items=40)
        decay = DecayParams(0.9, 0.7, 3)
        index = KnnIndex.build(build_user_vectors(corpus, decay))
        hp = HyperParams(k=5, decay=decay, alpha=1.0)
        user = corpus.users[0].user_id
        scores = tifu_knn_predict(user, index, hp)
        own = build_user_vectors(corpus, decay)[user]
        assert scores == own.entries

    def test_identical_neighbor_keeps_scores_at_own_vector(self):
        # Two clones: each is the other's nearest neighbor at distance 0,
        # so alpha=0 with k=1 reproduces the user's own vector.
        vectors = {
            "a": UserVector(entries={0: 0.3, 2: 0.7}, dim=4),
            "b": UserVector(entries={0: 0.3, 2: 0.7}, dim=4),
            "far": UserVector(entries={3: 9.0}, dim=4),
        }
        index = KnnIndex.build(vectors)
        hp = HyperParams(k=1, decay=DecayParams(), alpha=0.0)
        scores = tifu_knn_predict("a", index, hp)
        assert scores == pytest.approx(vectors["a"].entries)

    def test_three_user_hand_instance_matches_scripted_oracle(self):
        users = {
            "hand": [[0], [0], [0, 1], [1], [0, 1]],
            "other1": [[0, 2], [2], [1, 2], [2]],
            "other2": [[1], [1, 2], [0], [2]],
        }
        corpus = make_corpus(users, n_items=3)
        decay = DecayParams(within_decay=0.9, group_decay=0.7, groups=2)
        hp = HyperParams(k=1, decay=decay, alpha=0.6)
        index = KnnIndex.build(build_user_vectors(corpus, decay))
        got = tifu_knn_predict("hand", index, hp)

        # Scripted oracle: decayed vectors by position weights, dense
        # neighbor search, elementwise mean, then the linear fusion.
        oracle_vectors = {
            u: decayed_oracle([set(b) for b in corpus.user(u).history], 0.9, 0.7, 2)
            for u in users
        }
        target = oracle_vectors["hand"]
        def dense(entries):
            return [entries.get(i, 0.0) for i in range(3)]
        dists = sorted(
            (
                math.dist(dense(target), dense(vec)),
                user,
            )
            for user, vec in oracle_vectors.items()
            if user != "hand"
        )
        nearest = oracle_vectors[dists[0][1]]
        expected = {
            i: 0.6 * target.get(i, 0.0) + 0.4 * nearest.get(i, 0.0)
            for i in set(target) | set(nearest)
        }
        assert set(got) == set(expected)
        for item, value in expected.items():
            assert got[item] == pytest.approx(value, abs=1e-12)

    def test_hand_vector_example_through_prediction(self):
        # The worked decay example survives fusion with alpha=1 untouched.
        corpus = make_corpus(
            {"hand": [[0], [0], [0, 1], [1], [9]], "other": [[2], [2], [2]]},
            n_items=10,
        )
        decay = DecayParams(0.9, 0.7, 2)
        index = KnnIndex.build(build_user_vectors(corpus, decay))
        scores = tifu_knn_predict("hand", index, HyperParams(k=1, decay=decay, alpha=1.0))
        assert scores[0] == pytest.approx(0.5575, abs=1e-9)
        assert scores[1] == pytest.approx(0.475, abs=1e-9)

    def test_no_neighbor_pool_gives_zero_collaborative_part(self):
        vectors = {"only": UserVector(entries={1: 0.8}, dim=3)}
        index = KnnIndex.build(vectors)
        hp = HyperParams(k=3, decay=DecayParams(), alpha=0.5)
        scores = tifu_knn_predict("only", index, hp)
        assert scores == {1: pytest.approx(0.4)}


class TestBatch:
    def test_reduction_to_top_personal(self):
        corpus = synthetic_corpus(seed=41, n_users=150, n_items=80)
        hp = HyperParams(k=10, decay=DecayParams(1.0, 1.0, 1), alpha=1.0, basket_size=10)
        tifu = recommend_batch(corpus, MODEL_TIFU_KNN, hp)
        top = recommend_batch(corpus, MODEL_TOP_PERSONAL, hp)
        assert len(tifu) == len(top) == corpus.n_users
        for a, b in zip(tifu, top):
            assert a.user_id == b.user_id
            assert a.items == b.items

    def test_batch_equals_per_user_path(self):
        corpus = synthetic_corpus(seed=43, n_users=80, n_items=60)
        decay = DecayParams(0.9, 0.7, 3)
        hp = HyperParams(k=7, decay=decay, alpha=0.7, basket_size=10)
        batch = recommend_batch(corpus, MODEL_TIFU_KNN, hp)
        index = KnnIndex.build(build_user_vectors(corpus, decay))
        popularity = global_popularity(corpus)
        for pred in batch:
            scores = tifu_knn_predict(pred.user_id, index, hp)
            assert list(pred.items) == select_top_s(scores, 10, popularity)

    def test_positive_scaling_leaves_selection_unchanged(self):
        rng = random.Random(3)
        popularity = list(range(20))
        for _ in range(50):
            scores = {i: rng.random() for i in rng.sample(range(20), 8)}
            scaled = {i: 7.25 * v for i, v in scores.items()}
            assert select_top_s(scores, 5, popularity) == select_top_s(scaled, 5, popularity)

    def test_alpha_one_never_scores_unpurchased_items(self):
        corpus = synthetic_corpus(seed=47, n_users=40, n_items=50)
        decay = DecayParams(0.8, 0.9, 2)
        index = KnnIndex.build(build_user_vectors(corpus, decay))
        hp = HyperParams(k=5, decay=decay, alpha=1.0)
        for rec in corpus.users[:10]:
            purchased = set().union(*[set(b) for b in rec.history])
            scores = tifu_knn_predict(rec.user_id, index, hp)
            assert set(scores) <= purchased

    def test_no_duplicates_and_size_cap(self):
        corpus = synthetic_corpus(seed=53, n_users=60, n_items=40)
        hp = HyperParams(k=5, decay=DecayParams(0.9, 0.7, 3), alpha=0.3, basket_size=15)
        for pred in recommend_batch(corpus, MODEL_TIFU_KNN, hp):
            assert len(pred.items) == len(set(pred.items)) <= 15

    def test_unknown_model_rejected(self):
        corpus = synthetic_corpus(seed=2, n_users=20, n_items=20)
        with pytest.raises(ValidationError, match="unknown model"):
            recommend_batch(corpus, "dream", HyperParams())


class TestPresets:
    def test_published_settings(self):
        expected = {
            "instacart": (900, 0.9, 0.7, 3, 0.9),
            "tafeng": (300, 0.9, 0.7, 7, 0.7),
            "dunnhumby": (900, 0.9, 0.6, 3, 0.2),
            "valuedshopper": (300, 1.0, 0.6, 7, 0.7),
            "tmall": (100, 0.6, 0.8, 18, 0.7),
            "taobao": (300, 0.6, 0.8, 10, 0.1),
        }
        assert set(PRESETS) == set(expected)
        for name, (k, r_b, r_g, m, alpha) in expected.items():
            hp = PRESETS[name]
            assert hp.k == k
            assert hp.decay.within_decay == r_b
            assert hp.decay.group_decay == r_g
            assert hp.decay.groups == m
            assert hp.alpha == alpha


class TestHyperParams:
    @pytest.mark.parametrize(
        "kwargs",
        [{"k": 0}, {"alpha": -0.1}, {"alpha": 1.1}, {"basket_size": 0}],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            HyperParams(**kwargs)


class TestInterchange:
    def test_round_trip(self, tmp_path):
        preds = [
            PredictionList(user_id="u1", items=(3, 1, 2), model_tag="tifuknn"),
            PredictionList(user_id="u2", items=(0,), model_tag="tifuknn"),
        ]
        path = tmp_path / "predictions.ndjson"
        write_predictions(preds, path)
        assert read_predictions(path) == preds
        first = json.loads(path.read_text().splitlines()[0])
        assert set(first) == {"user_id", "items", "model"}

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "predictions.ndjson"
        path.write_text(
            '{"user_id": "u1", "items": [1], "model": "m"}\n{"items": [2]}\n'
        )
        with pytest.raises(ValidationError, match=":2"):
            read_predictions(path)

    def test_duplicate_items_rejected_on_read(self, tmp_path):
        path = tmp_path / "predictions.ndjson"
        path.write_text('{"user_id": "u1", "items": [1, 1], "model": "m"}\n')
        with pytest.raises(ValidationError, match=":1"):
            read_predictions(path)
