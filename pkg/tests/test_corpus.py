"""Ingestion, preprocessing cascade, split, and corpus statistics."""

import json
import random

import pytest

from nbrkit.corpus import (
    BasketCorpus,
    ColumnMap,
    PREPROCESS_PRESETS,
    Transaction,
    UserRecord,
    corpus_stats,
    global_popularity,
    ingest,
    preprocess,
    read_corpus,
    read_transactions_csv,
    split,
    write_corpus,
)
from nbrkit.errors import ValidationError
from nbrkit.synthetic import generate_synthetic, write_transactions_csv

from helpers import make_corpus, synthetic_corpus
from oracles import group_by_oracle, recount_stats


def tx(user, basket, order, item):
    return Transaction(user, basket, order, item)


class TestIngest:
    def test_single_basket_grouping(self):
        rows = [tx("u1", "b1", 0, "a"), tx("u1", "b1", 0, "b"), tx("u1", "b1", 0, "c")]
        raw = ingest(rows)
        assert raw == {"u1": [frozenset({"a", "b", "c"})]}

    def test_shuffled_input_is_sort_invariant(self):
        rows = [
            tx("u1", "b2", 1, "c"),
            tx("u1", "b1", 0, "a"),
            tx("u2", "b9", 0, "a"),
            tx("u1", "b1", 0, "b"),
            tx("u1", "b2", 1, "d"),
        ]
        expected = ingest(rows)
        for seed in range(5):
            shuffled = rows[:]
            random.Random(seed).shuffle(shuffled)
            assert ingest(shuffled) == expected

    def test_duplicate_items_collapse(self):
        raw = ingest([tx("u1", "b1", 0, "a"), tx("u1", "b1", 0, "a")])
        assert raw["u1"] == [frozenset({"a"})]

    def test_conflicting_basket_order_rejected(self):
        rows = [tx("u1", "b1", 0, "a"), tx("u1", "b1", 1, "b")]
        with pytest.raises(ValidationError, match="two\\s+order values"):
            ingest(rows)

    def test_order_ties_break_by_basket_id(self):
        rows = [tx("u1", "bB", 5, "y"), tx("u1", "bA", 5, "x")]
        raw = ingest(rows)
        assert raw["u1"] == [frozenset({"x"}), frozenset({"y"})]

    def test_thousand_row_log_matches_group_by_oracle(self):
        rng = random.Random(41)
        rows = []
        for _ in range(1000):
            user = f"u{rng.randint(0, 30)}"
            order = rng.randint(0, 9)
            basket = f"{user}-b{order}"
            rows.append(tx(user, basket, order, f"i{rng.randint(0, 50)}"))
        raw = ingest(rows)
        expected = group_by_oracle([(r.user_id, r.basket_id, r.basket_order, r.item_id) for r in rows])
        assert set(raw) == set(expected)
        for user in expected:
            assert [set(b) for b in raw[user]] == expected[user]


class TestTransactionsCsv:
    def _write(self, tmp_path, text):
        path = tmp_path / "rows.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_explicit_order_column(self, tmp_path):
        path = self._write(
            tmp_path,
            "user_id,basket_id,basket_order,item_id\nu1,b1,0,a\nu1,b1,0,b\nu1,b2,1,a\n",
        )
        rows = read_transactions_csv(path)
        assert ingest(rows) == {"u1": [frozenset({"a", "b"}), frozenset({"a"})]}

    def test_timestamp_column_ranks_baskets(self, tmp_path):
        path = self._write(
            tmp_path,
            "user_id,basket_id,item_id,timestamp\n"
            "u1,late,x,2021-05-02T10:00:00\n"
            "u1,early,y,2021-01-01T09:30:00\n",
        )
        rows = read_transactions_csv(path)
        raw = ingest(rows)
        assert raw["u1"] == [frozenset({"y"}), frozenset({"x"})]

    def test_timestamp_tie_breaks_by_basket_id(self, tmp_path):
        path = self._write(
            tmp_path,
            "user_id,basket_id,item_id,timestamp\n"
            "u1,b,x,2021-01-01T00:00:00\n"
            "u1,a,y,2021-01-01T00:00:00\n",
        )
        raw = ingest(read_transactions_csv(path))
        assert raw["u1"] == [frozenset({"y"}), frozenset({"x"})]

    def test_missing_required_column(self, tmp_path):
        path = self._write(tmp_path, "user_id,basket_id,timestamp\nu1,b1,2021-01-01\n")
        with pytest.raises(ValidationError, match="item_id"):
            read_transactions_csv(path)

    def test_needs_exactly_one_order_source(self, tmp_path):
        neither = self._write(tmp_path, "user_id,basket_id,item_id\nu1,b1,a\n")
        with pytest.raises(ValidationError, match="exactly one"):
            read_transactions_csv(neither)
        both = self._write(
            tmp_path,
            "user_id,basket_id,item_id,timestamp,basket_order\nu1,b1,a,2021-01-01,0\n",
        )
        with pytest.raises(ValidationError, match="exactly one"):
            read_transactions_csv(both)

    def test_malformed_row_reports_row_number(self, tmp_path):
        path = self._write(
            tmp_path,
            "user_id,basket_id,basket_order,item_id\nu1,b1,0,a\nu1,b2,not_an_int,b\n",
        )
        with pytest.raises(ValidationError, match="row 3"):
            read_transactions_csv(path)

    def test_bad_timestamp_reports_row_number(self, tmp_path):
        path = self._write(
            tmp_path,
            "user_id,basket_id,item_id,timestamp\nu1,b1,a,2021/01/01 oops\n",
        )
        with pytest.raises(ValidationError, match="row 2"):
            read_transactions_csv(path)

    def test_conflicting_order_for_one_basket(self, tmp_path):
        path = self._write(
            tmp_path,
            "user_id,basket_id,basket_order,item_id\nu1,b1,0,a\nu1,b1,1,b\n",
        )
        with pytest.raises(ValidationError, match="two\\s+order values"):
            read_transactions_csv(path)

    def test_column_mapping_override(self, tmp_path):
        path = self._write(tmp_path, "uid,oid,seq,sku\nu1,b1,0,a\nu1,b2,1,b\n")
        columns = ColumnMap(user_id="uid", basket_id="oid", item_id="sku", basket_order="seq")
        raw = ingest(read_transactions_csv(path, columns))
        assert raw["u1"] == [frozenset({"a"}), frozenset({"b"})]

    def test_csv_round_trip_through_writer(self, tmp_path):
        rows = generate_synthetic(seed=3, n_users=20, n_items=30)
        path = tmp_path / "synth.csv"
        write_transactions_csv(rows, path)
        assert ingest(read_transactions_csv(path)) == ingest(rows)


class TestPreprocess:
    def test_noop_thresholds_keep_everything(self):
        raw = {
            "u1": [frozenset({"a", "b"}), frozenset({"b"}), frozenset({"c"})],
            "u2": [frozenset({"a"}), frozenset({"c"}), frozenset({"a", "c"})],
        }
        corpus = preprocess(raw, min_baskets=1, min_item_users=1, min_basket_size=1)
        assert corpus.item_ids == ("a", "b", "c")
        vocab = corpus.vocab()
        for user_id, timeline in raw.items():
            rec = corpus.user(user_id)
            assert [set(b) for b in rec.history] == [
                {vocab[i] for i in basket} for basket in timeline
            ]

    def test_rare_item_filter_cascade(self):
        # Item "rare" bought by 4 users < threshold 5: it leaves the
        # vocabulary and baskets containing only it disappear.
        raw = {}
        for u in range(4):
            raw[f"u{u}"] = [
                frozenset({"common", "rare"}),
                frozenset({"rare"}),
                frozenset({"common"}),
                frozenset({"common", "other"}),
            ]
        for u in range(4, 10):
            raw[f"u{u}"] = [frozenset({"common"}), frozenset({"other"}), frozenset({"common"})]
        corpus = preprocess(raw, min_baskets=3, min_item_users=5, min_basket_size=1)
        assert "rare" not in corpus.item_ids
        assert set(corpus.item_ids) == {"common", "other"}
        rec = corpus.user("u0")
        # rare-only basket dropped, mixed baskets shrank
        assert [set(b) for b in rec.history] == [
            {corpus.vocab()["common"]},
            {corpus.vocab()["common"]},
            {corpus.vocab()["common"], corpus.vocab()["other"]},
        ]

    def test_small_basket_filter(self):
        raw = {
            f"u{u}": [frozenset({"a", "b"}), frozenset({"a"}), frozenset({"a", "b", "c"})]
            for u in range(3)
        }
        corpus = preprocess(raw, min_baskets=2, min_item_users=1, min_basket_size=2)
        for rec in corpus.users:
            assert all(len(b) >= 2 for b in rec.history)
        assert corpus.user("u0").history == ((0, 1), (0, 1, 2))

    def test_user_with_too_few_baskets_removed(self):
        raw = {
            "keep": [frozenset({"a"}), frozenset({"a"}), frozenset({"a"})],
            "drop": [frozenset({"a"}), frozenset({"a"})],
        }
        corpus = preprocess(raw, min_baskets=3, min_item_users=1, min_basket_size=1)
        assert [u.user_id for u in corpus.users] == ["keep"]

    def test_empty_result_is_an_error(self):
        raw = {"u1": [frozenset({"a"}), frozenset({"a"}), frozenset({"a"})]}
        with pytest.raises(ValidationError, match="empty"):
            preprocess(raw, min_baskets=3, min_item_users=2, min_basket_size=1)

    def test_dataset_presets_carry_published_thresholds(self):
        assert PREPROCESS_PRESETS["dunnhumby"]["min_item_users"] == 40
        for name in ("instacart", "tafeng", "valuedshopper", "tmall", "taobao"):
            assert PREPROCESS_PRESETS[name]["min_item_users"] == 5
        for preset in PREPROCESS_PRESETS.values():
            assert preset["min_baskets"] == 3
        assert PREPROCESS_PRESETS["tmall"]["min_basket_size"] == 4
        assert PREPROCESS_PRESETS["taobao"]["min_basket_size"] == 1

    def test_idempotent_on_generated_corpora(self):
        for seed in (1, 2, 3):
            rows = generate_synthetic(seed=seed, n_users=80, n_items=60)
            raw = ingest(rows)
            once = preprocess(raw, min_baskets=3, min_item_users=4, min_basket_size=2)
            raw_again = {
                rec.user_id: [frozenset(corpus_item(once, b)) for b in rec.history]
                for rec in once.users
            }
            twice = preprocess(raw_again, min_baskets=3, min_item_users=4, min_basket_size=2)
            assert once.item_ids == twice.item_ids
            assert once.users == twice.users

    def test_rescan_invariants(self):
        rows = generate_synthetic(seed=9, n_users=100, n_items=80)
        raw = ingest(rows)
        min_baskets, min_item_users, min_basket_size = 3, 5, 2
        corpus = preprocess(raw, min_baskets, min_item_users, min_basket_size)
        # universal: user and basket thresholds hold on the final corpus
        for rec in corpus.users:
            assert len(rec.history) >= min_baskets
            assert all(len(b) >= min_basket_size for b in rec.history)
        # item threshold holds against the counts the filter ran on
        raw_buyers = {}
        for user, timeline in raw.items():
            for basket in timeline:
                for item in basket:
                    raw_buyers.setdefault(item, set()).add(user)
        for item in corpus.item_ids:
            assert len(raw_buyers[item]) >= min_item_users

    def test_vocabulary_bijectivity(self):
        corpus = synthetic_corpus(seed=5, n_users=40, n_items=50)
        vocab = corpus.vocab()
        assert sorted(vocab.values()) == list(range(corpus.n_items))
        for item, idx in vocab.items():
            assert corpus.item_ids[idx] == item


def corpus_item(corpus: BasketCorpus, basket) -> set[str]:
    return {corpus.item_ids[i] for i in basket}


class TestSplit:
    def test_last_basket_becomes_test(self):
        raw = {"u1": [frozenset({"a"}), frozenset({"b"}), frozenset({"c"})]}
        corpus = split(preprocess(raw, min_baskets=3, min_item_users=1))
        rec = corpus.user("u1")
        vocab = corpus.vocab()
        assert [set(b) for b in rec.history] == [{vocab["a"]}, {vocab["b"]}]
        assert set(rec.test_basket) == {vocab["c"]}

    def test_split_preserves_basket_count(self):
        rows = generate_synthetic(seed=11, n_users=50, n_items=40)
        before = preprocess(ingest(rows), min_baskets=3, min_item_users=1)
        after = split(before)
        for pre, post in zip(before.users, after.users):
            assert len(pre.history) == len(post.history) + 1

    def test_too_few_baskets_is_an_error(self):
        corpus = BasketCorpus(
            item_ids=("a",),
            users=(UserRecord(user_id="u1", history=((0,),)),),
        )
        with pytest.raises(ValidationError, match="at least 2"):
            split(corpus)

    def test_double_split_is_an_error(self):
        corpus = synthetic_corpus(seed=2, n_users=30, n_items=30)
        with pytest.raises(ValidationError, match="already split"):
            split(corpus)


class TestStats:
    def test_two_basket_arithmetic(self):
        corpus = BasketCorpus(
            item_ids=tuple(f"i{i}" for i in range(6)),
            users=(UserRecord(user_id="u1", history=((0, 1), (2, 3, 4, 5))),),
        )
        stats = corpus_stats(corpus)
        assert stats.avg_basket_size == 3.0
        assert stats.baskets_per_user == 2.0
        assert stats.min_basket_size == 2
        assert stats.max_basket_size == 4

    def test_split_corpus_counts_test_baskets(self):
        raw = {"u1": [frozenset({"a"}), frozenset({"b"}), frozenset({"c"})]}
        unsplit = preprocess(raw, min_baskets=3, min_item_users=1)
        assert corpus_stats(split(unsplit)).baskets == corpus_stats(unsplit).baskets == 3

    def test_matches_independent_recount(self):
        rows = generate_synthetic(seed=21, n_users=60, n_items=50)
        raw = ingest(rows)
        corpus = split(preprocess(raw, min_baskets=3, min_item_users=1))
        users, baskets, avg, per_user, mn, mx = recount_stats(
            {u: [set(b) for b in raw[u]] for u in raw}
        )
        stats = corpus_stats(corpus)
        assert (stats.users, stats.baskets) == (users, baskets)
        assert stats.avg_basket_size == pytest.approx(avg, abs=1e-12)
        assert stats.baskets_per_user == pytest.approx(per_user, abs=1e-12)
        assert (stats.min_basket_size, stats.max_basket_size) == (mn, mx)

    def test_generator_parameters_recovered_within_one_percent(self):
        # Shaped like a scaled-down high-frequency shopper log: many baskets
        # per user, basket sizes around 8.7.
        rows = generate_synthetic(
            seed=33,
            n_users=400,
            n_items=300,
            baskets_per_user_range=(58, 62),
            basket_size_range=(6, 12),
            popularity_skew=0.4,
        )
        corpus = split(preprocess(ingest(rows), min_baskets=3, min_item_users=1))
        stats = corpus_stats(corpus)
        assert stats.users == 400
        assert stats.baskets_per_user == pytest.approx(60.0, rel=0.01)
        assert stats.avg_basket_size == pytest.approx(9.0, rel=0.01)
        for key in (
            "users", "items", "baskets", "avg_basket_size",
            "baskets_per_user", "min_basket_size", "max_basket_size",
        ):
            assert key in stats.as_dict()


class TestSerialization:
    def test_ndjson_round_trip(self, tmp_path):
        corpus = synthetic_corpus(seed=13, n_users=40, n_items=40)
        write_corpus(corpus, tmp_path / "corpus.ndjson", tmp_path / "vocab.json")
        loaded = read_corpus(tmp_path / "corpus.ndjson", tmp_path / "vocab.json")
        assert loaded == corpus

    def test_reader_rejects_bad_line(self, tmp_path):
        (tmp_path / "vocab.json").write_text('{"a": 0}', encoding="utf-8")
        (tmp_path / "corpus.ndjson").write_text('{"user_id": "u1"}\n', encoding="utf-8")
        with pytest.raises(ValidationError, match=":1"):
            read_corpus(tmp_path / "corpus.ndjson", tmp_path / "vocab.json")

    def test_reader_rejects_out_of_range_index(self, tmp_path):
        (tmp_path / "vocab.json").write_text('{"a": 0}', encoding="utf-8")
        (tmp_path / "corpus.ndjson").write_text(
            '{"user_id": "u1", "history": [[0], [7]], "test": [0]}\n', encoding="utf-8"
        )
        with pytest.raises(ValidationError, match="outside vocabulary"):
            read_corpus(tmp_path / "corpus.ndjson", tmp_path / "vocab.json")

    def test_vocab_must_be_dense(self, tmp_path):
        (tmp_path / "vocab.json").write_text('{"a": 0, "b": 2}', encoding="utf-8")
        (tmp_path / "corpus.ndjson").write_text(
            '{"user_id": "u1", "history": [[0]], "test": [0]}\n', encoding="utf-8"
        )
        with pytest.raises(ValidationError, match="dense"):
            read_corpus(tmp_path / "corpus.ndjson", tmp_path / "vocab.json")


class TestGlobalPopularity:
    def test_counts_history_only_and_breaks_ties_by_index(self):
        users = {
            "u1": [[0, 1], [1], [2]],
            "u2": [[1], [0], [2]],
        }
        corpus = make_corpus(users, n_items=4)
        # history baskets: u1 [0,1],[1]; u2 [1],[0]; counts: 0->2, 1->3, 2->0 (test only)
        assert global_popularity(corpus) == [1, 0, 2, 3]
