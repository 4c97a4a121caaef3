"""Next-basket recommendation toolkit.

Frequency and time-decayed kNN recommenders over basket histories, with a
ranking-metric evaluator, fairness binning, hyperparameter tuning, and a
file-interchange CLI.
"""

from .corpus import (
    Basket,
    BasketCorpus,
    ColumnMap,
    CorpusStats,
    Transaction,
    UserRecord,
    corpus_stats,
    ingest,
    preprocess,
    read_corpus,
    split,
    write_corpus,
)
from .errors import ValidationError
from .knn import KnnIndex
from .metrics import MetricsReport, evaluate
from .recommend import (
    PRESETS,
    HyperParams,
    PredictionList,
    recommend_batch,
    select_top_s,
    tifu_knn_predict,
    top_personal,
)
from .vectors import DecayParams, UserVector, decayed_user_vector, pif_vector

__all__ = [
    "Basket",
    "BasketCorpus",
    "ColumnMap",
    "CorpusStats",
    "DecayParams",
    "HyperParams",
    "KnnIndex",
    "MetricsReport",
    "PredictionList",
    "PRESETS",
    "Transaction",
    "UserRecord",
    "UserVector",
    "ValidationError",
    "corpus_stats",
    "decayed_user_vector",
    "evaluate",
    "ingest",
    "pif_vector",
    "preprocess",
    "read_corpus",
    "recommend_batch",
    "select_top_s",
    "split",
    "tifu_knn_predict",
    "top_personal",
    "write_corpus",
]

__version__ = "0.1.0"
