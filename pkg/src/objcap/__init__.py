"""Top-object-driven caption retrieval and zero-shot verb prediction."""

__version__ = "0.1.0"

from .corpus import (
    Lexicon,
    NounPairToken,
    Sentence,
    annotate,
    append_noun_pairs,
    normalize,
    tokenize,
)
from .dataset import ImageRecord, load_dataset, save_dataset
from .detection import (
    DetectionScores,
    PlattParams,
    TopObjects,
    calibrate,
    fit_platt,
    top_n,
)
from .embedding import EmbeddingModel, SkipGramConfig, build_vocab, cosine, sgd_step, train
from .metrics import (
    EvalReport,
    bleu_corpus,
    cider,
    sentence_bleu,
    subset_s1,
    subset_s2,
    verb_accuracy,
    verb_precision,
)
from .retrieval import (
    CaptionIndex,
    ConsensusResult,
    WorkCounter,
    build_index,
    candidates,
    consensus,
    exhaustive_knn,
    knn,
)
from .stemming import stem
from .verbpred import (
    VerbPrediction,
    VerbTable,
    build_verb_table,
    one_obj,
    predict,
    random_baseline,
    vd1,
    vd2,
    vd3,
    vd4,
)
