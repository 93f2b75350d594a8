"""Verb-selection rules, their brute-force oracles, the precomputed table,
and the per-image prediction pipeline."""

import random
from itertools import combinations

import numpy as np
import pytest

from objcap.corpus import NounPairToken
from objcap.detection import DetectionScores, PlattParams
from objcap.embedding import EmbeddingModel, cosine
from objcap.errors import OutOfVocabulary, PairOutOfVocabulary
from objcap.stemming import stem
from objcap.verbpred import (
    VerbTable,
    build_verb_table,
    one_obj,
    predict,
    random_baseline,
    table_one_obj,
    table_vd1,
    table_vd2,
    table_vd3,
    table_vd4,
    vd1,
    vd2,
    vd3,
    vd4,
)


# --- brute-force oracles, written straight from the rule definitions ----

def _sim(model, a, b):
    return cosine(model.vector(a), model.vector(b))


def oracle_rank_sum(model, lex, n1, n2):
    scored = [(v, _sim(model, v, n1) + _sim(model, v, n2))
              for v in lex.verb_stems if v in model.index]
    return [v for v, _ in sorted(scored, key=lambda t: (-t[1], t[0]))]


def oracle_rank_pair(model, lex, surface):
    scored = [(v, _sim(model, v, surface))
              for v in lex.verb_stems if v in model.index]
    return [v for v, _ in sorted(scored, key=lambda t: (-t[1], t[0]))]


def all_pairs(lex):
    for i, j in combinations(range(lex.num_categories), 2):
        yield (
            lex.noun_categories[i],
            lex.noun_categories[j],
            NounPairToken.from_indices(i, j, lex),
        )


def test_rules_match_oracles_all_pairs(small_lex, small_model):
    lex, model = small_lex, small_model
    for n1, n2, pair in all_pairs(lex):
        r1 = oracle_rank_sum(model, lex, n1, n2)
        r2 = oracle_rank_pair(model, lex, pair.surface)
        assert vd1(n1, n2, model, lex) == r1[:2]
        assert vd2(pair, model, lex) == r2[:2]
        expected_vd3 = (
            [r1[0], r1[1]] if r1[0] == r2[0] else [r1[0], r2[0]]
        )
        assert vd3(n1, n2, pair, model, lex) == expected_vd3
        expected_vd4 = r1[:3] + [v for v in r2[:3] if v not in r1[:3]]
        assert vd4(n1, n2, pair, model, lex) == expected_vd4
        assert one_obj(n1, model, lex) == oracle_rank_pair(model, lex, stem(n1))[:2]


def test_vd1_symmetric(small_lex, small_model):
    for n1, n2, _ in all_pairs(small_lex):
        assert vd1(n1, n2, small_model, small_lex) == vd1(
            n2, n1, small_model, small_lex
        )


def test_prediction_sizes(small_lex, small_model):
    for n1, n2, pair in all_pairs(small_lex):
        assert len(vd1(n1, n2, small_model, small_lex)) == 2
        assert len(vd2(pair, small_model, small_lex)) == 2
        assert len(vd3(n1, n2, pair, small_model, small_lex)) == 2
        assert 3 <= len(vd4(n1, n2, pair, small_model, small_lex)) <= 6
        assert len(one_obj(n1, small_model, small_lex)) == 2


def test_vd4_contains_vd1_vd2_top1(small_lex, small_model):
    for n1, n2, pair in all_pairs(small_lex):
        out = vd4(n1, n2, pair, small_model, small_lex)
        assert vd1(n1, n2, small_model, small_lex)[0] in out
        assert vd2(pair, small_model, small_lex)[0] in out


def test_planted_geometry_forces_argmax(small_lex):
    # verb "eat" sits exactly on n1+n2; every other verb is orthogonal
    dim = 16
    words = ["appl", "car", "eat"] + [v for v in small_lex.verb_stems if v != "eat"]
    vecs = np.zeros((len(words), dim))
    vecs[0, 0] = 1.0  # appl
    vecs[1, 1] = 1.0  # car
    vecs[2, 0] = vecs[2, 1] = 1.0  # eat = appl + car
    for k in range(3, len(words)):
        vecs[k, k % dim] = 1.0 if k % dim > 1 else 0.0
        vecs[k, 2 + (k % (dim - 2))] = 1.0
    model = EmbeddingModel(
        tuple(words), np.ones(len(words), dtype=np.int64), vecs,
        np.zeros_like(vecs), 10,
    )
    assert vd1("apple", "car", model, small_lex)[0] == "eat"


def test_scale_invariance(small_lex, small_model):
    scaled = EmbeddingModel(
        small_model.words,
        small_model.counts,
        small_model.in_vectors.copy(),
        small_model.out_vectors.copy(),
        small_model.train_tokens,
    )
    scaled.in_vectors[scaled.index["eat"]] *= 37.0
    for n1, n2, pair in all_pairs(small_lex):
        assert vd1(n1, n2, scaled, small_lex) == vd1(n1, n2, small_model, small_lex)
        assert vd2(pair, scaled, small_lex) == vd2(pair, small_model, small_lex)


def test_missing_pair_raises(small_lex, small_model):
    pair = NounPairToken(0, 1, "apple-zebra")
    with pytest.raises(PairOutOfVocabulary):
        vd2(pair, small_model, small_lex)


def test_random_baseline(small_lex):
    r1 = random_baseline(small_lex, random.Random(5))
    r2 = random_baseline(small_lex, random.Random(5))
    assert r1 == r2
    assert len(r1) == 2 and r1[0] != r1[1]
    assert set(r1) <= set(small_lex.verb_stems)


def test_random_baseline_covers_lexicon(small_lex):
    rng = random.Random(0)
    seen = set()
    for _ in range(500):
        seen.update(random_baseline(small_lex, rng))
    assert seen == set(small_lex.verb_stems)


# --- verb table --------------------------------------------------------

def test_build_table_contents(small_lex, small_model):
    table = build_verb_table(small_model, small_lex)
    assert set(table.per_noun) == set(small_lex.noun_categories)
    assert len(table.per_pair) == 15  # C(6,2)
    for noun, ranking in table.per_noun.items():
        best = max(
            small_lex.verb_stems, key=lambda v: _sim(small_model, v, noun)
        )
        assert ranking[0][0] == best
        sims = [s for _, s in ranking]
        assert sims == sorted(sims, reverse=True)


def test_table_paths_equal_vector_paths(small_lex, small_model):
    table = build_verb_table(small_model, small_lex)
    for n1, n2, pair in all_pairs(small_lex):
        assert table_vd1(table, n1, n2) == vd1(n1, n2, small_model, small_lex)
        assert table_vd2(table, pair) == vd2(pair, small_model, small_lex)
        assert table_vd3(table, n1, n2, pair) == vd3(
            n1, n2, pair, small_model, small_lex
        )
        assert table_vd4(table, n1, n2, pair) == vd4(
            n1, n2, pair, small_model, small_lex
        )
        assert table_one_obj(table, n1) == one_obj(n1, small_model, small_lex)


def test_table_file_roundtrip_exact(tmp_path, small_lex, small_model):
    table = build_verb_table(small_model, small_lex)
    p = tmp_path / "table.txt"
    table.save(p)
    loaded = VerbTable.load(p)
    assert loaded.per_noun == table.per_noun
    assert loaded.per_pair == table.per_pair


def test_table_missing_entries_raise(small_lex, small_model):
    table = build_verb_table(small_model, small_lex)
    with pytest.raises(OutOfVocabulary):
        table_one_obj(table, "zebra")
    with pytest.raises(PairOutOfVocabulary):
        table_vd2(table, NounPairToken(0, 1, "apple-zebra"))


# --- predict pipeline --------------------------------------------------

def _identity_params(lex):
    n = lex.num_categories
    return PlattParams(
        tuple(lex.noun_categories), -np.ones(n), np.zeros(n)
    )


def test_predict_top2_and_scenarios(small_lex, small_model):
    params = _identity_params(small_lex)
    table = build_verb_table(small_model, small_lex)
    scores = np.array([5.0, 4.0, 0.0, -1.0, -2.0, -3.0])
    det = DetectionScores("img1", scores)
    pred = predict(det, params, small_lex, "vd2", table=table)
    assert pred.nouns == ("apple", "car")
    assert pred.pair_surface == "apple-car"
    assert not pred.used_fallback
    assert pred.verbs == tuple(table_vd2(table, NounPairToken(0, 1, "apple-car")))


def test_predict_fallback_flag(small_lex, small_model):
    params = _identity_params(small_lex)
    table = build_verb_table(small_model, small_lex)
    del table.per_pair["apple-car"]
    det = DetectionScores("img1", np.array([5.0, 4.0, 0, 0, 0, 0]))
    pred = predict(det, params, small_lex, "vd2", table=table)
    assert pred.used_fallback
    assert pred.verbs == tuple(table_vd1(table, "apple", "car"))


def test_predict_rand_scenario(small_lex):
    params = _identity_params(small_lex)
    det = DetectionScores("img1", np.arange(6.0))
    pred = predict(
        det, params, small_lex, "rand", rng=random.Random(3)
    )
    assert len(pred.verbs) == 2
    assert pred.scenario == "rand"
