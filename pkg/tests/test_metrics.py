"""Metric correctness against hand counts and an independently written
reference implementation of BLEU and CIDEr."""

import math
from collections import Counter, defaultdict
from fractions import Fraction

import numpy as np
import pytest

from objcap.corpus import tokenize
from objcap.dataset import ImageRecord
from objcap.errors import EmptyCaption, LengthMismatch
from objcap.fixtures import make_fixture
from objcap.metrics import (
    EvalReport,
    bleu_corpus,
    cider,
    sentence_bleu,
    subset_s1,
    subset_s2,
    verb_accuracy,
    verb_precision,
)

# --- independent reference implementations -----------------------------
# Written from the metric definitions, deliberately using a different code
# structure (Fractions, per-order loops) than the library.


def _grams(toks, n):
    return [tuple(toks[i:i + n]) for i in range(len(toks) - n + 1)]


def ref_bleu(hyps, refs, max_n=4):
    num = defaultdict(int)
    den = defaultdict(int)
    h_total, r_total = 0, 0
    for hyp, group in zip(hyps, refs):
        h_total += len(hyp)
        best = None
        for r in sorted(group, key=len):
            if best is None or abs(len(r) - len(hyp)) < abs(best - len(hyp)):
                best = len(r)
        r_total += best
        for n in range(1, max_n + 1):
            hc = Counter(_grams(hyp, n))
            for g, c in hc.items():
                num[n] += min(c, max(Counter(_grams(r, n))[g] for r in group))
                den[n] += c
    out = []
    for n in range(1, max_n + 1):
        ps = [Fraction(num[k], den[k]) if den[k] and num[k] else None
              for k in range(1, n + 1)]
        if any(p is None for p in ps):
            out.append(0.0)
            continue
        log_mean = sum(math.log(float(p)) for p in ps) / n
        bp = 1.0 if h_total > r_total else math.exp(1 - r_total / h_total)
        out.append(bp * math.exp(log_mean))
    return out


def ref_cider(hyps, refs, max_n=4):
    n_img = len(refs)
    score = 0.0
    for n in range(1, max_n + 1):
        df = Counter()
        for group in refs:
            df.update(set().union(*[set(_grams(r, n)) for r in group]))
        for i, (hyp, group) in enumerate(zip(hyps, refs)):
            hc = Counter(_grams(hyp, n))
            ht = sum(hc.values())
            hvec = {g: c / ht * math.log(n_img / df[g])
                    for g, c in hc.items() if g in df} if ht else {}
            hn = math.sqrt(sum(x * x for x in hvec.values()))
            per_ref = 0.0
            for r in group:
                rc = Counter(_grams(r, n))
                rt = sum(rc.values())
                rvec = {g: c / rt * math.log(n_img / df[g]) for g, c in rc.items()}
                rn = math.sqrt(sum(x * x for x in rvec.values()))
                if hn and rn:
                    dot = sum(v * rvec.get(g, 0.0) for g, v in hvec.items())
                    per_ref += dot / (hn * rn)
            score += per_ref / len(group)
    return 10.0 * score / (max_n * n_img)


def caption_fixture(lex, n=20):
    records = make_fixture(lex, n_images=n, dim=8, seed=6, filler_every=0)
    hyps = []
    refs = []
    for i, r in enumerate(records):
        refs.append([tokenize(c) for c in r.captions])
        # hypotheses drift away from the references in varying degrees
        base = list(refs[-1][0])
        if i % 3 == 1:
            base = base[:-1] + ["outside"]
        if i % 3 == 2:
            base = ["maybe"] + base[1:-2]
        hyps.append(base)
    return hyps, refs


# --- BLEU --------------------------------------------------------------

def test_bleu_perfect_match():
    hyps = [["a", "dog", "runs", "fast"]]
    assert bleu_corpus(hyps, [[hyps[0]]]) == pytest.approx([1.0] * 4)


def test_bleu_clipping_hand_case():
    # "the the the" vs "the cat": clipped unigram precision is 1/3
    scores = bleu_corpus([["the", "the", "the"]], [[["the", "cat"]]])
    assert scores[0] == pytest.approx(1 / 3, abs=1e-12)
    assert scores[1] == 0.0


def test_bleu_monotone_in_order(lex):
    hyps, refs = caption_fixture(lex)
    scores = bleu_corpus(hyps, refs)
    assert all(a >= b for a, b in zip(scores, scores[1:]))
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_bleu_matches_reference(lex):
    hyps, refs = caption_fixture(lex)
    ours = bleu_corpus(hyps, refs)
    theirs = ref_bleu(hyps, refs)
    for a, b in zip(ours, theirs):
        assert a == pytest.approx(b, abs=1e-9)


def test_bleu_permutation_invariant(lex):
    hyps, refs = caption_fixture(lex, n=9)
    perm = np.random.default_rng(1).permutation(9)
    shuffled = bleu_corpus([hyps[i] for i in perm], [refs[i] for i in perm])
    assert bleu_corpus(hyps, refs) == pytest.approx(shuffled, abs=1e-12)


def test_bleu_length_mismatch():
    with pytest.raises(LengthMismatch):
        bleu_corpus([["a"]], [])
    with pytest.raises(LengthMismatch):
        bleu_corpus([], [])


# --- sentence BLEU -----------------------------------------------------

def test_sentence_bleu_identical():
    toks = ["a", "dog", "runs", "in", "the", "park"]
    assert sentence_bleu(toks, toks) == pytest.approx(1.0)


def test_sentence_bleu_disjoint_is_zero():
    assert sentence_bleu(["x", "y", "z"], ["a", "b", "c"]) == 0.0


def test_sentence_bleu_orders_overlap():
    shared_4gram = sentence_bleu(
        ["a", "dog", "runs", "fast"], ["a", "dog", "runs", "fast", "today"]
    )
    one_unigram = sentence_bleu(
        ["a", "x", "y", "z"], ["a", "dog", "runs", "fast", "today"]
    )
    assert shared_4gram > one_unigram > 0.0


def test_sentence_bleu_hand_value():
    # hyp "a b c" vs ref "a b d": p1=2/3, p2=(1+1)/(2+1), p3=(0+1)/(1+1), BP=1
    got = sentence_bleu(["a", "b", "c"], ["a", "b", "d"], max_n=3)
    expected = (2 / 3 * 2 / 3 * 1 / 2) ** (1 / 3)
    assert got == pytest.approx(expected, abs=1e-12)


def test_sentence_bleu_empty():
    with pytest.raises(EmptyCaption):
        sentence_bleu([], ["a"])


# --- CIDEr -------------------------------------------------------------

def test_cider_disjoint_zero():
    hyps = [["x", "y"], ["q", "r"]]
    refs = [[["a", "dog"]], [["a", "cat"]]]
    assert cider(hyps, refs) == 0.0


def test_cider_identical_hyp_matches_direct_formula():
    hyps = [["a", "dog", "runs"], ["a", "cat", "sits"]]
    refs = [[hyps[0]], [hyps[1]]]
    assert cider(hyps, refs) == pytest.approx(ref_cider(hyps, refs), abs=1e-12)


def test_cider_matches_reference(lex):
    hyps, refs = caption_fixture(lex)
    assert cider(hyps, refs) == pytest.approx(ref_cider(hyps, refs), abs=1e-6)


def test_cider_range(lex):
    hyps, refs = caption_fixture(lex)
    assert 0.0 <= cider(hyps, refs) <= 10.0


def test_cider_length_penalty_flag(lex):
    hyps, refs = caption_fixture(lex)
    assert cider(hyps, refs, length_penalty=True) <= cider(hyps, refs)


def test_cider_needs_two_images():
    with pytest.raises(LengthMismatch):
        cider([["a"]], [[["a"]]])


# --- verb metrics ------------------------------------------------------

def test_verb_precision_hand_count(lex):
    gt = {
        "i1": ["a person is riding a horse"],
        "i2": ["a person is eating a pizza"],
        "i3": ["a dog is running in the park"],
        "i4": ["a person is sitting on a bench"],
    }
    preds = {
        "i1": ["rid"], "i2": ["rid", "eat"], "i3": ["run"], "i4": ["eat"],
    }
    prec = verb_precision(preds, gt, lex)
    assert prec["rid"] == pytest.approx(0.5)   # i1 yes, i2 no
    assert prec["eat"] == pytest.approx(0.5)   # i2 yes, i4 no
    assert prec["run"] == pytest.approx(1.0)
    assert "sit" not in prec  # never predicted


def test_verb_accuracy_hand_count(lex):
    gt = {
        "i1": ["Person is riding a motorcycle", "Person is driving a motorcycle"],
        "i2": ["a dog sleeps"],
    }
    preds = {"i1": ["rid", "driv"], "i2": ["eat", "run"]}
    assert verb_accuracy(preds, gt, lex) == pytest.approx(0.5)
    assert verb_accuracy({}, gt, lex) == 0.0


def test_verb_accuracy_stem_matching(lex):
    gt = {"i1": ["the person rides the horse"]}
    assert verb_accuracy({"i1": ["rid"]}, gt, lex) == 1.0


# --- subsets -----------------------------------------------------------

def _record(image_id, captions):
    return ImageRecord(image_id, np.array([1.0, 0.0]), tuple(captions))


def test_subsets_hand_built(lex):
    records = [
        _record("two_nouns_verb", ["a person is riding a horse"]),
        _record("one_noun", ["a person stands"]),
        _record("no_verb", ["a person and a horse"]),
        _record("other", ["an empty field"]),
    ]
    s1 = subset_s1(records, lex)
    assert s1 == {"two_nouns_verb"}
    person = lex.category_index("person")
    horse = lex.category_index("horse")
    dog = lex.category_index("dog")
    assert subset_s2(records, {"two_nouns_verb": (person, horse)}, lex) == {
        "two_nouns_verb"
    }
    assert subset_s2(records, {"two_nouns_verb": (person, dog)}, lex) == set()


def test_s2_subset_of_s1(lex):
    records = make_fixture(lex, n_images=40, dim=8, seed=7)
    top2 = {}
    for i, r in enumerate(records):
        c1 = i % lex.num_categories
        c2 = (i * 3 + 1) % lex.num_categories
        top2[r.image_id] = (c1, c2)
    assert subset_s2(records, top2, lex) <= subset_s1(records, lex)


# --- report ------------------------------------------------------------

def test_report_roundtrip():
    report = EvalReport(
        subset="s1",
        images_evaluated=10,
        images_skipped=2,
        bleu={"bleu_1": 0.5, "bleu_2": 0.25, "bleu_3": 0.1, "bleu_4": 0.05},
        cider=1.25,
        verb_precision={"rid": 0.45},
        scenario_accuracy={"vd1": 0.4, "rand": None},
    )
    assert EvalReport.from_json(report.to_json()) == report


def test_report_table_contains_fields():
    report = EvalReport(
        "all", 3, 0,
        bleu={"bleu_1": 0.9, "bleu_2": 0.8, "bleu_3": 0.7, "bleu_4": 0.6},
        cider=2.0,
        verb_precision={"eat": 1.0},
        scenario_accuracy={"vd4": 0.5},
    )
    text = report.format_table()
    for needle in ("BLEU_1", "CIDEr", "eat", "vd4", "subset: all"):
        assert needle in text
