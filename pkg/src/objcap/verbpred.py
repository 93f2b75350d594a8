"""Zero-shot verb prediction from detected object pairs.

Two similarity rules drive everything: the mean-similarity rule (verb vs
each of the two nouns) and the pair-token rule (verb vs the appended
"a-b" token), plus their merge and union variants, a one-object baseline,
and a random baseline.  A precomputed table gives the same answers as the
vector arithmetic with O(1) lookups.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Lexicon, NounPairToken
from .detection import DetectionScores, PlattParams, top_n
from .embedding import EmbeddingModel, cosine
from .errors import DataError, OutOfVocabulary, PairOutOfVocabulary

SCENARIOS = ("rand", "1obj", "vd1", "vd2", "vd3", "vd4")

Ranking = list[tuple[str, float]]


def _sort(scored: Ranking) -> Ranking:
    """Similarity descending, then verb stem: deterministic everywhere."""
    return sorted(scored, key=lambda vs: (-vs[1], vs[0]))


def _vocab_verbs(model: EmbeddingModel, lex: Lexicon) -> list[str]:
    verbs = [v for v in lex.verb_stems if v in model.index]
    if not verbs:
        raise OutOfVocabulary("<no verb stem in vocabulary>")
    return verbs


def rank_for_token(model: EmbeddingModel, token: str, lex: Lexicon) -> Ranking:
    """All in-vocabulary verbs ranked by cosine to one token."""
    vec = model.vector(token)
    return _sort([(v, cosine(model.vector(v), vec)) for v in _vocab_verbs(model, lex)])


def rank_for_pair_sum(
    model: EmbeddingModel, n1: str, n2: str, lex: Lexicon
) -> Ranking:
    """All in-vocabulary verbs ranked by SIM(v, n1) + SIM(v, n2)."""
    v1 = model.vector(n1)
    v2 = model.vector(n2)
    return _sort(
        [
            (v, cosine(model.vector(v), v1) + cosine(model.vector(v), v2))
            for v in _vocab_verbs(model, lex)
        ]
    )


def vd1(n1: str, n2: str, model: EmbeddingModel, lex: Lexicon) -> list[str]:
    """Top-2 verbs by mean similarity to the two detected nouns."""
    return [v for v, _ in rank_for_pair_sum(model, n1, n2, lex)[:2]]


def vd2(pair: NounPairToken, model: EmbeddingModel, lex: Lexicon) -> list[str]:
    """Top-2 verbs by similarity to the appended noun-pair token."""
    if pair.surface not in model.index:
        raise PairOutOfVocabulary(pair.surface)
    return [v for v, _ in rank_for_token(model, pair.surface, lex)[:2]]


def vd3(
    n1: str, n2: str, pair: NounPairToken, model: EmbeddingModel, lex: Lexicon
) -> list[str]:
    """Agreement merge: if both rules agree on the top verb, keep it plus
    the mean rule's runner-up; otherwise take each rule's top verb."""
    r1 = [v for v, _ in rank_for_pair_sum(model, n1, n2, lex)[:2]]
    if pair.surface not in model.index:
        raise PairOutOfVocabulary(pair.surface)
    r2 = [v for v, _ in rank_for_token(model, pair.surface, lex)[:1]]
    if r1[0] == r2[0]:
        return [r1[0], r1[1]]
    return [r1[0], r2[0]]


def vd4(
    n1: str, n2: str, pair: NounPairToken, model: EmbeddingModel, lex: Lexicon
) -> list[str]:
    """Union of each rule's top-3; mean-rule verbs first, then the pair
    rule's novelties, both in rank order.  Size 3..6."""
    r1 = [v for v, _ in rank_for_pair_sum(model, n1, n2, lex)[:3]]
    if pair.surface not in model.index:
        raise PairOutOfVocabulary(pair.surface)
    r2 = [v for v, _ in rank_for_token(model, pair.surface, lex)[:3]]
    return r1 + [v for v in r2 if v not in r1]


def one_obj(n1: str, model: EmbeddingModel, lex: Lexicon) -> list[str]:
    """Top-2 verbs closest to the single most probable object."""
    return [v for v, _ in rank_for_token(model, n1, lex)[:2]]


def random_baseline(lex: Lexicon, rng: random.Random) -> list[str]:
    """Two distinct verbs drawn uniformly from the verb lexicon."""
    return rng.sample(lex.verb_stems, 2)


@dataclass
class VerbTable:
    """Full verb rankings per noun and per pair token, for constant-time
    prediction without vector arithmetic."""

    per_noun: dict[str, Ranking] = field(default_factory=dict)
    per_pair: dict[str, Ranking] = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("[nouns]\n")
            for noun in sorted(self.per_noun):
                entry = ",".join(f"{v}:{s!r}" for v, s in self.per_noun[noun])
                f.write(f"{noun}\t{entry}\n")
            f.write("[pairs]\n")
            for pair in sorted(self.per_pair):
                entry = ",".join(f"{v}:{s!r}" for v, s in self.per_pair[pair])
                f.write(f"{pair}\t{entry}\n")

    @classmethod
    def load(cls, path: str | Path) -> "VerbTable":
        table = cls()
        target = None
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            if line == "[nouns]":
                target = table.per_noun
                continue
            if line == "[pairs]":
                target = table.per_pair
                continue
            if target is None:
                raise DataError(f"{path}:{lineno}: content before section header")
            key, _, entry = line.partition("\t")
            ranking = []
            for item in entry.split(","):
                verb, _, sim = item.rpartition(":")
                ranking.append((verb, float(sim)))
            target[key] = ranking
        return table


def build_verb_table(model: EmbeddingModel, lex: Lexicon) -> VerbTable:
    """Rank every verb for every in-vocabulary category and pair token."""
    table = VerbTable()
    for name in lex.noun_categories:
        try:
            table.per_noun[name] = rank_for_token(model, name, lex)
        except OutOfVocabulary:
            continue
    names = set(lex.noun_categories)
    for token in model.words:
        a, dash, b = token.partition("-")
        if dash and a in names and b in names:
            table.per_pair[token] = rank_for_token(model, token, lex)
    return table


def _table_rank_sum(table: VerbTable, n1: str, n2: str) -> Ranking:
    for n in (n1, n2):
        if n not in table.per_noun:
            raise OutOfVocabulary(n)
    s2 = dict(table.per_noun[n2])
    return _sort([(v, s1 + s2[v]) for v, s1 in table.per_noun[n1]])


def table_vd1(table: VerbTable, n1: str, n2: str) -> list[str]:
    return [v for v, _ in _table_rank_sum(table, n1, n2)[:2]]


def table_vd2(table: VerbTable, pair: NounPairToken) -> list[str]:
    if pair.surface not in table.per_pair:
        raise PairOutOfVocabulary(pair.surface)
    return [v for v, _ in table.per_pair[pair.surface][:2]]


def table_vd3(table: VerbTable, n1: str, n2: str, pair: NounPairToken) -> list[str]:
    r1 = [v for v, _ in _table_rank_sum(table, n1, n2)[:2]]
    if pair.surface not in table.per_pair:
        raise PairOutOfVocabulary(pair.surface)
    top2 = table.per_pair[pair.surface][0][0]
    if r1[0] == top2:
        return [r1[0], r1[1]]
    return [r1[0], top2]


def table_vd4(table: VerbTable, n1: str, n2: str, pair: NounPairToken) -> list[str]:
    r1 = [v for v, _ in _table_rank_sum(table, n1, n2)[:3]]
    if pair.surface not in table.per_pair:
        raise PairOutOfVocabulary(pair.surface)
    r2 = [v for v, _ in table.per_pair[pair.surface][:3]]
    return r1 + [v for v in r2 if v not in r1]


def table_one_obj(table: VerbTable, n1: str) -> list[str]:
    if n1 not in table.per_noun:
        raise OutOfVocabulary(n1)
    return [v for v, _ in table.per_noun[n1][:2]]


@dataclass(frozen=True)
class VerbPrediction:
    image_id: str
    nouns: tuple[str, str]
    pair_surface: str
    scenario: str
    verbs: tuple[str, ...]
    used_fallback: bool = False


def predict(
    scores: DetectionScores,
    params: PlattParams,
    lex: Lexicon,
    scenario: str,
    *,
    table: VerbTable | None = None,
    model: EmbeddingModel | None = None,
    rng: random.Random | None = None,
) -> VerbPrediction:
    """Full per-image pipeline: top-2 detection, pair construction, and the
    scenario's verb rule.

    Exactly one of ``table`` (constant-time lookups) or ``model`` (direct
    vector arithmetic) drives the similarity rules.  An unseen pair token
    falls back to the mean-similarity rule, flagged on the output.
    """
    if scenario not in SCENARIOS:
        raise DataError(f"unknown scenario {scenario!r}")
    if (table is None) == (model is None) and scenario not in ("rand",):
        raise DataError("pass exactly one of table= or model=")
    top = top_n(scores, params, 2)
    c1, c2 = top.categories
    n1 = lex.noun_categories[c1]
    n2 = lex.noun_categories[c2]
    pair = NounPairToken.from_indices(c1, c2, lex)
    fallback = False

    if scenario == "rand":
        if rng is None:
            raise DataError("rand scenario needs rng=")
        verbs = random_baseline(lex, rng)
    elif scenario == "1obj":
        verbs = table_one_obj(table, n1) if table else one_obj(n1, model, lex)
    elif scenario == "vd1":
        verbs = table_vd1(table, n1, n2) if table else vd1(n1, n2, model, lex)
    else:
        try:
            if scenario == "vd2":
                verbs = (
                    table_vd2(table, pair) if table else vd2(pair, model, lex)
                )
            elif scenario == "vd3":
                verbs = (
                    table_vd3(table, n1, n2, pair)
                    if table
                    else vd3(n1, n2, pair, model, lex)
                )
            else:
                verbs = (
                    table_vd4(table, n1, n2, pair)
                    if table
                    else vd4(n1, n2, pair, model, lex)
                )
        except PairOutOfVocabulary:
            verbs = table_vd1(table, n1, n2) if table else vd1(n1, n2, model, lex)
            fallback = True

    return VerbPrediction(
        scores.image_id, (n1, n2), pair.surface, scenario, tuple(verbs), fallback
    )
