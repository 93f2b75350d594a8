"""Shared fixtures: the bundled lexicon, a small 6-noun / 10-verb lexicon,
and a hand-planted embedding model used by the verb-rule oracle tests."""

import numpy as np
import pytest

from objcap.corpus import Lexicon
from objcap.embedding import EmbeddingModel
from objcap.stemming import stem


@pytest.fixture(scope="session")
def lex():
    return Lexicon.default()


SMALL_NOUNS = ("apple", "car", "dog", "horse", "person", "pizza")
SMALL_VERBS = ("driv", "eat", "hold", "jump", "plai", "rid", "run", "sit",
               "sleep", "walk")


@pytest.fixture(scope="session")
def small_lex():
    return Lexicon(SMALL_NOUNS, {}, SMALL_VERBS, frozenset({"man", "woman"}))


def pair_surfaces(nouns):
    out = []
    for i, a in enumerate(nouns):
        for b in nouns[i + 1:]:
            lo, hi = sorted((a, b))
            out.append(f"{lo}-{hi}")
    return out


def planted_model(small_lex, seed=7, dim=12):
    """Embedding model with random but fixed vectors for every noun stem,
    verb stem, and noun-pair surface of the small lexicon."""
    words = tuple(
        [stem(n) for n in small_lex.noun_categories]
        + list(small_lex.verb_stems)
        + pair_surfaces(small_lex.noun_categories)
    )
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(len(words), dim))
    counts = np.full(len(words), 5, dtype=np.int64)
    return EmbeddingModel(words, counts, vecs, np.zeros_like(vecs), 100)


@pytest.fixture(scope="session")
def small_model(small_lex):
    return planted_model(small_lex)
