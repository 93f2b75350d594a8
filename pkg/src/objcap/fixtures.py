"""Deterministic synthetic fixtures: images with geometric features,
detector margins, and templated captions.  Used by the test suite and the
bundled demo pipeline; nothing here touches real image data."""

from __future__ import annotations

import numpy as np

from .corpus import Lexicon
from .dataset import ImageRecord

# (noun1, noun2, gerund) scene templates; each noun is a canonical
# category and each gerund stems onto a verb-lexicon entry.
SCENES = [
    ("person", "pizza", "eating"),
    ("person", "horse", "riding"),
    ("dog", "person", "walking"),
    ("person", "surfboard", "surfing"),
    ("cat", "couch", "sleeping"),
    ("person", "ball", "playing"),
    ("person", "bench", "sitting"),
    ("person", "book", "reading"),
    ("person", "umbrella", "holding"),
    ("person", "cake", "cutting"),
    ("person", "phone", "talking"),
    ("elephant", "person", "standing"),
    ("dog", "frisbee", "jumping"),
    ("person", "cup", "drinking"),
    ("person", "tv", "watching"),
]

# single-noun, verb-free filler scenes; excluded from the S1 subset
FILLER = [
    ("bench", "a photo of an empty bench"),
    ("car", "a red car on the street"),
    ("clock", "a large clock on the wall"),
]

_PATTERNS = (
    "a {n1} is {v} a {n2}",
    "the {n1} {v} the {n2}",
    "a {n1} {v} beside a {n2}",
    "there is a {n1} {v} a {n2}",
)


def category_directions(lex: Lexicon, dim: int, seed: int = 12345) -> np.ndarray:
    """One fixed unit direction per category; doubles as the reference
    linear scorer's weight vectors."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(lex.num_categories, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def linear_scores(features: np.ndarray, dirs: np.ndarray, rng, noise: float = 0.25):
    """Reference linear scorer: margin per category is a scaled projection
    onto the category direction plus Gaussian noise."""
    return 5.0 * dirs @ features + noise * rng.normal(size=dirs.shape[0])


def make_fixture(
    lex: Lexicon,
    n_images: int = 200,
    dim: int = 32,
    seed: int = 0,
    captions_per_image: int = 3,
    filler_every: int = 20,
) -> list[ImageRecord]:
    """Generate a dataset of scene-templated images.

    Features cluster by scene (sum of the two category directions plus
    noise), margins come from the linear scorer, and captions follow the
    scene's gerund templates.  Fully determined by the seed.
    """
    rng = np.random.default_rng(seed)
    dirs = category_directions(lex, dim)
    records = []
    for i in range(n_images):
        image_id = f"img{i:04d}"
        if filler_every and i % filler_every == filler_every - 1:
            noun, caption = FILLER[(i // filler_every) % len(FILLER)]
            c1 = lex.category_index(noun)
            feats = dirs[c1] + 0.15 * rng.normal(size=dim)
            captions = (caption,)
        else:
            n1, n2, verb = SCENES[i % len(SCENES)]
            c1 = lex.category_index(n1)
            c2 = lex.category_index(n2)
            feats = dirs[c1] + dirs[c2] + 0.15 * rng.normal(size=dim)
            start = int(rng.integers(len(_PATTERNS)))
            captions = tuple(
                _PATTERNS[(start + j) % len(_PATTERNS)].format(n1=n1, v=verb, n2=n2)
                for j in range(captions_per_image)
            )
        feats = feats / np.linalg.norm(feats)
        scores = linear_scores(feats, dirs, rng)
        records.append(ImageRecord(image_id, feats, captions, scores))
    return records


def make_planted_corpus(
    lex: Lexicon, n_sentences: int = 5000, seed: int = 0
) -> list[str]:
    """Sentence corpus where "eating" co-occurs only with the apple/person
    pair; every other verb is tied to its own decoy noun pair.

    After the noun-pair transform the "apple-person" token should pull the
    embedding of "eat" toward it.
    """
    rng = np.random.default_rng(seed)
    decoy_nouns = [n for n in lex.noun_categories if n not in ("apple", "person")]
    assignments = {}
    for i, verb_stem in enumerate(lex.verb_stems):
        if verb_stem == "eat":
            assignments[verb_stem] = ("person", "apple")
        else:
            a = decoy_nouns[(2 * i) % len(decoy_nouns)]
            b = decoy_nouns[(2 * i + 1) % len(decoy_nouns)]
            assignments[verb_stem] = (a, b)
    verb_list = list(lex.verb_stems)
    sentences = []
    for _ in range(n_sentences):
        # oversample the planted verb so its pair token is frequent
        if rng.random() < 0.25:
            verb = "eat"
        else:
            verb = verb_list[int(rng.integers(len(verb_list)))]
        n1, n2 = assignments[verb]
        pattern = _PATTERNS[int(rng.integers(len(_PATTERNS)))]
        sentences.append(pattern.format(n1=n1, v=verb, n2=n2))
    return sentences
