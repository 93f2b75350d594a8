"""Caption text normalization, closed-lexicon matching, and the noun-pair
sentence transform feeding embedding training."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path

from .errors import DataError
from .stemming import stem

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")

PERSON = "person"


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run, dropping empties."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class Lexicon:
    """Closed noun and verb vocabularies with stem-based surface matching.

    ``noun_categories`` holds canonical category names (e.g. "apple"); these
    are what noun-pair surfaces are built from.  Matching against caption
    tokens always goes through stems: a token hits category ``i`` when its
    stem equals ``stem(noun_categories[i])`` or appears in ``noun_synonyms``.
    """

    noun_categories: tuple[str, ...]
    noun_synonyms: dict[str, int]
    verb_stems: tuple[str, ...]
    person_synonyms: frozenset[str]
    _noun_stem_index: dict[str, int] = field(init=False, repr=False)
    _verb_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(set(self.noun_categories)) != len(self.noun_categories):
            raise DataError("duplicate noun categories")
        if len(set(self.verb_stems)) != len(self.verb_stems):
            raise DataError("duplicate verb stems")
        stem_index: dict[str, int] = {}
        for i, name in enumerate(self.noun_categories):
            s = stem(name)
            if s in stem_index:
                raise DataError(f"noun stem collision: {name!r}")
            stem_index[s] = i
        for surface, idx in self.noun_synonyms.items():
            if not 0 <= idx < len(self.noun_categories):
                raise DataError(f"synonym {surface!r} maps to unknown category")
            if surface in stem_index and stem_index[surface] != idx:
                raise DataError(f"synonym {surface!r} shadows a category stem")
            stem_index[surface] = idx
        if set(stem_index) & set(self.verb_stems):
            clash = sorted(set(stem_index) & set(self.verb_stems))
            raise DataError(f"noun and verb stem sets overlap: {clash}")
        object.__setattr__(self, "_noun_stem_index", stem_index)
        object.__setattr__(
            self, "_verb_index", {v: i for i, v in enumerate(self.verb_stems)}
        )

    @property
    def num_categories(self) -> int:
        return len(self.noun_categories)

    @property
    def num_verbs(self) -> int:
        return len(self.verb_stems)

    def noun_index(self, token: str) -> int | None:
        """Category index for a normalized (stemmed) token, or None."""
        return self._noun_stem_index.get(token)

    def verb_index(self, token: str) -> int | None:
        return self._verb_index.get(token)

    def category_index(self, name: str) -> int | None:
        """Index of a canonical category name (also accepts its stem)."""
        try:
            return self.noun_categories.index(name)
        except ValueError:
            return self.noun_index(stem(name))

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        nouns: list[str] = []
        synonyms_raw: list[tuple[str, str]] = []
        verbs: list[str] = []
        person: list[str] = []
        section = None
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                if section not in (
                    "nouns", "noun_synonyms", "verbs", "person_synonyms"
                ):
                    raise DataError(f"{path}:{lineno}: unknown section {section!r}")
                continue
            if section == "nouns":
                nouns.append(line)
            elif section == "noun_synonyms":
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(f"{path}:{lineno}: expected surface<TAB>category")
                synonyms_raw.append((parts[0], parts[1]))
            elif section == "verbs":
                verbs.append(line)
            elif section == "person_synonyms":
                person.append(line)
            else:
                raise DataError(f"{path}:{lineno}: content before any section")
        index = {name: i for i, name in enumerate(nouns)}
        synonyms: dict[str, int] = {}
        for surface, category in synonyms_raw:
            if category not in index:
                raise DataError(f"synonym {surface!r}: unknown category {category!r}")
            synonyms[surface] = index[category]
        return cls(tuple(nouns), synonyms, tuple(verbs), frozenset(person))

    @classmethod
    def default(cls) -> "Lexicon":
        """The bundled 80-noun / 51-verb lexicon."""
        with resources.as_file(
            resources.files("objcap.data").joinpath("lexicon.txt")
        ) as p:
            return cls.from_file(p)


@dataclass(frozen=True)
class Sentence:
    raw: str
    tokens: tuple[str, ...]
    noun_hits: frozenset[int]
    verb_hits: frozenset[int]


@dataclass(frozen=True)
class NounPairToken:
    """Synthetic token "a-b" naming an unordered category pair.

    The surface joins the two canonical category names with "-", smaller
    name first, so surface(a, b) == surface(b, a).
    """

    first: int
    second: int
    surface: str

    @classmethod
    def from_indices(cls, i: int, j: int, lex: Lexicon) -> "NounPairToken":
        if i == j:
            raise DataError("noun pair requires two distinct categories")
        a, b = sorted((lex.noun_categories[i], lex.noun_categories[j]))
        if a == lex.noun_categories[j]:
            i, j = j, i
        return cls(i, j, f"{a}-{b}")


def normalize(tokens: list[str], lex: Lexicon) -> list[str]:
    """Stem each token and fold person synonyms onto "person"."""
    out = []
    for t in tokens:
        s = stem(t)
        out.append(PERSON if s in lex.person_synonyms else s)
    return out


def annotate(sentence: str, lex: Lexicon) -> Sentence:
    """Tokenize, normalize, and mark lexicon noun/verb hits."""
    tokens = normalize(tokenize(sentence), lex)
    noun_hits = set()
    verb_hits = set()
    for t in tokens:
        ni = lex.noun_index(t)
        if ni is not None:
            noun_hits.add(ni)
        vi = lex.verb_index(t)
        if vi is not None:
            verb_hits.add(vi)
    return Sentence(sentence, tuple(tokens), frozenset(noun_hits), frozenset(verb_hits))


def append_noun_pairs(s: Sentence, lex: Lexicon) -> list[Sentence]:
    """Expand a sentence into one copy per unordered noun pair.

    Each copy carries one pair surface as its final token.  Sentences with
    fewer than two noun hits pass through unchanged.
    """
    if len(s.noun_hits) < 2:
        return [s]
    out = []
    pairs = [
        NounPairToken.from_indices(i, j, lex)
        for i, j in combinations(sorted(s.noun_hits), 2)
    ]
    for pair in sorted(pairs, key=lambda p: p.surface):
        out.append(
            Sentence(s.raw, s.tokens + (pair.surface,), s.noun_hits, s.verb_hits)
        )
    return out
