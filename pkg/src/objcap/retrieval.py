"""Caption retrieval: inverted-index candidate filtering, cosine k-NN, and
BLEU-centroid consensus selection, plus the exhaustive-search baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Lexicon, annotate, tokenize
from .dataset import ImageRecord
from .detection import TopObjects
from .errors import EmptyCandidates
from .metrics import sentence_bleu


@dataclass
class WorkCounter:
    """Counts distance computations so filtered vs exhaustive work can be
    compared without relying on wall clocks."""

    distances: int = 0


@dataclass
class CaptionIndex:
    """Per noun-category posting lists over training images, plus the
    record store used for feature lookup and consensus."""

    postings: dict[int, set[str]]
    records: dict[str, ImageRecord]
    _ids: tuple[str, ...] = field(init=False, repr=False)
    _features: np.ndarray = field(init=False, repr=False)
    _norms: np.ndarray = field(init=False, repr=False)
    _row: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        ids = tuple(sorted(self.records))
        feats = np.stack([self.records[i].features for i in ids])
        self._ids = ids
        self._features = feats
        self._norms = np.linalg.norm(feats, axis=1)
        self._row = {img: r for r, img in enumerate(ids)}

    @property
    def all_ids(self) -> tuple[str, ...]:
        return self._ids


def build_index(training: list[ImageRecord], lex: Lexicon) -> CaptionIndex:
    """An image lands in category c's posting list iff at least one of its
    captions mentions a noun of category c."""
    postings: dict[int, set[str]] = {}
    for rec in training:
        for caption in rec.captions:
            for c in annotate(caption, lex).noun_hits:
                postings.setdefault(c, set()).add(rec.image_id)
    return CaptionIndex(postings, {r.image_id: r for r in training})


def candidates(top: TopObjects, idx: CaptionIndex) -> set[str]:
    """Union of the posting lists of the detected top categories."""
    pool: set[str] = set()
    for c in top.categories:
        pool |= idx.postings.get(c, set())
    if not pool:
        raise EmptyCandidates(
            f"image {top.image_id}: no training caption mentions the top objects"
        )
    return pool


def _rank(query: np.ndarray, idx: CaptionIndex, pool, k, counter):
    rows = np.array([idx._row[i] for i in sorted(pool)])
    ids = [idx._ids[r] for r in rows]
    qnorm = np.linalg.norm(query)
    sims = idx._features[rows] @ query / (idx._norms[rows] * qnorm)
    if counter is not None:
        counter.distances += len(rows)
    dists = 1.0 - sims
    order = sorted(range(len(ids)), key=lambda i: (dists[i], ids[i]))
    return [ids[i] for i in order[: min(k, len(ids))]]


def knn(
    query_features: np.ndarray,
    idx: CaptionIndex,
    pool: set[str],
    k: int,
    counter: WorkCounter | None = None,
) -> list[str]:
    """The min(k, |pool|) candidate ids closest in cosine distance,
    ascending; ties break toward the lower image id."""
    if not pool:
        raise EmptyCandidates("empty candidate pool")
    return _rank(query_features, idx, pool, k, counter)


def exhaustive_knn(
    query_features: np.ndarray,
    idx: CaptionIndex,
    k: int,
    counter: WorkCounter | None = None,
) -> list[str]:
    """k-NN over the whole database; the unfiltered baseline."""
    if not idx.records:
        raise EmptyCandidates("empty database")
    return _rank(query_features, idx, set(idx.all_ids), k, counter)


@dataclass(frozen=True)
class ConsensusResult:
    caption: str
    pool_size: int
    mean_similarity: tuple[float, ...]
    neighbors: tuple[str, ...]


def consensus(neighbors: list[str], idx: CaptionIndex) -> ConsensusResult:
    """Pick the pooled caption with the highest mean smoothed BLEU against
    every other pool member (the pool's centroid).

    Duplicates stay in the pool; ties break toward first occurrence.
    """
    pool: list[str] = []
    for n in neighbors:
        pool.extend(idx.records[n].captions)
    tokens = [tokenize(c) for c in pool]
    m = len(pool)
    if m == 1:
        return ConsensusResult(pool[0], 1, (1.0,), tuple(neighbors))
    means = []
    for i in range(m):
        total = 0.0
        for j in range(m):
            if i != j:
                total += sentence_bleu(tokens[i], tokens[j])
        means.append(total / (m - 1))
    best = 0
    for i in range(1, m):
        if means[i] > means[best]:
            best = i
    return ConsensusResult(pool[best], m, tuple(means), tuple(neighbors))
