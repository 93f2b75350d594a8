"""Skip-gram embedding training with negative sampling.

The softmax objective is trained through the standard negative-sampling
surrogate: for a (center, context) pair with K noise words the per-step loss
is -log s(u_ctx . v) - sum_k log s(-u_k . v).  Updates are plain SGD with a
linearly decaying learning rate.  The inner loop is compiled with numba; the
single-threaded path is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .errors import (
    ConfigError,
    EmptyCorpus,
    NonFiniteUpdate,
    OutOfVocabulary,
    ZeroVector,
)
from .stemming import stem

MAGIC = b"EMB1"


@dataclass
class SkipGramConfig:
    dim: int = 300
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    final_lr: float = 0.0001
    min_count: int = 1
    seed: int = 1
    subsample_t: float = 0.0
    dynamic_window: bool = False
    noise_exponent: float = 0.75
    noise_table_size: int = 1_000_000

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.negatives < 1:
            raise ConfigError("negatives must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 < self.final_lr <= self.initial_lr:
            raise ConfigError("need 0 < final_lr <= initial_lr")
        if self.min_count < 1:
            raise ConfigError("min_count must be >= 1")
        if self.subsample_t < 0.0:
            raise ConfigError("subsample_t must be >= 0")
        if self.noise_table_size < 1:
            raise ConfigError("noise_table_size must be >= 1")


@dataclass
class EmbeddingModel:
    """Trained input/output vector tables over words and noun-pair tokens."""

    words: tuple[str, ...]
    counts: np.ndarray
    in_vectors: np.ndarray
    out_vectors: np.ndarray
    train_tokens: int = 0
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> int:
        """Vocabulary index for a word, falling back to its stem.

        Pair tokens ("apple-person") are looked up verbatim only.
        """
        i = self.index.get(word)
        if i is not None:
            return i
        if "-" not in word:
            i = self.index.get(stem(word))
            if i is not None:
                return i
        raise OutOfVocabulary(word)

    def vector(self, word: str) -> np.ndarray:
        return self.in_vectors[self.lookup(word)]

    def similarity(self, w1: str, w2: str) -> float:
        return cosine(self.vector(w1), self.vector(w2))

    # --- serialization -------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Binary format: magic, dim, vocab size, vocab table, then both
        matrices as row-major little-endian float32."""
        dim = self.in_vectors.shape[1]
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<ii", dim, len(self.words)))
            f.write(struct.pack("<q", self.train_tokens))
            for w, c in zip(self.words, self.counts):
                enc = w.encode("utf-8")
                f.write(struct.pack("<H", len(enc)))
                f.write(enc)
                f.write(struct.pack("<q", int(c)))
            f.write(self.in_vectors.astype("<f4").tobytes())
            f.write(self.out_vectors.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingModel":
        with open(path, "rb") as f:
            if f.read(4) != MAGIC:
                raise ValueError(f"{path}: not an embedding model file")
            dim, vocab = struct.unpack("<ii", f.read(8))
            (train_tokens,) = struct.unpack("<q", f.read(8))
            words = []
            counts = np.empty(vocab, dtype=np.int64)
            for i in range(vocab):
                (n,) = struct.unpack("<H", f.read(2))
                words.append(f.read(n).decode("utf-8"))
                (counts[i],) = struct.unpack("<q", f.read(8))
            nbytes = vocab * dim * 4
            in_vecs = np.frombuffer(f.read(nbytes), dtype="<f4").reshape(vocab, dim)
            out_vecs = np.frombuffer(f.read(nbytes), dtype="<f4").reshape(vocab, dim)
        return cls(
            tuple(words),
            counts,
            in_vecs.astype(np.float64),
            out_vecs.astype(np.float64),
            train_tokens,
        )

    def export_text(self, path: str | Path) -> None:
        """One "word v1 v2 ... vD" line per vocabulary entry."""
        with open(path, "w", encoding="utf-8") as f:
            for w, row in zip(self.words, self.in_vectors):
                f.write(w + " " + " ".join(f"{x:.6f}" for x in row) + "\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.dot(u, v) / (nu * nv))


def build_vocab(
    corpus: Iterable[Sequence[str]], cfg: SkipGramConfig
) -> tuple[tuple[str, ...], np.ndarray]:
    """Count tokens and keep those with frequency >= min_count.

    Ordering is by descending count, then token, so vocabulary indices are
    reproducible for a given corpus.
    """
    counts: dict[str, int] = {}
    for sentence in corpus:
        for tok in sentence:
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(
        ((w, c) for w, c in counts.items() if c >= cfg.min_count),
        key=lambda wc: (-wc[1], wc[0]),
    )
    if not kept:
        raise EmptyCorpus("no token reached min_count")
    words = tuple(w for w, _ in kept)
    return words, np.array([c for _, c in kept], dtype=np.int64)


@njit(cache=True, nogil=True)
def _step(in_vecs, out_vecs, center, context, negs, lr, gin, pbuf):
    """One SGD step on the negative-sampling loss; returns the loss before
    the update.  All gradients are evaluated at the pre-step parameters."""
    d = in_vecs.shape[1]
    v = in_vecs[center]
    s = 0.0
    for k in range(d):
        s += out_vecs[context, k] * v[k]
    # -log sigma(s) == softplus(-s), computed stably
    if s > 0.0:
        loss = np.log1p(np.exp(-s))
    else:
        loss = -s + np.log1p(np.exp(s))
    p_ctx = 1.0 / (1.0 + np.exp(-s))
    for k in range(d):
        gin[k] = (p_ctx - 1.0) * out_vecs[context, k]
    for j in range(negs.shape[0]):
        n = negs[j]
        s = 0.0
        for k in range(d):
            s += out_vecs[n, k] * v[k]
        if s > 0.0:
            loss += s + np.log1p(np.exp(-s))
        else:
            loss += np.log1p(np.exp(s))
        pbuf[j] = 1.0 / (1.0 + np.exp(-s))
        for k in range(d):
            gin[k] += pbuf[j] * out_vecs[n, k]
    # apply updates only after every gradient has been read
    g = p_ctx - 1.0
    for k in range(d):
        out_vecs[context, k] -= lr * g * v[k]
    for j in range(negs.shape[0]):
        n = negs[j]
        for k in range(d):
            out_vecs[n, k] -= lr * pbuf[j] * v[k]
    for k in range(d):
        in_vecs[center, k] -= lr * gin[k]
    return loss


@njit(cache=True, nogil=True)
def _train_epochs(
    in_vecs,
    out_vecs,
    tokens,
    offsets,
    freqs,
    noise_table,
    window,
    negatives,
    initial_lr,
    final_lr,
    epochs,
    subsample_t,
    dynamic_window,
    seed,
):
    """Run the full training schedule; returns (failed_step, loss, steps).

    failed_step is -1 on success, otherwise the 1-based index of the first
    step whose loss came out non-finite.
    """
    np.random.seed(seed)
    d = in_vecs.shape[1]
    table_size = noise_table.shape[0]
    total_scan = (offsets[-1]) * epochs
    gin = np.empty(d, dtype=np.float64)
    pbuf = np.empty(negatives, dtype=np.float64)
    negbuf = np.empty(negatives, dtype=np.int64)
    kept = np.empty(np.max(offsets[1:] - offsets[:-1]), dtype=np.int64)
    scanned = 0
    step = 0
    total_loss = 0.0
    for _epoch in range(epochs):
        for si in range(offsets.shape[0] - 1):
            m = 0
            for ti in range(offsets[si], offsets[si + 1]):
                scanned += 1
                t = tokens[ti]
                if subsample_t > 0.0:
                    z = freqs[t]
                    keep = (np.sqrt(z / subsample_t) + 1.0) * subsample_t / z
                    if keep < 1.0 and np.random.random() > keep:
                        continue
                kept[m] = t
                m += 1
            lr = initial_lr - (initial_lr - final_lr) * (scanned / total_scan)
            if lr < final_lr:
                lr = final_lr
            for i in range(m):
                center = kept[i]
                w = window
                if dynamic_window:
                    w = 1 + np.random.randint(0, window)
                lo = i - w
                if lo < 0:
                    lo = 0
                hi = i + w + 1
                if hi > m:
                    hi = m
                for j in range(lo, hi):
                    if j == i:
                        continue
                    context = kept[j]
                    kn = 0
                    for _n in range(negatives):
                        cand = context
                        for _try in range(16):
                            cand = noise_table[np.random.randint(0, table_size)]
                            if cand != context:
                                break
                        if cand == context:
                            continue
                        negbuf[kn] = cand
                        kn += 1
                    loss = _step(
                        in_vecs, out_vecs, center, context,
                        negbuf[:kn], lr, gin, pbuf,
                    )
                    step += 1
                    if not np.isfinite(loss):
                        return step, total_loss, step
                    total_loss += loss
    return -1, total_loss, step


def _build_noise_table(counts: np.ndarray, cfg: SkipGramConfig) -> np.ndarray:
    weights = np.power(counts.astype(np.float64), cfg.noise_exponent)
    cum = np.cumsum(weights)
    cum /= cum[-1]
    positions = (np.arange(cfg.noise_table_size) + 0.5) / cfg.noise_table_size
    return np.searchsorted(cum, positions).astype(np.int64)


def sgd_step(
    model: EmbeddingModel,
    center: int,
    context: int,
    negatives: Sequence[int],
    lr: float,
) -> float:
    """Apply one negative-sampling SGD step in place; returns the loss
    evaluated at the parameters before the update."""
    negs = np.asarray(negatives, dtype=np.int64)
    v = len(model)
    if not (0 <= center < v and 0 <= context < v):
        raise IndexError("center/context out of range")
    if negs.size and (negs.min() < 0 or negs.max() >= v):
        raise IndexError("negative index out of range")
    d = model.in_vectors.shape[1]
    return float(
        _step(
            model.in_vectors,
            model.out_vectors,
            center,
            context,
            negs,
            lr,
            np.empty(d, dtype=np.float64),
            np.empty(max(1, negs.size), dtype=np.float64),
        )
    )


def _encode(
    corpus: Sequence[Sequence[str]], index: dict[str, int]
) -> tuple[np.ndarray, np.ndarray]:
    ids: list[int] = []
    offsets = [0]
    for sentence in corpus:
        for tok in sentence:
            i = index.get(tok)
            if i is not None:
                ids.append(i)
        offsets.append(len(ids))
    return np.array(ids, dtype=np.int64), np.array(offsets, dtype=np.int64)


def train(
    corpus: Sequence[Sequence[str]],
    cfg: SkipGramConfig,
    threads: int = 1,
) -> EmbeddingModel:
    """Train a skip-gram model over tokenized sentences.

    With threads == 1 the result is deterministic for a fixed seed.  With
    threads > 1 the sentence list is partitioned across workers that apply
    unsynchronized updates to shared parameters; results then vary run to
    run and only distributional properties should be asserted.
    """
    cfg.validate()
    words, counts = build_vocab(corpus, cfg)
    index = {w: i for i, w in enumerate(words)}
    tokens, offsets = _encode(corpus, index)
    if tokens.size == 0:
        raise EmptyCorpus("corpus has no in-vocabulary tokens")

    rng = np.random.default_rng(cfg.seed)
    vocab = len(words)
    in_vecs = (rng.random((vocab, cfg.dim)) - 0.5) / cfg.dim
    out_vecs = np.zeros((vocab, cfg.dim), dtype=np.float64)
    noise_table = _build_noise_table(counts, cfg)
    freqs = counts.astype(np.float64) / float(tokens.size)

    def run(tok, off, seed):
        return _train_epochs(
            in_vecs, out_vecs, tok, off, freqs, noise_table,
            cfg.window, cfg.negatives, cfg.initial_lr, cfg.final_lr,
            cfg.epochs, cfg.subsample_t, cfg.dynamic_window, seed,
        )

    if threads <= 1:
        failed, _loss, _steps = run(tokens, offsets, cfg.seed)
        if failed >= 0:
            raise NonFiniteUpdate(failed)
    else:
        n_sent = offsets.shape[0] - 1
        bounds = np.linspace(0, n_sent, threads + 1).astype(int)
        jobs = []
        for w in range(threads):
            lo, hi = bounds[w], bounds[w + 1]
            if lo == hi:
                continue
            sub_off = offsets[lo : hi + 1] - offsets[lo]
            sub_tok = tokens[offsets[lo] : offsets[hi]]
            jobs.append((sub_tok, sub_off, cfg.seed + w))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: run(*j), jobs))
        for failed, _loss, _steps in results:
            if failed >= 0:
                raise NonFiniteUpdate(failed)

    model = EmbeddingModel(words, counts, in_vecs, out_vecs, int(tokens.size))
    if not (
        np.all(np.isfinite(in_vecs)) and np.all(np.isfinite(out_vecs))
    ):
        raise NonFiniteUpdate(-1)
    return model
