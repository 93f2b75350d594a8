"""Caption and verb-prediction scoring: corpus BLEU, smoothed sentence BLEU,
CIDEr, per-verb precision, verb accuracy, and the S1/S2 subset builders."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Lexicon, annotate
from .errors import EmptyCaption, LengthMismatch

Tokens = Sequence[str]


def ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(hyp_len: int, ref_lens: Iterable[int]) -> int:
    # on a tie the shorter reference wins
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def bleu_corpus(
    hyps: Sequence[Tokens],
    refs: Sequence[Sequence[Tokens]],
    max_n: int = 4,
) -> list[float]:
    """Corpus BLEU_1..BLEU_max_n (cumulative, uniform weights).

    Clipped n-gram counts aggregate over the corpus; the brevity penalty
    uses the closest reference length per hypothesis.
    """
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} reference sets")
    if not hyps:
        raise LengthMismatch("empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref_group in zip(hyps, refs):
        hyp_len += len(hyp)
        ref_len += _closest_ref_len(len(hyp), [len(r) for r in ref_group])
        for n in range(1, max_n + 1):
            counts = ngram_counts(hyp, n)
            max_ref: Counter = Counter()
            for ref in ref_group:
                for g, c in ngram_counts(ref, n).items():
                    if c > max_ref[g]:
                        max_ref[g] = c
            matched[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            total[n - 1] += sum(counts.values())
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / max(hyp_len, 1))
    scores = []
    for n in range(1, max_n + 1):
        log_sum = 0.0
        degenerate = False
        for i in range(n):
            if matched[i] == 0 or total[i] == 0:
                degenerate = True
                break
            log_sum += math.log(matched[i] / total[i])
        scores.append(0.0 if degenerate else bp * math.exp(log_sum / n))
    return scores


def sentence_bleu(hyp: Tokens, ref: Tokens, max_n: int = 4) -> float:
    """Smoothed sentence BLEU used for consensus selection.

    Unigram precision is unsmoothed; orders 2..max_n get add-one smoothing
    on numerator and denominator.  Directional: hyp is scored against ref.
    """
    if not hyp or not ref:
        raise EmptyCaption("cannot score an empty caption")
    log_sum = 0.0
    for n in range(1, max_n + 1):
        counts = ngram_counts(hyp, n)
        ref_counts = ngram_counts(ref, n)
        match = sum(min(c, ref_counts[g]) for g, c in counts.items())
        total = sum(counts.values())
        if n == 1:
            if match == 0:
                return 0.0
            p = match / total
        else:
            p = (match + 1.0) / (total + 1.0)
        log_sum += math.log(p)
    bp = 1.0 if len(hyp) > len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum / max_n)


def _tfidf_vector(counts: Counter, idf: Mapping, total: int) -> dict:
    if total == 0:
        return {}
    return {g: (c / total) * idf.get(g, 0.0) for g, c in counts.items()}


def _cos_sparse(u: dict, v: dict) -> float:
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    dot = sum(x * v[g] for g, x in u.items() if g in v)
    return dot / (nu * nv)


def cider(
    hyps: Sequence[Tokens],
    refs: Sequence[Sequence[Tokens]],
    max_n: int = 4,
    length_penalty: bool = False,
    sigma: float = 6.0,
) -> float:
    """Mean CIDEr over the corpus: tf-idf n-gram cosine per order, averaged
    over orders and references, scaled by 10.

    ``length_penalty`` enables the Gaussian length penalty of the "D"
    variant; the plain form is the default.
    """
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} reference sets")
    if len(hyps) < 2:
        raise LengthMismatch("need >= 2 images to estimate idf")
    num_images = len(refs)
    idfs = []
    for n in range(1, max_n + 1):
        df: Counter = Counter()
        for ref_group in refs:
            seen = set()
            for ref in ref_group:
                seen.update(ngram_counts(ref, n))
            df.update(seen)
        idfs.append({g: math.log(num_images / d) for g, d in df.items()})

    total_score = 0.0
    for hyp, ref_group in zip(hyps, refs):
        image_score = 0.0
        for n in range(1, max_n + 1):
            hc = ngram_counts(hyp, n)
            hv = _tfidf_vector(hc, idfs[n - 1], sum(hc.values()))
            order_score = 0.0
            for ref in ref_group:
                rc = ngram_counts(ref, n)
                rv = _tfidf_vector(rc, idfs[n - 1], sum(rc.values()))
                sim = _cos_sparse(hv, rv)
                if length_penalty:
                    delta = len(hyp) - len(ref)
                    sim *= math.exp(-(delta * delta) / (2.0 * sigma * sigma))
                order_score += sim
            image_score += order_score / len(ref_group)
        total_score += image_score / max_n
    return 10.0 * total_score / num_images


def gt_verb_hits(captions: Iterable[str], lex: Lexicon) -> set[int]:
    hits: set[int] = set()
    for c in captions:
        hits |= annotate(c, lex).verb_hits
    return hits


def gt_noun_hits(captions: Iterable[str], lex: Lexicon) -> set[int]:
    hits: set[int] = set()
    for c in captions:
        hits |= annotate(c, lex).noun_hits
    return hits


def verb_precision(
    predictions: Mapping[str, Iterable[str]],
    gt_captions: Mapping[str, Iterable[str]],
    lex: Lexicon,
) -> dict[str, float]:
    """Per-verb precision: of the images where a verb was predicted, the
    fraction whose ground truth actually mentions it.  Verbs never
    predicted are absent from the result."""
    predicted: Counter = Counter()
    correct: Counter = Counter()
    for image_id, verbs in predictions.items():
        gt = gt_verb_hits(gt_captions[image_id], lex)
        for v in set(verbs):
            vi = lex.verb_index(v)
            if vi is None:
                continue
            predicted[v] += 1
            if vi in gt:
                correct[v] += 1
    return {v: correct[v] / n for v, n in predicted.items()}


def verb_accuracy(
    predictions: Mapping[str, Iterable[str]],
    gt_captions: Mapping[str, Iterable[str]],
    lex: Lexicon,
) -> float:
    """Fraction of images where any predicted verb stem occurs in any
    ground-truth caption."""
    if not predictions:
        return 0.0
    hits = 0
    for image_id, verbs in predictions.items():
        gt = gt_verb_hits(gt_captions[image_id], lex)
        if any(lex.verb_index(v) in gt for v in verbs):
            hits += 1
    return hits / len(predictions)


def subset_s1(records, lex: Lexicon) -> set[str]:
    """Images whose caption union has >= 2 distinct noun categories and
    >= 1 lexicon verb."""
    out = set()
    for rec in records:
        if (
            len(gt_noun_hits(rec.captions, lex)) >= 2
            and gt_verb_hits(rec.captions, lex)
        ):
            out.add(rec.image_id)
    return out


def subset_s2(
    records,
    top2: Mapping[str, tuple[int, int]],
    lex: Lexicon,
) -> set[str]:
    """S1 images whose detected top-2 categories both appear in the ground
    truth nouns.  Always a subset of S1."""
    s1 = subset_s1(records, lex)
    out = set()
    for rec in records:
        if rec.image_id not in s1 or rec.image_id not in top2:
            continue
        nouns = gt_noun_hits(rec.captions, lex)
        c1, c2 = top2[rec.image_id]
        if c1 in nouns and c2 in nouns:
            out.add(rec.image_id)
    return out


@dataclass
class EvalReport:
    """Metric bundle mirroring the caption-quality table, the per-verb
    precision table, and the scenario-accuracy table."""

    subset: str
    images_evaluated: int
    images_skipped: int
    bleu: dict[str, float | None] = field(default_factory=dict)
    cider: float | None = None
    verb_precision: dict[str, float] = field(default_factory=dict)
    scenario_accuracy: dict[str, float | None] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "subset": self.subset,
                "images_evaluated": self.images_evaluated,
                "images_skipped": self.images_skipped,
                "bleu": self.bleu,
                "cider": self.cider,
                "verb_precision": self.verb_precision,
                "scenario_accuracy": self.scenario_accuracy,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        obj = json.loads(text)
        return cls(
            obj["subset"],
            obj["images_evaluated"],
            obj["images_skipped"],
            obj["bleu"],
            obj["cider"],
            obj["verb_precision"],
            obj["scenario_accuracy"],
        )

    def format_table(self) -> str:
        lines = [
            f"subset: {self.subset}   images: {self.images_evaluated}"
            f"   skipped: {self.images_skipped}",
            "",
        ]
        if self.bleu:
            header = "".join(f"{k.upper():>10}" for k in sorted(self.bleu)) + f"{'CIDEr':>10}"
            row = "".join(
                f"{(self.bleu[k] if self.bleu[k] is not None else float('nan')):>10.4f}"
                for k in sorted(self.bleu)
            )
            row += f"{(self.cider if self.cider is not None else float('nan')):>10.4f}"
            lines += [header, row, ""]
        if self.verb_precision:
            lines.append(f"{'Verb':<12}{'Precision':>10}")
            for v in sorted(self.verb_precision):
                lines.append(f"{v:<12}{self.verb_precision[v]:>10.4f}")
            lines.append("")
        if self.scenario_accuracy:
            lines.append(f"{'Scenario':<12}{'Accuracy':>10}")
            for s, acc in self.scenario_accuracy.items():
                val = f"{acc:>10.4f}" if acc is not None else f"{'n/a':>10}"
                lines.append(f"{s:<12}{val}")
        return "\n".join(lines) + "\n"
