"""Sentence quality scoring and filtering for Web-mined corpora.

A sentence is scored by the log odds that it comes from a hand-picked
in-domain sentence set rather than the corpus as a whole, summing
per-occurrence log-odds contributions of its unigram and bigram
features. Smoothed probabilities are clamped away from 0 and 1 so every
log term is finite. Filtering keeps sentences at or above a threshold
(default 0, so anything with a negative score is discarded).

Tokenization is deliberately simple and fully specified: lowercase,
split on Unicode whitespace, strip leading and trailing punctuation
from each token.
"""

from __future__ import annotations

import json
import logging
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 20


class CorpusQualityError(ValueError):
    pass


class TranslationError(RuntimeError):
    """A translator failed on one sentence."""


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(sentence: str) -> list[str]:
    tokens = []
    for raw in sentence.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if end > start:
            tokens.append(raw[start:end])
    return tokens


def sentence_features(sentence: str) -> list[tuple]:
    """Unigram and bigram features, one entry per occurrence."""
    tokens = tokenize(sentence)
    features: list[tuple] = [(t,) for t in tokens]
    features.extend(zip(tokens, tokens[1:]))
    return features


@dataclass
class NgramStats:
    unigram_counts: Counter = field(default_factory=Counter)
    bigram_counts: Counter = field(default_factory=Counter)
    unigram_total: int = 0
    bigram_total: int = 0

    def add(self, sentence: str) -> None:
        tokens = tokenize(sentence)
        for t in tokens:
            self.unigram_counts[(t,)] += 1
        for b in zip(tokens, tokens[1:]):
            self.bigram_counts[b] += 1
        self.unigram_total += len(tokens)
        self.bigram_total += max(len(tokens) - 1, 0)

    def count(self, feature: tuple) -> int:
        if len(feature) == 1:
            return self.unigram_counts[feature]
        return self.bigram_counts[feature]


class QualityModel:
    """Smoothed unigram/bigram probabilities for the in-domain set and corpus."""

    def __init__(self, stats_D: NgramStats, stats_C: NgramStats, alpha: float = 0.5, epsilon: float = 1e-9):
        self.stats_D = stats_D
        self.stats_C = stats_C
        self.alpha = alpha
        self.epsilon = epsilon
        # vocabulary is the union over both streams, per feature order
        self.unigram_vocab = len(set(stats_D.unigram_counts) | set(stats_C.unigram_counts))
        self.bigram_vocab = len(set(stats_D.bigram_counts) | set(stats_C.bigram_counts))

    def _prob(self, stats: NgramStats, feature: tuple) -> float:
        if len(feature) == 1:
            total, vocab = stats.unigram_total, self.unigram_vocab
        else:
            total, vocab = stats.bigram_total, self.bigram_vocab
        denom = total + self.alpha * vocab
        p = (stats.count(feature) + self.alpha) / denom if denom > 0 else 0.0
        return min(max(p, self.epsilon), 1.0 - self.epsilon)

    def prob_in_domain(self, feature: tuple) -> float:
        return self._prob(self.stats_D, feature)

    def prob_corpus(self, feature: tuple) -> float:
        return self._prob(self.stats_C, feature)


def fit(in_domain, corpus, alpha: float = 0.5, epsilon: float = 1e-9) -> QualityModel:
    """Count unigram/bigram features over both sentence streams."""
    stats_D, stats_C = NgramStats(), NgramStats()
    n_d = n_c = 0
    for s in in_domain:
        stats_D.add(s)
        n_d += 1
    for s in corpus:
        stats_C.add(s)
        n_c += 1
    if n_d == 0 or n_c == 0:
        raise CorpusQualityError("both sentence streams must be non-empty")
    return QualityModel(stats_D, stats_C, alpha=alpha, epsilon=epsilon)


def score(model: QualityModel, sentence: str) -> float:
    """Log odds that the sentence comes from the in-domain set.

    Repeated features contribute once per occurrence. An empty sentence
    scores 0.
    """
    total = 0.0
    for f in sentence_features(sentence):
        p_d = model.prob_in_domain(f)
        p_c = model.prob_corpus(f)
        total += math.log(p_d / (1.0 - p_d) * (1.0 - p_c) / p_c)
    return total


@dataclass
class FilterReport:
    threshold: float
    n_kept: int
    n_dropped: int
    bin_edges: list[float]
    bin_counts: list[int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "threshold": self.threshold,
                "kept": self.n_kept,
                "dropped": self.n_dropped,
                "histogram": {"bin_edges": self.bin_edges, "counts": self.bin_counts},
            }
        )


def _histogram(scores: list[float]) -> tuple[list[float], list[int]]:
    if not scores:
        return [], []
    lo, hi = min(scores), max(scores)
    if not math.isfinite(lo) or not math.isfinite(hi):
        finite = [s for s in scores if math.isfinite(s)]
        lo, hi = (min(finite), max(finite)) if finite else (0.0, 0.0)
    if hi <= lo:
        hi = lo + 1.0
    width = (hi - lo) / HISTOGRAM_BINS
    counts = [0] * HISTOGRAM_BINS
    for s in scores:
        idx = min(int((s - lo) / width), HISTOGRAM_BINS - 1) if math.isfinite(s) else (0 if s < lo else HISTOGRAM_BINS - 1)
        counts[max(idx, 0)] += 1
    edges = [lo + i * width for i in range(HISTOGRAM_BINS + 1)]
    return edges, counts


def filter_sentences(model: QualityModel, sentences, threshold: float = 0.0):
    """Keep sentences scoring at or above the threshold.

    Returns (kept, report). The boundary is inclusive: a score equal to
    the threshold is kept.
    """
    kept, scores = [], []
    for s in sentences:
        value = score(model, s)
        scores.append(value)
        if value >= threshold:
            kept.append(s)
    edges, counts = _histogram(scores)
    report = FilterReport(
        threshold=threshold,
        n_kept=len(kept),
        n_dropped=len(scores) - len(kept),
        bin_edges=edges,
        bin_counts=counts,
    )
    return kept, report


# -- translators -------------------------------------------------------------


class Translator:
    """Batch string-in/string-out translation contract."""

    def translate(self, sentence: str) -> str:
        raise NotImplementedError

    def translate_batch(self, sentences: list[str]) -> list[str]:
        return [self.translate(s) for s in sentences]


class IdentityTranslator(Translator):
    def translate(self, sentence: str) -> str:
        return sentence


class DictionaryTranslator(Translator):
    """Word-by-word lookup. Unknown words either pass through or fail."""

    def __init__(self, mapping: dict[str, str], unknown: str = "keep"):
        if unknown not in ("keep", "error"):
            raise ValueError(f"unknown policy {unknown!r}")
        self.mapping = mapping
        self.unknown = unknown

    def translate(self, sentence: str) -> str:
        out = []
        for word in sentence.split():
            if word in self.mapping:
                out.append(self.mapping[word])
            elif self.unknown == "keep":
                out.append(word)
            else:
                raise TranslationError(f"no dictionary entry for {word!r}")
        return " ".join(out)


def backtranslate_pairs(target_sentences, translator: Translator):
    """Pair each target sentence with its translation as the English source.

    Sentences the translator fails on are skipped and logged; pair order
    follows input order. Returns (pairs, n_skipped) where each pair is
    (english_source, target_sentence).
    """
    pairs = []
    n_skipped = 0
    for sentence in target_sentences:
        try:
            english = translator.translate(sentence)
        except TranslationError as err:
            logger.warning("skipping sentence after translation failure: %s", err)
            n_skipped += 1
            continue
        pairs.append((english, sentence))
    return pairs, n_skipped
