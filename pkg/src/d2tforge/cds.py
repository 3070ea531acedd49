"""Contrastive data selection over noisy parallel corpora.

Every (source, target) pair is scored by the log-probability gain
between a base conditional scorer and an adapted scorer that was nudged
toward a small in-domain set. Pairs whose probability goes up the most
are the most in-domain-like, and selection policies turn the gains into
finetuning weights: a hard top-fraction cut or a soft sigmoid weight.

The bundled conditional scorer is a character n-gram language model over
the target conditioned on the source as prefix context. It is a toy
stand-in for a full translation model but exposes the same contract, so
scorers backed by the neural decoder plug in unchanged.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

SOURCE_SEP = "\x1d"  # joins source context and target
END = "\x1c"  # end-of-target symbol


class CdsError(ValueError):
    pass


class ConditionalScorer(Protocol):
    def logprob(self, source: str, target: str) -> float: ...


@dataclass
class ScoredPair:
    source: str
    target: str
    logp_base: float
    logp_adapted: float
    cds_score: float
    weight: float = 0.0


@dataclass(frozen=True)
class TopFraction:
    fraction: float

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise CdsError(f"fraction must be in (0, 1], got {self.fraction}")


@dataclass(frozen=True)
class Soft:
    temperature: float

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise CdsError(f"temperature must be positive, got {self.temperature}")


def cds_score_corpus(pairs, base: ConditionalScorer, adapted: ConditionalScorer):
    """Score pairs by adapted-minus-base log probability, preserving order.

    Returns (scored, rejected) where rejected entries are
    (source, target, diagnostic) for non-finite scorer output.
    """
    scored: list[ScoredPair] = []
    rejected: list[tuple[str, str, str]] = []
    for source, target in pairs:
        lp_base = base.logprob(source, target)
        lp_adapted = adapted.logprob(source, target)
        if not (math.isfinite(lp_base) and math.isfinite(lp_adapted)):
            rejected.append((source, target, f"non-finite logprob: base={lp_base}, adapted={lp_adapted}"))
            continue
        scored.append(
            ScoredPair(
                source=source,
                target=target,
                logp_base=lp_base,
                logp_adapted=lp_adapted,
                cds_score=lp_adapted - lp_base,
            )
        )
    return scored, rejected


def assign_weights(scored: list[ScoredPair], policy) -> list[ScoredPair]:
    """Fill in selection weights in place and return the list."""
    if isinstance(policy, TopFraction):
        k = math.ceil(policy.fraction * len(scored))
        # stable sort keeps input order among equal scores
        ranked = sorted(range(len(scored)), key=lambda i: -scored[i].cds_score)
        chosen = set(ranked[:k])
        for i, pair in enumerate(scored):
            pair.weight = 1.0 if i in chosen else 0.0
    elif isinstance(policy, Soft):
        for pair in scored:
            pair.weight = 1.0 / (1.0 + math.exp(-pair.cds_score / policy.temperature))
    else:
        raise CdsError(f"unknown policy {policy!r}")
    return scored


class NgramScorer:
    """Character n-gram conditional log-likelihood of target given source.

    The source is prepended as context (with a separator symbol), so for
    order > 1 the first target characters condition on the source tail.
    Add-alpha smoothing keeps every log term finite.
    """

    def __init__(self, order: int, alpha: float = 0.5):
        if order < 1:
            raise CdsError(f"order must be >= 1, got {order}")
        self.order = order
        self.alpha = alpha
        self.context_counts: Counter = Counter()
        self.transition_counts: Counter = Counter()
        self.charset: set[str] = set()
        self.n_pairs = 0.0

    def _events(self, source: str, target: str):
        seq = source + SOURCE_SEP + target + END
        start = len(source) + 1  # first target position
        for i in range(start, len(seq)):
            yield seq[max(0, i - self.order + 1) : i], seq[i]

    def add_pairs(self, pairs, count_weight: float = 1.0) -> None:
        for source, target in pairs:
            self.n_pairs += 1
            for context, ch in self._events(source, target):
                self.context_counts[context] += count_weight
                self.transition_counts[(context, ch)] += count_weight
                self.charset.add(ch)

    def logprob(self, source: str, target: str) -> float:
        vocab = len(self.charset) + 1  # reserve mass for unseen characters
        total = 0.0
        for context, ch in self._events(source, target):
            num = self.transition_counts[(context, ch)] + self.alpha
            den = self.context_counts[context] + self.alpha * vocab
            total += math.log(num / den)
        return total

    def finetuned(self, in_domain_pairs, count_weight: float = 10.0) -> "NgramScorer":
        """One elevated-weight counting pass over in-domain pairs.

        Stands in for a single finetuning step of a trainable scorer.
        """
        out = NgramScorer(self.order, self.alpha)
        out.context_counts = Counter(self.context_counts)
        out.transition_counts = Counter(self.transition_counts)
        out.charset = set(self.charset)
        out.n_pairs = self.n_pairs
        out.add_pairs(in_domain_pairs, count_weight=count_weight)
        return out


def build_ngram_scorer(pairs, order: int, alpha: float = 0.5) -> NgramScorer:
    scorer = NgramScorer(order, alpha=alpha)
    scorer.add_pairs(pairs)
    if scorer.n_pairs == 0:
        raise CdsError("empty training stream")
    return scorer


# -- scored corpus TSV --------------------------------------------------------


def save_scored(scored: list[ScoredPair], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in scored:
            f.write(
                f"{p.source}\t{p.target}\t{p.logp_base!r}\t{p.logp_adapted!r}\t{p.cds_score!r}\t{p.weight!r}\n"
            )


def load_scored(path) -> list[ScoredPair]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            source, target, lp_b, lp_a, score, weight = line.rstrip("\n").split("\t")
            out.append(
                ScoredPair(
                    source=source,
                    target=target,
                    logp_base=float(lp_b),
                    logp_adapted=float(lp_a),
                    cds_score=float(score),
                    weight=float(weight),
                )
            )
    return out
