"""Labeled training data for accuracy-error detection.

Positive examples are existing translation pairs, assumed accurate.
Negatives are manufactured two ways so they carry almost no label noise:

* trigram-context replacement: one non-function English token is swapped
  for a different token attested between the same left/right neighbors
  elsewhere in the corpus, keeping the sentence fluent but inaccurate;
* translation swap: two renderings of the same sentence form with
  different argument values exchange their translations.

Also provides the evaluation harness for accuracy classifiers and a
simple bilingual-lexicon-overlap baseline.
"""

from __future__ import annotations

import random
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .schema import StructuredExample

BOUNDARY = ""  # sentence-edge neighbor in trigram contexts

CORRECT = "CORRECT"
INCORRECT = "INCORRECT"

FUNCTION = "FUNCTION"
CONTENT = "CONTENT"
ENTITY = "ENTITY"


class AccuracyDataError(ValueError):
    pass


class NoReplacementFound(AccuracyDataError):
    """No eligible token position offers a trigram-context replacement."""


def load_function_words(language: str = "en") -> frozenset[str]:
    text = resources.files("d2tforge.data").joinpath(f"function_words_{language}.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def _norm(token: str) -> str:
    chars = list(token.lower())
    while chars and unicodedata.category(chars[0]).startswith("P"):
        chars.pop(0)
    while chars and unicodedata.category(chars[-1]).startswith("P"):
        chars.pop()
    return "".join(chars)


@dataclass(frozen=True)
class TaggedToken:
    text: str
    tag: str
    entity_type: str | None = None

    @property
    def tag_class(self) -> tuple:
        return (self.tag, self.entity_type)


class LexiconTagger:
    """Function words from a closed-class lexicon; entities by exact match.

    ``entity_phrases`` maps entity value strings (possibly multi-token)
    to their entity type, typically collected from structured data.
    """

    def __init__(self, function_words: frozenset[str] | None = None, entity_phrases: dict[str, str] | None = None):
        self.function_words = load_function_words() if function_words is None else function_words
        self.entity_phrases: dict[tuple[str, ...], str] = {}
        for phrase, etype in (entity_phrases or {}).items():
            key = tuple(_norm(t) for t in phrase.split())
            if key:
                self.entity_phrases[key] = etype

    def tag(self, tokens: list[str]) -> list[TaggedToken]:
        normed = [_norm(t) for t in tokens]
        out: list[TaggedToken | None] = [None] * len(tokens)
        # longest entity phrase match first
        for key in sorted(self.entity_phrases, key=len, reverse=True):
            etype = self.entity_phrases[key]
            n = len(key)
            for i in range(len(tokens) - n + 1):
                if tuple(normed[i : i + n]) == key and all(out[j] is None for j in range(i, i + n)):
                    for j in range(i, i + n):
                        out[j] = TaggedToken(tokens[j], ENTITY, etype)
        for i, token in enumerate(tokens):
            if out[i] is None:
                tag = FUNCTION if normed[i] in self.function_words or not normed[i] else CONTENT
                out[i] = TaggedToken(token, tag)
        return out  # type: ignore[return-value]


class TrigramIndex:
    """(left, right) neighbor context -> multiset of attested middle tokens."""

    def __init__(self):
        self.contexts: dict[tuple[str, str], Counter] = {}

    def add_sentence(self, tokens: list[str], tagged: list[TaggedToken]) -> None:
        padded = [BOUNDARY] + tokens + [BOUNDARY]
        for i, tok in enumerate(tokens):
            context = (padded[i], padded[i + 2])
            self.contexts.setdefault(context, Counter())[(tok, tagged[i].tag_class)] += 1

    def lookup(self, left: str, right: str) -> Counter:
        return self.contexts.get((left, right), Counter())

    def replacements(self, left: str, right: str, original: str, tag_class: tuple) -> list[str]:
        """Distinct alternatives sharing the context and tag class."""
        middle = self.lookup(left, right)
        return sorted({tok for (tok, cls) in middle if tok != original and cls == tag_class})


def build_trigram_index(corpus: list[str], tagger: LexiconTagger) -> TrigramIndex:
    index = TrigramIndex()
    for sentence in corpus:
        tokens = sentence.split()
        if tokens:
            index.add_sentence(tokens, tagger.tag(tokens))
    return index


@dataclass(frozen=True)
class LabeledPair:
    english: str
    translation: str
    label: str
    provenance: str = "ORIGINAL"

    def to_tsv(self) -> str:
        for text in (self.english, self.translation):
            if "\t" in text or "\n" in text:
                raise AccuracyDataError(f"tabs/newlines not representable in TSV: {text!r}")
        return f"{self.english}\t{self.translation}\t{self.label}\t{self.provenance}"

    @classmethod
    def from_tsv(cls, line: str) -> "LabeledPair":
        english, translation, label, provenance = line.rstrip("\n").split("\t")
        return cls(english, translation, label, provenance)


def corrupt_by_trigram(
    pair: tuple[str, str], index: TrigramIndex, tagger: LexiconTagger, rng: random.Random
) -> LabeledPair:
    """Swap one non-function token for a same-context, same-tag-class token.

    The translation is left unchanged, so the new pair is inaccurate by
    construction. Raises NoReplacementFound when no position is eligible.
    """
    english, translation = pair
    tokens = english.split()
    tagged = tagger.tag(tokens)
    padded = [BOUNDARY] + tokens + [BOUNDARY]
    eligible = []
    for i, tok in enumerate(tokens):
        if tagged[i].tag == FUNCTION:
            continue
        options = index.replacements(padded[i], padded[i + 2], tok, tagged[i].tag_class)
        if options:
            eligible.append((i, options))
    if not eligible:
        raise NoReplacementFound(f"no trigram-context replacement available in {english!r}")
    position, options = eligible[rng.randrange(len(eligible))]
    replacement = options[rng.randrange(len(options))]
    out = list(tokens)
    out[position] = replacement
    return LabeledPair(
        english=" ".join(out),
        translation=translation,
        label=INCORRECT,
        provenance=f"TRIGRAM_SWAP({position})",
    )


@dataclass(frozen=True)
class TranslationExample:
    """A rendered example with its translation, tagged by sentence form."""

    example: StructuredExample
    english: str
    translation: str
    variant_id: str
    ident: str = ""


def swap_translations(a: TranslationExample, b: TranslationExample) -> tuple[LabeledPair, LabeledPair]:
    """Exchange translations between two same-form, different-value examples."""
    if a.variant_id != b.variant_id:
        raise AccuracyDataError(f"cannot swap across sentence forms: {a.variant_id} vs {b.variant_id}")
    differing = [
        name
        for name in a.example.values
        if name in b.example.values and a.example.values[name] != b.example.values[name]
    ]
    visible = [
        name
        for name in differing
        if a.example.values[name] in a.translation and b.example.values[name] in b.translation
    ]
    if not visible:
        raise AccuracyDataError("examples must differ in a value rendered in both translations")
    return (
        LabeledPair(a.english, b.translation, INCORRECT, provenance=f"TRANSLATION_SWAP({b.ident})"),
        LabeledPair(b.english, a.translation, INCORRECT, provenance=f"TRANSLATION_SWAP({a.ident})"),
    )


@dataclass
class DatasetReport:
    n_correct: int = 0
    n_trigram: int = 0
    n_swap: int = 0
    skipped_trigram: int = 0
    skipped_swap: int = 0
    skips: list[str] = field(default_factory=list)


def make_dataset(
    positives: list[TranslationExample],
    index: TrigramIndex,
    tagger: LexiconTagger,
    mix: tuple[float, float],
    rng: random.Random,
) -> tuple[list[LabeledPair], DatasetReport]:
    """Emit every positive as CORRECT plus negatives per the mix fractions.

    ``mix`` is (trigram_fraction, swap_fraction). Skipped corruptions are
    recorded in the report rather than raised.
    """
    trigram_fraction, swap_fraction = mix
    if not (0.0 <= trigram_fraction <= 1.0 and 0.0 <= swap_fraction <= 1.0):
        raise AccuracyDataError(f"mix fractions must be in [0, 1], got {mix}")
    by_form: dict[str, list[int]] = {}
    for i, p in enumerate(positives):
        by_form.setdefault(p.variant_id, []).append(i)
    out: list[LabeledPair] = []
    report = DatasetReport()
    for i, p in enumerate(positives):
        out.append(LabeledPair(p.english, p.translation, CORRECT, provenance="ORIGINAL"))
        report.n_correct += 1
        if rng.random() < trigram_fraction:
            try:
                out.append(corrupt_by_trigram((p.english, p.translation), index, tagger, rng))
                report.n_trigram += 1
            except NoReplacementFound as err:
                report.skipped_trigram += 1
                report.skips.append(str(err))
        if rng.random() < swap_fraction:
            partners = [
                j
                for j in by_form[p.variant_id]
                if j != i and positives[j].example.values != p.example.values
            ]
            swapped = None
            if partners:
                j = partners[rng.randrange(len(partners))]
                try:
                    swapped = swap_translations(p, positives[j])[0]
                except AccuracyDataError:
                    swapped = None
            if swapped is None:
                report.skipped_swap += 1
                report.skips.append(f"no swap partner for {p.ident or p.english!r}")
            else:
                out.append(swapped)
                report.n_swap += 1
    return out, report


def save_pairs(pairs: list[LabeledPair], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in pairs:
            f.write(p.to_tsv() + "\n")


def load_pairs(path) -> list[LabeledPair]:
    with open(path, encoding="utf-8") as f:
        return [LabeledPair.from_tsv(line) for line in f if line.strip()]


# -- classifier harness --------------------------------------------------------


@dataclass
class SweepPoint:
    threshold: float
    recall_incorrect: float
    fpr_correct: float


@dataclass
class ClassifierMetrics:
    n_correct: int
    n_incorrect: int
    recall_incorrect: float
    fpr_correct: float
    sweep: list[SweepPoint]


def evaluate_classifier(classifier, labeled: list[LabeledPair], threshold: float = 0.5) -> ClassifierMetrics:
    """Score a (english, translation) -> probability-correct classifier.

    A prediction at or above the threshold counts as CORRECT; strictly
    below flags the pair as an accuracy error. Recall is measured over
    INCORRECT pairs, the false positive rate over CORRECT pairs. The
    sweep reports both at 11 thresholds from 0.0 to 1.0.
    """
    probs = []
    for pair in labeled:
        p = classifier(pair.english, pair.translation)
        if not 0.0 <= p <= 1.0:
            raise AccuracyDataError(f"classifier probability out of range: {p}")
        probs.append((p, pair.label))
    n_correct = sum(1 for _, label in probs if label == CORRECT)
    n_incorrect = len(probs) - n_correct

    def rates(t: float) -> tuple[float, float]:
        flagged_incorrect = sum(1 for p, label in probs if label == INCORRECT and p < t)
        flagged_correct = sum(1 for p, label in probs if label == CORRECT and p < t)
        recall = flagged_incorrect / n_incorrect if n_incorrect else 0.0
        fpr = flagged_correct / n_correct if n_correct else 0.0
        return recall, fpr

    recall, fpr = rates(threshold)
    sweep = []
    for i in range(11):
        t = i / 10.0
        r, f = rates(t)
        sweep.append(SweepPoint(threshold=t, recall_incorrect=r, fpr_correct=f))
    return ClassifierMetrics(
        n_correct=n_correct,
        n_incorrect=n_incorrect,
        recall_incorrect=recall,
        fpr_correct=fpr,
        sweep=sweep,
    )


class LexiconOverlapClassifier:
    """Baseline: fraction of English content words whose lexicon translation
    shows up in the candidate translation."""

    def __init__(self, bilingual_lexicon: dict[str, str], tagger: LexiconTagger | None = None):
        self.lexicon = {_norm(k): _norm(v) for k, v in bilingual_lexicon.items()}
        self.tagger = tagger or LexiconTagger()

    def __call__(self, english: str, translation: str) -> float:
        tokens = english.split()
        tagged = self.tagger.tag(tokens)
        translated_tokens = {_norm(t) for t in translation.split()}
        checked = matched = 0
        for t in tagged:
            key = _norm(t.text)
            if t.tag == FUNCTION or key not in self.lexicon:
                continue
            checked += 1
            if self.lexicon[key] in translated_tokens:
                matched += 1
        return matched / checked if checked else 1.0
