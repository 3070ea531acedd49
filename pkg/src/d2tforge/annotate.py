"""Entity span markup and placeholder copying.

Translation inputs gain inline entity tags, ``<location>Palo Alto</location>``,
found by exact match against the structured data's entity argument
values (longest match first, then leftmost; no fuzzy matching). When a
localized name is available it rides along in the tag,
``<location, Frankreich>France</location>``, and any localized payload
that appears verbatim in the target text is replaced by a ``$k``
placeholder before training and substituted back after inference.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .schema import Schema, StructuredExample

PLACEHOLDER_BUDGET = 4  # $0..$3, matching the reserved tokenizer symbols

_TAG_RE = re.compile(r"<(/?)([A-Za-z_][A-Za-z0-9_]*)(?:,\s*([^<>]*?))?>")
_PLACEHOLDER_RE = re.compile(r"\$(\d)")


class AnnotateError(ValueError):
    pass


class PlaceholderBudgetError(AnnotateError):
    pass


class UnboundPlaceholderError(AnnotateError):
    pass


@dataclass(frozen=True)
class MarkupSpan:
    start: int
    end: int
    entity_type: str
    localized: str | None = None
    arg: str | None = None


@dataclass(frozen=True)
class SpanMarkup:
    """Base text plus non-overlapping entity spans."""

    text: str
    spans: tuple[MarkupSpan, ...]

    def __post_init__(self):
        last = 0
        for s in self.spans:
            if s.start < last or s.end > len(self.text) or s.start > s.end:
                raise AnnotateError(f"span {s} overlaps or exceeds text bounds")
            last = s.end

    def tagged(self) -> str:
        out = []
        cursor = 0
        for s in self.spans:
            out.append(self.text[cursor : s.start])
            label = s.entity_type if s.localized is None else f"{s.entity_type}, {s.localized}"
            out.append(f"<{label}>{self.text[s.start : s.end]}</{s.entity_type}>")
            cursor = s.end
        out.append(self.text[cursor:])
        return "".join(out)

    @classmethod
    def parse(cls, tagged: str) -> "SpanMarkup":
        text = []
        spans = []
        pos = 0
        length = 0
        open_tag: tuple[str, str | None, int] | None = None
        for m in _TAG_RE.finditer(tagged):
            chunk = tagged[pos : m.start()]
            text.append(chunk)
            length += len(chunk)
            closing, name, payload = m.group(1), m.group(2), m.group(3)
            if not closing:
                if open_tag is not None:
                    raise AnnotateError(f"nested tag <{name}> at offset {m.start()}")
                open_tag = (name, payload, length)
            else:
                if open_tag is None or open_tag[0] != name:
                    raise AnnotateError(f"unbalanced closing tag </{name}> at offset {m.start()}")
                spans.append(
                    MarkupSpan(start=open_tag[2], end=length, entity_type=name, localized=open_tag[1])
                )
                open_tag = None
            pos = m.end()
        if open_tag is not None:
            raise AnnotateError(f"unclosed tag <{open_tag[0]}>")
        text.append(tagged[pos:])
        return cls(text="".join(text), spans=tuple(spans))


def mark_entity_spans(english: str, example: StructuredExample, schema: Schema) -> SpanMarkup:
    """Tag every maximal exact occurrence of an entity argument's value.

    Longest value first, then leftmost; later candidates never overlap an
    already claimed region. Text that already carries tags is rejected.
    """
    if _TAG_RE.search(english):
        raise AnnotateError("text already contains entity tags")
    candidates = []
    for name, value in example.values.items():
        spec = schema.args_by_name.get(name)
        if spec is not None and spec.annotation == "ENTITY" and value:
            candidates.append((value, spec.entity_type, name))
    candidates.sort(key=lambda c: (-len(c[0]), c[0]))
    claimed: list[MarkupSpan] = []

    def overlaps(start, end):
        return any(s.start < end and start < s.end for s in claimed)

    for value, entity_type, arg in candidates:
        offset = 0
        while True:
            found = english.find(value, offset)
            if found < 0:
                break
            if not overlaps(found, found + len(value)):
                claimed.append(MarkupSpan(found, found + len(value), entity_type, arg=arg))
            offset = found + len(value)
    claimed.sort(key=lambda s: s.start)
    return SpanMarkup(text=english, spans=tuple(claimed))


def inject_localized(markup: SpanMarkup, example: StructuredExample) -> SpanMarkup:
    """Attach localized payloads to spans whose argument has one."""
    spans = []
    for s in markup.spans:
        arg = s.arg
        if arg is None:
            # recover the argument by exact value match
            covered = markup.text[s.start : s.end]
            arg = next((n for n, v in example.values.items() if v == covered), None)
        localized = example.localized_values.get(arg) if arg else None
        spans.append(replace(s, localized=localized) if localized else s)
    return SpanMarkup(text=markup.text, spans=tuple(spans))


def to_placeholders(target_text: str, markup: SpanMarkup) -> tuple[str, dict[str, str]]:
    """Replace verbatim localized payloads in the target with $k tokens.

    Placeholder indices follow first-occurrence order in the target; all
    occurrences of one payload share the same index. Payloads that do
    not appear verbatim are left for the model to generate.
    """
    if _PLACEHOLDER_RE.search(target_text):
        raise AnnotateError("target text already contains placeholder tokens")
    payloads = []
    for s in markup.spans:
        if s.localized and s.localized not in payloads:
            payloads.append(s.localized)
    # claim regions longest payload first so substrings cannot corrupt matches
    regions: list[tuple[int, int, str]] = []

    def overlaps(start, end):
        return any(a < end and start < b for a, b, _ in regions)

    for payload in sorted(payloads, key=len, reverse=True):
        offset = 0
        while True:
            found = target_text.find(payload, offset)
            if found < 0:
                break
            if not overlaps(found, found + len(payload)):
                regions.append((found, found + len(payload), payload))
            offset = found + 1
    regions.sort()
    order: list[str] = []
    for _, _, payload in regions:
        if payload not in order:
            order.append(payload)
    if len(order) > PLACEHOLDER_BUDGET:
        raise PlaceholderBudgetError(
            f"{len(order)} distinct verbatim payloads exceed the budget of {PLACEHOLDER_BUDGET}"
        )
    token_for = {payload: f"${k}" for k, payload in enumerate(order)}
    out = []
    cursor = 0
    for start, end, payload in regions:
        out.append(target_text[cursor:start])
        out.append(token_for[payload])
        cursor = end
    out.append(target_text[cursor:])
    table = {token: payload for payload, token in token_for.items()}
    return "".join(out), table


def from_placeholders(output: str, table: dict[str, str]) -> str:
    """Substitute $k tokens back; unbound placeholders are an error."""

    def subst(m: re.Match) -> str:
        token = m.group(0)
        if int(m.group(1)) >= PLACEHOLDER_BUDGET:
            return token  # not a placeholder token, leave literal text alone
        if token not in table:
            raise UnboundPlaceholderError(f"output contains {token} with no substitution entry")
        return table[token]

    return _PLACEHOLDER_RE.sub(subst, output)
