"""Toy English NLG fixture: templates with slots and variant alternation.

Pack files are UTF-8 text with one template per line:

    template <domain>.<intent>: <body>

A body mixes literal text, ``{arg}`` slots, and flat alternation groups
``(morning|evening)``. Alternatives inside a group may contain slots but
not nested groups. The characters ``{}()|`` are structural and cannot
appear in literal text. Rendering is pure: every slot expands to the
example's value string verbatim, and a span is recorded per slot.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from itertools import product

from .schema import Schema, StructuredExample


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Slot:
    arg: str


@dataclass(frozen=True)
class Group:
    alternatives: tuple[tuple, ...]  # tuples of Literal | Slot


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    arg: str
    entity_type: str | None = None

    @property
    def kind(self) -> str:
        return "ENTITY" if self.entity_type else "ARG"


@dataclass(frozen=True)
class AnnotatedText:
    text: str
    spans: tuple[Span, ...]


@dataclass(frozen=True)
class Template:
    domain: str
    intent: str
    parts: tuple  # Literal | Slot | Group
    source: str

    @property
    def n_variants(self) -> int:
        n = 1
        for p in self.parts:
            if isinstance(p, Group):
                n *= len(p.alternatives)
        return n

    def variant_parts(self, index: int):
        """Flatten one alternation choice. Leftmost group varies slowest."""
        groups = [p for p in self.parts if isinstance(p, Group)]
        choice = {}
        for g in reversed(groups):
            choice[id(g)] = index % len(g.alternatives)
            index //= len(g.alternatives)
        flat = []
        for p in self.parts:
            if isinstance(p, Group):
                flat.extend(p.alternatives[choice[id(p)]])
            else:
                flat.append(p)
        return flat


def _parse_atoms(body: str, start: int, stop_chars: str, lineno: int):
    """Parse a run of literals and slots until a structural character."""
    atoms = []
    i = start
    text = ""
    while i < len(body) and body[i] not in stop_chars:
        ch = body[i]
        if ch == "{":
            end = body.find("}", i)
            if end < 0:
                raise TemplateError(f"line {lineno}, col {i + 1}: unterminated slot")
            if text:
                atoms.append(Literal(text))
                text = ""
            name = body[i + 1 : end]
            if not name:
                raise TemplateError(f"line {lineno}, col {i + 1}: empty slot name")
            atoms.append(Slot(name))
            i = end + 1
        elif ch in "}|)":
            break
        else:
            text += ch
            i += 1
    if text:
        atoms.append(Literal(text))
    return atoms, i


def parse_template_body(body: str, lineno: int = 0) -> tuple:
    parts = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "(":
            alts = []
            i += 1
            while True:
                atoms, i = _parse_atoms(body, i, "|)(", lineno)
                if i >= len(body):
                    raise TemplateError(f"line {lineno}, col {i}: unterminated alternation group")
                if body[i] == "(":
                    raise TemplateError(f"line {lineno}, col {i + 1}: nested groups are not supported")
                alts.append(tuple(atoms))
                if body[i] == ")":
                    i += 1
                    break
                i += 1  # skip '|'
            if len(alts) < 2:
                raise TemplateError(f"line {lineno}: alternation group needs two or more alternatives")
            parts.append(Group(tuple(alts)))
        elif ch in ")|}":
            raise TemplateError(f"line {lineno}, col {i + 1}: unexpected {ch!r}")
        else:
            atoms, i = _parse_atoms(body, i, "(", lineno)
            parts.extend(atoms)
    return tuple(parts)


class TemplatePack:
    """Immutable set of templates keyed by (domain, intent)."""

    def __init__(self, templates: list[Template]):
        self.templates: dict[str, list[Template]] = {}
        for t in templates:
            self.templates.setdefault(f"{t.domain}.{t.intent}", []).append(t)
        canon = "\n".join(t.source for t in templates) + "\n"
        self.pack_hash = hashlib.sha256(canon.encode("utf-8")).hexdigest()

    @classmethod
    def parse(cls, document: str) -> "TemplatePack":
        templates = []
        for lineno, raw in enumerate(document.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not line.startswith("template "):
                raise TemplateError(f"line {lineno}: expected a template line")
            head, sep, body = line[len("template ") :].partition(":")
            if not sep or "." not in head:
                raise TemplateError(f"line {lineno}: expected 'template <domain>.<intent>: <body>'")
            domain, intent = head.strip().split(".", 1)
            body = body.lstrip()
            parts = parse_template_body(body, lineno)
            templates.append(
                Template(domain=domain, intent=intent, parts=parts, source=f"template {domain}.{intent}: {body}")
            )
        return cls(templates)

    @classmethod
    def load(cls, path) -> "TemplatePack":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for key in self.templates:
                for t in self.templates[key]:
                    f.write(t.source + "\n")

    def for_intent(self, domain: str, intent: str) -> list[Template]:
        key = f"{domain}.{intent}"
        if key not in self.templates:
            raise TemplateError(f"no template for {key}")
        return self.templates[key]

    def n_variants(self, domain: str, intent: str) -> int:
        return sum(t.n_variants for t in self.for_intent(domain, intent))


def _render_parts(parts, example: StructuredExample, schema: Schema) -> AnnotatedText:
    text = ""
    spans = []
    for p in parts:
        if isinstance(p, Literal):
            text += p.text
        else:
            if p.arg not in example.values:
                raise TemplateError(f"unbound slot {{{p.arg}}} for {example.domain}.{example.intent}")
            value = example.values[p.arg]
            spec = schema.args_by_name.get(p.arg)
            spans.append(
                Span(
                    start=len(text),
                    end=len(text) + len(value),
                    arg=p.arg,
                    entity_type=spec.entity_type if spec else None,
                )
            )
            text += value
    return AnnotatedText(text=text, spans=tuple(spans))


def render(example: StructuredExample, pack: TemplatePack, schema: Schema, variant_index: int = 0) -> AnnotatedText:
    """Render one variant. Variant indices run over all templates of the intent."""
    offset = variant_index
    for t in pack.for_intent(example.domain, example.intent):
        if offset < t.n_variants:
            return _render_parts(t.variant_parts(offset), example, schema)
        offset -= t.n_variants
    raise TemplateError(
        f"variant index {variant_index} out of range for {example.domain}.{example.intent}"
    )


def render_all_variants(example: StructuredExample, pack: TemplatePack, schema: Schema) -> list[AnnotatedText]:
    """Cartesian expansion of every alternation group, in deterministic order."""
    out = []
    for t in pack.for_intent(example.domain, example.intent):
        groups = [p for p in t.parts if isinstance(p, Group)]
        for combo in product(*(range(len(g.alternatives)) for g in groups)):
            flat = []
            it = iter(combo)
            for p in t.parts:
                if isinstance(p, Group):
                    flat.extend(p.alternatives[next(it)])
                else:
                    flat.append(p)
            out.append(_render_parts(flat, example, schema))
    return out
