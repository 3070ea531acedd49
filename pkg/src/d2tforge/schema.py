"""Argument schema, intents, and validated structured examples.

A schema file is line oriented UTF-8 text:

    # comment
    arg <name> <kind> <annotation> [enum v1,v2,...]
    pad <count>
    intent <domain>.<intent> <arg>[?],<arg>[?],...

Kinds are STRING, NUMBER, BOOLEAN, ENUM. Annotations are PLAIN, DATE,
TIME_OF_DAY, DURATION_SECONDS, CARDINAL, or ENTITY(<entity_type>).
BOOLEAN is desugared to a two-value enum at load time. ``pad`` reserves
unused argument index slots so a layout with gaps can be reproduced
exactly. A trailing ``?`` marks an intent argument as optional.

Argument and type indices are assigned deterministically by declaration
order. Every value, including numbers, is stored as a string; numbers are
kept as decimal strings with no normalization.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

KINDS = ("STRING", "NUMBER", "ENUM")
ANNOTATIONS = ("PLAIN", "DATE", "TIME_OF_DAY", "DURATION_SECONDS", "CARDINAL", "ENTITY")

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_NUMBER_RE = re.compile(r"^-?[0-9]+(\.[0-9]+)?$")
BOOLEAN_ENUM_VALUES = ("FALSE", "TRUE")


class SchemaError(ValueError):
    """Raised for schema documents that cannot be loaded."""


@dataclass(frozen=True)
class ArgumentSpec:
    name: str
    kind: str
    annotation: str
    entity_type: str | None = None
    enum_values: tuple[str, ...] = ()
    arg_index: int = 0
    type_index: int = 0


@dataclass(frozen=True)
class IntentArg:
    name: str
    required: bool = True


@dataclass(frozen=True)
class IntentSpec:
    domain: str
    intent: str
    args: tuple[IntentArg, ...]

    @property
    def key(self) -> str:
        return f"{self.domain}.{self.intent}"


@dataclass(frozen=True)
class StructuredExample:
    """One intent instance: a (domain, intent) reference plus argument values.

    ``values`` maps argument name to value string; dict comparison makes
    two examples with the same value set equal regardless of insertion
    order. ``localized_values`` carries target-language strings for
    STRING and ENTITY arguments.
    """

    domain: str
    intent: str
    values: dict[str, str] = field(default_factory=dict)
    localized_values: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {"intent": f"{self.domain}.{self.intent}", "values": self.values}
        if self.localized_values:
            obj["localized_values"] = self.localized_values
        return json.dumps(obj, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "StructuredExample":
        obj = json.loads(line)
        domain, intent = obj["intent"].split(".", 1)
        return cls(
            domain=domain,
            intent=intent,
            values=dict(obj["values"]),
            localized_values=dict(obj.get("localized_values", {})),
        )


class Schema:
    """Immutable container for argument and intent declarations.

    Also owns the global type table (one index per distinct kind and
    annotation combination) and the global enum value table used by the
    data table encoding.
    """

    def __init__(self, args: list[ArgumentSpec], intents: list[IntentSpec], n_slots: int):
        self.args = tuple(args)
        self.intents = tuple(intents)
        self.n_slots = n_slots
        self.args_by_name = {a.name: a for a in self.args}
        self.intents_by_key = {i.key: i for i in self.intents}
        self.type_table: list[tuple[str, str, str | None]] = []
        seen = {}
        for a in self.args:
            key = (a.kind, a.annotation, a.entity_type)
            if key not in seen:
                seen[key] = len(self.type_table)
                self.type_table.append(key)
        # global index for every declared enum value, by declaration order
        self.enum_value_index: dict[tuple[str, str], int] = {}
        for a in self.args:
            for v in a.enum_values:
                self.enum_value_index[(a.name, v)] = len(self.enum_value_index)

    @property
    def n_enum_values(self) -> int:
        return len(self.enum_value_index)

    def intent(self, domain: str, intent: str) -> IntentSpec:
        key = f"{domain}.{intent}"
        if key not in self.intents_by_key:
            raise SchemaError(f"unknown intent {key}")
        return self.intents_by_key[key]

    def canonical_text(self) -> str:
        """Canonical re-serialization; basis for the schema digest."""
        lines = []
        slot = 0
        for a in self.args:
            if a.arg_index > slot:
                lines.append(f"pad {a.arg_index - slot}")
            slot = a.arg_index + 1
            annot = a.annotation if a.entity_type is None else f"ENTITY({a.entity_type})"
            line = f"arg {a.name} {a.kind} {annot}"
            if a.enum_values:
                line += " enum " + ",".join(a.enum_values)
            lines.append(line)
        if self.n_slots > slot:
            lines.append(f"pad {self.n_slots - slot}")
        for it in self.intents:
            refs = ",".join(a.name + ("" if a.required else "?") for a in it.args)
            lines.append(f"intent {it.key} {refs}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def _parse_annotation(token: str) -> tuple[str, str | None]:
    m = re.match(r"^ENTITY\(([A-Za-z_][A-Za-z0-9_]*)\)$", token)
    if m:
        return "ENTITY", m.group(1)
    if token not in ANNOTATIONS or token == "ENTITY":
        raise SchemaError(f"unknown annotation {token!r}")
    return token, None


def load_schema(document: str) -> Schema:
    """Parse a schema document. Deterministic: indices follow declaration order."""
    args: list[ArgumentSpec] = []
    intents: list[IntentSpec] = []
    type_seen: dict[tuple, int] = {}
    slot = 0
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "pad":
            slot += int(fields[1])
        elif fields[0] == "arg":
            if len(fields) < 4:
                raise SchemaError(f"line {lineno}: arg needs a name, kind, and annotation")
            name, kind, annot_token = fields[1], fields[2], fields[3]
            if not _NAME_RE.match(name):
                raise SchemaError(f"line {lineno}: bad argument name {name!r}")
            if any(a.name == name for a in args):
                raise SchemaError(f"line {lineno}: duplicate argument name {name!r}")
            annotation, entity_type = _parse_annotation(annot_token)
            enum_values: tuple[str, ...] = ()
            if kind == "BOOLEAN":
                kind, enum_values = "ENUM", BOOLEAN_ENUM_VALUES
            elif kind == "ENUM":
                if len(fields) < 6 or fields[4] != "enum":
                    raise SchemaError(f"line {lineno}: ENUM argument {name!r} needs enum values")
                enum_values = tuple(fields[5].split(","))
                if not all(enum_values):
                    raise SchemaError(f"line {lineno}: empty enum value in {name!r}")
                if len(set(enum_values)) != len(enum_values):
                    raise SchemaError(f"line {lineno}: duplicate enum value in {name!r}")
            elif kind not in ("STRING", "NUMBER"):
                raise SchemaError(f"line {lineno}: unknown kind {kind!r}")
            tkey = (kind, annotation, entity_type)
            type_index = type_seen.setdefault(tkey, len(type_seen))
            args.append(
                ArgumentSpec(
                    name=name,
                    kind=kind,
                    annotation=annotation,
                    entity_type=entity_type,
                    enum_values=enum_values,
                    arg_index=slot,
                    type_index=type_index,
                )
            )
            slot += 1
        elif fields[0] == "intent":
            if len(fields) != 3 or "." not in fields[1]:
                raise SchemaError(f"line {lineno}: intent needs <domain>.<intent> and arguments")
            domain, intent = fields[1].split(".", 1)
            if any(i.domain == domain and i.intent == intent for i in intents):
                raise SchemaError(f"line {lineno}: duplicate intent {fields[1]}")
            refs = []
            for ref in fields[2].split(","):
                required = not ref.endswith("?")
                ref_name = ref.rstrip("?")
                if all(a.name != ref_name for a in args):
                    raise SchemaError(f"line {lineno}: intent references unknown argument {ref_name!r}")
                refs.append(IntentArg(name=ref_name, required=required))
            intents.append(IntentSpec(domain=domain, intent=intent, args=tuple(refs)))
        else:
            raise SchemaError(f"line {lineno}: unknown directive {fields[0]!r}")
    return Schema(args, intents, slot)


def validate(example: StructuredExample, schema: Schema) -> list[str]:
    """Check an example against the schema. Returns every violation found."""
    violations = []
    key = f"{example.domain}.{example.intent}"
    it = schema.intents_by_key.get(key)
    if it is None:
        return [f"unknown intent {key}"]
    intent_args = {a.name: a for a in it.args}
    for a in it.args:
        if a.required and a.name not in example.values:
            violations.append(f"missing required argument {a.name!r}")
    for name, value in example.values.items():
        if name not in intent_args:
            violations.append(f"{name!r} is not an argument of {key}")
            continue
        spec = schema.args_by_name[name]
        if not isinstance(value, str):
            violations.append(f"{name!r} value must be a string, got {type(value).__name__}")
        elif spec.kind == "NUMBER" and not _NUMBER_RE.match(value):
            violations.append(f"{name!r} expects a decimal string, got {value!r}")
        elif spec.kind == "ENUM" and value not in spec.enum_values:
            violations.append(f"{name!r} value {value!r} not in enum {spec.enum_values}")
    for name in example.localized_values:
        spec = schema.args_by_name.get(name)
        if name not in example.values:
            violations.append(f"localized value for absent argument {name!r}")
        elif spec is not None and spec.kind != "STRING":
            violations.append(f"localized value for non-string argument {name!r}")
    return violations


def load_examples(path) -> list[StructuredExample]:
    with open(path, encoding="utf-8") as f:
        return [StructuredExample.from_json(line) for line in f if line.strip()]


def save_examples(examples, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for e in examples:
            f.write(e.to_json() + "\n")
