"""Structured data as a four-column integer table, plus key/value projection.

Each example becomes a table with one row per value symbol or enum
value. Columns: symbol-or-enum index, argument index, argument type
index, and the symbol's position within its argument. String and number
values are subword-encoded and terminated by an end-of-value row; enum
values occupy a single row. Argument names never appear: the argument
index carries that information. Arguments are laid out in schema index
order, so the encoding is invariant to the ordering of the input value
map.

For attention, every row's four embeddings (width E each) are
concatenated to width 4E and projected to key and value vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import Schema, StructuredExample
from .tokenizer import EOL, Vocab

DEFAULT_MAX_ROWS = 400

COL_SYMBOL, COL_ARG, COL_TYPE, COL_POSITION = range(4)


class EncodingError(ValueError):
    pass


class TableOverflowError(EncodingError):
    """Encoded example exceeds the table capacity."""


@dataclass(frozen=True)
class DataTable:
    """Row-major table of (symbol, arg_index, type_index, position)."""

    rows: tuple[tuple[int, int, int, int], ...]
    max_rows: int = DEFAULT_MAX_ROWS

    def __len__(self) -> int:
        return len(self.rows)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded index matrix [max_rows, 4] plus validity mask [max_rows]."""
        idx = np.zeros((self.max_rows, 4), dtype=np.int64)
        mask = np.zeros(self.max_rows, dtype=bool)
        if self.rows:
            idx[: len(self.rows)] = np.asarray(self.rows, dtype=np.int64)
            mask[: len(self.rows)] = True
        return idx, mask

    def debug_dump(self, schema: Schema, vocab: Vocab) -> str:
        """TSV of the four columns with decoded piece annotations."""
        by_index = {a.arg_index: a for a in schema.args}
        enum_by_index = {v: k for k, v in schema.enum_value_index.items()}
        lines = []
        for sym, arg, typ, pos in self.rows:
            spec = by_index[arg]
            if spec.kind == "ENUM":
                annot = enum_by_index[sym][1]
            elif sym == EOL:
                annot = "<eol>"
            else:
                annot = vocab.piece_str(sym)
            lines.append(f"{sym}\t{arg}\t{typ}\t{pos}\t{annot}\t{spec.name}")
        return "\n".join(lines)


def encode_table(
    example: StructuredExample,
    schema: Schema,
    vocab: Vocab,
    max_rows: int = DEFAULT_MAX_ROWS,
) -> DataTable:
    """Encode one example. Arguments follow schema order regardless of the
    value map's ordering. Overflow is a hard error, never truncation."""
    rows: list[tuple[int, int, int, int]] = []
    for spec in schema.args:
        if spec.name not in example.values:
            continue
        value = example.values[spec.name]
        if spec.kind == "ENUM":
            key = (spec.name, value)
            if key not in schema.enum_value_index:
                raise EncodingError(f"value {value!r} not a declared enum value of {spec.name!r}")
            rows.append((schema.enum_value_index[key], spec.arg_index, spec.type_index, 0))
        else:
            pieces = vocab.encode(value)
            for position, piece in enumerate(pieces):
                rows.append((piece, spec.arg_index, spec.type_index, position))
            # end-of-value marker carries the next position
            rows.append((EOL, spec.arg_index, spec.type_index, len(pieces)))
        if len(rows) > max_rows:
            raise TableOverflowError(
                f"example needs {len(rows)}+ rows, capacity is {max_rows}"
            )
    return DataTable(rows=tuple(rows), max_rows=max_rows)


def batch_tables(tables: list[DataTable]) -> tuple[np.ndarray, np.ndarray]:
    """Stack tables into [B, max_rows, 4] indices and a [B, max_rows] mask."""
    idx = np.stack([t.to_arrays()[0] for t in tables])
    mask = np.stack([t.to_arrays()[1] for t in tables])
    return idx, mask


@dataclass
class EncoderParams:
    """Embedding tables for the four columns plus key/value projections."""

    emb_symbol: np.ndarray  # [n_symbols, E]
    emb_arg: np.ndarray  # [n_arg_slots, E]
    emb_type: np.ndarray  # [n_types, E]
    emb_position: np.ndarray  # [n_positions, E]
    w_key: np.ndarray  # [4E, W_k]
    b_key: np.ndarray  # [W_k]
    w_value: np.ndarray  # [4E, W_v]
    b_value: np.ndarray  # [W_v]

    @property
    def width(self) -> int:
        return self.emb_symbol.shape[1]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        n_symbols: int,
        n_arg_slots: int,
        n_types: int,
        n_positions: int,
        width: int = 64,
        key_width: int = 64,
        value_width: int = 64,
        dtype=np.float64,
    ) -> "EncoderParams":
        def table(n, w):
            return (rng.standard_normal((n, w)) * 0.1).astype(dtype)

        def dense(n_in, n_out):
            scale = 1.0 / np.sqrt(n_in)
            return (rng.standard_normal((n_in, n_out)) * scale).astype(dtype)

        return cls(
            emb_symbol=table(n_symbols, width),
            emb_arg=table(n_arg_slots, width),
            emb_type=table(n_types, width),
            emb_position=table(n_positions, width),
            w_key=dense(4 * width, key_width),
            b_key=np.zeros(key_width, dtype=dtype),
            w_value=dense(4 * width, value_width),
            b_value=np.zeros(value_width, dtype=dtype),
        )

    @classmethod
    def for_schema(
        cls,
        rng: np.random.Generator,
        schema: Schema,
        vocab: Vocab,
        n_positions: int = 64,
        **kw,
    ) -> "EncoderParams":
        return cls.init(
            rng,
            n_symbols=max(vocab.size, schema.n_enum_values),
            n_arg_slots=schema.n_slots,
            n_types=len(schema.type_table),
            n_positions=n_positions,
            **kw,
        )


def project(
    idx: np.ndarray, mask: np.ndarray, params: EncoderParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Embed and project a table batch to attention keys and values.

    Returns (keys [B,S,W_k], values [B,S,W_v], mask, concat [B,S,4E]);
    the concatenated embeddings are kept for the backward pass. Masked
    rows still produce numbers, but attention gives them zero weight.
    """
    tables = (params.emb_symbol, params.emb_arg, params.emb_type, params.emb_position)
    for c, table in enumerate(tables):
        column = idx[..., c]
        if column.min() < 0 or column.max() >= table.shape[0]:
            raise EncodingError(
                f"column {c} index out of bounds: [{column.min()}, {column.max()}] "
                f"vs table of {table.shape[0]}"
            )
    concat = np.concatenate([table[idx[..., c]] for c, table in enumerate(tables)], axis=-1)
    keys = concat @ params.w_key + params.b_key
    values = concat @ params.w_value + params.b_value
    return keys, values, mask, concat


def project_backward(
    idx: np.ndarray,
    concat: np.ndarray,
    params: EncoderParams,
    d_keys: np.ndarray,
    d_values: np.ndarray,
    grads: "EncoderParams",
) -> None:
    """Accumulate encoder gradients given key/value gradients."""
    flat_concat = concat.reshape(-1, concat.shape[-1])
    dk = d_keys.reshape(-1, d_keys.shape[-1])
    dv = d_values.reshape(-1, d_values.shape[-1])
    grads.w_key += flat_concat.T @ dk
    grads.b_key += dk.sum(axis=0)
    grads.w_value += flat_concat.T @ dv
    grads.b_value += dv.sum(axis=0)
    d_concat = dk @ params.w_key.T + dv @ params.w_value.T
    width = params.width
    tables = (grads.emb_symbol, grads.emb_arg, grads.emb_type, grads.emb_position)
    flat_idx = idx.reshape(-1, 4)
    for c, table in enumerate(tables):
        np.add.at(table, flat_idx[:, c], d_concat[:, c * width : (c + 1) * width])
