"""Trainable byte-pair subword tokenizer with reserved control symbols.

The vocabulary is built from a byte-level base (ids 10..265 cover all 256
byte values) plus greedy highest-frequency pair merges, so every UTF-8
string round-trips losslessly. Ids 0..9 are reserved for control symbols
and are never produced when encoding ordinary text.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

# Reserved control symbol ids. PH0..PH3 are the copy placeholders $0..$3.
PAD, DELAY, BOS, EOS, EOL, SEP, PH0, PH1, PH2, PH3 = range(10)
RESERVED_NAMES = ["PAD", "DELAY", "BOS", "EOS", "EOL", "SEP", "$0", "$1", "$2", "$3"]
N_RESERVED = 10
N_BYTES = 256
MIN_VOCAB_SIZE = N_RESERVED + N_BYTES

PLACEHOLDER_IDS = {"$0": PH0, "$1": PH1, "$2": PH2, "$3": PH3}

# Runs of whitespace and non-whitespace are tokenized independently;
# merges never cross a run boundary.
_RUN_RE = re.compile(r"\s+|\S+")


class TokenizerError(ValueError):
    pass


def _escape(piece: bytes) -> str:
    return piece.decode("latin-1").encode("unicode_escape").decode("ascii")


def _unescape(text: str) -> bytes:
    return text.encode("ascii").decode("unicode_escape").encode("latin-1")


@dataclass
class Vocab:
    """Byte-pair vocabulary: piece table plus ordered merge rules.

    ``pieces`` maps content ids (>= N_RESERVED) to piece byte strings.
    ``merges`` is the ordered list of (left_id, right_id, new_id) rules.
    """

    pieces: dict[int, bytes]
    merges: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        # rank of each mergeable pair, in training order
        self._ranks = {(l, r): (rank, new) for rank, (l, r, new) in enumerate(self.merges)}

    @property
    def size(self) -> int:
        return N_RESERVED + len(self.pieces)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocab):
            return NotImplemented
        return self.pieces == other.pieces and self.merges == other.merges

    # -- encoding ----------------------------------------------------------

    def _encode_run(self, data: bytes) -> list[int]:
        ids = [N_RESERVED + b for b in data]
        while len(ids) > 1:
            best = None
            for pair in zip(ids, ids[1:]):
                rank = self._ranks.get(pair)
                if rank is not None and (best is None or rank[0] < best[0]):
                    best = rank
                    best_pair = pair
            if best is None:
                break
            new_id = best[1]
            out = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and (ids[i], ids[i + 1]) == best_pair:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        return ids

    def encode(self, text: str, use_placeholder_symbols: bool = False) -> list[int]:
        """Encode UTF-8 text to piece ids. Never emits reserved ids for content.

        With ``use_placeholder_symbols`` the literal substrings $0..$3 are
        mapped to their reserved placeholder ids instead of byte pieces.
        """
        ids: list[int] = []
        if use_placeholder_symbols:
            for part in re.split(r"(\$[0-3])", text):
                if part in PLACEHOLDER_IDS:
                    ids.append(PLACEHOLDER_IDS[part])
                elif part:
                    ids.extend(self.encode(part))
            return ids
        for run in _RUN_RE.findall(text):
            ids.extend(self._encode_run(run.encode("utf-8")))
        return ids

    def decode(self, ids: list[int]) -> str:
        """Decode piece ids back to text.

        Control ids decode to the empty string except placeholders, which
        decode to their literal $k spelling. Unknown ids are an error.
        """
        out = []
        for i in ids:
            if 0 <= i < N_RESERVED:
                if i >= PH0:
                    out.append(RESERVED_NAMES[i].encode("utf-8"))
                continue
            piece = self.pieces.get(i)
            if piece is None:
                raise TokenizerError(f"unknown piece id {i}")
            out.append(piece)
        return b"".join(out).decode("utf-8")

    def piece_str(self, i: int) -> str:
        """Human-readable spelling of one id, for debug dumps."""
        if 0 <= i < N_RESERVED:
            return f"<{RESERVED_NAMES[i]}>" if i < PH0 else RESERVED_NAMES[i]
        return self.pieces[i].decode("utf-8", errors="replace")

    # -- serialization -----------------------------------------------------

    def save(self, path) -> None:
        lines = ["d2tforge-vocab\tv1", f"size\t{self.size}"]
        for i, name in enumerate(RESERVED_NAMES):
            lines.append(f"reserved\t{name}\t{i}")
        for i in sorted(self.pieces):
            lines.append(f"piece\t{_escape(self.pieces[i])}\t{i}")
        for left, right, new in self.merges:
            lines.append(f"merge\t{left}\t{right}\t{new}")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        pieces: dict[int, bytes] = {}
        merges: list[tuple[int, int, int]] = []
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n").split("\t")
            if header[:2] != ["d2tforge-vocab", "v1"]:
                raise TokenizerError(f"not a vocab file: {path}")
            for line in f:
                fields = line.rstrip("\n").split("\t")
                if fields[0] == "piece":
                    pieces[int(fields[2])] = _unescape(fields[1])
                elif fields[0] == "merge":
                    merges.append((int(fields[1]), int(fields[2]), int(fields[3])))
        vocab = cls(pieces=pieces, merges=merges)
        for left, right, new in merges:
            if pieces.get(new) != pieces.get(left, b"") + pieces.get(right, b""):
                raise TokenizerError(f"inconsistent merge rule for id {new}")
        return vocab


def train_vocab(corpus, size: int) -> Vocab:
    """Learn a byte-pair vocabulary of ``size`` ids from an iterable of lines.

    Greedy highest-frequency merges; frequency ties break on the
    lexicographically smallest (left piece, right piece) byte strings so
    training is fully deterministic.
    """
    if size < MIN_VOCAB_SIZE:
        raise TokenizerError(f"size must be at least {MIN_VOCAB_SIZE}, got {size}")
    pieces = {N_RESERVED + b: bytes([b]) for b in range(N_BYTES)}
    seq_freqs: Counter = Counter()
    n_lines = 0
    for line in corpus:
        n_lines += 1
        for run in _RUN_RE.findall(line.rstrip("\n")):
            data = run.encode("utf-8")
            seq_freqs[tuple(N_RESERVED + b for b in data)] += 1
    if n_lines == 0:
        raise TokenizerError("empty training corpus")

    merges: list[tuple[int, int, int]] = []
    seqs = dict(seq_freqs)
    while MIN_VOCAB_SIZE + len(merges) < size:
        pair_freqs: Counter = Counter()
        for seq, freq in seqs.items():
            for pair in zip(seq, seq[1:]):
                pair_freqs[pair] += freq
        if not pair_freqs:
            break
        top = max(pair_freqs.values())
        left, right = min(
            (p for p, c in pair_freqs.items() if c == top),
            key=lambda p: (pieces[p[0]], pieces[p[1]]),
        )
        new_id = MIN_VOCAB_SIZE + len(merges)
        pieces[new_id] = pieces[left] + pieces[right]
        merges.append((left, right, new_id))
        new_seqs: dict[tuple, int] = {}
        for seq, freq in seqs.items():
            if len(seq) > 1:
                out = []
                i = 0
                while i < len(seq):
                    if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
                        out.append(new_id)
                        i += 2
                    else:
                        out.append(seq[i])
                        i += 1
                seq = tuple(out)
            new_seqs[seq] = new_seqs.get(seq, 0) + freq
        seqs = new_seqs
    return Vocab(pieces=pieces, merges=merges)
