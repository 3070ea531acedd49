from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2tforge.tokenizer import (
    EOS,
    MIN_VOCAB_SIZE,
    PH0,
    PH1,
    TokenizerError,
    Vocab,
    train_vocab,
)


def pair_counts(corpus):
    # independent frequency oracle: count adjacent byte pairs per run
    counts = Counter()
    for line in corpus:
        for run in line.split(" "):
            data = run.encode("utf-8")
            for a, b in zip(data, data[1:]):
                counts[(bytes([a]), bytes([b]))] += 1
    return counts


def test_first_merge_matches_frequency_oracle():
    corpus = ["aaab aaab"]
    oracle = pair_counts(corpus)
    assert oracle[(b"a", b"a")] == 4
    assert max(oracle.values()) == 4
    vocab = train_vocab(corpus, MIN_VOCAB_SIZE + 1)
    left, right, new = vocab.merges[0]
    assert vocab.pieces[left] == b"a"
    assert vocab.pieces[right] == b"a"
    assert vocab.pieces[new] == b"aa"


def test_byte_level_vocab_has_no_merges():
    vocab = train_vocab(["hello world"], MIN_VOCAB_SIZE)
    assert vocab.merges == []
    assert vocab.size == MIN_VOCAB_SIZE


def test_training_is_deterministic():
    corpus = ["the cat sat on the mat", "the dog sat on the log"] * 3
    a = train_vocab(corpus, MIN_VOCAB_SIZE + 40)
    b = train_vocab(corpus, MIN_VOCAB_SIZE + 40)
    assert a.merges == b.merges
    assert a == b


def test_empty_corpus_rejected():
    with pytest.raises(TokenizerError):
        train_vocab([], MIN_VOCAB_SIZE + 1)


def test_too_small_size_rejected():
    with pytest.raises(TokenizerError):
        train_vocab(["x"], MIN_VOCAB_SIZE - 1)


@pytest.fixture(scope="module")
def vocab():
    corpus = [
        "OK! I've booked 4 tickets for Century 16 at 8:00 pm.",
        "It is currently 25 degrees in the Cayman Islands.",
        "Okay, setting a timer for 5 minutes.",
    ] * 4
    return train_vocab(corpus, MIN_VOCAB_SIZE + 64)


def test_empty_string_round_trip(vocab):
    assert vocab.encode("") == []
    assert vocab.decode([]) == ""


def test_round_trip_simple(vocab):
    ids = vocab.encode("Century 16")
    assert vocab.decode(ids) == "Century 16"


def test_content_never_uses_reserved_ids(vocab):
    text = "PAD DELAY $0 $1 <eol> booked 4 tickets"
    assert all(i >= 10 for i in vocab.encode(text))


def test_placeholder_symbols_opt_in(vocab):
    ids = vocab.encode("in $0 and $1.", use_placeholder_symbols=True)
    assert PH0 in ids and PH1 in ids
    assert vocab.decode(ids) == "in $0 and $1."


def test_decode_unknown_id(vocab):
    with pytest.raises(TokenizerError):
        vocab.decode([vocab.size + 5])


def test_decode_skips_control_ids(vocab):
    ids = [EOS] + vocab.encode("hi") + [EOS]
    assert vocab.decode(ids) == "hi"


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=80))
def test_round_trip_arbitrary_text(vocab, text):
    assert vocab.decode(vocab.encode(text)) == text


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=60))
def test_segmentation_is_deterministic(vocab, text):
    assert vocab.encode(text) == vocab.encode(text)


def test_save_load_round_trip(vocab, tmp_path):
    path = tmp_path / "toy.vocab"
    vocab.save(path)
    assert Vocab.load(path) == vocab


def test_loaded_vocab_encodes_identically(vocab, tmp_path):
    path = tmp_path / "toy.vocab"
    vocab.save(path)
    loaded = Vocab.load(path)
    for text in ["Century 16 at 8:00 pm.", "tab\tand\nnewline", "ünïcödé ✓"]:
        assert loaded.encode(text) == vocab.encode(text)
