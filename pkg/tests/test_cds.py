import math
import random

import pytest

from d2tforge.cds import (
    CdsError,
    NgramScorer,
    ScoredPair,
    Soft,
    TopFraction,
    assign_weights,
    build_ngram_scorer,
    cds_score_corpus,
    load_scored,
    save_scored,
)


class FixedScorer:
    def __init__(self, table, offset=0.0):
        self.table = table
        self.offset = offset

    def logprob(self, source, target):
        return self.table[(source, target)] + self.offset


def test_cds_score_is_probability_gain():
    base = FixedScorer({("s", "t"): -10.0})
    adapted = FixedScorer({("s", "t"): -4.0})
    scored, rejected = cds_score_corpus([("s", "t")], base, adapted)
    assert rejected == []
    assert scored[0].cds_score == 6.0


def test_identical_scorers_give_zero_scores():
    table = {("a", "x"): -3.0, ("b", "y"): -7.5}
    base = FixedScorer(table)
    scored, _ = cds_score_corpus(list(table), base, base)
    assert all(p.cds_score == 0.0 for p in scored)


def test_constant_shift_cancels():
    table = {("a", "x"): -3.0, ("b", "y"): -7.5}
    plain = cds_score_corpus(list(table), FixedScorer(table), FixedScorer(table, offset=-1.0))[0]
    shifted = cds_score_corpus(list(table), FixedScorer(table, offset=5.0), FixedScorer(table, offset=4.0))[0]
    for p, q in zip(plain, shifted):
        assert p.cds_score == pytest.approx(q.cds_score, abs=1e-12)


def test_non_finite_scores_rejected_with_diagnostic():
    base = FixedScorer({("a", "x"): -1.0, ("b", "y"): -math.inf})
    adapted = FixedScorer({("a", "x"): -1.0, ("b", "y"): -2.0})
    scored, rejected = cds_score_corpus([("a", "x"), ("b", "y")], base, adapted)
    assert len(scored) == 1
    assert len(rejected) == 1
    assert "non-finite" in rejected[0][2]


def make_scored(scores):
    return [ScoredPair(source=f"s{i}", target=f"t{i}", logp_base=0, logp_adapted=s, cds_score=s) for i, s in enumerate(scores)]


def test_top_fraction_weights():
    scored = assign_weights(make_scored([3.0, 1.0, -2.0]), TopFraction(1 / 3))
    assert [p.weight for p in scored] == [1.0, 0.0, 0.0]


def test_top_fraction_ties_break_by_input_order():
    scored = assign_weights(make_scored([1.0, 1.0, 1.0]), TopFraction(1 / 3))
    assert [p.weight for p in scored] == [1.0, 0.0, 0.0]


def test_top_fraction_full_selects_everything():
    scored = assign_weights(make_scored([3.0, -1.0, 0.0]), TopFraction(1.0))
    assert all(p.weight == 1.0 for p in scored)


def test_soft_weight_at_zero_is_half():
    scored = assign_weights(make_scored([0.0]), Soft(temperature=2.0))
    assert scored[0].weight == pytest.approx(0.5)


def test_soft_weights_monotone_in_score():
    scores = [-5.0, -1.0, 0.0, 0.5, 2.0, 10.0]
    scored = assign_weights(make_scored(scores), Soft(temperature=1.0))
    weights = [p.weight for p in scored]
    assert weights == sorted(weights)


def test_bad_policies_rejected():
    with pytest.raises(CdsError):
        TopFraction(0.0)
    with pytest.raises(CdsError):
        TopFraction(1.2)
    with pytest.raises(CdsError):
        Soft(temperature=0.0)


def test_ngram_scorer_prefers_seen_targets():
    pairs = [("weather", "sunny in town today"), ("sports", "the team won again")]
    scorer = build_ngram_scorer(pairs, order=3)
    rng = random.Random(5)
    target = "sunny in town today"
    wins = 0
    for _ in range(100):
        perm = list(target)
        rng.shuffle(perm)
        if scorer.logprob("weather", target) >= scorer.logprob("weather", "".join(perm)):
            wins += 1
    assert wins >= 95


def test_order_one_ignores_source():
    scorer = build_ngram_scorer([("abc", "xyz"), ("def", "xzy")], order=1)
    assert scorer.logprob("abc", "xyz") == pytest.approx(scorer.logprob("completely different", "xyz"))


def test_ngram_scorer_deterministic():
    pairs = [("a", "hello world"), ("b", "hello there")]
    s1 = build_ngram_scorer(pairs, order=2)
    s2 = build_ngram_scorer(pairs, order=2)
    assert s1.logprob("a", "hello") == s2.logprob("a", "hello")


def test_logprob_nonpositive():
    scorer = build_ngram_scorer([("q", "some text here")], order=2)
    for target in ["some", "text", "zzz", "some text here"]:
        assert scorer.logprob("q", target) <= 0.0


def test_empty_training_stream_rejected():
    with pytest.raises(CdsError):
        build_ngram_scorer([], order=2)


def test_ranking_matches_exhaustive_oracle():
    rng = random.Random(11)
    vocab = "abcdefgh "
    pairs = [
        ("".join(rng.choice(vocab) for _ in range(6)), "".join(rng.choice(vocab) for _ in range(12)))
        for _ in range(200)
    ]
    base = build_ngram_scorer(pairs, order=2)
    adapted = base.finetuned(pairs[:10])
    scored, _ = cds_score_corpus(pairs, base, adapted)
    ours = sorted(range(len(pairs)), key=lambda i: -scored[i].cds_score)
    oracle = sorted(
        range(len(pairs)),
        key=lambda i: -(adapted.logprob(*pairs[i]) - base.logprob(*pairs[i])),
    )
    assert ours == oracle


def test_planted_pairs_recovered():
    # small version of the planted-recovery check; the full 10k-pair run
    # lives in the acceptance suite
    rng = random.Random(23)
    cities = ["rome", "oslo", "lima", "kyiv", "bern"]
    temps = [str(t) for t in range(10, 40)]

    def in_domain():
        return (
            f"temp {rng.choice(temps)} {rng.choice(cities)}",
            f"it is {rng.choice(temps)} degrees in {rng.choice(cities)} today",
        )

    def noise():
        charset = "abcdefghijklmnopqrstuvwxyz "
        return (
            "".join(rng.choice(charset) for _ in range(20)),
            "".join(rng.choice(charset) for _ in range(40)),
        )

    planted = [in_domain() for _ in range(20)]
    corpus = [noise() for _ in range(980)]
    positions = sorted(rng.sample(range(1000), 20))
    for pos, pair in zip(positions, planted):
        corpus.insert(pos, pair)
    base = build_ngram_scorer(corpus, order=3)
    adapted = base.finetuned([in_domain() for _ in range(10)])
    scored, _ = cds_score_corpus(corpus, base, adapted)
    top = sorted(range(len(corpus)), key=lambda i: -scored[i].cds_score)[:100]
    recovered = sum(1 for i in top if corpus[i] in planted)
    assert recovered >= 16


def test_scored_tsv_round_trip(tmp_path):
    scored = assign_weights(make_scored([2.0, -1.0, 0.25]), Soft(1.0))
    path = tmp_path / "scored.tsv"
    save_scored(scored, path)
    assert load_scored(path) == scored
