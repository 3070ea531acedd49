import random
from collections import Counter

import pytest

from d2tforge.schema import load_schema, validate
from d2tforge.synthgen import (
    SEEN_INTENT,
    UNSEEN_DOMAIN,
    UNSEEN_INTENT,
    ExampleSampler,
    InfeasiblePlanError,
    SamplerConfig,
    SamplerError,
    SplitPlan,
    generate_dataset,
    sample_example,
)

TIMER_SCHEMA = load_schema(
    "arg duration NUMBER DURATION_SECONDS\n"
    "arg label STRING ENTITY(TimerLabel)\n"
    "intent TIMERS.SET_TIMER duration,label?\n"
)

MULTI_SCHEMA = load_schema(
    "arg temperature NUMBER CARDINAL\n"
    "arg city STRING ENTITY(City)\n"
    "arg duration NUMBER DURATION_SECONDS\n"
    "arg day STRING DATE\n"
    "arg when STRING TIME_OF_DAY\n"
    "arg team STRING ENTITY(Team)\n"
    "intent WEATHER.CURRENT_TEMP temperature,city\n"
    "intent WEATHER.FORECAST temperature,city,day\n"
    "intent WEATHER.HUMIDITY temperature,city\n"
    "intent WEATHER.WIND temperature,city\n"
    "intent TIMERS.SET_TIMER duration\n"
    "intent TIMERS.CANCEL_TIMER duration\n"
    "intent TIMERS.PAUSE_TIMER duration\n"
    "intent SPORTS.GAME_RESULT team,when\n"
    "intent SPORTS.NEXT_GAME team,day,when\n"
    "intent SPORTS.SCORE team,temperature\n"
)

CITIES = [(f"City{i}", f"Stadt{i}") for i in range(40)]
TEAMS = [(f"Team{i}", f"Mannschaft{i}") for i in range(40)]


def multi_config(**kw):
    defaults = dict(seed=7, value_pools={"City": CITIES, "Team": TEAMS})
    defaults.update(kw)
    return SamplerConfig(**defaults)


def timer_intent():
    return TIMER_SCHEMA.intents[0]


def test_round_rate_one_always_multiple_of_minute():
    config = SamplerConfig(
        seed=1, round_multiple_rate=1.0, value_pools={"TimerLabel": [("tea", "Tee"), ("rice", "Reis")]}
    )
    rng = random.Random(3)
    sampler = ExampleSampler(TIMER_SCHEMA, config, rng)
    for _ in range(300):
        duration = int(sampler.sample(timer_intent()).values["duration"])
        assert duration % 60 == 0


def test_round_rate_zero_matches_uniform_oracle():
    # chi-square against the uniform expectation for multiples of 60
    config = SamplerConfig(
        seed=1,
        round_multiple_rate=0.0,
        duration_range=(1, 5999),
        value_pools={"TimerLabel": [("tea", "Tee"), ("rice", "Reis")]},
        optional_arg_rate=0.0,
    )
    rng = random.Random(11)
    sampler = ExampleSampler(TIMER_SCHEMA, config, rng)
    n = 100_000
    hits = sum(int(sampler.sample(timer_intent()).values["duration"]) % 60 == 0 for _ in range(n))
    p = (5999 // 60) / 5999  # 99 eligible values out of 5999
    expected = n * p
    chi2 = (hits - expected) ** 2 / expected + (hits - expected) ** 2 / (n - expected)
    assert chi2 < 10.83  # 0.001 critical value, 1 degree of freedom


def test_sampled_examples_validate():
    rng = random.Random(5)
    sampler = ExampleSampler(MULTI_SCHEMA, multi_config(), rng)
    for intent in MULTI_SCHEMA.intents:
        for _ in range(20):
            example = sampler.sample(intent)
            assert validate(example, MULTI_SCHEMA) == []


def test_entity_values_carry_localized_pair():
    rng = random.Random(5)
    example = sample_example(MULTI_SCHEMA.intent("SPORTS", "GAME_RESULT"), MULTI_SCHEMA, multi_config(), rng)
    team = example.values["team"]
    assert example.localized_values["team"] == team.replace("Team", "Mannschaft")


def test_date_values_fall_in_window():
    config = multi_config(date_window=("20190601", "20190630"))
    rng = random.Random(5)
    sampler = ExampleSampler(MULTI_SCHEMA, config, rng)
    intent = MULTI_SCHEMA.intent("WEATHER", "FORECAST")
    for _ in range(100):
        day = sampler.sample(intent).values["day"]
        assert "20190601" <= day <= "20190630"
        assert len(day) == 8


def test_fixed_seed_reproduces_sequence():
    def draw():
        rng = random.Random(123)
        sampler = ExampleSampler(MULTI_SCHEMA, multi_config(), rng)
        return [sampler.sample(MULTI_SCHEMA.intents[i % 10]) for i in range(50)]

    assert draw() == draw()


def test_missing_pool_is_an_error():
    rng = random.Random(1)
    with pytest.raises(SamplerError, match="pool"):
        sample_example(
            MULTI_SCHEMA.intent("SPORTS", "GAME_RESULT"),
            MULTI_SCHEMA,
            SamplerConfig(seed=1, value_pools={"City": CITIES}),
            rng,
        )


def test_pool_draws_without_replacement_first():
    config = multi_config()
    rng = random.Random(9)
    sampler = ExampleSampler(MULTI_SCHEMA, config, rng)
    intent = MULTI_SCHEMA.intent("WEATHER", "CURRENT_TEMP")
    first_forty = [sampler.sample(intent).values["city"] for _ in range(40)]
    assert len(set(first_forty)) == 40


def test_generate_dataset_split_sizes():
    plan = SplitPlan(fractions=(1 / 3, 1 / 3, 1 / 3))
    train, test = generate_dataset(MULTI_SCHEMA, list(MULTI_SCHEMA.intents), 200, 100, plan, multi_config())
    assert len(train) == 200
    assert len(test) == 100
    counts = Counter(label for _, label in test)
    for label in (SEEN_INTENT, UNSEEN_INTENT, UNSEEN_DOMAIN):
        assert abs(counts[label] - 100 / 3) <= 1


def test_unseen_intents_and_domains_absent_from_train():
    plan = SplitPlan(fractions=(1 / 3, 1 / 3, 1 / 3))
    train, test = generate_dataset(MULTI_SCHEMA, list(MULTI_SCHEMA.intents), 300, 90, plan, multi_config())
    train_intents = {(e.domain, e.intent) for e in train}
    train_domains = {e.domain for e in train}
    for example, label in test:
        if label == UNSEEN_INTENT:
            assert (example.domain, example.intent) not in train_intents
        elif label == UNSEEN_DOMAIN:
            assert example.domain not in train_domains


def test_heldout_value_policy_disjoint_strings():
    plan = SplitPlan(fractions=(1.0, 0.0, 0.0), heldout_value_policy=True)
    train, test = generate_dataset(MULTI_SCHEMA, list(MULTI_SCHEMA.intents), 400, 100, plan, multi_config())
    entity_args = {"city", "team"}
    train_values = {e.values[a] for e in train for a in entity_args if a in e.values}
    test_values = {e.values[a] for e, _ in test for a in entity_args if a in e.values}
    assert test_values
    assert train_values.isdisjoint(test_values)


def test_single_domain_unseen_domain_infeasible():
    plan = SplitPlan(fractions=(1 / 3, 1 / 3, 1 / 3))
    config = SamplerConfig(seed=1, value_pools={"TimerLabel": [("a", "a"), ("b", "b")]})
    with pytest.raises(InfeasiblePlanError, match="single domain"):
        generate_dataset(TIMER_SCHEMA, list(TIMER_SCHEMA.intents), 10, 9, plan, config)


def test_generation_is_deterministic():
    plan = SplitPlan(fractions=(0.5, 0.25, 0.25), heldout_value_policy=True)
    args = (MULTI_SCHEMA, list(MULTI_SCHEMA.intents), 100, 40, plan, multi_config())
    assert generate_dataset(*args) == generate_dataset(*args)


def test_bad_fractions_rejected():
    with pytest.raises(SamplerError):
        SplitPlan(fractions=(0.5, 0.2, 0.2))
    with pytest.raises(SamplerError):
        SamplerConfig(seed=1, round_multiple_rate=1.5)
