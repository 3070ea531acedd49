"""Synthetic structured-example generation with annotation-aware sampling.

Argument values are drawn according to each argument's semantic
annotation: durations oversample even multiples of minutes and hours,
dates fall in a configured calendar window, entities come from name
pools. Train/test splits can hold out intents, whole domains, and
argument value strings so generalization is measurable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .schema import ArgumentSpec, IntentSpec, Schema, StructuredExample, validate

SEEN_INTENT = "SEEN_INTENT"
UNSEEN_INTENT = "UNSEEN_INTENT_SEEN_DOMAIN"
UNSEEN_DOMAIN = "UNSEEN_DOMAIN"
SPLIT_LABELS = (SEEN_INTENT, UNSEEN_INTENT, UNSEEN_DOMAIN)

_DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


class SamplerError(ValueError):
    pass


class InfeasiblePlanError(SamplerError):
    pass


@dataclass
class SamplerConfig:
    seed: int = 0
    # probability that a DURATION_SECONDS value is an even multiple of a
    # minute or an hour; the remainder is uniform over duration_range
    round_multiple_rate: float = 0.8
    # entity_type (or argument name, for PLAIN strings) -> (english, localized) pairs
    value_pools: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    date_window: tuple[str, str] = ("20190101", "20191231")
    duration_range: tuple[int, int] = (1, 5999)
    cardinal_range: tuple[int, int] = (1, 100)
    optional_arg_rate: float = 0.5

    def __post_init__(self):
        for name in ("round_multiple_rate", "optional_arg_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise SamplerError(f"{name} must be in [0, 1], got {rate}")


@dataclass
class SplitPlan:
    """Test split fractions over (seen intent, unseen intent, unseen domain)."""

    fractions: tuple[float, float, float] = (1.0, 0.0, 0.0)
    heldout_value_policy: bool = False

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-9 or any(f < 0 for f in self.fractions):
            raise SamplerError(f"fractions must be non-negative and sum to 1, got {self.fractions}")


def _dates_in_window(window: tuple[str, str]) -> list[str]:
    start, end = window
    dates = []
    for year in range(int(start[:4]), int(end[:4]) + 1):
        for month in range(1, 13):
            for day in range(1, _DAYS_IN_MONTH[month - 1] + 1):
                d = f"{year:04d}{month:02d}{day:02d}"
                if start <= d <= end:
                    dates.append(d)
    if not dates:
        raise SamplerError(f"empty date window {window}")
    return dates


class _PoolState:
    """Draw without replacement until the pool is exhausted, then uniformly."""

    def __init__(self, pairs: list[tuple[str, str]], rng: random.Random):
        self.pairs = list(pairs)
        self.queue = list(pairs)
        rng.shuffle(self.queue)

    def draw(self, rng: random.Random) -> tuple[str, str]:
        if self.queue:
            return self.queue.pop()
        return self.pairs[rng.randrange(len(self.pairs))]


class ExampleSampler:
    """Stateful sampler over one value-pool universe."""

    def __init__(self, schema: Schema, config: SamplerConfig, rng: random.Random, pools=None):
        self.schema = schema
        self.config = config
        self.rng = rng
        self.dates = _dates_in_window(config.date_window)
        pools = config.value_pools if pools is None else pools
        self.pools = {name: _PoolState(pairs, rng) for name, pairs in pools.items()}

    def _pool_key(self, spec: ArgumentSpec) -> str:
        return spec.entity_type if spec.entity_type else spec.name

    def _sample_value(self, spec: ArgumentSpec) -> tuple[str, str | None]:
        rng, cfg = self.rng, self.config
        if spec.kind == "ENUM":
            return rng.choice(spec.enum_values), None
        if spec.annotation == "DATE":
            return rng.choice(self.dates), None
        if spec.annotation == "TIME_OF_DAY":
            return f"{rng.randint(1, 12)}:{rng.randint(0, 59):02d} {rng.choice(['am', 'pm'])}", None
        if spec.annotation == "DURATION_SECONDS":
            lo, hi = cfg.duration_range
            if rng.random() < cfg.round_multiple_rate:
                unit = 3600 if hi >= 3600 and rng.random() < 0.5 else 60
                return str(unit * rng.randint(1, max(hi // unit, 1))), None
            return str(rng.randint(lo, hi)), None
        if spec.annotation == "CARDINAL":
            return str(rng.randint(*cfg.cardinal_range)), None
        key = self._pool_key(spec)
        if key not in self.pools:
            raise SamplerError(f"no value pool for {key!r} (argument {spec.name!r})")
        english, localized = self.pools[key].draw(rng)
        return english, localized

    def sample(self, intent: IntentSpec) -> StructuredExample:
        values: dict[str, str] = {}
        localized: dict[str, str] = {}
        for ref in intent.args:
            if not ref.required and self.rng.random() >= self.config.optional_arg_rate:
                continue
            spec = self.schema.args_by_name[ref.name]
            value, loc = self._sample_value(spec)
            values[ref.name] = value
            if loc is not None:
                localized[ref.name] = loc
        example = StructuredExample(
            domain=intent.domain, intent=intent.intent, values=values, localized_values=localized
        )
        problems = validate(example, self.schema)
        if problems:
            raise SamplerError(f"sampled example fails validation: {problems}")
        return example


def sample_example(
    intent: IntentSpec, schema: Schema, config: SamplerConfig, rng: random.Random
) -> StructuredExample:
    """One-off draw; pool exhaustion state does not persist across calls."""
    return ExampleSampler(schema, config, rng).sample(intent)


def _apportion(n: int, fractions) -> list[int]:
    # largest remainder method; each count is within 1 of its exact share
    exact = [n * f for f in fractions]
    counts = [int(x) for x in exact]
    order = sorted(range(len(exact)), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def _split_pools(pools, rng: random.Random):
    """Disjoint train/test pools; test gets roughly a fifth of each pool."""
    train, test = {}, {}
    for key, pairs in pools.items():
        if len(pairs) < 2:
            raise InfeasiblePlanError(f"value pool {key!r} too small to hold out values")
        shuffled = list(pairs)
        rng.shuffle(shuffled)
        n_test = max(1, len(shuffled) // 5)
        test[key] = shuffled[:n_test]
        train[key] = shuffled[n_test:]
    return train, test


def plan_intent_partition(intents, plan: SplitPlan, rng: random.Random):
    """Assign intents to train / unseen-intent / unseen-domain groups."""
    domains = sorted({i.domain for i in intents})
    unseen_domains: set[str] = set()
    if plan.fractions[2] > 0:
        if len(domains) < 2:
            raise InfeasiblePlanError("unseen-domain split requested with a single domain")
        unseen_domains = {rng.choice(domains)}
    seen_intents = [i for i in intents if i.domain not in unseen_domains]
    unseen_intent_specs: list[IntentSpec] = []
    if plan.fractions[1] > 0:
        by_domain: dict[str, list[IntentSpec]] = {}
        for i in seen_intents:
            by_domain.setdefault(i.domain, []).append(i)
        candidates = [d for d, group in by_domain.items() if len(group) >= 2]
        if not candidates:
            raise InfeasiblePlanError("unseen-intent split needs a domain with at least two intents")
        for d in candidates:
            unseen_intent_specs.append(rng.choice(by_domain[d]))
    held = {i.key for i in unseen_intent_specs}
    train_intents = [i for i in seen_intents if i.key not in held]
    if not train_intents:
        raise InfeasiblePlanError("no intents left for training")
    unseen_domain_specs = [i for i in intents if i.domain in unseen_domains]
    return train_intents, unseen_intent_specs, unseen_domain_specs


def generate_dataset(
    schema: Schema,
    intents: list[IntentSpec],
    n_train: int,
    n_test: int,
    plan: SplitPlan,
    config: SamplerConfig,
):
    """Generate train examples plus labeled test examples.

    Returns (train, test) where test entries are (example, split_label)
    pairs. Deterministic for a fixed (schema, intents, sizes, plan,
    config) tuple.
    """
    rng = random.Random(config.seed)
    train_intents, unseen_intents, unseen_domain_intents = plan_intent_partition(intents, plan, rng)
    if plan.heldout_value_policy:
        train_pools, test_pools = _split_pools(config.value_pools, rng)
    else:
        train_pools = test_pools = config.value_pools

    train_sampler = ExampleSampler(schema, config, rng, pools=train_pools)
    train = [train_sampler.sample(rng.choice(train_intents)) for _ in range(n_train)]

    test_sampler = ExampleSampler(schema, config, rng, pools=test_pools)
    counts = _apportion(n_test, plan.fractions)
    groups = (train_intents, unseen_intents, unseen_domain_intents)
    test: list[tuple[StructuredExample, str]] = []
    for label, count, group in zip(SPLIT_LABELS, counts, groups):
        if count and not group:
            raise InfeasiblePlanError(f"no intents available for {label}")
        for _ in range(count):
            test.append((test_sampler.sample(rng.choice(group)), label))
    return train, test
