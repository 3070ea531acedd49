"""Training loop for the data-to-text decoder.

Adaptive-moment optimization with a linear warmup followed by
exponential decay: lr(t) = peak * min(t/warmup, 1) * 2^(-(t-warmup)/half_life)
once past warmup. Runs are fully reproducible from the seed; checkpoints
round-trip bit-exactly and carry the optimizer state, the training
config, and the digests of the schema/vocab/template-pack universe the
model was trained against.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data_table import DataTable, EncoderParams
from .model import ModelParams, loss_and_gradients
from .tokenizer import EOS, Vocab

CHECKPOINT_MAGIC = b"d2tforge-checkpoint v1\n"
DIVERGENCE_LOSS = 1e4
DIVERGENCE_PATIENCE = 100


class TrainingError(RuntimeError):
    pass


class TrainingDivergence(TrainingError):
    pass


@dataclass
class TrainConfig:
    total_steps: int
    batch_size: int = 256
    dropout: float = 0.10
    peak_lr: float = 6e-3
    warmup_steps: int = 1000
    half_life_steps: int = 0  # 0 means total_steps / 5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0  # 0 means final checkpoint only
    log_every: int = 100

    def __post_init__(self):
        if self.total_steps <= 0:
            raise TrainingError("total_steps must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise TrainingError("dropout must be in [0, 1)")
        if self.peak_lr <= 0:
            raise TrainingError("peak_lr must be positive")

    @property
    def half_life(self) -> int:
        return self.half_life_steps or max(self.total_steps // 5, 1)


def desk_config(total_steps: int = 30_000, **kw) -> TrainConfig:
    """Small-machine preset: batch 32 instead of the full-scale 256."""
    defaults = dict(batch_size=32, warmup_steps=min(1000, total_steps // 10 or 1))
    defaults.update(kw)
    return TrainConfig(total_steps=total_steps, **defaults)


def learning_rate(step: int, config: TrainConfig) -> float:
    warm = min(step / config.warmup_steps, 1.0) if config.warmup_steps > 0 else 1.0
    decay = 2.0 ** (-max(step - config.warmup_steps, 0) / config.half_life)
    return config.peak_lr * warm * decay


# -- training data -------------------------------------------------------------


@dataclass
class TrainExample:
    rows: np.ndarray  # [n_rows, 4] int32
    targets: np.ndarray  # [n_targets] int32, ends with EOS
    weight: float = 1.0


def make_train_example(table: DataTable, target_ids: list[int], weight: float = 1.0) -> TrainExample:
    ids = list(target_ids)
    if not ids or ids[-1] != EOS:
        ids.append(EOS)
    return TrainExample(
        rows=np.asarray(table.rows, dtype=np.int32).reshape(-1, 4),
        targets=np.asarray(ids, dtype=np.int32),
        weight=weight,
    )


def batch_examples(examples: list[TrainExample]):
    """Pad a list of examples to a common row count; returns model inputs."""
    n_rows = max(len(e.rows) for e in examples)
    batch = len(examples)
    idx = np.zeros((batch, n_rows, 4), dtype=np.int64)
    mask = np.zeros((batch, n_rows), dtype=bool)
    for b, e in enumerate(examples):
        idx[b, : len(e.rows)] = e.rows
        mask[b, : len(e.rows)] = True
    targets = [e.targets.tolist() for e in examples]
    weights = np.array([e.weight for e in examples], dtype=np.float64)
    return idx, mask, targets, weights


# -- optimizer ------------------------------------------------------------------


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(m=params.grads_like(), v=params.grads_like(), t=0)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, lr: float, config: TrainConfig) -> None:
    state.t += 1
    b1, b2, eps = config.beta1, config.beta2, config.adam_epsilon
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    m_items = dict(state.m.param_items())
    v_items = dict(state.v.param_items())
    g_items = dict(grads.param_items())
    for name, p in params.param_items():
        g = g_items[name]
        m = m_items[name]
        v = v_items[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


# -- divergence tracking ----------------------------------------------------------


class DivergenceMonitor:
    """Raises after a run of consecutive over-threshold losses."""

    def __init__(self, threshold: float = DIVERGENCE_LOSS, patience: int = DIVERGENCE_PATIENCE):
        self.threshold = threshold
        self.patience = patience
        self.run_length = 0

    def observe(self, step: int, loss: float) -> None:
        if loss > self.threshold:
            self.run_length += 1
            if self.run_length >= self.patience:
                raise TrainingDivergence(
                    f"loss above {self.threshold} for {self.run_length} consecutive steps "
                    f"(step {step}, loss {loss})"
                )
        else:
            self.run_length = 0


# -- training loop ----------------------------------------------------------------


@dataclass
class TrainResult:
    params: ModelParams
    adam: AdamState
    metrics: list[dict] = field(default_factory=list)


def grad_norm(grads: ModelParams) -> float:
    total = 0.0
    for _, g in grads.param_items():
        total += float((g * g).sum())
    return float(np.sqrt(total))


def train(
    dataset: list[TrainExample],
    params: ModelParams,
    config: TrainConfig,
    metrics_path=None,
    checkpoint_path=None,
    digests: dict | None = None,
    resume: "Checkpoint | None" = None,
) -> TrainResult:
    """Optimize in place; returns final params, optimizer state, metrics.

    Deterministic for fixed (dataset, initial params, config): batch
    selection, dropout masks, and updates all derive from the config
    seed. Passing a checkpoint as ``resume`` continues its run exactly,
    including the random stream position.
    """
    if not dataset:
        raise TrainingError("empty training dataset")
    rng = np.random.default_rng(config.seed)
    if resume is not None:
        adam = resume.adam if resume.adam is not None else AdamState.zeros(params)
        start_step = resume.step
        if resume.rng_state is not None:
            rng.bit_generator.state = resume.rng_state
    else:
        adam = AdamState.zeros(params)
        start_step = 0
    monitor = DivergenceMonitor()
    metrics: list[dict] = []
    log_file = open(metrics_path, "a", encoding="utf-8") if metrics_path else None
    try:
        for step_i in range(start_step, config.total_steps):
            chosen = rng.integers(0, len(dataset), size=min(config.batch_size, len(dataset)))
            idx, mask, targets, weights = batch_examples([dataset[i] for i in chosen])
            lr = learning_rate(step_i, config)
            loss, grads = loss_and_gradients(
                idx, mask, targets, weights, params, dropout=config.dropout, rng=rng
            )
            monitor.observe(step_i, loss)
            adam_step(params, grads, adam, lr, config)
            if config.log_every and (step_i % config.log_every == 0 or step_i == config.total_steps - 1):
                entry = {"step": step_i, "loss": loss, "lr": lr, "grad_norm": grad_norm(grads)}
                metrics.append(entry)
                if log_file:
                    log_file.write(json.dumps(entry) + "\n")
                    log_file.flush()
            if (
                checkpoint_path
                and config.checkpoint_every
                and (step_i + 1) % config.checkpoint_every == 0
            ):
                save_checkpoint(checkpoint_path, params, adam, step_i + 1, config, digests, rng_state=rng.bit_generator.state)
    finally:
        if log_file:
            log_file.close()
    if checkpoint_path:
        save_checkpoint(
            checkpoint_path, params, adam, config.total_steps, config, digests,
            rng_state=rng.bit_generator.state,
        )
    return TrainResult(params=params, adam=adam, metrics=metrics)


def finetune_step(
    params: ModelParams, examples: list[TrainExample], lr: float, config: TrainConfig | None = None
) -> ModelParams:
    """One optimizer step on a small batch; returns adapted copy."""
    config = config or TrainConfig(total_steps=1, batch_size=len(examples), dropout=0.0)
    out = params.copy()
    idx, mask, targets, weights = batch_examples(examples)
    _, grads = loss_and_gradients(idx, mask, targets, weights, out, dropout=0.0)
    adam_step(out, grads, AdamState.zeros(out), lr, config)
    return out


# -- checkpoints -------------------------------------------------------------------


def _array_entries(params: ModelParams, adam: AdamState | None):
    for name, array in params.param_items():
        yield name, array
    if adam is not None:
        for name, array in adam.m.param_items():
            yield f"adam.m.{name}", array
        for name, array in adam.v.param_items():
            yield f"adam.v.{name}", array


def save_checkpoint(
    path,
    params: ModelParams,
    adam: AdamState | None,
    step: int,
    config: TrainConfig | None = None,
    digests: dict | None = None,
    rng_state: dict | None = None,
) -> None:
    """Versioned binary container: JSON header plus raw array bytes."""
    entries = list(_array_entries(params, adam))
    header = {
        "arrays": [
            {"name": name, "dtype": str(a.dtype), "shape": list(a.shape)} for name, a in entries
        ],
        "delay_steps": params.delay_steps,
        "adam_t": adam.t if adam is not None else None,
        "step": step,
        "config": asdict(config) if config is not None else None,
        "digests": digests or {},
        "rng_state": rng_state,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack(">Q", len(blob)))
        f.write(blob)
        for _, a in entries:
            f.write(np.ascontiguousarray(a).tobytes())


@dataclass
class Checkpoint:
    params: ModelParams
    adam: AdamState | None
    step: int
    config: dict | None
    digests: dict
    rng_state: dict | None = None


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise TrainingError(f"not a checkpoint file: {path}")
        (blob_len,) = struct.unpack(">Q", f.read(8))
        header = json.loads(f.read(blob_len).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype).reshape(shape)
            arrays[entry["name"]] = data.copy()
    params = _params_from_arrays(arrays, header["delay_steps"], prefix="")
    adam = None
    if header.get("adam_t") is not None:
        adam = AdamState(
            m=_params_from_arrays(arrays, header["delay_steps"], prefix="adam.m."),
            v=_params_from_arrays(arrays, header["delay_steps"], prefix="adam.v."),
            t=header["adam_t"],
        )
    return Checkpoint(
        params=params,
        adam=adam,
        step=header["step"],
        config=header.get("config"),
        digests=header.get("digests", {}),
        rng_state=header.get("rng_state"),
    )


def _params_from_arrays(arrays: dict, delay_steps: int, prefix: str) -> ModelParams:
    enc = EncoderParams(
        **{f.name: arrays[f"{prefix}encoder.{f.name}"] for f in fields(EncoderParams)}
    )
    kw = {
        f.name: arrays[f"{prefix}{f.name}"]
        for f in fields(ModelParams)
        if f.name not in ("encoder", "delay_steps")
    }
    return ModelParams(encoder=enc, delay_steps=delay_steps, **kw)


def encode_targets(vocab: Vocab, text: str, use_placeholder_symbols: bool = False) -> list[int]:
    return vocab.encode(text, use_placeholder_symbols=use_placeholder_symbols) + [EOS]
