"""Label construction, Adam optimization, checkpointing and model selection.

Switch labels mark whether a gold response stays on the facts' topics
(convergent) or drifts away (divergent); copy labels mark response tokens
that appear in any copy source. Training minimizes the weighted sum of
the sequence NLL, the switch loss and the copy loss.
"""

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import (
    EOS_ID,
    DialogueExample,
    EmbeddingTable,
    IdfTable,
    Vocabulary,
    encode_example,
    iter_batches,
)
from .model import CondivModel, ModelConfig, ModelParameters, save_checkpoint
from .topic import drift_words, is_content_word, topic_candidates

OVERLAP_CONVERGENT = "overlap-convergent"  # paper's motivating reading (default)
OVERLAP_DIVERGENT = "overlap-divergent"    # paper's literal label sentence


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 64
    max_epochs: int = 10
    gamma_switch: float = 1.0
    gamma_copy: float = 1.0
    n_div: int = 5
    hidden_dim: int = 128
    embed_dim: int = 300
    attn_dim: int = 0
    vocab_cap: int = 30000
    seed: int = 0
    label_smoothing: float = 0.9
    switch_polarity: str = OVERLAP_CONVERGENT
    precision: str = "float64"
    clip_norm: float = 5.0
    top_n_topics: int = 5
    attention_feeding: bool = False
    forced_beta: float | None = None
    early_stop_nll: float | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "max_epochs", "n_div",
                     "hidden_dim", "embed_dim", "vocab_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if self.switch_polarity not in (OVERLAP_CONVERGENT, OVERLAP_DIVERGENT):
            raise ValueError(f"unknown switch polarity {self.switch_polarity!r}")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            hidden_dim=self.hidden_dim,
            embed_dim=self.embed_dim,
            attn_dim=self.attn_dim,
            n_div=self.n_div,
            top_n_topics=self.top_n_topics,
            gamma_switch=self.gamma_switch,
            gamma_copy=self.gamma_copy,
            label_smoothing=self.label_smoothing,
            attention_feeding=self.attention_feeding,
            precision=self.precision,
        )


def save_config(path, config: TrainConfig) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key, value in asdict(config).items():
            f.write(f"{key} = {value}\n")


def load_config(path, **overrides) -> TrainConfig:
    """Flat key-value text; `key = value` per line, '#' comments allowed."""
    values: dict = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, raw = line.partition("=")
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = parts
            values[key.strip()] = raw.strip()
    parsed = {}
    defaults = TrainConfig()
    for key, raw in values.items():
        if not hasattr(defaults, key):
            raise ValueError(f"{path}: unknown config key {key!r}")
        current = getattr(defaults, key)
        if raw == "None":
            parsed[key] = None
        elif isinstance(current, bool):
            parsed[key] = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int) and not isinstance(current, bool):
            parsed[key] = int(raw)
        elif isinstance(current, float) or current is None:
            parsed[key] = float(raw)
        else:
            parsed[key] = raw
    parsed.update(overrides)
    return TrainConfig(**parsed)


# ---------------------------------------------------------------------------
# labels


def switch_label(example: DialogueExample, fact_topic_words,
                 polarity: str = OVERLAP_CONVERGENT) -> int:
    """Divergent/convergent label from response-topic overlap.

    Default polarity: a response sharing a content word with the facts'
    topic words stays on topic, so the divergent label is 0; with no
    overlap (or no facts) drifting is required and the label is 1. The
    opposite polarity applies the overlap-means-1 reading instead."""
    topics = set(fact_topic_words)
    overlap = any(t in topics for t in example.response if is_content_word(t))
    if polarity == OVERLAP_CONVERGENT:
        return 0 if overlap else 1
    return 1 if overlap else 0


def copy_labels(example: DialogueExample, sources) -> list[int]:
    """1 for each response token present in any copy source, else 0."""
    src = set(sources)
    return [1 if t in src else 0 for t in example.response]


@dataclass
class PreparedExample:
    """Everything the loss needs for one example, precomputed once."""

    encoded: object                # EncodedExample
    drift_context_ids: list
    drift_fact_ids: list
    drift_context_tokens: list
    drift_fact_tokens: list
    fact_topic_words: list
    switch_target: int
    copy_targets: list             # aligned with target_output_ids (EOS -> 0)


def prepare_examples(examples, vocab: Vocabulary, idf: IdfTable,
                     embeddings: EmbeddingTable, config: TrainConfig) -> list:
    prepared = []
    for ex in examples:
        fact_tokens = [t for fact in ex.facts for t in fact]
        topics = topic_candidates(ex.joined_context, fact_tokens, idf, vocab,
                                  top_n=config.top_n_topics)
        drift = drift_words(topics, embeddings, vocab, n_div=config.n_div)
        enc = encode_example(ex, vocab)
        sources = set(ex.joined_context) | set(fact_tokens)
        sources |= set(drift.contextual) | set(drift.factual)
        targets = copy_labels(ex, sources) + [0]  # EOS is never in a source
        prepared.append(PreparedExample(
            encoded=enc,
            drift_context_ids=[vocab.lookup(t) for t in drift.contextual],
            drift_fact_ids=[vocab.lookup(t) for t in drift.factual],
            drift_context_tokens=drift.contextual,
            drift_fact_tokens=drift.factual,
            fact_topic_words=topics.fact_topics,
            switch_target=switch_label(ex, topics.fact_topics,
                                       config.switch_polarity),
            copy_targets=targets,
        ))
    return prepared


def example_loss(model: CondivModel, prep: PreparedExample,
                 forced_beta: float | None = None):
    inputs = model.encode_inputs(prep.encoded, prep.drift_context_ids,
                                 prep.drift_fact_ids)
    return model.sequence_loss(prep.encoded, inputs, float(prep.switch_target),
                               prep.copy_targets, forced_beta=forced_beta)


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    def __init__(self, tensors, lr: float = 0.0005, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = list(tensors)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.tensors]
        self.v = [np.zeros_like(p.data) for p in self.tensors]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = self.lr * math.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for i, p in enumerate(self.tensors):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] += (1.0 - b1) * (g - self.m[i])
            self.v[i] += (1.0 - b2) * (g * g - self.v[i])
            p.data -= correction * self.m[i] / (np.sqrt(self.v[i]) + self.eps)

    def state_arrays(self) -> dict:
        out = {"t": np.array(self.t)}
        for i, p in enumerate(self.tensors):
            out[f"m.{p.name}"] = self.m[i]
            out[f"v.{p.name}"] = self.v[i]
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        self.t = int(arrays["t"])
        for i, p in enumerate(self.tensors):
            self.m[i] = np.array(arrays[f"m.{p.name}"])
            self.v[i] = np.array(arrays[f"v.{p.name}"])


def clip_gradients(tensors, max_norm: float) -> float:
    """Scale all gradients down so their global norm is at most max_norm."""
    total = 0.0
    for p in tensors:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in tensors:
            if p.grad is not None:
                p.grad *= scale
    return norm


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    best_dev_loss: float = math.inf
    running_dev_loss: float = math.inf


@dataclass
class TrainResult:
    checkpoint_path: str
    log: list
    state: TrainState
    model: CondivModel


def save_train_state(path, model: CondivModel, opt: "Adam", state: TrainState,
                     rng: np.random.Generator) -> None:
    """Everything needed to continue training bit-identically: parameters,
    optimizer moments, progress counters and the shuffle RNG state."""
    arrays = {f"param.{n}": t.data for n, t in model.params.named().items()}
    arrays.update(opt.state_arrays())
    arrays["state"] = np.array([state.epoch, state.step], dtype=np.int64)
    arrays["best_dev_loss"] = np.array(state.best_dev_loss)
    arrays["running_dev_loss"] = np.array(state.running_dev_loss)
    arrays["rng"] = np.frombuffer(
        json.dumps(rng.bit_generator.state).encode("utf-8"), dtype=np.uint8)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)


def load_train_state(path, model: CondivModel, opt: "Adam") -> tuple:
    """Restores in place; returns (TrainState, rng)."""
    with np.load(path) as data:
        named = model.params.named()
        for key in data.files:
            if key.startswith("param."):
                named[key[len("param."):]].data = np.array(data[key])
        opt.load_state_arrays({k: data[k] for k in data.files
                               if k == "t" or k.startswith(("m.", "v."))})
        epoch, step = (int(x) for x in data["state"])
        state = TrainState(epoch=epoch, step=step,
                           best_dev_loss=float(data["best_dev_loss"]),
                           running_dev_loss=float(data["running_dev_loss"]))
        rng = np.random.default_rng()
        rng.bit_generator.state = json.loads(bytes(data["rng"]).decode("utf-8"))
    return state, rng


def dev_metrics(model: CondivModel, prepared, forced_beta=None) -> dict:
    sums = {"nll": 0.0, "sw": 0.0, "cp": 0.0, "total": 0.0}
    for prep in prepared:
        values = example_loss(model, prep, forced_beta).values()
        for k in sums:
            sums[k] += values[k]
    n = max(len(prepared), 1)
    return {k: v / n for k, v in sums.items()}


def evaluate_switcher(model: CondivModel, prepared) -> float:
    """Accuracy of thresholding the predicted divergent probability."""
    correct = 0
    for prep in prepared:
        inputs = model.encode_inputs(prep.encoded, prep.drift_context_ids,
                                     prep.drift_fact_ids)
        beta = model.switch_probability(inputs.context_states,
                                        inputs.fact_states).item()
        correct += int((beta > 0.5) == bool(prep.switch_target))
    return correct / max(len(prepared), 1)


def _atomic_save(path, config: ModelConfig, params: ModelParameters) -> None:
    tmp = str(path) + ".tmp"
    try:
        save_checkpoint(tmp, config, params)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise TrainError(f"checkpoint write failed: {exc}") from exc


def train(config: TrainConfig, train_prepared, dev_prepared,
          model: CondivModel, out_dir, log_file=None,
          keep_train_state: bool = False, resume: bool = False) -> TrainResult:
    """Adam optimization of the multi-task loss with per-epoch dev
    evaluation; the checkpoint with the lowest dev total loss is kept.
    Deterministic given the seed (64-bit mode). With `keep_train_state`
    the full state is snapshotted each epoch; `resume=True` continues a
    snapshotted run bit-identically from the next epoch."""
    if not train_prepared or not dev_prepared:
        raise TrainError("train: empty train or dev set")
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "ckpt-best.bin")
    state_path = os.path.join(out_dir, "train-state.npz")
    rng = np.random.default_rng(config.seed)
    tensors = model.params.tensors()
    opt = Adam(tensors, lr=config.learning_rate, beta1=config.adam_beta1,
               beta2=config.adam_beta2, eps=config.adam_eps)
    state = TrainState()
    if resume:
        if not os.path.exists(state_path):
            raise TrainError(f"resume: no train state at {state_path}")
        state, rng = load_train_state(state_path, model, opt)
    log: list = []

    def emit(record):
        log.append(record)
        if log_file:
            log_file.write(json.dumps(record) + "\n")
            log_file.flush()

    for epoch in range(state.epoch + 1, config.max_epochs + 1):
        state.epoch = epoch
        # a pure function of the rng state, so resumed runs see the same order
        order = rng.permutation(len(train_prepared))
        for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [train_prepared[i] for i in order[start:start + config.batch_size]]
            model.params.zero_grad()
            sums = {"nll": 0.0, "sw": 0.0, "cp": 0.0, "total": 0.0}
            for prep in batch:
                bundle = example_loss(model, prep, config.forced_beta)
                values = bundle.values()
                if not all(math.isfinite(v) for v in values.values()):
                    raise TrainError(
                        f"non-finite loss in epoch {epoch} batch {batch_index}"
                    )
                for k in sums:
                    sums[k] += values[k]
                bundle.total.backward(seed=1.0 / len(batch))
            grad_norm = clip_gradients(tensors, config.clip_norm)
            opt.step()
            state.step += 1
            emit({"kind": "step", "step": state.step, "epoch": epoch,
                  "nll": sums["nll"] / len(batch), "sw": sums["sw"] / len(batch),
                  "cp": sums["cp"] / len(batch),
                  "total": sums["total"] / len(batch),
                  "grad_norm": grad_norm})
        dev = dev_metrics(model, dev_prepared, config.forced_beta)
        state.running_dev_loss = dev["total"]
        improved = dev["total"] < state.best_dev_loss
        if improved:
            state.best_dev_loss = dev["total"]
            _atomic_save(ckpt_path, model.config, model.params)
        emit({"kind": "epoch", "epoch": epoch, "dev_nll": dev["nll"],
              "dev_sw": dev["sw"], "dev_cp": dev["cp"], "dev_total": dev["total"],
              "best": improved})
        if keep_train_state:
            save_train_state(state_path, model, opt, state, rng)
        if config.early_stop_nll is not None and dev["nll"] < config.early_stop_nll:
            emit({"kind": "early-stop", "epoch": epoch, "dev_nll": dev["nll"]})
            break
    if not os.path.exists(ckpt_path):
        _atomic_save(ckpt_path, model.config, model.params)
    return TrainResult(checkpoint_path=ckpt_path, log=log, state=state, model=model)


def build_model(config: TrainConfig, vocab: Vocabulary,
                embeddings: EmbeddingTable | None = None) -> CondivModel:
    mc = config.model_config(len(vocab))
    rng = np.random.default_rng(config.seed)
    emb = embeddings.vectors if embeddings is not None else None
    params = ModelParameters(mc, rng, embedding=emb)
    return CondivModel(mc, params)
