"""The convergent/divergent decoding network.

Shared bidirectional GRU encoders for context and facts, a sigmoid
decoding switcher over the pooled final states, and a decoder whose output
distribution mixes a fixed-vocabulary softmax with copy distributions.
Convergent decoding copies from the context and facts; divergent decoding
reuses the same mixture coefficients to copy from drift-word embeddings
instead. The switcher probability blends the two branches.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import EmptySourceError, Tensor, constant, parameter
from .corpus import UNK_ID, EncodedExample
from .layers import AttentionParams, GruParams, additive_attention, gru_cell

CKPT_HEADER = b"condiv-ckpt v1"

PROV_VOCAB = "vocab"
PROV_CONTEXT = "context-copy"
PROV_FACT = "fact-copy"
PROV_DRIFT_CONTEXT = "drift-contextual"
PROV_DRIFT_FACT = "drift-factual"


@dataclass
class ModelConfig:
    vocab_size: int
    hidden_dim: int = 128
    embed_dim: int = 300
    attn_dim: int = 0          # 0 -> hidden_dim
    n_div: int = 5
    top_n_topics: int = 5
    gamma_switch: float = 1.0
    gamma_copy: float = 1.0
    label_smoothing: float = 0.9
    # Feed the previous step's context vector into the decoder GRU input.
    # Off by default: the decoder recurrence reads only e(y_prev).
    attention_feeding: bool = False
    precision: str = "float64"

    def __post_init__(self):
        if self.attn_dim == 0:
            self.attn_dim = self.hidden_dim
        if self.precision not in ("float64", "float32"):
            raise ValueError(f"unknown precision {self.precision!r}")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


class ModelParameters:
    """All learnable weights. The context and fact encoders share the biGRU
    and the embedding table; the decoder GRU is separate. A frozen copy of
    the initial embedding table is kept for the topic drifter so the drift
    expansions stay fixed while the model embeddings train."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator,
                 embedding: np.ndarray | None = None, scale: float = 0.08):
        c = config
        dt = c.dtype
        d, e, a = c.hidden_dim, c.embed_dim, c.attn_dim
        if embedding is not None:
            if embedding.shape != (c.vocab_size, e):
                raise ValueError(
                    f"embedding shape {embedding.shape} != ({c.vocab_size}, {e})"
                )
            emb = np.array(embedding)
        else:
            emb = rng.uniform(-0.1, 0.1, (c.vocab_size, e))
        self.embedding = parameter(emb, dtype=dt, name="embedding")
        self.drift_embedding = Tensor(np.array(emb, dtype=dt))
        self.drift_embedding.name = "drift_embedding"
        # One GRU serves both directions; context and fact encoders share it.
        self.enc = GruParams.init(e, d, rng, scale, dt)
        dec_in = e + (2 * d if c.attention_feeding else 0)
        self.dec = GruParams.init(dec_in, d, rng, scale, dt)
        self.bridge_w = parameter(rng.uniform(-scale, scale, (d, 2 * d)), dtype=dt,
                                  name="bridge_w")
        self.bridge_b = parameter(np.zeros(d), dtype=dt, name="bridge_b")
        self.vocab_w = parameter(rng.uniform(-scale, scale, (c.vocab_size, d)),
                                 dtype=dt, name="vocab_w")
        self.vocab_b = parameter(np.zeros(c.vocab_size), dtype=dt, name="vocab_b")
        self.switch_w = parameter(rng.uniform(-scale, scale, 4 * d), dtype=dt,
                                  name="switch_w")
        self.switch_b = parameter(np.zeros(()), dtype=dt, name="switch_b")
        self.attn_context = AttentionParams.init(2 * d, d, a, rng, scale, dt)
        self.attn_fact_word = AttentionParams.init(2 * d, d, a, rng, scale, dt)
        self.attn_fact_sent = AttentionParams.init(2 * d, d, a, rng, scale, dt)
        self.attn_drift = AttentionParams.init(e, d, a, rng, scale, dt)
        self.mix_w = parameter(rng.uniform(-scale, scale, (3, d + 4 * d + 2 * e)),
                               dtype=dt, name="mix_w")
        self._name_groups()

    def _name_groups(self):
        for prefix, group in (("enc", self.enc), ("dec", self.dec)):
            for fname in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_n", "u_n", "b_n"):
                getattr(group, fname).name = f"{prefix}.{fname}"
        for prefix, head in (("attn_context", self.attn_context),
                             ("attn_fact_word", self.attn_fact_word),
                             ("attn_fact_sent", self.attn_fact_sent),
                             ("attn_drift", self.attn_drift)):
            head.key_w.name = f"{prefix}.key_w"
            head.query_w.name = f"{prefix}.query_w"
            head.score_v.name = f"{prefix}.score_v"

    def named(self) -> dict[str, Tensor]:
        out = {self.drift_embedding.name: self.drift_embedding}
        for t in self.tensors():
            out[t.name] = t
        return out

    def tensors(self) -> list[Tensor]:
        """The trainable tensors (excludes the frozen drifter table)."""
        ts = [self.embedding]
        ts += self.enc.tensors() + self.dec.tensors()
        ts += [self.bridge_w, self.bridge_b, self.vocab_w, self.vocab_b,
               self.switch_w, self.switch_b]
        ts += self.attn_context.tensors() + self.attn_fact_word.tensors()
        ts += self.attn_fact_sent.tensors() + self.attn_drift.tensors()
        ts.append(self.mix_w)
        return ts

    def zero_grad(self) -> None:
        for t in self.tensors():
            t.zero_grad()


@dataclass
class EncodedInputs:
    """Encoder outputs plus the copy-source id lists for one example."""

    context_states: Tensor          # [I, 2d], row i = [fwd_i ; bwd_i]
    fact_states: list               # K tensors [J_k, 2d]
    context_ext_ids: list
    fact_ext_ids: list
    drift_context_ids: list         # vocab ids of contextual drift words
    drift_fact_ids: list
    drift_context_emb: Tensor | None
    drift_fact_emb: Tensor | None
    ext_size: int
    oov_tokens: list


@dataclass
class StepDistribution:
    """Every distribution and diagnostic produced by one decoding step."""

    divergent_prob: float
    mix_weights: np.ndarray         # [vocab, context, fact] coefficients
    vocab_dist: np.ndarray          # over the fixed vocabulary
    context_copy: np.ndarray        # each over the extended vocabulary
    fact_copy: np.ndarray
    drift_context_copy: np.ndarray
    drift_fact_copy: np.ndarray
    convergent: np.ndarray
    divergent: np.ndarray
    final_pre_renorm: np.ndarray
    final: np.ndarray
    attn_context: np.ndarray
    attn_fact_words: list
    attn_fact_sent: np.ndarray
    attn_drift_context: np.ndarray
    attn_drift_fact: np.ndarray
    renormalized: bool
    ext_size: int
    fact_ext_ids: list = field(default_factory=list)

    def component_masses(self, token_id: int) -> dict:
        b = self.divergent_prob
        lv, lc, lf = self.mix_weights
        pv = self.vocab_dist[token_id] if token_id < len(self.vocab_dist) else 0.0
        return {
            PROV_VOCAB: lv * pv,
            PROV_CONTEXT: (1 - b) * lc * self.context_copy[token_id],
            PROV_FACT: (1 - b) * lf * self.fact_copy[token_id],
            PROV_DRIFT_CONTEXT: b * lc * self.drift_context_copy[token_id],
            PROV_DRIFT_FACT: b * lf * self.drift_fact_copy[token_id],
        }

    def provenance(self, token_id: int) -> str:
        masses = self.component_masses(token_id)
        best = max(masses, key=lambda k: (masses[k], k == PROV_VOCAB))
        if best != PROV_FACT:
            return best
        return f"{PROV_FACT}:{self._best_fact(token_id)}"

    def _best_fact(self, token_id: int) -> int:
        best_k, best_mass = 0, -1.0
        for k, (weights, ext_ids) in enumerate(zip(self.attn_fact_words,
                                                   self.fact_ext_ids)):
            inner = sum(w for w, i in zip(weights, ext_ids) if i == token_id)
            mass = self.attn_fact_sent[k] * inner
            if mass > best_mass:
                best_k, best_mass = k, mass
        return best_k

    def top_candidates(self, n: int = 5) -> list:
        ids = np.argsort(-self.final, kind="stable")[:n]
        return [
            {"token_id": int(i), "probability": float(self.final[i]),
             "masses": {k: float(v) for k, v in self.component_masses(int(i)).items()}}
            for i in ids
        ]


@dataclass
class StepResult:
    state: Tensor                   # decoder hidden after this step
    final: Tensor                   # final distribution, extended vocabulary
    mix: Tensor                     # 3-way mixture coefficients
    copy_mix: Tensor                # scalar: context + fact coefficient
    context_vector: Tensor          # attention context over the dialogue context
    dist: StepDistribution


@dataclass
class LossBundle:
    nll: Tensor
    switch: Tensor
    copy: Tensor
    total: Tensor
    gamma_switch: float
    gamma_copy: float
    divergent_prob: float
    steps: list

    def values(self) -> dict:
        return {
            "nll": self.nll.item(),
            "sw": self.switch.item(),
            "cp": self.copy.item(),
            "total": self.total.item(),
        }


class CondivModel:
    def __init__(self, config: ModelConfig, params: ModelParameters):
        self.config = config
        self.params = params

    # -- encoding ----------------------------------------------------------

    def embed(self, token_id: int) -> Tensor:
        return ad.take_row(ad.gather_rows(self.params.embedding, [token_id]), 0)

    def _zeros(self, n: int) -> Tensor:
        return constant(np.zeros(n), dtype=self.config.dtype)

    def encode_sequence(self, ids: list[int]) -> Tensor:
        """Bidirectional GRU over embedded ids; rows are [fwd_i ; bwd_i]."""
        if not ids:
            raise EmptySourceError("encode_sequence: empty input")
        d = self.config.hidden_dim
        emb = ad.gather_rows(self.params.embedding, ids)
        xs = [ad.take_row(emb, i) for i in range(len(ids))]
        fwd, h = [], self._zeros(d)
        for x in xs:
            h = gru_cell(x, h, self.params.enc)
            fwd.append(h)
        bwd, h = [None] * len(ids), self._zeros(d)
        for i in reversed(range(len(ids))):
            h = gru_cell(xs[i], h, self.params.enc)
            bwd[i] = h
        rows = [ad.concat([f, b]) for f, b in zip(fwd, bwd)]
        return ad.stack_rows(rows)

    def encode_context(self, ids: list[int]) -> Tensor:
        if not ids:
            raise EmptySourceError("encode_context: context must be non-empty")
        return self.encode_sequence(ids)

    def encode_facts(self, fact_ids: list[list[int]]) -> list[Tensor]:
        return [self.encode_sequence(ids) for ids in fact_ids if ids]

    def encode_inputs(self, enc: EncodedExample, drift_context_ids: list[int],
                      drift_fact_ids: list[int]) -> EncodedInputs:
        ctx_states = self.encode_context(enc.context_ids)
        fact_states = self.encode_facts(enc.fact_ids)
        dce = (ad.gather_rows(self.params.embedding, drift_context_ids)
               if drift_context_ids else None)
        dfe = (ad.gather_rows(self.params.embedding, drift_fact_ids)
               if drift_fact_ids else None)
        return EncodedInputs(
            context_states=ctx_states,
            fact_states=fact_states,
            context_ext_ids=list(enc.context_ext_ids),
            fact_ext_ids=[list(f) for f in enc.fact_ext_ids],
            drift_context_ids=list(drift_context_ids),
            drift_fact_ids=list(drift_fact_ids),
            drift_context_emb=dce,
            drift_fact_emb=dfe,
            ext_size=self.config.vocab_size + len(enc.oov_tokens),
            oov_tokens=list(enc.oov_tokens),
        )

    # -- switcher ----------------------------------------------------------

    def switch_probability(self, context_states: Tensor,
                           fact_states: list[Tensor]) -> Tensor:
        """Divergent-mode probability from the pooled final encoder states.

        With no facts the fact pooling is a zero vector, keeping the
        switcher defined."""
        ctx_last = ad.take_row(context_states, context_states.shape[0] - 1)
        if fact_states:
            lasts = [ad.take_row(fs, fs.shape[0] - 1) for fs in fact_states]
            pooled = ad.mean_rows(ad.stack_rows(lasts)) if len(lasts) > 1 else lasts[0]
        else:
            pooled = self._zeros(2 * self.config.hidden_dim)
        logit = ad.add(ad.dot(self.params.switch_w, ad.concat([ctx_last, pooled])),
                       self.params.switch_b)
        return ad.sigmoid(logit)

    def initial_state(self, context_states: Tensor) -> Tensor:
        """Bridge the 2d final context state down to the decoder size."""
        last = ad.take_row(context_states, context_states.shape[0] - 1)
        return ad.tanh(ad.add(ad.matmul(self.params.bridge_w, last),
                              self.params.bridge_b))

    # -- one decoding step --------------------------------------------------

    def decode_step(self, y_prev_id: int, s_prev: Tensor, enc: EncodedInputs,
                    beta, prev_context: Tensor | None = None) -> StepResult:
        c = self.config
        # Extended ids have no embedding row; they embed as UNK.
        if y_prev_id >= c.vocab_size:
            y_prev_id = UNK_ID
        x = self.embed(y_prev_id)
        if c.attention_feeding:
            if prev_context is None:
                prev_context = self._zeros(2 * c.hidden_dim)
            x = ad.concat([x, prev_context])
        s_t = gru_cell(x, s_prev, self.params.dec)

        vocab_dist = ad.softmax(ad.add(ad.matmul(self.params.vocab_w, s_t),
                                       self.params.vocab_b))
        n_ext = enc.ext_size - c.vocab_size
        vocab_ext = ad.concat([vocab_dist, self._zeros(n_ext)]) if n_ext else vocab_dist

        attn_ctx, ctx_vec = additive_attention(enc.context_states, s_t,
                                               self.params.attn_context)
        context_copy = ad.scatter_add(attn_ctx, enc.context_ext_ids, enc.ext_size)

        fact_word_weights = []
        if enc.fact_states:
            fact_vecs = []
            for fs in enc.fact_states:
                w, v = additive_attention(fs, s_t, self.params.attn_fact_word)
                fact_word_weights.append(w)
                fact_vecs.append(v)
            sent_keys = ad.stack_rows(fact_vecs)
            attn_sent, fact_vec = additive_attention(sent_keys, s_t,
                                                     self.params.attn_fact_sent)
            fact_copy = None
            for k, w in enumerate(fact_word_weights):
                piece = ad.mul(ad.pick(attn_sent, k),
                               ad.scatter_add(w, enc.fact_ext_ids[k], enc.ext_size))
                fact_copy = piece if fact_copy is None else ad.add(fact_copy, piece)
        else:
            attn_sent = constant(np.zeros(0))
            fact_vec = self._zeros(2 * c.hidden_dim)
            fact_copy = self._zeros(enc.ext_size)

        def drift_branch(emb_rows, ids):
            if emb_rows is None:
                return (constant(np.zeros(0)), self._zeros(c.embed_dim),
                        self._zeros(enc.ext_size))
            w, v = additive_attention(emb_rows, s_t, self.params.attn_drift)
            return w, v, ad.scatter_add(w, ids, enc.ext_size)

        attn_dc, drift_ctx_vec, drift_ctx_copy = drift_branch(
            enc.drift_context_emb, enc.drift_context_ids)
        attn_df, drift_fact_vec, drift_fact_copy = drift_branch(
            enc.drift_fact_emb, enc.drift_fact_ids)

        mix = ad.softmax(ad.matmul(
            self.params.mix_w,
            ad.concat([s_t, ctx_vec, fact_vec, drift_ctx_vec, drift_fact_vec])))
        m_vocab, m_ctx, m_fact = ad.pick(mix, 0), ad.pick(mix, 1), ad.pick(mix, 2)

        convergent = ad.add(ad.add(ad.mul(m_vocab, vocab_ext),
                                   ad.mul(m_ctx, context_copy)),
                            ad.mul(m_fact, fact_copy))
        divergent = ad.add(ad.add(ad.mul(m_vocab, vocab_ext),
                                  ad.mul(m_ctx, drift_ctx_copy)),
                           ad.mul(m_fact, drift_fact_copy))

        beta_t = beta if isinstance(beta, Tensor) else constant(float(beta))
        one = constant(1.0)
        final_raw = ad.add(ad.mul(beta_t, divergent),
                           ad.mul(ad.sub(one, beta_t), convergent))

        # An empty copy source leaks exactly the mixture mass assigned to it;
        # renormalize so the result is a proper distribution again.
        degenerate = (not enc.fact_states or enc.drift_context_emb is None
                      or enc.drift_fact_emb is None)
        renormalized = False
        final = final_raw
        if degenerate:
            total = ad.sum_all(final_raw)
            if abs(total.item() - 1.0) > 1e-12:
                final = ad.div(final_raw, total)
                renormalized = True

        dist = StepDistribution(
            divergent_prob=float(beta_t.item()),
            mix_weights=mix.data.copy(),
            vocab_dist=vocab_dist.data.copy(),
            context_copy=context_copy.data.copy(),
            fact_copy=fact_copy.data.copy(),
            drift_context_copy=drift_ctx_copy.data.copy(),
            drift_fact_copy=drift_fact_copy.data.copy(),
            convergent=convergent.data.copy(),
            divergent=divergent.data.copy(),
            final_pre_renorm=final_raw.data.copy(),
            final=final.data.copy(),
            attn_context=attn_ctx.data.copy(),
            attn_fact_words=[w.data.copy() for w in fact_word_weights],
            attn_fact_sent=attn_sent.data.copy(),
            attn_drift_context=attn_dc.data.copy(),
            attn_drift_fact=attn_df.data.copy(),
            renormalized=renormalized,
            ext_size=enc.ext_size,
            fact_ext_ids=enc.fact_ext_ids,
        )
        return StepResult(state=s_t, final=final, mix=mix,
                          copy_mix=ad.add(m_ctx, m_fact),
                          context_vector=ctx_vec, dist=dist)

    # -- losses --------------------------------------------------------------

    def switch_loss(self, predicted: Tensor, target: float) -> Tensor:
        """Binary cross-entropy against the smoothed divergent/convergent
        label: target 1 -> 0.9, target 0 -> 0.1 (smoothing 0.9)."""
        s = self.config.label_smoothing
        smoothed = s if target >= 0.5 else 1.0 - s
        p = ad.clip(predicted, 1e-7, 1.0 - 1e-7)
        one = constant(1.0)
        return ad.neg(ad.add(ad.mul(constant(smoothed), ad.log(p)),
                             ad.mul(constant(1.0 - smoothed),
                                    ad.log(ad.sub(one, p)))))

    @staticmethod
    def _bce(p: Tensor, target: float) -> Tensor:
        p = ad.clip(p, 1e-7, 1.0 - 1e-7)
        one = constant(1.0)
        return ad.neg(ad.add(ad.mul(constant(float(target)), ad.log(p)),
                             ad.mul(constant(1.0 - float(target)),
                                    ad.log(ad.sub(one, p)))))

    def sequence_loss(self, enc_example: EncodedExample, inputs: EncodedInputs,
                      switch_target: float, copy_targets: list[int],
                      forced_beta: float | None = None) -> LossBundle:
        """Teacher-forced loss over one example.

        `copy_targets` must align with the target sequence including the
        final EOS step."""
        c = self.config
        targets = enc_example.target_output_ids
        dec_inputs = enc_example.target_input_ids
        if len(copy_targets) != len(targets):
            raise ValueError(
                f"copy_targets length {len(copy_targets)} != targets {len(targets)}"
            )
        beta_pred = self.switch_probability(inputs.context_states,
                                            inputs.fact_states)
        beta_mix = constant(float(forced_beta)) if forced_beta is not None else beta_pred

        s = self.initial_state(inputs.context_states)
        prev_ctx = None
        nll_sum = None
        copy_sum = None
        steps = []
        for t, (y_in, y_out) in enumerate(zip(dec_inputs, targets)):
            step = self.decode_step(y_in, s, inputs, beta_mix, prev_ctx)
            s, prev_ctx = step.state, step.context_vector
            gold = ad.clip(ad.pick(step.final, y_out), 1e-12, 1.0)
            nll_t = ad.neg(ad.log(gold))
            cp_t = self._bce(step.copy_mix, copy_targets[t])
            nll_sum = nll_t if nll_sum is None else ad.add(nll_sum, nll_t)
            copy_sum = cp_t if copy_sum is None else ad.add(copy_sum, cp_t)
            steps.append(step.dist)
        big_t = len(targets)
        nll = ad.mul(constant(1.0 / big_t), nll_sum)
        copy = ad.mul(constant(1.0 / big_t), copy_sum)
        switch = self.switch_loss(beta_pred, switch_target)
        # A gamma of exactly zero removes that term from the objective graph,
        # so the ablated step is bit-identical to a pure-NLL step.
        total = nll
        if c.gamma_switch != 0.0:
            total = ad.add(total, ad.mul(constant(c.gamma_switch), switch))
        if c.gamma_copy != 0.0:
            total = ad.add(total, ad.mul(constant(c.gamma_copy), copy))
        return LossBundle(nll=nll, switch=switch, copy=copy, total=total,
                          gamma_switch=c.gamma_switch, gamma_copy=c.gamma_copy,
                          divergent_prob=beta_pred.item(), steps=steps)


# ---------------------------------------------------------------------------
# checkpoint container: "condiv-ckpt v1", hyperparameter block, then named
# tensors with shapes; values little-endian, at the model's precision.


_HYPER_FIELDS = ("vocab_size", "hidden_dim", "embed_dim", "attn_dim", "n_div",
                 "top_n_topics", "gamma_switch", "gamma_copy", "label_smoothing",
                 "attention_feeding", "precision")


def save_checkpoint(path, config: ModelConfig, params: ModelParameters) -> None:
    named = params.named()
    with open(path, "wb") as f:
        f.write(CKPT_HEADER + b"\n")
        f.write(f"hyperparams {len(_HYPER_FIELDS)}\n".encode())
        for key in _HYPER_FIELDS:
            value = getattr(config, key)
            if isinstance(value, bool):
                value = int(value)
            f.write(f"{key} {value}\n".encode())
        f.write(f"tensors {len(named)}\n".encode())
        for name in sorted(named):
            t = named[name]
            dtype = "f8" if t.data.dtype == np.float64 else "f4"
            dims = " ".join(str(x) for x in t.data.shape)
            f.write(f"tensor {name} {dtype} {t.data.ndim} {dims}".rstrip().encode()
                    + b"\n")
            f.write(np.ascontiguousarray(t.data, dtype="<" + dtype).tobytes())


def load_checkpoint(path, rng: np.random.Generator | None = None):
    """Returns (config, params) with every tensor restored bit-exactly."""
    rng = rng or np.random.default_rng(0)
    with open(path, "rb") as f:
        if f.readline().rstrip(b"\n") != CKPT_HEADER:
            raise ValueError(f"{path}: not a condiv-ckpt v1 file")
        head = f.readline().split()
        if len(head) != 2 or head[0] != b"hyperparams":
            raise ValueError(f"{path}: malformed hyperparameter block")
        hyper = {}
        for _ in range(int(head[1])):
            key, value = f.readline().decode().split()
            hyper[key] = value
        config = ModelConfig(
            vocab_size=int(hyper["vocab_size"]),
            hidden_dim=int(hyper["hidden_dim"]),
            embed_dim=int(hyper["embed_dim"]),
            attn_dim=int(hyper["attn_dim"]),
            n_div=int(hyper["n_div"]),
            top_n_topics=int(hyper["top_n_topics"]),
            gamma_switch=float(hyper["gamma_switch"]),
            gamma_copy=float(hyper["gamma_copy"]),
            label_smoothing=float(hyper["label_smoothing"]),
            attention_feeding=bool(int(hyper["attention_feeding"])),
            precision=hyper["precision"],
        )
        params = ModelParameters(config, rng)
        named = params.named()
        head = f.readline().split()
        if len(head) != 2 or head[0] != b"tensors":
            raise ValueError(f"{path}: malformed tensor block")
        for _ in range(int(head[1])):
            parts = f.readline().decode().split()
            if not parts or parts[0] != "tensor":
                raise ValueError(f"{path}: malformed tensor header")
            name, dtype, ndim = parts[1], parts[2], int(parts[3])
            shape = tuple(int(x) for x in parts[4 : 4 + ndim])
            count = int(np.prod(shape)) if shape else 1
            itemsize = 8 if dtype == "f8" else 4
            raw = f.read(count * itemsize)
            if len(raw) != count * itemsize:
                raise ValueError(f"{path}: truncated tensor data for {name}")
            values = np.frombuffer(raw, dtype="<" + dtype).reshape(shape)
            if name not in named:
                raise ValueError(f"{path}: unknown tensor {name}")
            if named[name].data.shape != shape:
                raise ValueError(
                    f"{path}: tensor {name} shape {shape} != expected "
                    f"{named[name].data.shape}"
                )
            named[name].data = values.astype(config.dtype)
    return config, params


def checkpoint_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()
