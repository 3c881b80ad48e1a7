"""Top-k sampling generation with switcher control, extended-vocabulary
rendering, and multi-turn chat sessions."""

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    EOS_ID,
    MAX_FACTS,
    MAX_RESPONSE_TOKENS,
    SOS_ID,
    DialogueExample,
    EmbeddingTable,
    IdfTable,
    Vocabulary,
    encode_example,
    extract_facts,
    make_example,
    tokenize,
)
from .model import CondivModel, StepDistribution
from .topic import drift_words, topic_candidates


def top_k_sample(dist: np.ndarray, k: int, rng: np.random.Generator) -> int:
    """Sample from the k largest-mass entries (ties to the lower id),
    renormalized. Never selects a zero-mass entry."""
    if k < 1:
        raise ValueError("top_k_sample: k must be >= 1")
    p = np.asarray(dist, dtype=np.float64)
    support = np.nonzero(p > 0)[0]
    if support.size == 0:
        raise ValueError("top_k_sample: distribution has no mass")
    k = min(k, support.size)
    order = np.lexsort((np.arange(p.size), -p))  # by mass desc, then id asc
    kept = order[:k]
    kept_p = p[kept]
    kept_p = kept_p / kept_p.sum()
    return int(rng.choice(kept, p=kept_p))


@dataclass
class GenerationRequest:
    context: list                  # utterance strings, most recent last
    facts: list | None = None      # explicit fact sentences (<= 4)
    fact_pool: list | None = None  # alternative: extract the facts from this
    beta: float | None = None      # None -> use the switcher's prediction
    k: int = 10
    max_length: int = MAX_RESPONSE_TOKENS
    seed: int = 0

    def validate(self):
        if not self.context or not any(str(c).strip() for c in self.context):
            raise ValueError("generation request needs a non-empty context")
        if self.beta is not None and not 0.0 <= float(self.beta) <= 1.0:
            raise ValueError("beta override must lie in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class StepSummary:
    divergent_prob: float
    mix_weights: list
    fact_attention: list
    renormalized: bool
    sampled_token: str
    provenance: str
    top_candidates: list


@dataclass
class GenerationResult:
    tokens: list
    text: str
    provenance: list               # one tag per generated token
    beta_used: float
    beta_predicted: float
    steps: list                    # StepSummary per generated token
    drift_contextual: list
    drift_factual: list
    drift_origin: dict
    seed: int
    step_distributions: list = field(default_factory=list)

    def provenance_summary(self) -> dict:
        counts: dict[str, int] = {}
        for tag in self.provenance:
            key = tag.split(":")[0]
            counts[key] = counts.get(key, 0) + 1
        return counts


@dataclass
class ModelBundle:
    """A loaded checkpoint plus the artifacts generation depends on."""

    model: CondivModel
    vocab: Vocabulary
    idf: IdfTable

    @property
    def top_n_topics(self) -> int:
        return self.model.config.top_n_topics

    @property
    def embeddings(self) -> EmbeddingTable:
        # The drifter reads the frozen initial table, matching what the
        # training pipeline expanded drift words from.
        vecs = self.model.params.drift_embedding.data
        return EmbeddingTable(vecs, np.ones(vecs.shape[0], dtype=bool))


def render_token(token_id: int, vocab: Vocabulary, oov_tokens: list) -> str:
    if token_id < len(vocab):
        return vocab.token(token_id)
    return oov_tokens[token_id - len(vocab)]


def generate(request: GenerationRequest, bundle: ModelBundle,
             keep_distributions: bool = False) -> GenerationResult:
    request.validate()
    model, vocab = bundle.model, bundle.vocab
    facts = request.facts
    if facts is None:
        facts = (extract_facts(request.context, request.fact_pool, bundle.idf)
                 if request.fact_pool else [])
    example = make_query(request.context, facts[:MAX_FACTS])
    encoded = encode_example(example, vocab)

    fact_tokens = [t for fact in example.facts for t in fact]
    topics = topic_candidates(example.joined_context, fact_tokens, bundle.idf,
                              vocab, top_n=bundle.top_n_topics)
    drift = drift_words(topics, bundle.embeddings, vocab, n_div=model.config.n_div)
    inputs = model.encode_inputs(
        encoded,
        [vocab.lookup(t) for t in drift.contextual],
        [vocab.lookup(t) for t in drift.factual],
    )

    beta_predicted = model.switch_probability(inputs.context_states,
                                              inputs.fact_states).item()
    beta_used = float(request.beta) if request.beta is not None else beta_predicted

    rng = np.random.default_rng(request.seed)
    s = model.initial_state(inputs.context_states)
    prev_ctx = None
    y_prev = SOS_ID
    tokens: list[str] = []
    provenance: list[str] = []
    steps: list[StepSummary] = []
    dists: list[StepDistribution] = []
    for _ in range(request.max_length):
        step = model.decode_step(y_prev, s, inputs, beta_used, prev_ctx)
        s, prev_ctx = step.state, step.context_vector
        token_id = top_k_sample(step.dist.final, request.k, rng)
        if token_id == EOS_ID:
            break
        token = render_token(token_id, vocab, encoded.oov_tokens)
        tag = step.dist.provenance(token_id)
        tokens.append(token)
        provenance.append(tag)
        steps.append(StepSummary(
            divergent_prob=step.dist.divergent_prob,
            mix_weights=[float(x) for x in step.dist.mix_weights],
            fact_attention=[float(x) for x in step.dist.attn_fact_sent],
            renormalized=step.dist.renormalized,
            sampled_token=token,
            provenance=tag,
            top_candidates=[
                {**c, "token": render_token(c["token_id"], vocab, encoded.oov_tokens)}
                for c in step.dist.top_candidates(5)
            ],
        ))
        if keep_distributions:
            dists.append(step.dist)
        y_prev = token_id
    return GenerationResult(
        tokens=tokens,
        text=" ".join(tokens),
        provenance=provenance,
        beta_used=beta_used,
        beta_predicted=beta_predicted,
        steps=steps,
        drift_contextual=list(drift.contextual),
        drift_factual=list(drift.factual),
        drift_origin=dict(drift.origin),
        seed=request.seed,
        step_distributions=dists,
    )


def make_query(context: list, facts: list) -> DialogueExample:
    """A DialogueExample without a response, for inference."""
    placeholder = make_example(context, facts, "-")
    placeholder.response = []
    return placeholder


@dataclass
class ChatSession:
    session_id: str
    fact_pool: list = field(default_factory=list)
    utterances: list = field(default_factory=list)   # strings, oldest first
    transcript: list = field(default_factory=list)   # dict records
    turn_counter: int = 0
    seed_base: int = 0

    def window(self) -> list:
        return self.utterances[-6:]


def chat_turn(session: ChatSession, bundle: ModelBundle, text: str,
              beta: float | None = None, k: int = 10,
              seed: int | None = None) -> GenerationResult:
    """Append the user utterance, generate with the windowed context, and
    record both sides in the transcript."""
    if not text or not text.strip():
        raise ValueError("chat_turn: empty utterance")
    session.turn_counter += 1
    if seed is None:
        seed = session.seed_base + session.turn_counter
    session.utterances.append(text)
    session.transcript.append({
        "speaker": "user", "text": text, "tokens": tokenize(text),
        "beta": None, "provenance_summary": None,
    })
    request = GenerationRequest(context=session.window(),
                                facts=session.fact_pool[:MAX_FACTS] or None,
                                beta=beta, k=k, seed=seed)
    result = generate(request, bundle)
    session.utterances.append(result.text)
    session.transcript.append({
        "speaker": "system", "text": result.text, "tokens": list(result.tokens),
        "beta": result.beta_used, "provenance_summary": result.provenance_summary(),
    })
    return result


def export_transcript(session: ChatSession) -> str:
    """Line-delimited transcript records."""
    return "\n".join(json.dumps(rec) for rec in session.transcript)
