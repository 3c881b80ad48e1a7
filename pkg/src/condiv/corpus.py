"""Dataset ingestion: tokenization, vocabulary, embeddings, IDF-based fact
extraction, truncation and batching.

Datasets are UTF-8 JSON-lines files, one record per line with three
fields: "context" (array of utterance strings, most recent last),
"facts" (array of sentence strings) and "response" (string).
"""

import json
import math
import re
from dataclasses import dataclass

import numpy as np

PAD, UNK, SOS, EOS, SEP = "<pad>", "<unk>", "<sos>", "<eos>", "<sep>"
SPECIALS = (PAD, UNK, SOS, EOS, SEP)
PAD_ID, UNK_ID, SOS_ID, EOS_ID, SEP_ID = range(5)

MAX_CONTEXT_UTTERANCES = 6
MAX_CONTEXT_TOKENS = 32
MAX_FACT_TOKENS = 50
MAX_RESPONSE_TOKENS = 32
MAX_FACTS = 4

VOCAB_HEADER = "condiv-vocab v1"
IDF_HEADER = "condiv-idf v1"

_TOKEN_RE = re.compile(r"[^\W_]+(?:['-][^\W_]+)*|\S")


def tokenize(text: str) -> list[str]:
    """Lowercase and split; punctuation becomes separate single tokens while
    word-internal hyphens/apostrophes are kept ("spider-man", "don't")."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Token<->id map with fixed reserved ids 0..4 for the special tokens."""

    def __init__(self, tokens: list[str]):
        if list(tokens[: len(SPECIALS)]) != list(SPECIALS):
            tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.id_to_token = list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(VOCAB_HEADER + "\n")
            for t in self.id_to_token:
                f.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            if header != VOCAB_HEADER:
                raise ValueError(f"{path}: expected header {VOCAB_HEADER!r}, got {header!r}")
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(tokens)


def build_vocab(examples, max_size: int = 30000) -> Vocabulary:
    """Most frequent tokens from context, facts and responses jointly;
    ties broken lexicographically. `max_size` excludes the specials."""
    counts: dict[str, int] = {}
    any_token = False
    for ex in examples:
        for utt in ex.context_utterances:
            for t in utt:
                counts[t] = counts.get(t, 0) + 1
                any_token = True
        for fact in ex.facts:
            for t in fact:
                counts[t] = counts.get(t, 0) + 1
                any_token = True
        for t in ex.response:
            counts[t] = counts.get(t, 0) + 1
            any_token = True
    if not any_token:
        raise ValueError("build_vocab: empty corpus")
    for s in SPECIALS:
        counts.pop(s, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [t for t, _ in ranked[:max_size]]
    return Vocabulary(list(SPECIALS) + kept)


class IdfTable:
    """Smoothed inverse document frequency: idf = ln((1+N)/(1+df)) + 1."""

    def __init__(self, doc_freq: dict[str, int], doc_count: int):
        self.doc_freq = dict(doc_freq)
        self.doc_count = int(doc_count)

    @classmethod
    def from_documents(cls, documents) -> "IdfTable":
        df: dict[str, int] = {}
        n = 0
        for doc in documents:
            n += 1
            for t in set(doc):
                df[t] = df.get(t, 0) + 1
        return cls(df, n)

    def idf(self, token: str) -> float:
        df = self.doc_freq.get(token, 0)
        return math.log((1 + self.doc_count) / (1 + df)) + 1.0

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(IDF_HEADER + "\n")
            f.write(f"docs {self.doc_count}\n")
            for t in sorted(self.doc_freq):
                f.write(f"{t}\t{self.doc_freq[t]}\n")

    @classmethod
    def load(cls, path) -> "IdfTable":
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            if header != IDF_HEADER:
                raise ValueError(f"{path}: expected header {IDF_HEADER!r}, got {header!r}")
            docs_line = f.readline().split()
            if len(docs_line) != 2 or docs_line[0] != "docs":
                raise ValueError(f"{path}: malformed docs line")
            df = {}
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                token, count = line.split("\t")
                df[token] = int(count)
        return cls(df, int(docs_line[1]))


class EmbeddingTable:
    """Word vectors aligned with a vocabulary; rows missing from the source
    file are drawn uniformly from [-0.1, 0.1] with a fixed seed."""

    def __init__(self, vectors: np.ndarray, covered: np.ndarray):
        self.vectors = vectors
        self.covered = covered

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def coverage(self) -> float:
        return float(self.covered.mean()) if len(self.covered) else 0.0

    @classmethod
    def random(cls, vocab: Vocabulary, dim: int, seed: int = 0) -> "EmbeddingTable":
        rng = np.random.default_rng(seed)
        vectors = rng.uniform(-0.1, 0.1, (len(vocab), dim))
        vectors[PAD_ID] = 0.0
        return cls(vectors, np.zeros(len(vocab), dtype=bool))


def load_embeddings(path, vocab: Vocabulary, dim: int = 300, seed: int = 0) -> EmbeddingTable:
    """Read a plain-text word-vector file: `token v1 ... v<dim>` per line."""
    rng = np.random.default_rng(seed)
    vectors = rng.uniform(-0.1, 0.1, (len(vocab), dim))
    vectors[PAD_ID] = 0.0
    covered = np.zeros(len(vocab), dtype=bool)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected token + {dim} values, got {len(parts)} fields"
                )
            token = parts[0]
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric vector component") from None
            if token in vocab.token_to_id:
                idx = vocab.token_to_id[token]
                vectors[idx] = values
                covered[idx] = True
    return EmbeddingTable(vectors, covered)


@dataclass
class DialogueExample:
    """One training/eval sample after tokenization and truncation."""

    context_utterances: list  # up to 6 token lists, most recent last
    facts: list               # up to 4 token lists, each <= 50 tokens
    response: list            # token list, <= 32 tokens
    joined_context: list      # utterances joined by <sep>, last 32 tokens


def make_example(context: list[str], facts: list[str], response: str) -> DialogueExample:
    if not context or not any(c.strip() for c in context):
        raise ValueError("make_example: context is required")
    if response is None or not response.strip():
        raise ValueError("make_example: response is required")
    utterances = [tokenize(c) for c in context[-MAX_CONTEXT_UTTERANCES:]]
    joined: list[str] = []
    for i, utt in enumerate(utterances):
        if i:
            joined.append(SEP)
        joined.extend(utt)
    joined = joined[-MAX_CONTEXT_TOKENS:]  # keep the most recent tokens
    fact_tokens = [tokenize(s)[:MAX_FACT_TOKENS] for s in facts[:MAX_FACTS]]
    fact_tokens = [f for f in fact_tokens if f]
    return DialogueExample(
        context_utterances=utterances,
        facts=fact_tokens,
        response=tokenize(response)[:MAX_RESPONSE_TOKENS],
        joined_context=joined,
    )


def extract_facts(context, fact_pool: list[str], idf: IdfTable,
                  max_facts: int = MAX_FACTS) -> list[str]:
    """Pick the `max_facts` pool sentences sharing the highest total IDF
    weight with the context; ties keep pool order."""
    context_tokens = set()
    for utt in context:
        context_tokens.update(utt if isinstance(utt, list) else tokenize(utt))
    scored = []
    for pos, sentence in enumerate(fact_pool):
        tokens = set(tokenize(sentence))
        score = sum(idf.idf(t) for t in tokens & context_tokens)
        scored.append((-score, pos, sentence))
    scored.sort()
    return [sentence for _, _, sentence in scored[:max_facts]]


def load_dataset(path) -> list[DialogueExample]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                examples.append(make_example(rec["context"], rec.get("facts", []),
                                             rec["response"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record ({exc})") from None
    return examples


def save_dataset(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def idf_documents(examples) -> list:
    """Each utterance, fact sentence and response is one IDF document."""
    docs = []
    for ex in examples:
        docs.extend(ex.context_utterances)
        docs.extend(ex.facts)
        docs.append(ex.response)
    return docs


def oov_map(example: DialogueExample, vocab: Vocabulary) -> dict[str, int]:
    """Extended ids for copy-source tokens outside the vocabulary.

    Assignment depends only on the example's OOV token set: tokens are
    sorted, then numbered contiguously from len(vocab)."""
    oov = set()
    for t in example.joined_context:
        if t not in vocab.token_to_id:
            oov.add(t)
    for fact in example.facts:
        for t in fact:
            if t not in vocab.token_to_id:
                oov.add(t)
    return {t: len(vocab) + i for i, t in enumerate(sorted(oov))}


@dataclass
class EncodedExample:
    """Id-level view of one example, ready for the model."""

    context_ids: list            # vocab ids (OOV -> UNK), for embedding
    context_ext_ids: list        # vocab or extended ids, for copy scatter
    fact_ids: list               # per fact, vocab ids
    fact_ext_ids: list           # per fact, vocab or extended ids
    target_input_ids: list       # SOS + response as vocab ids (OOV -> UNK)
    target_output_ids: list      # response as extended-vocab ids + EOS
    oov_tokens: list             # index i holds the token for ext id V+i
    example: DialogueExample

    @property
    def ext_size_offset(self) -> int:
        return len(self.oov_tokens)


def encode_example(example: DialogueExample, vocab: Vocabulary) -> EncodedExample:
    ext = oov_map(example, vocab)
    oov_tokens = [t for t, _ in sorted(ext.items(), key=lambda kv: kv[1])]

    def ext_id(token):
        return vocab.token_to_id.get(token, ext.get(token, UNK_ID))

    context_ids = [vocab.lookup(t) for t in example.joined_context]
    context_ext = [ext_id(t) for t in example.joined_context]
    fact_ids = [[vocab.lookup(t) for t in fact] for fact in example.facts]
    fact_ext = [[ext_id(t) for t in fact] for fact in example.facts]
    # Gold tokens outside both the vocabulary and the copy sources stay UNK.
    target_out = [ext_id(t) for t in example.response] + [EOS_ID]
    target_in = [SOS_ID] + [vocab.lookup(t) for t in example.response]
    return EncodedExample(
        context_ids=context_ids,
        context_ext_ids=context_ext,
        fact_ids=fact_ids,
        fact_ext_ids=fact_ext,
        target_input_ids=target_in,
        target_output_ids=target_out,
        oov_tokens=oov_tokens,
        example=example,
    )


@dataclass
class Batch:
    """Padded id matrices with masks and per-example extended-id maps."""

    context_ids: np.ndarray      # [B, Imax]
    context_ext_ids: np.ndarray  # [B, Imax]
    context_mask: np.ndarray     # [B, Imax] bool
    fact_ids: np.ndarray         # [B, Kmax, Jmax]
    fact_ext_ids: np.ndarray     # [B, Kmax, Jmax]
    fact_mask: np.ndarray        # [B, Kmax, Jmax] bool
    response_ids: np.ndarray     # [B, Tmax] target extended ids (+EOS)
    response_mask: np.ndarray    # [B, Tmax] bool
    oov_tokens: list             # per example
    encoded: list                # the underlying EncodedExample objects


def make_batch(examples: list[DialogueExample], vocab: Vocabulary) -> Batch:
    if not examples:
        raise ValueError("make_batch: empty example list")
    encoded = [encode_example(ex, vocab) for ex in examples]
    b = len(encoded)
    imax = max(len(e.context_ids) for e in encoded)
    kmax = max((len(e.fact_ids) for e in encoded), default=0)
    jmax = max((len(f) for e in encoded for f in e.fact_ids), default=0)
    tmax = max(len(e.target_output_ids) for e in encoded)

    ctx = np.full((b, imax), PAD_ID, dtype=np.int64)
    ctx_ext = np.full((b, imax), PAD_ID, dtype=np.int64)
    ctx_mask = np.zeros((b, imax), dtype=bool)
    facts = np.full((b, max(kmax, 1), max(jmax, 1)), PAD_ID, dtype=np.int64)
    facts_ext = np.full((b, max(kmax, 1), max(jmax, 1)), PAD_ID, dtype=np.int64)
    facts_mask = np.zeros((b, max(kmax, 1), max(jmax, 1)), dtype=bool)
    resp = np.full((b, tmax), PAD_ID, dtype=np.int64)
    resp_mask = np.zeros((b, tmax), dtype=bool)

    for i, e in enumerate(encoded):
        ctx[i, : len(e.context_ids)] = e.context_ids
        ctx_ext[i, : len(e.context_ext_ids)] = e.context_ext_ids
        ctx_mask[i, : len(e.context_ids)] = True
        for k, fact in enumerate(e.fact_ids):
            facts[i, k, : len(fact)] = fact
            facts_ext[i, k, : len(fact)] = e.fact_ext_ids[k]
            facts_mask[i, k, : len(fact)] = True
        resp[i, : len(e.target_output_ids)] = e.target_output_ids
        resp_mask[i, : len(e.target_output_ids)] = True
    return Batch(ctx, ctx_ext, ctx_mask, facts, facts_ext, facts_mask,
                 resp, resp_mask, [e.oov_tokens for e in encoded], encoded)


def iter_batches(examples: list, batch_size: int = 64):
    for start in range(0, len(examples), batch_size):
        yield examples[start : start + batch_size]
