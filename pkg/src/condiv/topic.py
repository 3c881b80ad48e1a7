"""Topic drifter: extract salient topic words from context/facts and expand
each into its nearest vocabulary neighbours by embedding cosine similarity.

Salience is TF x IDF x POS-weight where only content parts of speech
(noun, verb, adjective) carry weight. Tagging is a self-contained
rule/lexicon tagger: a closed-class list for function words, a small
irregular-verb lexicon, suffix heuristics, and noun as the default. Swap
it by passing a different `tagger` callable.
"""

from dataclasses import dataclass, field

import numpy as np

from .corpus import SPECIALS, EmbeddingTable, IdfTable, Vocabulary

STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can can't cannot could
couldn't did didn't do does doesn't doing don't down during each few for from
further had hadn't has hasn't have haven't having he he'd he'll he's her here
here's hers herself him himself his how how's i i'd i'll i'm i've if in into
is isn't it it's its itself let's me more most mustn't my myself no nor not
of off on once only or other ought our ours ourselves out over own same
shan't she she'd she'll she's should shouldn't so some such than that that's
the their theirs them themselves then there there's these they they'd they'll
they're they've this those through to too under until up very was wasn't we
we'd we'll we're we've were weren't what what's when when's where where's
which while who who's whom why why's with won't would wouldn't you you'd
you'll you're you've your yours yourself yourselves yes yeah ok okay oh well
just really also maybe please thanks thank hi hello hey
""".split())

_IRREGULAR_VERBS = frozenset("""
am are ate be became began bent bit blew bought broke brought built came
caught chose come crept dealt drank drew drove eat fell felt flew forgot
found gave get go goes gone got grew heard held hid hit kept knew know laid
lay led left lent lost made make meant met paid put ran rang ride rode said
sang sat saw say see sent set shook sold sought spent spoke stood stole swam
take taught think thought threw told took wear went were woke won wore wrote
""".split())

_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "ish", "less", "ary",
                 "ic", "ical", "est")
_VERB_SUFFIXES = ("ing", "ed", "ify", "ize", "ise")

NOUN, VERB, ADJ, ADV, FUNCTION, PUNCT = "noun", "verb", "adj", "adv", "function", "punct"
CONTENT_POS = frozenset((NOUN, VERB, ADJ))


def rule_pos_tag(token: str) -> str:
    """Approximate single-token POS tag; nouns are the default class."""
    if token in STOPWORDS:
        return FUNCTION
    if not any(c.isalpha() for c in token):
        return PUNCT
    if token in _IRREGULAR_VERBS:
        return VERB
    if token.endswith("ly") and len(token) > 3:
        return ADV
    if token.endswith(_VERB_SUFFIXES) and len(token) > 4:
        return VERB
    if token.endswith(_ADJ_SUFFIXES) and len(token) > 4:
        return ADJ
    return NOUN


def is_content_word(token: str) -> bool:
    """Not a stopword, not punctuation, not a special token."""
    if token in STOPWORDS or token in SPECIALS:
        return False
    return any(c.isalpha() for c in token)


def salience_scores(tokens: list[str], idf: IdfTable, tags=None,
                    tagger=rule_pos_tag) -> np.ndarray:
    """TF(count in `tokens`) x IDF x POS weight, per position."""
    if tags is None:
        tags = [tagger(t) for t in tokens]
    tf: dict[str, int] = {}
    for t in tokens:
        tf[t] = tf.get(t, 0) + 1
    scores = np.zeros(len(tokens))
    for i, (t, tag) in enumerate(zip(tokens, tags)):
        weight = 1.0 if tag in CONTENT_POS else 0.0
        scores[i] = tf[t] * idf.idf(t) * weight
    return scores


def extract_topic_words(tokens: list[str], idf: IdfTable, top_n: int = 5,
                        tagger=rule_pos_tag) -> list[str]:
    """Top-n tokens by salience, deduplicated, ties by first occurrence.
    Returns fewer than n (possibly zero) when salience is all zero."""
    if top_n < 1:
        raise ValueError("extract_topic_words: top_n must be >= 1")
    scores = salience_scores(tokens, idf, tagger=tagger)
    best: dict[str, tuple[float, int]] = {}
    for i, t in enumerate(tokens):
        if t not in best:
            best[t] = (scores[i], i)
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[1][1]))
    return [t for t, (s, _) in ranked[:top_n] if s > 0.0]


@dataclass
class TopicCandidates:
    """Current topic words from the context and the (concatenated) facts."""

    context_topics: list
    fact_topics: list
    scores: dict = field(default_factory=dict)


def topic_candidates(context_tokens: list[str], fact_tokens: list[str],
                     idf: IdfTable, vocab: Vocabulary, top_n: int = 5,
                     tagger=rule_pos_tag) -> TopicCandidates:
    """Extract in-vocabulary topic candidates for both sources."""

    def pick(tokens):
        kept = extract_topic_words(tokens, idf, top_n=len(tokens) or 1, tagger=tagger)
        kept = [t for t in kept if t in vocab]
        return kept[:top_n]

    ctx = pick(context_tokens) if context_tokens else []
    fct = pick(fact_tokens) if fact_tokens else []
    scores = {}
    for tokens, chosen in ((context_tokens, ctx), (fact_tokens, fct)):
        if not tokens:
            continue
        s = salience_scores(tokens, idf, tagger=tagger)
        for i, t in enumerate(tokens):
            if t in chosen and t not in scores:
                scores[t] = float(s[i])
    return TopicCandidates(context_topics=ctx, fact_topics=fct, scores=scores)


@dataclass
class DriftWords:
    """Expanded related words: the divergent copy sources."""

    contextual: list
    factual: list
    origin: dict  # drift token -> seed topic token (first seed wins)
    similarity: dict = field(default_factory=dict)  # (seed, token) -> cosine


def drift_words(topics: TopicCandidates, embeddings: EmbeddingTable,
                vocab: Vocabulary, n_div: int = 5) -> DriftWords:
    """For each seed topic word, the n_div nearest vocabulary words by
    cosine similarity, excluding the seed itself, stopwords, specials and
    punctuation-only tokens. Lists keep seed order; ties break on the
    token string."""
    vectors = embeddings.vectors
    norms = np.linalg.norm(vectors, axis=1)
    candidate_ok = norms > 0.0
    for i, t in enumerate(vocab.id_to_token):
        if candidate_ok[i] and not is_content_word(t):
            candidate_ok[i] = False

    origin: dict[str, str] = {}
    similarity: dict[tuple, float] = {}

    def expand(seeds):
        out = []
        for seed in seeds:
            sid = vocab.token_to_id.get(seed)
            if sid is None or norms[sid] == 0.0:
                continue  # zero-norm seed: similarity undefined, skip
            sims = vectors @ vectors[sid] / (norms * norms[sid] + (norms == 0.0))
            ok = candidate_ok.copy()
            ok[sid] = False
            ids = np.nonzero(ok)[0]
            ranked = sorted(ids, key=lambda i: (-sims[i], vocab.id_to_token[i]))
            for i in ranked[:n_div]:
                token = vocab.id_to_token[i]
                out.append(token)
                origin.setdefault(token, seed)
                similarity[(seed, token)] = float(sims[i])
        return out

    return DriftWords(
        contextual=expand(topics.context_topics),
        factual=expand(topics.fact_topics),
        origin=origin,
        similarity=similarity,
    )


def format_drift_report(topics: TopicCandidates, drift: DriftWords) -> str:
    """Tab-separated inspection dump for the CLI."""
    lines = []
    for label, seeds in (("context-topic", topics.context_topics),
                         ("fact-topic", topics.fact_topics)):
        for seed in seeds:
            lines.append(f"{label}\t{seed}\t{topics.scores.get(seed, 0.0):.6f}")
    for label, tokens in (("context-drift", drift.contextual),
                          ("fact-drift", drift.factual)):
        for token in tokens:
            seed = drift.origin.get(token, "")
            sim = drift.similarity.get((seed, token), 0.0)
            lines.append(f"{label}\t{token}\t{sim:.6f}\tseed={seed}")
    return "\n".join(lines)
