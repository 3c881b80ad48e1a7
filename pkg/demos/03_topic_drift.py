#!/usr/bin/env python3
"""The topic drifter: TF-IDF x POS salience scoring, topic-word extraction,
and expansion to nearest embedding neighbours (the divergent copy source)."""

import numpy as np

from condiv.corpus import SPECIALS, EmbeddingTable, IdfTable, Vocabulary, tokenize
from condiv.topic import (
    drift_words,
    extract_topic_words,
    format_drift_report,
    rule_pos_tag,
    salience_scores,
    topic_candidates,
)

sentences = [
    "i saw spider-man in tokyo",
    "the movie was filmed in new york",
    "kyoto is the former capital of japan",
    "tokyo means eastern capital",
    "i love watching movies",
]
idf = IdfTable.from_documents([tokenize(s) for s in sentences])

print("=== POS tagging and salience ===")
tokens = tokenize("i saw spider-man in tokyo")
tags = [rule_pos_tag(t) for t in tokens]
scores = salience_scores(tokens, idf)
for token, tag, score in zip(tokens, tags, scores):
    print(f"  {token:12s} {tag:9s} salience={score:.3f}")

print("\ntopic words:", extract_topic_words(tokens, idf, top_n=3))

print("\n=== drift expansion over a toy embedding space ===")
words = ["tokyo", "kyoto", "osaka", "york", "movie", "cinema", "film",
         "capital", "city", "spider-man"]
vocab = Vocabulary(list(SPECIALS) + words)
rng = np.random.default_rng(1)
vectors = rng.normal(size=(len(vocab), 16))
# plant a neighbourhood: kyoto and osaka near tokyo, cinema/film near movie
base = vectors[vocab.lookup("tokyo")]
vectors[vocab.lookup("kyoto")] = base + rng.normal(size=16) * 0.1
vectors[vocab.lookup("osaka")] = base + rng.normal(size=16) * 0.2
movie = vectors[vocab.lookup("movie")]
vectors[vocab.lookup("cinema")] = movie + rng.normal(size=16) * 0.1
vectors[vocab.lookup("film")] = movie + rng.normal(size=16) * 0.15
emb = EmbeddingTable(vectors, np.ones(len(vocab), dtype=bool))

topics = topic_candidates(tokens, tokenize("the movie was filmed in tokyo"),
                          idf, vocab, top_n=2)
drift = drift_words(topics, emb, vocab, n_div=3)
print(format_drift_report(topics, drift))
