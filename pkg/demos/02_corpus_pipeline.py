#!/usr/bin/env python3
"""Dataset plumbing: tokenization, vocabulary, IDF weights, IDF-based fact
extraction, truncation rules, and extended-vocabulary batching."""

from condiv.corpus import (
    IdfTable,
    build_vocab,
    extract_facts,
    make_batch,
    make_example,
    tokenize,
)

print("=== tokenizer ===")
print(tokenize("Spider-Man is cool!"))

print("\n=== examples, windows and caps ===")
utterances = [f"utterance number {i}" for i in range(8)]  # 8 turns -> keep 6
example = make_example(utterances, ["a supporting fact"], "a reply")
print("kept utterances:", len(example.context_utterances))
print("joined context:", example.joined_context)

print("\n=== vocabulary ===")
examples = [
    make_example(["the otter swims"], ["the otter lives in norway"],
                 "otters are great"),
    make_example(["tell me more"], ["norway borders sweden"], "norway is cold"),
]
vocab = build_vocab(examples, max_size=50)
print("vocab size:", len(vocab), "| id('otter') =", vocab.lookup("otter"))
print("unknown word maps to UNK id:", vocab.lookup("zeppelin"))

print("\n=== IDF-based fact extraction ===")
idf = IdfTable.from_documents([tokenize(s) for s in (
    "the otter swims", "the otter lives in norway", "sweden has lakes",
    "norway is cold", "the weather is mild",
)])
pool = [
    "sweden has many lakes",
    "the otter lives in norway",
    "completely unrelated sentence",
]
picked = extract_facts([tokenize("tell me about the otter in norway")], pool, idf)
print("ranked facts:", picked)

print("\n=== batching with extended ids ===")
batch = make_batch([make_example(["the zeppelin flies"], ["zeppelin facts"],
                                 "flying machines")], vocab)
print("OOV tokens get per-example extended ids:", batch.oov_tokens[0])
print("context ext ids:", batch.context_ext_ids[0])
