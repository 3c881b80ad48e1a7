#!/usr/bin/env python3
"""The automatic metrics: corpus BLEU-4, Dist-1/2 diversity, and the PMI
connection score with its co-occurrence table."""

from condiv.corpus import make_example, tokenize
from condiv.metrics import PmiTable, bleu4, build_pmi_table, distinct_n, pmi_score

refs = [tokenize(s) for s in (
    "the otter likes the forest of norway",
    "the lynx likes the river of kenya",
)]
good = [tokenize(s) for s in (
    "the otter likes the forest of norway",
    "the lynx likes the river of kenya",
)]
noisy = [tokenize(s) for s in (
    "the otter likes the canyon",
    "a lynx swims somewhere else entirely",
)]

print("=== BLEU-4 ===")
print("identical hypotheses :", bleu4(good, refs))
print("noisy hypotheses     :", round(bleu4(noisy, refs), 3))

print("\n=== Dist-1 / Dist-2 ===")
repetitive = [tokenize("the otter the otter the otter")] * 3
print("repetitive Dist-1:", round(distinct_n(repetitive, 1), 2))
print("noisy Dist-2     :", round(distinct_n(noisy, 2), 2))

print("\n=== PMI connection metric ===")
examples = [
    make_example(["tell me about the otter"],
                 ["the otter lives in the forest of norway"],
                 "the otter likes the forest"),
    make_example(["what about the lynx"],
                 ["the lynx lives in the river of kenya"],
                 "the lynx likes the river"),
    make_example(["and the heron"],
                 ["the heron lives in the marsh of chile"],
                 "the heron likes the marsh"),
]
table = build_pmi_table(examples)
print("pairs counted:", table.pair_total)
print("PMI(otter, forest) =", round(table.pmi("otter", "forest"), 4))
print("PMI(otter, river)  =", round(table.pmi("otter", "river"), 4), "(never co-occur)")

score = pmi_score(tokenize("the otter likes the forest"),
                  tokenize("tell me about the otter"),
                  tokenize("the otter lives in the forest of norway"), table)
print("response PMI score :", round(score, 4))
