#!/usr/bin/env python3
"""Generate with the trained toy checkpoint and inspect what the decoder
did: the switcher's decision, per-token provenance, and the effect of
forcing convergent (beta=0) versus divergent (beta=1) decoding.

Run demos/04_train_toy_model.py first.
"""

import os

from condiv.corpus import IdfTable, Vocabulary
from condiv.inference import GenerationRequest, ModelBundle, generate
from condiv.model import CondivModel, load_checkpoint

HOME = os.environ.get("CONDIV_HOME", "condiv_home")
config, params = load_checkpoint(os.path.join(HOME, "ckpt-best.bin"))
bundle = ModelBundle(
    model=CondivModel(config, params),
    vocab=Vocabulary.load(os.path.join(HOME, "vocab.txt")),
    idf=IdfTable.load(os.path.join(HOME, "idf.txt")),
)

context = ["what of the otter in the forest ?"]
facts = ["the otter lives in the forest of norway"]

print("=== switcher-chosen decoding ===")
out = generate(GenerationRequest(context=context, facts=facts, seed=1), bundle)
print("predicted divergence probability:", round(out.beta_predicted, 4))
print("response:", out.text)
print("provenance:")
for token, tag in zip(out.tokens, out.provenance):
    print(f"  {token:12s} <- {tag}")

print("\n=== forced convergent vs divergent ===")
for beta in (0.0, 1.0):
    out = generate(GenerationRequest(context=context, facts=facts,
                                     beta=beta, seed=1), bundle)
    mode = "convergent" if beta == 0.0 else "divergent"
    print(f"beta={beta} ({mode}): {out.text}")
    print("  sources:", out.provenance)

print("\n=== the drift words behind the divergent branch ===")
out = generate(GenerationRequest(context=context, facts=facts, beta=1.0,
                                 seed=2), bundle)
print("contextual:", out.drift_contextual)
print("factual:   ", out.drift_factual)
print("origins:   ", out.drift_origin)
