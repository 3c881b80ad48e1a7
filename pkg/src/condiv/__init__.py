"""Fact-based dialogue generation with convergent and divergent decoding.

A copy-augmented GRU encoder-decoder that either copies from the dialogue
context and supporting facts (convergent decoding) or from topic-drift
words expanded from the current topics (divergent decoding), gated by a
learned decoding switcher. Includes the corpus pipeline, topic drifter,
training loop, top-k sampling inference, evaluation metrics, a CLI and an
HTTP service.
"""

__version__ = "0.1.0"
