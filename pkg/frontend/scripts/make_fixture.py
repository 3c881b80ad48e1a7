#!/usr/bin/env python3
"""Build the tiny artifacts the frontend integration test serves from.

Writes vocab/idf/pmi plus a briefly trained checkpoint into the directory
given as argv[1] (default frontend/.fixture)."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "tests"))

import synthetic
from condiv.cli import main
from condiv.corpus import save_dataset

out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
    os.path.dirname(__file__), "..", ".fixture")
os.makedirs(out, exist_ok=True)
data = os.path.join(out, "train.jsonl")
save_dataset(data, synthetic.grounded_corpus(
    [(i, j) for i in range(4) for j in range(3)]))
cfg = os.path.join(out, "train.cfg")
with open(cfg, "w") as f:
    f.write("hidden_dim = 8\nembed_dim = 8\nattn_dim = 8\nn_div = 2\n"
            "top_n_topics = 2\nmax_epochs = 3\nlearning_rate = 0.01\n"
            "batch_size = 8\nseed = 3\nvocab_cap = 300\n")
rc = main(["prepare", "--data", data, "--out", out])
rc |= main(["train", "--data", data, "--config", cfg, "--out", out])
sys.exit(rc)
