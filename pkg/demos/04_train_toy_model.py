#!/usr/bin/env python3
"""Train a small model on a synthetic fact-grounded corpus and leave the
artifacts in ./condiv_home so the other demos, the CLI and the chat UI can
use them:

    python demos/04_train_toy_model.py
    condiv chat                      # artifacts found via ./condiv_home
    condiv serve --port 8777
"""

import json
import os

from condiv.corpus import save_dataset

ENTITIES = ["otter", "lynx", "heron", "ibex", "marmot", "puffin",
            "gecko", "bison", "lemur", "viper"]
HABITATS = ["forest", "river", "desert", "tundra", "marsh",
            "meadow", "canyon", "glacier", "savanna", "reef"]
COUNTRIES = ["norway", "kenya", "chile", "nepal", "canada",
             "laos", "peru", "ghana", "fiji", "malta"]

HOME = os.environ.get("CONDIV_HOME", "condiv_home")
os.makedirs(HOME, exist_ok=True)

records = []
for i, entity in enumerate(ENTITIES):
    for j in range(0, 10, 2):
        habitat = HABITATS[(i + j) % 10]
        country = COUNTRIES[(i * 3 + j) % 10]
        records.append({
            "context": [f"what of the {entity} in the {habitat} ?"],
            "facts": [f"the {entity} lives in the {habitat} of {country}"],
            "response": f"the {entity} is in the {habitat} of {country}",
        })
data_path = os.path.join(HOME, "toy-train.jsonl")
save_dataset(data_path, records)
print(f"wrote {len(records)} records to {data_path}")

config_path = os.path.join(HOME, "toy.cfg")
with open(config_path, "w") as f:
    f.write("hidden_dim = 32\nembed_dim = 32\nattn_dim = 32\n"
            "n_div = 6\ntop_n_topics = 2\nmax_epochs = 300\n"
            "learning_rate = 0.006\nbatch_size = 10\nseed = 7\n"
            "vocab_cap = 300\nearly_stop_nll = 0.20\n")

from condiv.cli import main

print("\n=== condiv prepare ===")
main(["prepare", "--data", data_path, "--out", HOME])
print("\n=== condiv train (a couple of minutes) ===")
main(["train", "--data", data_path, "--config", config_path, "--out", HOME])
print("\nartifacts in", os.path.abspath(HOME))
