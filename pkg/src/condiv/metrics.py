"""Automatic evaluation: corpus BLEU-4, Dist-1/2 diversity, and a PMI
connection metric over a co-occurrence table estimated from training pairs."""

import json
import math
from collections import Counter
from dataclasses import dataclass

from .topic import is_content_word

PMI_HEADER = "condiv-pmi v1"
_BLEU_EPS = 1e-9


def ngrams(tokens, n: int):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def bleu4(hypotheses, references) -> float:
    """Corpus-level BLEU with uniform 1..4-gram weights and brevity penalty.

    Zero n-gram precisions are replaced with 1e-9; no unigram match at all
    scores exactly 0.0."""
    if len(hypotheses) != len(references):
        raise ValueError(
            f"bleu4: {len(hypotheses)} hypotheses vs {len(references)} references"
        )
    matches = [0] * 4
    totals = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            hyp_counts = Counter(ngrams(hyp, n))
            ref_counts = Counter(ngrams(ref, n))
            totals[n - 1] += max(len(hyp) - n + 1, 0)
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_precision = 0.0
    for n in range(4):
        p = matches[n] / totals[n] if totals[n] and matches[n] else _BLEU_EPS
        log_precision += 0.25 * math.log(p)
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


def distinct_n(hypotheses, n: int) -> float:
    """100 * distinct n-grams / total n-grams across all hypotheses."""
    seen = set()
    total = 0
    for hyp in hypotheses:
        grams = ngrams(hyp, n)
        total += len(grams)
        seen.update(grams)
    if total == 0:
        return 0.0
    return 100.0 * len(seen) / total


class PmiTable:
    """Presence co-occurrence counts between source-side content words
    (context plus facts) and response content words, one count per pair."""

    def __init__(self):
        self.source_counts: Counter = Counter()
        self.response_counts: Counter = Counter()
        self.joint_counts: Counter = Counter()
        self.pair_total = 0

    def add_pair(self, source_tokens, response_tokens) -> None:
        self.pair_total += 1
        xs = {t for t in source_tokens if is_content_word(t)}
        ys = {t for t in response_tokens if is_content_word(t)}
        for x in xs:
            self.source_counts[x] += 1
        for y in ys:
            self.response_counts[y] += 1
        for x in xs:
            for y in ys:
                self.joint_counts[(x, y)] += 1

    def pmi(self, x: str, y: str) -> float:
        """log2(N * c(x,y) / (c(x) * c(y))); unseen pairs score 0."""
        joint = self.joint_counts.get((x, y), 0)
        if joint == 0:
            return 0.0
        return math.log2(self.pair_total * joint
                         / (self.source_counts[x] * self.response_counts[y]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(PMI_HEADER + "\n")
            f.write(f"pairs {self.pair_total}\n")
            for t in sorted(self.source_counts):
                f.write(f"source\t{t}\t{self.source_counts[t]}\n")
            for t in sorted(self.response_counts):
                f.write(f"response\t{t}\t{self.response_counts[t]}\n")
            for x, y in sorted(self.joint_counts):
                f.write(f"joint\t{x}\t{y}\t{self.joint_counts[(x, y)]}\n")

    @classmethod
    def load(cls, path) -> "PmiTable":
        table = cls()
        with open(path, encoding="utf-8") as f:
            if f.readline().rstrip("\n") != PMI_HEADER:
                raise ValueError(f"{path}: not a {PMI_HEADER} file")
            head = f.readline().split()
            if len(head) != 2 or head[0] != "pairs":
                raise ValueError(f"{path}: malformed pair-count line")
            table.pair_total = int(head[1])
            for line in f:
                parts = line.rstrip("\n").split("\t")
                if len(parts) == 3 and parts[0] == "source":
                    table.source_counts[parts[1]] = int(parts[2])
                elif len(parts) == 3 and parts[0] == "response":
                    table.response_counts[parts[1]] = int(parts[2])
                elif len(parts) == 4 and parts[0] == "joint":
                    table.joint_counts[(parts[1], parts[2])] = int(parts[3])
                elif parts != [""]:
                    raise ValueError(f"{path}: malformed line {line!r}")
        return table


def build_pmi_table(examples) -> PmiTable:
    """Count over (context + facts, response) pairs; presence once per pair."""
    table = PmiTable()
    for ex in examples:
        source = list(ex.joined_context)
        for fact in ex.facts:
            source.extend(fact)
        table.add_pair(source, ex.response)
    return table


def pmi_score(response_tokens, context_tokens, fact_tokens, table: PmiTable) -> float:
    """Mean over response tokens of the best PMI connection to any source
    content word; non-content tokens and unseen pairs contribute 0."""
    if not response_tokens:
        raise ValueError("pmi_score: empty response")
    sources = {t for t in list(context_tokens) + list(fact_tokens)
               if is_content_word(t)}
    total = 0.0
    for y in response_tokens:
        if not is_content_word(y):
            continue
        best = max((table.pmi(x, y) for x in sources), default=0.0)
        total += max(best, 0.0)
    return total / len(response_tokens)


@dataclass
class EvalReport:
    bleu: float
    dist1: float
    dist2: float
    pmi: float | None
    pair_count: int

    def to_json(self) -> str:
        return json.dumps({
            "schema": "v1", "bleu": self.bleu, "dist1": self.dist1,
            "dist2": self.dist2, "pmi": self.pmi, "pairs": self.pair_count,
        })


def evaluate_responses(hypotheses, references, sources=None,
                       table: PmiTable | None = None) -> EvalReport:
    """hypotheses/references are token lists; `sources` pairs each
    hypothesis with (context_tokens, fact_tokens) for the PMI metric."""
    bleu = bleu4(hypotheses, references)
    d1 = distinct_n(hypotheses, 1)
    d2 = distinct_n(hypotheses, 2)
    pmi = None
    if table is not None and sources is not None:
        scores = [pmi_score(hyp, ctx, facts, table)
                  for hyp, (ctx, facts) in zip(hypotheses, sources) if hyp]
        pmi = sum(scores) / len(scores) if scores else 0.0
    return EvalReport(bleu=bleu, dist1=d1, dist2=d2, pmi=pmi,
                      pair_count=len(hypotheses))
