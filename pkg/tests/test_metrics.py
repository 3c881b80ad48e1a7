import math
import random
from collections import Counter

import pytest

from condiv.corpus import make_example
from condiv.metrics import (
    EvalReport,
    PmiTable,
    bleu4,
    build_pmi_table,
    distinct_n,
    evaluate_responses,
    ngrams,
    pmi_score,
)


def brute_force_bleu(hyps, refs):
    """Independent BLEU-4: explicit n-gram counting, add-eps smoothing."""
    stats = {n: [0, 0] for n in range(1, 5)}
    c = sum(len(h) for h in hyps)
    r = sum(len(rf) for rf in refs)
    for h, rf in zip(hyps, refs):
        for n in range(1, 5):
            hgrams = [tuple(h[i:i + n]) for i in range(len(h) - n + 1)]
            rgrams = Counter(tuple(rf[i:i + n]) for i in range(len(rf) - n + 1))
            clipped = 0
            for g, cnt in Counter(hgrams).items():
                clipped += min(cnt, rgrams[g])
            stats[n][0] += clipped
            stats[n][1] += len(hgrams)
    if c == 0 or stats[1][0] == 0:
        return 0.0
    log_p = 0.0
    for n in range(1, 5):
        m, t = stats[n]
        p = m / t if t and m else 1e-9
        log_p += 0.25 * math.log(p)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * bp * math.exp(log_p)


def test_bleu_identical_pair_is_100():
    hyp = ["the", "otter", "likes", "the", "forest"]
    assert bleu4([hyp], [list(hyp)]) == pytest.approx(100.0, abs=1e-12)


def test_bleu_zero_unigram_overlap_is_zero():
    assert bleu4([["aa", "bb"]], [["cc", "dd"]]) == 0.0


def test_bleu_matches_brute_force_oracle():
    rng = random.Random(0)
    words = [f"w{i}" for i in range(12)]
    for _ in range(30):
        n = rng.randint(1, 6)
        hyps = [rng.choices(words, k=rng.randint(1, 10)) for _ in range(n)]
        refs = [rng.choices(words, k=rng.randint(1, 10)) for _ in range(n)]
        assert bleu4(hyps, refs) == pytest.approx(brute_force_bleu(hyps, refs),
                                                  abs=1e-9)


def test_bleu_fixture_hand_counted():
    hyp = ["the", "cat", "sat", "on", "the", "mat"]
    ref = ["the", "cat", "lay", "on", "the", "mat"]
    # unigrams: the(2),cat,on,mat matched -> 5/6; bigrams: "the cat","on the",
    # "the mat" -> 3/5; trigrams: "on the mat" -> 1/4; 4-grams: none -> eps
    expected = math.exp(0.25 * (math.log(5 / 6) + math.log(3 / 5)
                                + math.log(1 / 4) + math.log(1e-9)))
    assert bleu4([hyp], [ref]) == pytest.approx(100.0 * expected, abs=1e-9)


def test_bleu_permutation_invariant():
    rng = random.Random(1)
    words = ["a", "b", "c", "d"]
    hyps = [rng.choices(words, k=5) for _ in range(6)]
    refs = [rng.choices(words, k=5) for _ in range(6)]
    order = list(range(6))
    rng.shuffle(order)
    assert bleu4(hyps, refs) == pytest.approx(
        bleu4([hyps[i] for i in order], [refs[i] for i in order]), abs=1e-12)


def test_bleu_length_mismatch():
    with pytest.raises(ValueError):
        bleu4([["a"]], [])


def test_distinct_basic_cases():
    assert distinct_n([["a", "a", "a"]], 1) == pytest.approx(100 / 3)
    assert distinct_n([], 1) == 0.0
    assert distinct_n([["a"]], 2) == 0.0  # no bigrams at all


def test_distinct_falls_as_corpus_repeats():
    resp = ["the", "same", "reply"]
    small = distinct_n([resp] * 2, 1)
    large = distinct_n([resp] * 10, 1)
    assert large < small


def test_distinct_matches_counting_oracle():
    rng = random.Random(2)
    words = ["x", "y", "z", "q"]
    hyps = [rng.choices(words, k=rng.randint(1, 8)) for _ in range(20)]
    for n in (1, 2):
        grams = []
        for h in hyps:
            grams.extend(tuple(h[i:i + n]) for i in range(len(h) - n + 1))
        expected = 100.0 * len(set(grams)) / len(grams) if grams else 0.0
        assert distinct_n(hyps, n) == pytest.approx(expected, abs=1e-9)


def test_distinct_permutation_invariant():
    hyps = [["a", "b"], ["b", "c"], ["c", "a"]]
    assert distinct_n(hyps, 2) == distinct_n(list(reversed(hyps)), 2)


# -- PMI ---------------------------------------------------------------------


def test_pmi_single_pair_is_zero():
    table = PmiTable()
    table.add_pair(["tokyo"], ["kyoto"])
    assert table.pmi("tokyo", "kyoto") == 0.0  # log2(1*1/(1*1))


def test_pmi_independence_saturated_is_zero():
    table = PmiTable()
    for resp in (["kyoto"], ["kyoto"], ["kyoto"]):
        table.add_pair(["tokyo"], resp)
    assert table.pmi("tokyo", "kyoto") == 0.0


def test_pmi_table_matches_enumeration_oracle():
    pairs = [
        (["tokyo", "sushi"], ["kyoto"]),
        (["tokyo"], ["ramen", "kyoto"]),
        (["osaka", "sushi"], ["ramen"]),
        (["nara"], ["deer", "kyoto"]),
        (["osaka"], ["deer"]),
    ]
    table = PmiTable()
    for src, resp in pairs:
        table.add_pair(src, resp)

    n = len(pairs)
    for x in {t for src, _ in pairs for t in src}:
        cx = sum(1 for src, _ in pairs if x in src)
        assert table.source_counts[x] == cx
        for y in {t for _, resp in pairs for t in resp}:
            cy = sum(1 for _, resp in pairs if y in resp)
            cxy = sum(1 for src, resp in pairs if x in src and y in resp)
            expected = math.log2(n * cxy / (cx * cy)) if cxy else 0.0
            assert table.pmi(x, y) == pytest.approx(expected, abs=1e-12)
            assert table.joint_counts.get((x, y), 0) <= min(cx, cy)


def test_pmi_score_stopword_response_is_zero():
    table = PmiTable()
    table.add_pair(["tokyo"], ["kyoto"])
    assert pmi_score(["the", "of"], ["tokyo"], [], table) == 0.0


def test_pmi_score_strong_pair():
    table = PmiTable()
    table.add_pair(["alpha"], ["budget"])
    for i in range(3):  # inflate N without touching alpha/budget
        table.add_pair([f"s{i}"], [f"r{i}"])
    assert table.pmi("alpha", "budget") == pytest.approx(2.0)
    assert pmi_score(["budget"], ["alpha"], [], table) == pytest.approx(2.0)


def test_pmi_score_duplication_invariant():
    table = PmiTable()
    table.add_pair(["alpha"], ["budget"])
    for i in range(3):
        table.add_pair([f"s{i}"], [f"r{i}"])
    once = pmi_score(["budget"], ["alpha"], [], table)
    dup = pmi_score(["budget"], ["alpha", "alpha", "alpha"], [], table)
    assert once == dup


def test_pmi_score_floor_at_zero():
    table = PmiTable()
    # negative association: alpha co-occurs with budget once in many pairs
    for _ in range(4):
        table.add_pair(["alpha"], ["filler"])
    for _ in range(4):
        table.add_pair(["spacer"], ["budget"])
    table.add_pair(["alpha"], ["budget"])
    assert table.pmi("alpha", "budget") < 0.0
    assert pmi_score(["budget"], ["alpha"], [], table) == 0.0


def test_pmi_score_empty_response_error():
    with pytest.raises(ValueError):
        pmi_score([], ["tokyo"], [], PmiTable())


def test_pmi_round_trip(tmp_path):
    table = PmiTable()
    table.add_pair(["tokyo", "sushi"], ["kyoto", "ramen"])
    table.add_pair(["osaka"], ["kyoto"])
    path = tmp_path / "pmi.txt"
    table.save(path)
    loaded = PmiTable.load(path)
    assert loaded.pair_total == 2
    assert loaded.source_counts == table.source_counts
    assert loaded.response_counts == table.response_counts
    assert loaded.joint_counts == table.joint_counts


def test_build_pmi_table_from_examples():
    examples = [
        make_example(["tokyo is nice"], ["sushi places abound"], "kyoto too"),
        make_example(["osaka"], [], "kyoto again"),
    ]
    table = build_pmi_table(examples)
    assert table.pair_total == 2
    assert table.source_counts["tokyo"] == 1
    assert table.response_counts["kyoto"] == 2
    assert table.joint_counts[("tokyo", "kyoto")] == 1
    # "is" is a stopword: not counted
    assert "is" not in table.source_counts


def test_evaluate_responses_report():
    hyps = [["the", "otter", "likes", "the", "forest"]]
    refs = [["the", "otter", "likes", "the", "forest"]]
    table = PmiTable()
    table.add_pair(["otter"], ["forest"])
    report = evaluate_responses(hyps, refs, sources=[(["otter"], [])], table=table)
    assert report.bleu == pytest.approx(100.0)
    assert 0 <= report.dist1 <= 100
    assert report.pmi is not None
    assert "schema" in report.to_json()
