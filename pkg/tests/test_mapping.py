"""Mapping tallies, rank statistics, DOT and CSV exports."""

import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import advrev as ar
from advrev.errors import FormatError, UsageError
from advrev.mapping import KIND_ADVERSARIAL, KIND_ORIGINAL, KIND_TRUE

from test_reversal import make_record, random_records


def test_empty_mapping_is_zero_matrix():
    table = ar.build_mapping([], KIND_ORIGINAL, KIND_ADVERSARIAL, n_classes=4)
    assert np.array_equal(table.counts, np.zeros((4, 4), dtype=int))


def test_direct_tally():
    records = [make_record([0.9] + [0.1 / 9] * 9, adv=9) for _ in range(3)]
    table = ar.build_mapping(records, KIND_ORIGINAL, KIND_ADVERSARIAL)
    assert table.counts[0, 9] == 3
    assert table.counts.sum() == 3


def test_mapping_matches_nested_loop_oracle(rng):
    records = random_records(rng, 300, 6)
    for source, dest in ((KIND_TRUE, KIND_ORIGINAL), (KIND_ORIGINAL, KIND_ADVERSARIAL)):
        table = ar.build_mapping(records, source, dest, n_classes=6)
        field = {"true": "true_class", "original": "original_class",
                 "adversarial": "adversarial_class"}
        want = np.zeros((6, 6), dtype=int)
        for r in records:
            want[getattr(r, field[source]), getattr(r, field[dest])] += 1
        assert np.array_equal(table.counts, want)
        assert table.counts.sum() == 300


def test_original_to_adversarial_diagonal_is_zero(rng):
    records = random_records(rng, 200, 5)
    table = ar.build_mapping(records, KIND_ORIGINAL, KIND_ADVERSARIAL, n_classes=5)
    assert np.all(np.diag(table.counts) == 0)


def test_mapping_unknown_kind():
    with pytest.raises(UsageError):
        ar.build_mapping([], "predicted", KIND_ADVERSARIAL, n_classes=3)
    with pytest.raises(UsageError):
        ar.build_mapping([], KIND_TRUE, KIND_ADVERSARIAL)  # empty and no class count


def test_rank_match_second_most_likely():
    rec = make_record([0.5, 0.3, 0.2], adv=1)
    stats = ar.rank_match_rates([rec])
    assert stats.rates[2] == 1.0
    assert stats.rates[3] == stats.rates[4] == stats.rates[5] == 0.0
    assert stats.any_2_to_5 == 1.0


def test_rank_match_out_of_window():
    probs = np.array([0.3, 0.2, 0.15, 0.12, 0.1, 0.08, 0.05])  # descending by index
    rec = make_record(probs, adv=6)  # rank 7: outside the tracked window
    stats = ar.rank_match_rates([rec])
    assert stats.any_2_to_5 == 0.0


def test_rank_match_empty_is_usage_error():
    with pytest.raises(UsageError):
        ar.rank_match_rates([])


def test_rank_match_against_per_record_sort(rng):
    records = random_records(rng, 1000, 8)
    stats = ar.rank_match_rates(records)
    hits = {r: 0 for r in (2, 3, 4, 5)}
    for rec in records:
        order = sorted(range(8), key=lambda k: (-rec.original_probs[k], k))
        rank = order.index(rec.adversarial_class) + 1
        if rank in hits:
            hits[rank] += 1
    for r in (2, 3, 4, 5):
        assert stats.rates[r] == hits[r] / 1000
    assert stats.any_2_to_5 == sum(stats.rates.values())
    assert stats.any_2_to_5 >= max(stats.rates.values())


EDGE_RE = re.compile(r"^\s*src(\d+) -> dst(\d+) \[penwidth=([0-9.]+), color=\"#000000([0-9a-f]{2})\"\];$")


def edges_of(dot):
    return [EDGE_RE.match(line).groups() for line in dot.splitlines() if EDGE_RE.match(line)]


def test_dot_zero_matrix_has_nodes_only():
    table = ar.build_mapping([], KIND_ORIGINAL, KIND_ADVERSARIAL, n_classes=3)
    dot = ar.export_dot(table)
    assert edges_of(dot) == []
    assert dot.count("src0 [") == 1 and dot.count("dst2 [") == 1


def test_dot_single_entry_full_width():
    records = [make_record([0.9] + [0.1 / 9] * 9, adv=9) for _ in range(3)]
    table = ar.build_mapping(records, KIND_ORIGINAL, KIND_ADVERSARIAL)
    edges = edges_of(ar.export_dot(table))
    assert len(edges) == 1
    src, dst, penwidth, alpha = edges[0]
    assert (src, dst) == ("0", "9")
    assert float(penwidth) == 4.0  # fraction 1.0 at maximum pen width
    assert alpha == "ff"


def test_dot_edge_count_matches_threshold_oracle(rng):
    records = random_records(rng, 400, 6)
    table = ar.build_mapping(records, KIND_ORIGINAL, KIND_ADVERSARIAL, n_classes=6)
    for min_fraction in (0.0, 0.05, 0.2):
        dot = ar.export_dot(table, min_fraction)
        totals = table.counts.sum(axis=0)
        want = sum(
            1
            for i in range(6)
            for j in range(6)
            if table.counts[i, j] > 0 and totals[j] > 0
            and table.counts[i, j] / totals[j] >= min_fraction
        )
        assert len(edges_of(dot)) == want


def test_dot_deterministic_and_validated(rng):
    records = random_records(rng, 100, 5)
    table = ar.build_mapping(records, KIND_ORIGINAL, KIND_ADVERSARIAL, n_classes=5)
    assert ar.export_dot(table) == ar.export_dot(table)
    with pytest.raises(UsageError):
        ar.export_dot(table, min_fraction=1.0)


def test_csv_zero_matrix_two_classes():
    table = ar.build_mapping([], KIND_TRUE, KIND_ORIGINAL, n_classes=2)
    lines = ar.export_csv(table).strip().splitlines()
    assert lines[0] == "source,dest,count"
    assert lines[1:] == ["0,0,0", "0,1,0", "1,0,0", "1,1,0"]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(2, 7))
def test_csv_round_trip(seed, d):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 50, size=(d, d))
    table = ar.MappingTable(n_classes=d, counts=counts.astype(np.int64),
                            source_kind=KIND_TRUE, dest_kind=KIND_ORIGINAL)
    text = ar.export_csv(table)
    assert ar.parse_csv(text, KIND_TRUE, KIND_ORIGINAL) == table
    assert text == ar.export_csv(table)  # stable ordering


def test_csv_parse_errors():
    with pytest.raises(FormatError):
        ar.parse_csv("bad,header\n0,0,0\n")
    with pytest.raises(FormatError):
        ar.parse_csv("source,dest,count\n0,0,1\n0,1,2\n1,0,3\n")  # 3 cells: not square
    with pytest.raises(FormatError, match="line 2"):
        ar.parse_csv("source,dest,count\n0,zero,1\n")


def test_rank_stats_csv():
    stats = ar.rank_match_rates([make_record([0.5, 0.3, 0.2], adv=1)])
    lines = stats.to_csv().strip().splitlines()
    assert lines[0] == "rank,rate"
    assert lines[1] == "2,1.000000"
    assert lines[-1] == "any_2_to_5,1.000000"


def test_true_to_original_diagonal_dominates_on_accurate_model(digit_corpus, digit_model, attack_runs):
    # the classifier is right on ~97% of clean images, so the true -> original
    # mapping concentrates on the diagonal at roughly that rate
    run = attack_runs("nfgsm", 0.1, with_prior=False)
    table = ar.build_mapping(run["records"], KIND_TRUE, KIND_ORIGINAL, n_classes=10)
    diagonal_fraction = np.trace(table.counts) / table.counts.sum()
    test_ds = digit_corpus["test"]
    clean_acc = float(np.mean(ar.predict_batch(digit_model, test_ds.images) == test_ds.labels))
    assert diagonal_fraction >= 0.9
    assert abs(diagonal_fraction - clean_acc) <= 0.05
