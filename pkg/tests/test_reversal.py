"""Reversal estimator: fitting, retrieval, accuracy, baseline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import advrev as ar
from advrev.errors import FormatError, UsageError


def make_record(probs, adv, true=None, prior=True):
    probs = np.asarray(probs, dtype=np.float64)
    orig = int(np.argmax(probs))
    return ar.PredictionRecord(
        original_probs=probs,
        original_class=orig,
        true_class=orig if true is None else true,
        adversarial_class=adv,
        in_prior_set=prior,
    )


def random_records(rng, n, d, prior=True):
    records = []
    for _ in range(n):
        probs = rng.dirichlet(np.ones(d))
        adv = int(rng.integers(d - 1))
        orig = int(np.argmax(probs))
        if adv >= orig:
            adv += 1
        records.append(make_record(probs, adv, true=int(rng.integers(d)), prior=prior))
    return records


def naive_fit(records, d):
    """Independent accumulation: literal per-class double loop."""
    P = np.empty((d, d))
    for j in range(d):
        total = np.full(d, 1.0 / d)
        count = 0
        for r in records:
            if r.in_prior_set and r.adversarial_class == j:
                total = total + r.original_probs
                count += 1
        P[j] = total / (1 + count)
    return P


def test_fit_empty_records_is_uniform():
    model = ar.fit_reversal([], 10)
    assert np.array_equal(model.P, np.full((10, 10), 0.1))
    assert model.fitted_from == 0


def test_fit_hand_worked_single_record():
    rec = make_record([0.7, 0.2, 0.1], adv=1)
    model = ar.fit_reversal([rec], 3)
    third = 1.0 / 3.0
    expected_row1 = np.array([(third + 0.7) / 2, (third + 0.2) / 2, (third + 0.1) / 2])
    assert np.allclose(model.P[1], expected_row1, atol=1e-12)
    assert np.allclose(model.P[1], [0.5167, 0.2667, 0.2167], atol=5e-5)
    assert np.array_equal(model.P[0], np.full(3, third))
    assert np.array_equal(model.P[2], np.full(3, third))
    assert model.counts[0, 1] == 1 and model.counts.sum() == 1


def test_fit_matches_naive_double_loop():
    rng = np.random.default_rng(7)
    records = random_records(rng, 500, 10)
    model = ar.fit_reversal(records, 10)
    assert np.max(np.abs(model.P - naive_fit(records, 10))) < 1e-12
    assert np.max(np.abs(model.P.sum(axis=1) - 1.0)) < 1e-9
    assert np.all((model.P > 0) & (model.P < 1))
    assert model.fitted_from == 500
    assert np.array_equal(model.counts.sum(axis=0),
                          np.bincount([r.adversarial_class for r in records], minlength=10))


def test_fit_ignores_evaluation_records():
    rng = np.random.default_rng(8)
    prior = random_records(rng, 80, 6)
    noise = random_records(rng, 80, 6, prior=False)
    a = ar.fit_reversal(prior, 6)
    b = ar.fit_reversal(prior + noise, 6)
    assert np.array_equal(a.P, b.P)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60), d=st.integers(2, 8))
def test_fit_rows_sum_to_one_and_order_invariant(seed, n, d):
    rng = np.random.default_rng(seed)
    records = random_records(rng, n, d)
    model = ar.fit_reversal(records, d)
    assert np.max(np.abs(model.P.sum(axis=1) - 1.0)) < 1e-9
    shuffled = [records[i] for i in rng.permutation(n)]
    again = ar.fit_reversal(shuffled, d)
    assert np.allclose(model.P, again.P, rtol=0, atol=1e-12)


def test_record_invariants_are_enforced():
    with pytest.raises(UsageError):
        make_record([0.7, 0.2, 0.1], adv=0)  # adversarial == original
    with pytest.raises(UsageError):
        ar.PredictionRecord(np.array([0.2, 0.8]), original_class=0, true_class=0,
                            adversarial_class=1, in_prior_set=True)  # argmax mismatch


def test_reverse_topk_tie_break_and_sort():
    model = ar.fit_reversal([], 4)  # uniform rows: full tie
    assert ar.reverse_topk(model, 2, 1) == [0]
    model.P[2] = np.array([0.1, 0.6, 0.3, 0.0])
    assert ar.reverse_topk(model, 2, 2) == [1, 2]


def test_reverse_topk_matches_full_sort(rng):
    d = 9
    model = ar.fit_reversal(random_records(rng, 200, d), d)
    for j in range(d):
        row = model.P[j]
        want = sorted(range(d), key=lambda k: (-row[k], k))
        for k in (1, 3, d):
            assert ar.reverse_topk(model, j, k) == want[:k]
    assert sorted(ar.reverse_topk(model, 0, d)) == list(range(d))


def test_reverse_topk_range_errors():
    model = ar.fit_reversal([], 5)
    with pytest.raises(UsageError):
        ar.reverse_topk(model, 0, 0)
    with pytest.raises(UsageError):
        ar.reverse_topk(model, 0, 6)
    with pytest.raises(UsageError):
        ar.reverse_topk(model, 5, 1)


def test_retrieval_accuracy_simple_count():
    model = ar.fit_reversal([], 4)
    model.P[1] = np.array([0.7, 0.1, 0.1, 0.1])  # top-1 for adv class 1 is class 0
    evals = [
        make_record([0.6, 0.1, 0.2, 0.1], adv=1, prior=False),  # orig 0: hit
        make_record([0.1, 0.1, 0.6, 0.2], adv=1, prior=False),  # orig 2: miss
        make_record([0.1, 0.1, 0.2, 0.6], adv=1, prior=False),  # orig 3: miss
        make_record([0.1, 0.6, 0.2, 0.1], adv=2, prior=False),  # uniform row -> top-1 is 0
    ]
    report = ar.retrieval_accuracy(model, evals, ar.TARGET_ORIGINAL, [1])
    assert report.accuracy[1] == 0.25
    assert report.hits[1] == 1 and report.n_eval == 4


def test_retrieval_accuracy_permutation_model_is_perfect(rng):
    d = 6
    perm = rng.permutation(d)
    prior, evals = [], []
    for _ in range(120):
        orig = int(rng.integers(d))
        probs = np.full(d, 0.01)
        probs[orig] = 1.0 - 0.01 * (d - 1)
        adv = int(perm[orig]) if perm[orig] != orig else (orig + 1) % d
        prior.append(make_record(probs, adv))
        evals.append(make_record(probs, adv, prior=False))
    model = ar.fit_reversal(prior, d)
    report = ar.retrieval_accuracy(model, evals, ar.TARGET_ORIGINAL, [1])
    assert report.accuracy[1] == 1.0


def test_retrieval_accuracy_matches_naive_membership(rng):
    d = 7
    prior = random_records(rng, 150, d)
    evals = random_records(rng, 90, d, prior=False)
    model = ar.fit_reversal(prior, d)
    ks = [1, 3, 5, d]
    report = ar.retrieval_accuracy(model, prior + evals, ar.TARGET_TRUE, ks)
    for k in ks:
        hits = sum(r.true_class in ar.reverse_topk(model, r.adversarial_class, k)
                   for r in evals)
        assert report.accuracy[k] == hits / len(evals)
    # non-decreasing in k, and the full ranking always contains the target
    accs = [report.accuracy[k] for k in ks]
    assert all(b >= a for a, b in zip(accs, accs[1:]))
    full = ar.retrieval_accuracy(model, evals, ar.TARGET_ORIGINAL, [d])
    assert full.accuracy[d] == 1.0


def test_retrieval_accuracy_usage_errors(rng):
    model = ar.fit_reversal([], 5)
    with pytest.raises(UsageError):
        ar.retrieval_accuracy(model, [], ar.TARGET_ORIGINAL, [1])
    prior_only = random_records(rng, 5, 5)
    with pytest.raises(UsageError):
        ar.retrieval_accuracy(model, prior_only, ar.TARGET_ORIGINAL, [1])
    evals = random_records(rng, 5, 5, prior=False)
    with pytest.raises(UsageError):
        ar.retrieval_accuracy(model, evals, "nearest", [1])
    with pytest.raises(UsageError):
        ar.retrieval_accuracy(model, evals, ar.TARGET_ORIGINAL, [9])


def test_baseline_single_observation_dominates():
    rec = make_record([0.05, 0.05, 0.55, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05], adv=5)
    model = ar.fit_baseline([rec], 10)
    assert ar.reverse_topk(model, 5, 1) == [2]


def test_baseline_empty_gives_uniform_index_order():
    model = ar.fit_baseline([], 10)
    assert ar.reverse_topk(model, 3, 4) == [0, 1, 2, 3]


def test_baseline_ranking_equals_raw_count_argsort(rng):
    d = 8
    records = random_records(rng, 1000, d)
    model = ar.fit_baseline(records, d)
    counts = np.zeros((d, d), dtype=int)
    for r in records:
        counts[r.original_class, r.adversarial_class] += 1
    for j in range(d):
        want = sorted(range(d), key=lambda i: (-counts[i, j], i))
        assert ar.reverse_topk(model, j, d) == want


def test_prob_fit_equals_baseline_on_one_hot_probs(rng):
    d = 6
    records = []
    for _ in range(200):
        orig = int(rng.integers(d))
        probs = np.zeros(d)
        probs[orig] = 1.0
        adv = int(rng.integers(d - 1))
        if adv >= orig:
            adv += 1
        records.append(make_record(probs, adv))
    assert np.array_equal(ar.fit_reversal(records, d).P, ar.fit_baseline(records, d).P)


def test_uniform_mapping_reverses_at_chance_level(rng):
    d = 10
    prior = random_records(rng, 3000, d)
    evals = random_records(rng, 3000, d, prior=False)
    model = ar.fit_reversal(prior, d)
    report = ar.retrieval_accuracy(model, evals, ar.TARGET_ORIGINAL, [1])
    assert abs(report.accuracy[1] - 1.0 / (d - 1)) < 0.03


def test_reversal_model_file_round_trip(tmp_path, rng):
    model = ar.fit_reversal(random_records(rng, 120, 6), 6)
    path = tmp_path / "reversal.json"
    ar.save_reversal_model(model, path)
    loaded = ar.load_reversal_model(path)
    assert np.array_equal(model.P, loaded.P)
    assert np.array_equal(model.counts, loaded.counts)
    assert loaded.fitted_from == model.fitted_from and loaded.method == model.method

    doc = path.read_text().replace('"version": 1', '"version": 3')
    path.write_text(doc)
    with pytest.raises(FormatError, match="3"):
        ar.load_reversal_model(path)


def test_report_csv_format(rng):
    model = ar.fit_reversal(random_records(rng, 40, 5), 5)
    evals = random_records(rng, 20, 5, prior=False)
    report = ar.retrieval_accuracy(model, evals, ar.TARGET_TRUE, [1, 5])
    lines = report.to_csv().strip().splitlines()
    assert lines[0] == "k,target,accuracy,N"
    assert len(lines) == 3
    k, target, acc, n = lines[1].split(",")
    assert k == "1" and target == "true" and n == "20"
    assert 0.0 <= float(acc) <= 1.0
