import math

import numpy as np
import pytest

from zslca import dap
from zslca.attrspace import AttributeMatrix, expand, normalize_columns
from zslca.datagen import Dataset, SplitSpec
from zslca.errors import DimensionMismatch, EmptyCandidates, NoTrainingData

from .conftest import random_raw


def _bank(weights, priors, names=None):
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    names = names or [f"a{i}" for i in range(weights.shape[0])]
    return dap.AttributeClassifierBank(weights, priors, np.full(len(names), 0.5), names)


def direct_product_scores(p, priors, B):
    """Oracle: multiply the posterior-to-prior ratios out, then take the log."""
    n_a, n_c = B.shape
    out = np.empty(n_c)
    for y in range(n_c):
        prod = 1.0
        for m in range(n_a):
            num = p[m] if B[m, y] else 1.0 - p[m]
            den = priors[m] if B[m, y] else 1.0 - priors[m]
            prod *= num / den
        out[y] = math.log(prod)
    return out


# -- binarization ----------------------------------------------------------------


def test_binarize_row_example():
    col1 = [0.2, math.sqrt(1 - 0.04)]
    col2 = [0.8, 0.6]
    a = AttributeMatrix(np.array([col1, col2]).T, ["r0", "r1"], ["y1", "y2"], normalized=True)
    sig = dap.binarize_signatures(a, ["y1", "y2"])
    np.testing.assert_array_equal(sig.binary[0], [0, 1])
    assert sig.thresholds[0] == pytest.approx(0.5)


def test_binarize_constant_row_dropped():
    v = np.array([[0.5, 0.5], [math.sqrt(0.75), math.sqrt(0.75)]])
    a = AttributeMatrix(v, ["flat", "also_flat"], ["y1", "y2"], normalized=True)
    sig = dap.binarize_signatures(a, ["y1", "y2"])
    assert sig.dropped == ("flat", "also_flat")
    assert sig.binary.shape == (0, 2)


def test_binarize_complement_is_bitwise_not(rng):
    for _ in range(20):
        a = normalize_columns(random_raw(rng, 6, 7, binary=True))
        s = expand(a)
        seen = a.class_names[:4]
        full = dap.binarize_signatures(s, seen)
        orig = dap.binarize_signatures(a, seen)
        m = len(orig.attribute_names)
        np.testing.assert_array_equal(full.binary[:m], orig.binary)
        np.testing.assert_array_equal(full.binary[m:], 1.0 - orig.binary)
        np.testing.assert_allclose(full.thresholds[m:], 1.0 - orig.thresholds)
        assert full.attribute_names[m:] == tuple("not_" + n for n in orig.attribute_names)


def test_binarize_uses_seen_classes_only():
    v = normalize_columns(AttributeMatrix(np.array([[1.0, 0.0, 3.0], [1.0, 1.0, 0.1]]), ["p", "q"], list("abc")))
    sig = dap.binarize_signatures(v, ["a", "b"])
    np.testing.assert_allclose(sig.thresholds, v.values[:, :2].mean(axis=1))


# -- posteriors -----------------------------------------------------------------


def test_posteriors_examples():
    bank = _bank([[1.0, 0.0, 0.0]], [0.5])
    assert dap.posteriors(bank, [2.1972, 0.0])[0] == pytest.approx(0.9, abs=1e-4)
    zero = _bank(np.zeros((3, 3)), [0.5] * 3)
    np.testing.assert_array_equal(dap.posteriors(zero, [5.0, -2.0]), 0.5)
    huge = _bank([[1e308, 0.0, 0.0], [-1e308, 0.0, 0.0]], [0.5, 0.5])
    p = dap.posteriors(huge, [10.0, 0.0])
    assert p[0] == 1 - 1e-6 and p[1] == 1e-6


def test_posteriors_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        dap.posteriors(_bank([[1.0, 0.0, 0.0]], [0.5]), [1.0, 2.0, 3.0])


# -- scoring --------------------------------------------------------------------


def test_dap_two_term_example():
    bank = _bank([[math.log(9.0), 0.0]], [0.5])  # x = 1 -> p = 0.9
    ranking = dap.dap_predict(bank, [1.0], ["y1", "y2"], np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(ranking.scores, [math.log(1.8), math.log(0.2)], atol=1e-12)
    assert ranking.predicted == "y1"


def test_uninformative_classifier_ties_to_first():
    priors = np.array([0.3, 0.6])
    probs = priors[None, :]
    B = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    scores = dap.dap_scores(probs, priors, B)[0]
    np.testing.assert_allclose(scores, 0.0, atol=1e-15)
    assert dap.Ranking(("a", "b", "c"), scores).predicted == "a"


def test_dap_matches_direct_product_fixture(rng):
    p = rng.uniform(0.05, 0.95, 3)
    priors = rng.uniform(0.1, 0.9, 3)
    B = (rng.random((3, 4)) < 0.5).astype(float)
    np.testing.assert_allclose(dap.dap_scores(p[None], priors, B)[0], direct_product_scores(p, priors, B), rtol=1e-12)


def test_dap_matches_direct_product_random(rng):
    for _ in range(100):
        m, n_c = rng.integers(1, 21), rng.integers(1, 11)
        p = rng.uniform(1e-3, 1 - 1e-3, m)
        priors = rng.uniform(1e-3, 1 - 1e-3, m)
        B = (rng.random((m, n_c)) < 0.5).astype(float)
        got = dap.dap_scores(p[None], priors, B)[0]
        want = direct_product_scores(p, priors, B)
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)
        assert np.argmax(got) == np.argmax(want)


def test_score_monotone_in_posterior(rng):
    priors = rng.uniform(0.1, 0.9, 5)
    B = (rng.random((5, 6)) < 0.5).astype(float)
    p = rng.uniform(0.1, 0.8, 5)
    base = dap.dap_scores(p[None], priors, B)[0]
    bumped = p.copy()
    bumped[2] += 0.1
    after = dap.dap_scores(bumped[None], priors, B)[0]
    assert np.all((after - base)[B[2] == 1] > 0)
    assert np.all((after - base)[B[2] == 0] < 0)


def test_dap_predict_errors():
    bank = _bank([[1.0, 0.0]], [0.5])
    with pytest.raises(EmptyCandidates):
        dap.dap_predict(bank, [1.0], [], np.zeros((1, 0)))
    with pytest.raises(DimensionMismatch):
        dap.dap_predict(bank, [1.0], ["a"], np.zeros((2, 1)))


def test_ranking_order_and_ties():
    r = dap.Ranking(("a", "b", "c"), np.array([1.0, 3.0, 3.0]))
    assert r.predicted == "b" and r.tied
    assert [c for c, _ in r.ranked] == ["b", "c", "a"]


# -- training -------------------------------------------------------------------


def _separable_problem(rng):
    X = np.vstack([rng.normal(-2, 0.5, (30, 2)), rng.normal(2, 0.5, (30, 2))])
    labels = ["neg"] * 30 + ["pos"] * 30
    ids = [f"s{i}" for i in range(60)]
    data = Dataset(X, labels, ids)
    split = SplitSpec(["neg", "pos"], [], ids)
    attrs = normalize_columns(AttributeMatrix(np.array([[0.0, 1.0], [1.0, 1.0]]), ["on", "bias"], ["neg", "pos"]))
    return data, split, attrs


def test_separable_attribute_is_learned(rng):
    data, split, attrs = _separable_problem(rng)
    bank = dap.train_bank(data, split, attrs, dap.DapHyper(lr=0.1, epochs=500))
    assert bank.attribute_names == ("on", "bias")
    p = dap.posteriors(bank, data.features)
    truth = np.array([lab == "pos" for lab in data.labels])
    assert np.mean((p[:, 0] > 0.5) == truth) == 1.0
    np.testing.assert_allclose(bank.priors, [0.5, 0.5])


def test_zero_epochs_give_half(rng):
    data, split, attrs = _separable_problem(rng)
    bank = dap.train_bank(data, split, attrs, dap.DapHyper(epochs=0))
    np.testing.assert_array_equal(bank.weights, 0.0)
    np.testing.assert_array_equal(dap.posteriors(bank, data.features), 0.5)


def test_standardization_maps_back_to_raw_features(rng):
    X = rng.normal(3.0, [1.0, 10.0, 0.1], (40, 3))
    T = (X[:, :1] + 0.1 * X[:, 1:2] > 3.3).astype(float)
    W = dap.fit_logistic(X, T, lr=0.5, epochs=200, l2=0.0)
    mu, sd = X.mean(axis=0), X.std(axis=0)
    Wz = dap.fit_logistic((X - mu) / sd, T, lr=0.5, epochs=200, l2=0.0, standardize=False)
    np.testing.assert_allclose(X @ W[0, :-1] + W[0, -1], ((X - mu) / sd) @ Wz[0, :-1] + Wz[0, -1], atol=1e-9)


def test_all_positive_targets_dropped(rng):
    data, split, _ = _separable_problem(rng)
    attrs = normalize_columns(AttributeMatrix(np.array([[1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]), ["always", "on", "off"], ["neg", "pos"]))
    bank = dap.train_bank(data, split, attrs, dap.DapHyper(epochs=10))
    assert bank.attribute_names == ("on", "off")
    assert "always" in bank.dropped


def test_training_errors(rng):
    data, split, attrs = _separable_problem(rng)
    with pytest.raises(NoTrainingData):
        dap.train_bank(data, SplitSpec(["neg", "pos"], [], []), attrs)


def test_bank_round_trip(tmp_path, synth42):
    data, split, raw = synth42
    bank = dap.train_bank(data, split, expand(normalize_columns(raw)), dap.DapHyper(epochs=20))
    path = tmp_path / "bank.csv"
    path.write_text(dap.bank_csv(bank))
    back = dap.read_bank(path)
    np.testing.assert_array_equal(back.weights, bank.weights)
    np.testing.assert_array_equal(back.priors, bank.priors)
    np.testing.assert_array_equal(back.binarization_thresholds, bank.binarization_thresholds)
    assert back.attribute_names == bank.attribute_names
    assert dap.bank_csv(back) == path.read_text()
