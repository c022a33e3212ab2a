import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heartfl.dataset import Kind
from heartfl.errors import ConfigError, ContractError, UnsupportedFamilyError
from heartfl.models import (DEFAULT_GRIDS, Family, Hyperparams, TrainedModel, decision_function,
                            decision_value, evaluate, expand_grid, from_params, grid_search,
                            loss_and_grad, predict, predict_labels, train_model)
from heartfl.models import naive_bayes, search, sgd, trees

from conftest import blobs, make_ds


# Loss oracles written independently of heartfl.models.sgd (plain loops).
def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def lr_loss_ref(theta, X, y):
    w, b = theta[:-1], theta[-1]
    total = 0.0
    for xi, yi in zip(X, y):
        p = _sig(float(np.dot(w, xi) + b))
        total -= yi * math.log(p) + (1 - yi) * math.log(1 - p)
    return total / len(y)


def svm_loss_ref(theta, X, y, C, n_total):
    w, b = theta[:-1], theta[-1]
    hinge = sum(max(0.0, 1 - (1 if yi else -1) * (np.dot(w, xi) + b)) for xi, yi in zip(X, y))
    return float(np.dot(w, w)) / (2 * n_total) + C * hinge / len(y)


def nn_loss_ref(theta, X, y, h):
    p = X.shape[1]
    W1 = theta[:h * p].reshape(h, p)
    b1 = theta[h * p:h * p + h]
    w2 = theta[h * p + h:h * p + 2 * h]
    b2 = theta[-1]
    total = 0.0
    for xi, yi in zip(X, y):
        hid = [max(0.0, float(W1[j] @ xi + b1[j])) for j in range(h)]
        z = sum(a * v for a, v in zip(hid, w2)) + b2
        pr = _sig(z)
        total -= yi * math.log(pr) + (1 - yi) * math.log(1 - pr)
    return total / len(y)


def central_diff(f, theta, h=1e-5):
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def _random_case(rng, family):
    p = int(rng.integers(2, 6))
    m = int(rng.integers(1, 9))
    X = rng.normal(size=(m, p))
    y = rng.integers(0, 2, m)
    hidden = int(rng.integers(2, 6))
    k = sgd.n_params(family, p, hidden)
    theta = rng.normal(scale=0.7, size=k)
    return X, y, theta, hidden


@pytest.mark.parametrize("family", [Family.LR, Family.SVM, Family.NN1])
def test_gradient_matches_finite_differences(family):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        X, y, theta, h = _random_case(rng, family)
        C, n_total = float(rng.uniform(0.1, 5)), len(y) + int(rng.integers(0, 50))
        if family is Family.LR:
            ref = lambda t: lr_loss_ref(t, X, y)
        elif family is Family.SVM:
            ref = lambda t: svm_loss_ref(t, X, y, C, n_total)
        else:
            ref = lambda t: nn_loss_ref(t, X, y, h)
        loss, g = loss_and_grad(family, theta, X, y, C=C, n_total=n_total)
        assert loss == pytest.approx(ref(theta), abs=1e-10)
        worst = max(worst, np.abs(g - central_diff(ref, theta)).max())
    assert worst < 1e-4


def test_gradient_rejects_non_differentiable():
    with pytest.raises(UnsupportedFamilyError):
        sgd.gradient(Family.KNN, np.zeros(3), np.zeros((1, 2)), np.zeros(1))


def test_svm_separable_pair():
    ds = make_ds([[-1.0, 0.0], [1.0, 0.0]], [0, 1])
    m = train_model(Hyperparams(Family.SVM, learning_rate=0.1, batch_size=1, epochs=50), ds, 0)
    assert evaluate(m, ds) == 1.0


def test_svm_label_mapping_invariant():
    X, y = blobs(60, 3, seed=2)
    hp = Hyperparams(Family.SVM, learning_rate=0.05, batch_size=8, epochs=5, C=0.5)
    a = sgd.fit_sgd(Family.SVM, X, y, hp, seed=4)
    b = sgd.fit_sgd(Family.SVM, X, 2 * y - 1, hp, seed=4)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("family", list(Family))
def test_training_is_deterministic(family):
    X, y = blobs(80, 4, seed=3)
    ds = make_ds(X, y)
    hp = Hyperparams(family, epochs=3, n_estimators=5, max_depth=3)
    a, b = train_model(hp, ds, 9), train_model(hp, ds, 9)
    np.testing.assert_array_equal(decision_function(a, X), decision_function(b, X))


@pytest.mark.parametrize("family", list(Family))
def test_single_class_training_allowed(family):
    X, _ = blobs(20, 3, seed=1)
    ds = make_ds(X, np.ones(20, dtype=int))
    m = train_model(Hyperparams(family, epochs=2, n_estimators=3), ds, 0)
    acc = evaluate(m, ds)
    assert 0.0 <= acc <= 1.0


def test_empty_training_set():
    ds = make_ds(np.zeros((0, 2)), np.zeros(0, dtype=int))
    with pytest.raises(ContractError):
        train_model(Hyperparams(Family.LR), ds, 0)


def test_decision_value_examples():
    lr = from_params(Family.LR, np.zeros(3), 2)
    assert decision_value(lr, [3.0, -7.0]) == 0.5
    assert predict(lr, [3.0, -7.0]) == 0  # exactly on the threshold
    svm = from_params(Family.SVM, np.array([1.0, 0.0, -1.0]), 2)
    assert decision_value(svm, [1.0, 0.0]) == 0.0
    assert predict(svm, [1.0, 0.0]) == 0
    assert predict(svm, [0.8, 0.0]) == 0  # margin -0.2
    with pytest.raises(ContractError):
        decision_value(svm, [1.0, 0.0, 2.0])


def test_predict_threshold_on_probability():
    w = math.log(0.7 / 0.3)  # sigmoid(w) == 0.7
    lr = from_params(Family.LR, np.array([w, 0.0]), 1)
    assert decision_value(lr, [1.0]) == pytest.approx(0.7)
    assert predict(lr, [1.0]) == 1


def test_rf_of_identical_trees_equals_tree():
    X, y = blobs(100, 4, seed=5)
    tree = trees.build_tree(X, y, max_depth=3)
    dt = TrainedModel(Family.DT, 4, tree)
    rf = TrainedModel(Family.RF, 4, {"trees": [tree] * 7, "tree_seeds": [0] * 7})
    Xq = np.random.default_rng(0).normal(size=(50, 4))
    np.testing.assert_allclose(decision_function(rf, Xq), decision_function(dt, Xq), atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([None, 0, 1, 2, 4]))
def test_tree_depth_and_purity(seed, max_depth):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 60))
    X = rng.integers(0, 4, size=(n, 3)).astype(float)
    y = rng.integers(0, 2, n)
    t = trees.build_tree(X, y, max_depth)
    if max_depth is not None:
        assert t["depth"].max() <= max_depth
    else:
        # Every leaf is pure, or its rows are identical in every feature.
        leaves = trees.tree_proba(t, X)
        node_of = {}
        for i, row in enumerate(X):
            node_of.setdefault(_leaf_index(t, row), []).append(i)
        for rows in node_of.values():
            labels = set(y[rows])
            assert len(labels) == 1 or len({tuple(X[r]) for r in rows}) == 1
        assert ((leaves >= 0) & (leaves <= 1)).all()


def _leaf_index(t, x):
    node = 0
    while t["feature"][node] >= 0:
        node = t["left"][node] if x[t["feature"][node]] <= t["threshold"][node] else t["right"][node]
    return node


def test_tree_split_tie_breaks_to_lowest_feature():
    # Features 0 and 2 separate the classes equally well; feature 0 must win.
    X = np.array([[0, 5, 0], [0, 1, 0], [1, 3, 1], [1, 2, 1]], dtype=float)
    y = np.array([0, 0, 1, 1])
    t = trees.build_tree(X, y)
    assert t["feature"][0] == 0 and t["threshold"][0] == 0.5


def test_tree_threshold_is_midpoint():
    X = np.array([[1.0], [2.0], [4.0], [8.0]])
    t = trees.build_tree(X, np.array([0, 0, 1, 1]))
    assert t["threshold"][0] == 3.0


def test_gini_split_against_brute_force():
    rng = np.random.default_rng(11)
    X = rng.integers(0, 6, size=(40, 3)).astype(float)
    y = rng.integers(0, 2, 40)

    def gini(lbls):
        if not len(lbls):
            return 0.0
        q = np.mean(lbls)
        return 1 - q ** 2 - (1 - q) ** 2

    best = None
    for f in range(3):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            left = X[:, f] <= thr
            score = left.sum() * gini(y[left]) + (~left).sum() * gini(y[~left])
            if best is None or score < best[0] - 1e-9:
                best = (score, f, thr)
    assert trees.best_split(X, y, range(3)) == (best[1], best[2])


def test_forest_seeds_recorded_and_reproducible():
    X, y = blobs(60, 5, seed=8)
    a = trees.build_forest(X, y, n_estimators=4, seed=3)
    b = trees.build_forest(X, y, n_estimators=4, seed=3)
    assert a["tree_seeds"] == b["tree_seeds"] and len({tuple(np.atleast_1d(s)) for s in a["tree_seeds"]}) == 4
    np.testing.assert_array_equal(trees.forest_proba(a, X), trees.forest_proba(b, X))


def test_knn_k1_training_accuracy():
    X, y = blobs(70, 3, seed=4)
    ds = make_ds(X, y)
    assert evaluate(train_model(Hyperparams(Family.KNN, k=1), ds, 0), ds) == 1.0


def test_knn_distance_ties_prefer_lower_index():
    X = np.array([[1.0], [-1.0], [5.0]])
    m = train_model(Hyperparams(Family.KNN, k=1), make_ds(X, [1, 0, 0]), 0)
    assert decision_value(m, [0.0]) == 1.0
    m = train_model(Hyperparams(Family.KNN, k=1), make_ds(X, [0, 1, 0]), 0)
    assert decision_value(m, [0.0]) == 0.0


def test_naive_bayes_against_direct_formula():
    rng = np.random.default_rng(2)
    n = 50
    X = np.column_stack([rng.normal(size=n), rng.integers(0, 3, n)]).astype(float)
    y = rng.integers(0, 2, n)
    alpha = 0.7
    pay = naive_bayes.fit(X, y, [Kind.CONTINUOUS, Kind.CATEGORICAL], alpha)
    x = np.array([0.3, 2.0])
    joint = []
    for c in (0, 1):
        rows = X[y == c]
        prior = len(rows) / n
        mu, var = rows[:, 0].mean(), rows[:, 0].var()
        gauss = math.exp(-(x[0] - mu) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
        cat = ((rows[:, 1] == 2).sum() + alpha) / (len(rows) + alpha * 4)
        joint.append(prior * gauss * cat)
    assert naive_bayes.proba(pay, x)[0] == pytest.approx(joint[1] / sum(joint), rel=1e-10)
    # an unseen category still gets smoothed mass
    assert 0 < naive_bayes.proba(pay, np.array([0.3, 9.0]))[0] < 1


def test_majority_model_on_balanced_set():
    ds = make_ds(np.zeros((10, 2)), [0, 1] * 5)
    const = from_params(Family.LR, np.array([0.0, 0.0, 3.0]), 2)
    assert evaluate(const, ds) == 0.5
    with pytest.raises(ContractError):
        evaluate(const, ds.take([]))


@pytest.mark.parametrize("family", list(Family))
def test_accuracy_bounds_and_probability_range(family):
    X, y = blobs(90, 4, seed=6)
    ds = make_ds(X, y)
    m = train_model(Hyperparams(family, epochs=5, n_estimators=5), ds, 1)
    acc = evaluate(m, ds)
    assert 0.0 <= acc <= 1.0
    if family is not Family.SVM:
        v = decision_function(m, X)
        assert ((v >= 0) & (v <= 1)).all()
    assert acc > 0.7  # the blobs are well separated


def test_predict_labels_matches_scalar_predict():
    X, y = blobs(30, 4, seed=9)
    m = train_model(Hyperparams(Family.NN1, epochs=3), make_ds(X, y), 0)
    assert predict_labels(m, X).tolist() == [predict(m, x) for x in X]


def test_hyperparams_validation():
    with pytest.raises(ConfigError):
        Hyperparams("XGB")
    with pytest.raises(ConfigError):
        Hyperparams(Family.SVM, C=0)
    assert Hyperparams("1lnn").family is Family.NN1


def test_default_grids_inside_ranges():
    bounds = {"learning_rate": (0.001, 0.1), "batch_size": (4, 64), "hidden_units": (4, 16),
              "C": (0.01, 10), "alpha": (0.1, 10), "n_estimators": (100, 500), "k": (1, 10)}
    for fam, grid in DEFAULT_GRIDS.items():
        for hp in expand_grid(fam, grid):
            for key, (lo, hi) in bounds.items():
                assert lo <= getattr(hp, key) <= hi or key not in grid
            assert hp.max_depth is None or 0 <= hp.max_depth <= 10


def test_grid_search_single_point(synth_ds):
    hp, acc = grid_search(Family.KNN, {"k": [3]}, [0, 1], synth_ds)
    assert hp.k == 3
    expected = np.mean([search.holdout_accuracy(hp, synth_ds, s) for s in (0, 1)])
    assert acc == expected


def test_grid_search_dominance_and_tie_break(monkeypatch, synth_ds):
    table = {1: [0.5, 0.6], 2: [0.7, 0.8], 3: [0.7, 0.8]}
    monkeypatch.setattr(search, "holdout_accuracy",
                        lambda hp, ds, seed, frac=0.66: table[hp.k][seed])
    hp, acc = grid_search(Family.KNN, {"k": [1, 2, 3]}, [0, 1], synth_ds)
    assert hp.k == 2 and acc == pytest.approx(0.75)


def test_grid_search_rejects_bad_grid(synth_ds):
    with pytest.raises(ConfigError):
        grid_search(Family.KNN, {}, [0], synth_ds)
    with pytest.raises(ConfigError):
        grid_search(Family.KNN, {"k": [1]}, [], synth_ds)
    with pytest.raises(ConfigError):
        grid_search(Family.KNN, {"depth": [1]}, [0], synth_ds)
