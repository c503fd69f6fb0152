import dataclasses
import hashlib
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unimodal_ordinal import data
from unimodal_ordinal.data import (
    ColumnSpec,
    DataFormatError,
    DatasetDescriptor,
    TabularPreprocessor,
    discretize_target,
    fit_transform_features,
    load_csv,
    stratified_kfold,
)

TOY = DatasetDescriptor.from_dict({
    "id": "toy",
    "filename": "toy.csv",
    "columns": [
        {"name": "size", "kind": "numeric"},
        {"name": "colour", "kind": "categorical", "categories": ["red", "blue"]},
        {"name": "grade", "kind": "target"},
    ],
    "target_order": ["low", "mid", "high"],
})


def write(tmp_path, text, name="toy.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_toy_file_round_trip(tmp_path):
    p = write(tmp_path, "1.25,red,low\n-3e-2,blue,high\n0.1,red,mid\n")
    ds = load_csv(p, TOY)
    assert ds.n_samples == 3 and ds.n_classes == 3
    assert [ds.raw[i, 0] for i in range(3)] == [1.25, -0.03, 0.1]
    assert list(ds.raw[:, 1]) == ["red", "blue", "red"]
    assert list(ds.labels) == [1, 3, 2]
    assert ds.sha256 == hashlib.sha256(p.read_bytes()).hexdigest()


@pytest.mark.parametrize("text,line,needle", [
    ("1,red,low\n2,red\n", 2, "expected 3 fields"),
    ("1,red,low\n2,red,mid\nx,red,low\n", 3, "not numeric"),
    ("1,green,low\n", 1, "unknown category"),
    ("1,red,low\n?,red,mid\n", 2, "missing value"),
])
def test_malformed_rows_report_line_numbers(tmp_path, text, line, needle):
    p = write(tmp_path, text)
    with pytest.raises(DataFormatError, match=f"toy.csv:{line}: .*{needle}"):
        load_csv(p, TOY)


def test_unknown_target_and_empty_class(tmp_path):
    with pytest.raises(DataFormatError, match="unknown target"):
        load_csv(write(tmp_path, "1,red,huge\n"), TOY)
    with pytest.raises(DataFormatError, match="empty"):
        load_csv(write(tmp_path, "1,red,low\n2,blue,high\n"), TOY)


def test_checksum_mismatch(tmp_path):
    p = write(tmp_path, "1,red,low\n2,blue,mid\n3,red,high\n")
    bad = dataclasses.replace(TOY, sha256="0" * 64)
    with pytest.raises(DataFormatError, match="sha256"):
        load_csv(p, bad)


def test_registered_descriptors():
    assert data.available_datasets() == ["abalone10", "balance-scale", "car", "new-thyroid"]
    cards = {d: data.get_descriptor(d) for d in data.available_datasets()}
    assert (cards["abalone10"].n_rows, cards["abalone10"].n_classes) == (4177, 10)
    assert (cards["balance-scale"].n_rows, cards["balance-scale"].n_classes) == (625, 3)
    assert (cards["car"].n_rows, cards["car"].n_classes) == (1728, 4)
    assert (cards["new-thyroid"].n_rows, cards["new-thyroid"].n_classes) == (215, 3)
    assert cards["car"].target_order == ("unacc", "acc", "good", "vgood")
    with pytest.raises(KeyError):
        data.get_descriptor("iris")


def test_missing_file_has_a_hint(tmp_path):
    with pytest.raises(data.DatasetNotFoundError, match="fetch_datasets"):
        data.load_dataset("car", tmp_path)
    with pytest.raises(data.DatasetNotFoundError, match="generate balance-scale"):
        data.load_dataset("balance-scale", tmp_path)


def test_balance_scale_generator(tmp_path):
    path = data.write_balance_scale(tmp_path)
    ds = data.load_dataset("balance-scale", tmp_path)
    assert ds.n_samples == 625 and ds.n_classes == 3
    assert list(ds.class_counts()) == [288, 49, 288]
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    assert digest == "5611187ef7345d807aa8ae22615945ade52a190537c0b1434bd44c3e877c5bb4"
    # label is decided by the torques
    w = ds.raw.astype(float)
    torque = np.sign(w[:, 2] * w[:, 3] - w[:, 0] * w[:, 1])
    assert np.array_equal(ds.labels, torque.astype(int) + 2)


# ------------------------------------------------------------------- binning

def test_equal_frequency_deciles():
    labels, edges = discretize_target(np.arange(1, 101), 10)
    assert np.array_equal(np.bincount(labels)[1:], [10] * 10)
    assert np.array_equal(labels, np.repeat(np.arange(1, 11), 10))
    assert edges.size == 11


def test_equal_width_bins():
    labels, edges = discretize_target([0, 1, 2, 3, 4, 9, 10], 2, "equal_width")
    assert list(labels) == [1, 1, 1, 1, 1, 2, 2]
    assert np.allclose(edges, [0, 5, 10])


def test_binning_errors():
    with pytest.raises(ValueError):
        discretize_target([1, 2, 3], 1)
    with pytest.raises(ValueError, match="distinct"):
        discretize_target([1, 1, 2], 3)
    with pytest.raises(ValueError, match="empty"):
        discretize_target([0, 0, 0, 0, 1, 10], 3, "equal_width")
    with pytest.raises(ValueError):
        discretize_target([1, 2, 3], 2, "kmeans")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=20, max_size=200), st.integers(2, 6))
def test_binning_labels_are_monotone(values, K):
    x = np.array(values, dtype=float)
    try:
        labels, _ = discretize_target(x, K)
    except ValueError:
        return
    order = np.argsort(x, kind="stable")
    assert np.all(np.diff(labels[order]) >= 0)
    assert set(labels) == set(range(1, K + 1))


# ------------------------------------------------------------- preprocessing

def test_preprocessor_examples():
    schema = (ColumnSpec("a", "numeric"), ColumnSpec("c", "numeric"), ColumnSpec("k", "categorical"))
    X = np.array([[3.0, 1.0, "x"], [7.0, 1.0, "y"]], dtype=object)    # column a: mean 5, std 2
    prep = TabularPreprocessor(schema).fit(X)
    out = prep.transform(np.array([[7.0, 1.0, "x"]], dtype=object))
    assert np.allclose(out, [[1.0, 0.0, 1.0, 0.0]])
    assert list(prep.get_feature_names_out()) == ["a", "c", "k=x", "k=y"]
    with pytest.raises(ValueError, match="unknown categories"):
        prep.transform(np.array([[1.0, 1.0, "z"]], dtype=object))
    with pytest.raises(ValueError):
        prep.transform(np.zeros((1, 2)))


def test_standardised_training_block():
    rng = np.random.default_rng(0)
    schema = tuple(ColumnSpec(f"x{i}", "numeric") for i in range(4))
    X = (rng.normal(size=(200, 4)) * [1, 10, 0.1, 3] + [5, -2, 0, 100]).astype(object)
    Z = TabularPreprocessor(schema).fit_transform(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-10)
    assert np.all(np.abs(Z.std(axis=0) - 1) < 1e-10)


def test_no_leakage_from_held_out_rows(tmp_path):
    data.write_balance_scale(tmp_path)
    ds = data.load_dataset("balance-scale", tmp_path)
    split = stratified_kfold(ds.labels, 5, seed=0)
    train, test = split.train_test(1)
    prep, Xtr, Xte = fit_transform_features(ds, train, test)
    raw_tr = ds.raw[train].astype(float)
    assert np.allclose(Xte, (ds.raw[test].astype(float) - raw_tr.mean(0)) / raw_tr.std(0))
    # changing held-out rows leaves the fitted statistics untouched
    tampered = ds.raw.copy()
    tampered[test] = 99.0
    prep2 = TabularPreprocessor(ds.schema).fit(tampered[train])
    assert prep.means_ == prep2.means_ and prep.scales_ == prep2.scales_


# --------------------------------------------------------------------- folds

def test_fold_examples():
    split = stratified_kfold(np.repeat([1, 2], 50), 5, seed=0)
    for fold in split.folds:
        assert np.array_equal(np.bincount(np.repeat([1, 2], 50)[fold])[1:], [10, 10])
    labels = np.repeat([1, 2, 3], [30, 15, 5])
    split = stratified_kfold(labels, 5, seed=3)
    for fold in split.folds:
        assert list(np.bincount(labels[fold], minlength=4)[1:]) == [6, 3, 1]
    again = stratified_kfold(labels, 5, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(split.folds, again.folds))
    assert split.validation_fold == 0 and split.evaluation_folds == [1, 2, 3, 4]


def test_rare_class_warning():
    labels = np.repeat([1, 2], [20, 3])
    with pytest.warns(UserWarning):
        split = stratified_kfold(labels, 5)
    assert split.warnings


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=20, max_size=300), st.integers(0, 1000))
def test_folds_partition_and_stratify(labels, seed):
    labels = np.array(labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        split = stratified_kfold(labels, 5, seed)
    everything = np.sort(np.concatenate(split.folds))
    assert np.array_equal(everything, np.arange(labels.size))
    for c in np.unique(labels):
        n_c = int(np.sum(labels == c))
        for fold in split.folds:
            assert abs(np.sum(labels[fold] == c) - n_c / 5) < 1 + 1e-9
    for f in range(5):
        train, test = split.train_test(f)
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == labels.size


def test_sidecars(tmp_path):
    ds = data.TabularDataset(raw=np.zeros((6, 1), dtype=object), labels=np.array([1, 2] * 3),
                             n_classes=2, schema=(ColumnSpec("x", "numeric"),),
                             bin_edges=np.array([0.0, 0.5, 1.0]), name="toy")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        split = stratified_kfold(ds.labels, 3, seed=1)
    paths = data.write_sidecars(ds, split, tmp_path)
    assert [p.name for p in paths] == ["toy.bin_edges.txt", "toy.folds.seed1.txt"]
    assert paths[0].read_text().split() == ["0.0", "0.5", "1.0"]
    lines = paths[1].read_text().splitlines()
    assert lines[0] == "# fold 1: validation"
    got = sorted(int(i) for line in lines[1::2] for i in line.split())
    assert got == list(range(6))
