import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlbatch import data
from mlbatch.data import (Dataset, LabelValueError, MissingLabelError, ParseError, kfold,
                          load_arff, load_csv, stats, write_csv)


def test_tiny_arff_trailing_label(tmp_path):
    path = tmp_path / "tiny.arff"
    path.write_text(
        "@relation tiny\n"
        "@attribute a numeric\n"
        "@attribute b real\n"
        "@attribute y {0,1}\n"
        "@data\n"
        "1.5,2,1\n"
        "0,-1,0\n"
        "3,4,1\n"
    )
    ds = load_arff(path, 1)
    assert ds.features.shape == (3, 2)
    assert ds.labels.shape == (3, 1)
    np.testing.assert_array_equal(ds.features, [[1.5, 2], [0, -1], [3, 4]])
    np.testing.assert_array_equal(ds.labels[:, 0], [1, 0, 1])
    assert ds.label_names == ["y"]


def test_arff_sparse_with_xml_labels_and_mixed_case(tmp_path):
    arff = tmp_path / "sp.arff"
    arff.write_text(
        "% comment\n"
        "@RELATION 'sparse data'\n"
        "@ATTRIBUTE 'lab one' {0,1}\n"
        "@attribute f1 NUMERIC\n"
        "@attribute f2 numeric\n"
        "@attribute lab2 {0,1}\n"
        "@DATA\n"
        "{1 2.5, 3 1}\n"
        "{0 1}\n"
        "{}\n"
    )
    xml = tmp_path / "sp.xml"
    xml.write_text('<labels xmlns="http://mulan.sourceforge.net/labels">\n'
                   '<label name="lab one"></label>\n<label name="lab2"></label>\n</labels>\n')
    ds = load_arff(arff, xml)
    assert ds.feature_names == ["f1", "f2"]
    assert ds.label_names == ["lab one", "lab2"]
    np.testing.assert_array_equal(ds.features, [[2.5, 0], [0, 0], [0, 0]])
    np.testing.assert_array_equal(ds.labels, [[0, 1], [1, 0], [0, 0]])


def test_arff_plain_label_list(tmp_path):
    arff = tmp_path / "d.arff"
    arff.write_text("@relation r\n@attribute y1 {0,1}\n@attribute x numeric\n"
                    "@attribute y2 numeric\n@data\n1,0.5,0\n0,0.25,1\n")
    labels = tmp_path / "labels.txt"
    labels.write_text("y2\ny1\n")
    ds = load_arff(arff, labels)
    assert ds.label_names == ["y2", "y1"]
    np.testing.assert_array_equal(ds.labels, [[0, 1], [1, 0]])


def test_arff_malformed_header_reports_line(tmp_path):
    arff = tmp_path / "bad.arff"
    arff.write_text("@relation r\n@attribute x numeric\n@attribute\n@data\n1\n")
    with pytest.raises(ParseError) as err:
        load_arff(arff, 1)
    assert err.value.line == 3


def test_arff_missing_label(tmp_path):
    arff = tmp_path / "d.arff"
    arff.write_text("@relation r\n@attribute x numeric\n@attribute y {0,1}\n@data\n1,0\n")
    labels = tmp_path / "l.txt"
    labels.write_text("nope\n")
    with pytest.raises(MissingLabelError):
        load_arff(arff, labels)


def test_arff_non_binary_label(tmp_path):
    arff = tmp_path / "d.arff"
    arff.write_text("@relation r\n@attribute x numeric\n@attribute y numeric\n@data\n1,2\n")
    with pytest.raises(LabelValueError):
        load_arff(arff, 1)


def test_arff_rejects_string_attributes(tmp_path):
    arff = tmp_path / "d.arff"
    arff.write_text("@relation r\n@attribute s string\n@attribute y {0,1}\n@data\nabc,1\n")
    with pytest.raises(ParseError):
        load_arff(arff, 1)


def _write(tmp_path, text):
    path = tmp_path / "d.csv"
    path.write_text(text)
    return path


def test_csv_basic(tmp_path):
    path = _write(tmp_path, "a,b,y\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n")
    ds = load_csv(path, 1)
    assert ds.features.shape == (4, 2)
    assert ds.labels.shape == (4, 1)


def test_csv_label_two_rejected(tmp_path):
    with pytest.raises(LabelValueError):
        load_csv(_write(tmp_path, "a,y\n1,2\n"), 1)


def test_csv_empty_file(tmp_path):
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, ""), 1)


def test_csv_ragged(tmp_path):
    with pytest.raises(ParseError) as err:
        load_csv(_write(tmp_path, "a,b,y\n1,2,0\n3,1\n"), 1)
    assert err.value.line == 3


def test_stats_examples():
    ds = Dataset(np.zeros((2, 1)), [[1, 1], [1, 0]])
    s = stats(ds)
    assert s.card == 1.5
    assert s.dens == 0.75
    zero = stats(Dataset(np.zeros((3, 1)), np.zeros((3, 4), dtype=int)))
    assert zero.card == 0 and zero.dens == 0


@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_card_row_and_column_sums_agree(n, q, seed):
    Y = np.random.default_rng(seed).integers(0, 2, size=(n, q))
    ds = Dataset(np.zeros((n, 1)), Y)
    by_rows = sum(int(r.sum()) for r in ds.labels) / n
    by_cols = sum(int(c.sum()) for c in ds.labels.T) / n
    assert by_rows == by_cols == stats(ds).card


def test_kfold_examples():
    split = kfold(10, 5, seed=3)
    assert sorted(split.sizes()) == [2] * 5
    np.testing.assert_array_equal(split.assignments, kfold(10, 5, seed=3).assignments)
    assert sorted(kfold(7, 5, seed=0).sizes()) == [1, 1, 1, 2, 2]
    with pytest.raises(ValueError):
        kfold(4, 5, seed=0)


@settings(max_examples=50)
@given(st.integers(2, 200), st.integers(2, 10), st.integers(0, 1000))
def test_kfold_partitions(n, k, seed):
    if k > n:
        return
    split = kfold(n, k, seed)
    parts = [set(split.indices(f).tolist()) for f in range(k)]
    assert set().union(*parts) == set(range(n))
    assert sum(len(p) for p in parts) == n
    sizes = split.sizes()
    assert sizes.max() - sizes.min() <= 1


def test_train_val_test_disjoint():
    split = kfold(23, 5, seed=1)
    for fold in range(5):
        tr, va, te = split.train_val_test(fold)
        assert not (set(tr) & set(va) or set(tr) & set(te) or set(va) & set(te))
        assert len(tr) + len(va) + len(te) == 23


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 12), d=st.integers(1, 4), q=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_csv_round_trip(tmp_path_factory, n, d, q, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((n, d)) * 10.0 ** rng.integers(-5, 5),
                 rng.integers(0, 2, size=(n, q)))
    path = tmp_path_factory.mktemp("rt") / "ds.csv"
    write_csv(ds, path)
    back = load_csv(path, q)
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_allclose(back.features, ds.features, rtol=0, atol=1e-12)
    assert back.label_names == ds.label_names


def test_dataset_invariants():
    with pytest.raises(LabelValueError):
        Dataset(np.zeros((1, 1)), [[0.5]])
    with pytest.raises(data.DataError):
        Dataset(np.zeros((2, 1)), [[1]])
    with pytest.raises(data.DataError):
        Dataset(np.zeros((1, 1)), [[1, 0]], label_names=["a", "a"])
    ds = Dataset(np.zeros((2, 2)), [[1], [0]])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_synthetic_rates():
    ds = data.make_synthetic(n=2000, d=20, q=10, rare_labels=2, rare_rate=0.02, seed=0)
    assert (ds.n, ds.d, ds.q) == (2000, 20, 10)
    np.testing.assert_array_equal(ds.labels[:, :2].sum(axis=0), [40, 40])
    assert (ds.labels[:, 2:].mean(axis=0) >= 0.1).all()
