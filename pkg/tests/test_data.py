import numpy as np
import pytest

from oxyforest.data import (
    BipartiteDataset,
    CvSplit,
    carve_split,
    load_dataset,
    load_matrix,
    mask_positives,
    save_matrix,
    stratified_kfold,
)
from oxyforest.errors import DataError, UsageError
from oxyforest.rng import Rng


def _toy(seed=0, n1=12, n2=9, density=0.4):
    rng = np.random.default_rng(seed)
    return BipartiteDataset(
        rng.random((n1, 4)),
        rng.random((n2, 3)),
        (rng.random((n1, n2)) < density).astype(np.float64),
    )


def test_matrix_roundtrip(tmp_path):
    p = tmp_path / "m.tsv"
    a = np.random.default_rng(0).random((5, 3))
    save_matrix(p, a)
    assert np.array_equal(load_matrix(p), a)


def test_load_matrix_skips_comments_and_blanks(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text("# header comment\n1.5\t2\n\n3\t4.25\n")
    assert np.array_equal(load_matrix(p), [[1.5, 2.0], [3.0, 4.25]])


def test_load_matrix_errors_are_data_errors(tmp_path):
    with pytest.raises(DataError):
        load_matrix(tmp_path / "missing.tsv")
    ragged = tmp_path / "ragged.tsv"
    ragged.write_text("1\t2\n3\n")
    with pytest.raises(DataError):
        load_matrix(ragged)
    junk = tmp_path / "junk.tsv"
    junk.write_text("1\ttwo\n")
    with pytest.raises(DataError):
        load_matrix(junk)
    inf = tmp_path / "inf.tsv"
    inf.write_text("1\tinf\n")
    with pytest.raises(DataError):
        load_matrix(inf)


def test_load_matrix_empty_policy(tmp_path):
    p = tmp_path / "empty.tsv"
    p.write_text("# nothing\n")
    with pytest.raises(DataError):
        load_matrix(p)
    assert load_matrix(p, allow_empty=True).shape == (0, 0)


def test_dataset_validates_shapes_and_labels():
    x1 = np.zeros((3, 2))
    x2 = np.zeros((4, 2))
    with pytest.raises(UsageError):
        BipartiteDataset(x1, x2, np.zeros((3, 3)))
    y = np.zeros((3, 4))
    y[0, 0] = 0.5
    with pytest.raises(UsageError):
        BipartiteDataset(x1, x2, y)


def test_dataset_similarity_features_must_be_square():
    x1 = np.eye(3)
    x2 = np.zeros((4, 3))
    with pytest.raises(UsageError):
        BipartiteDataset(x1, x2, np.zeros((3, 4)), similarity_features=True)


def test_load_dataset_roundtrip(tmp_path):
    ds = _toy()
    for name, mat in (("x1", ds.x1), ("x2", ds.x2), ("y", ds.y)):
        save_matrix(tmp_path / f"{name}.tsv", mat)
    back = load_dataset(tmp_path / "x1.tsv", tmp_path / "x2.tsv",
                        tmp_path / "y.tsv")
    assert np.array_equal(back.y, ds.y)


def test_kfold_partitions_each_domain():
    ds = _toy()
    splits = stratified_kfold(ds, 3, 2, Rng(5))
    assert len(splits) == 6
    row_tests = {s.fold[0]: s.row_test for s in splits}
    col_tests = {s.fold[1]: s.col_test for s in splits}
    assert np.array_equal(np.sort(np.concatenate(list(row_tests.values()))),
                          np.arange(ds.n1))
    assert np.array_equal(np.sort(np.concatenate(list(col_tests.values()))),
                          np.arange(ds.n2))
    for s in splits:
        assert np.intersect1d(s.row_train, s.row_test).size == 0
        assert np.intersect1d(s.col_train, s.col_test).size == 0
        assert s.row_train.size + s.row_test.size == ds.n1


def test_kfold_is_degree_stratified():
    # 8 rows with degrees 0,0,0,0,3,3,3,3: every fold must get two of each
    x1 = np.zeros((8, 1))
    x2 = np.zeros((3, 1))
    y = np.zeros((8, 3))
    y[4:, :] = 1.0
    ds = BipartiteDataset(x1, x2, y)
    for seed in range(10):
        splits = stratified_kfold(ds, 4, 3, Rng(seed))
        for s in splits:
            assert (ds.y[s.row_test].sum(axis=1) == 0).sum() == 1
            assert (ds.y[s.row_test].sum(axis=1) == 3).sum() == 1


def test_kfold_fold_sizes_balanced():
    ds = _toy(n1=13, n2=7)
    splits = stratified_kfold(ds, 3, 2, Rng(0))
    row_sizes = sorted({s.fold[0]: s.row_test.size for s in splits}.values())
    assert row_sizes == [4, 4, 5]


def test_kfold_validation():
    ds = _toy()
    with pytest.raises(UsageError):
        stratified_kfold(ds, 1, 2, Rng(0))
    with pytest.raises(UsageError):
        stratified_kfold(ds, 2, ds.n2 + 1, Rng(0))


def test_mask_positives_counts_and_locations():
    ds = _toy(seed=3)
    split = stratified_kfold(ds, 2, 2, Rng(1))[0]
    y_ld = ds.y[np.ix_(split.row_train, split.col_train)]
    n_pos = int(y_ld.sum())
    for pmp in (0.0, 0.25, 0.5, 0.75):
        masked, y_learn, eval_td = mask_positives(ds, split, pmp, Rng(2))
        want = int(np.floor(pmp * n_pos + 0.5))
        assert masked.masked_dyads.shape[0] == want
        assert int(y_ld.sum() - y_learn.sum()) == want
        for r, c in masked.masked_dyads:
            assert ds.y[r, c] == 1.0
        assert int(eval_td.labels.sum()) == want
        assert eval_td.labels.shape[0] == want + int((y_ld == 0).sum())


def test_mask_rounding_is_half_up():
    # 2 learning positives at pmp 0.25 -> round(0.5) masks 1, not
    # banker's 0
    y = np.zeros((4, 4))
    y[0, 0] = y[1, 1] = 1.0
    ds = BipartiteDataset(np.zeros((4, 1)), np.zeros((4, 1)), y)
    split = CvSplit(
        row_train=np.array([0, 1]), row_test=np.array([2, 3]),
        col_train=np.array([0, 1]), col_test=np.array([2, 3]),
        fold=(0, 0))
    masked, _, _ = mask_positives(ds, split, 0.25, Rng(0))
    assert masked.masked_dyads.shape[0] == 1


def test_mask_validation():
    ds = _toy()
    split = stratified_kfold(ds, 2, 2, Rng(0))[0]
    with pytest.raises(UsageError):
        mask_positives(ds, split, 1.0, Rng(0))
    with pytest.raises(UsageError):
        mask_positives(ds, split, -0.1, Rng(0))


def test_carve_split_regions_align():
    ds = _toy(seed=7)
    split, y_learn, eval_td = mask_positives(
        ds, stratified_kfold(ds, 2, 2, Rng(3))[1], 0.5, Rng(4))
    carved = carve_split(ds, split)
    assert np.array_equal(carved.y_learn, y_learn)
    assert np.array_equal(
        carved.y_lt, ds.y[np.ix_(split.row_train, split.col_test)])
    assert np.array_equal(
        carved.y_tl, ds.y[np.ix_(split.row_test, split.col_train)])
    assert np.array_equal(
        carved.y_tt, ds.y[np.ix_(split.row_test, split.col_test)])
    assert carved.x1_train.shape[0] == split.row_train.size
    assert carved.x1_test.shape[0] == split.row_test.size
    assert np.array_equal(carved.eval_td.rows, eval_td.rows)
    assert np.array_equal(carved.eval_td.labels, eval_td.labels)


def test_carve_split_restricts_similarity_columns():
    rng = np.random.default_rng(9)
    s1 = rng.random((10, 10))
    s2 = rng.random((6, 6))
    y = (rng.random((10, 6)) < 0.5).astype(np.float64)
    ds = BipartiteDataset(s1, s2, y, similarity_features=True)
    split = stratified_kfold(ds, 2, 2, Rng(0))[0]
    carved = carve_split(ds, split)
    assert carved.x1_train.shape == (split.row_train.size,
                                     split.row_train.size)
    assert carved.x1_test.shape == (split.row_test.size,
                                    split.row_train.size)
    assert np.array_equal(
        carved.x1_test,
        s1[np.ix_(split.row_test, split.row_train)])
