"""Tests for the dataset readers.

Both readers are strict: every malformed-input case must fail with the
offending line number, and well-formed input must round-trip into the dense
representations used by the problem builders.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from svrpl.errors import DataError
from svrpl.ingest import LabeledDataset, ReturnsTable, read_libsvm, read_returns_csv, subsample


def _write(tmp_path, name, text):
    f = tmp_path / name
    f.write_text(text, encoding="utf-8")
    return f


class TestReadLibsvm:
    def test_basic_line(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "a.txt", "+1 1:0.5 3:2\n"))
        assert len(ds) == 1
        feats, label = ds.rows[0]
        assert label == 1.0
        assert feats == {1: 0.5, 3: 2.0}
        assert ds.dim >= 3

    def test_label_sign_mapping(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "b.txt", "3 1:1\n0 1:1\n-2 1:1\n"))
        assert [r[1] for r in ds.rows] == [1.0, -1.0, -1.0]

    def test_empty_file_gives_empty_dataset(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "c.txt", ""))
        assert len(ds) == 0 and ds.dim == 0

    def test_blank_lines_skipped(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "d.txt", "\n+1 1:1\n\n\n-1 2:1\n"))
        assert len(ds) == 2

    def test_crlf_line_endings(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "e.txt", "+1 1:0.5\r\n-1 2:1\r\n"))
        assert len(ds) == 2
        assert ds.rows[0][0] == {1: 0.5}

    def test_bad_label_reports_line(self, tmp_path):
        with pytest.raises(DataError) as err:
            read_libsvm(_write(tmp_path, "f.txt", "+1 1:1\nabc 1:2\n"))
        assert "line 2" in str(err.value)

    def test_bad_feature_value_reports_line(self, tmp_path):
        with pytest.raises(DataError) as err:
            read_libsvm(_write(tmp_path, "g.txt", "abc 1:x\n"))
        assert "line 1" in str(err.value)

    def test_nonascending_indices_rejected(self, tmp_path):
        with pytest.raises(DataError) as err:
            read_libsvm(_write(tmp_path, "h.txt", "+1 3:1 2:1\n"))
        assert "ascending" in str(err.value)
        with pytest.raises(DataError):
            read_libsvm(_write(tmp_path, "h2.txt", "+1 2:1 2:5\n"))

    def test_zero_index_rejected(self, tmp_path):
        with pytest.raises(DataError):
            read_libsvm(_write(tmp_path, "i.txt", "+1 0:1\n"))

    def test_label_filter_keeps_two_classes(self, tmp_path):
        text = "1 1:1\n2 1:2\n3 1:3\n2 2:4\n"
        ds = read_libsvm(_write(tmp_path, "j.txt", text), label_filter=(3, 2))
        assert len(ds) == 3
        assert [r[1] for r in ds.rows] == [-1.0, 1.0, -1.0]

    def test_to_dense_layout_and_scale(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "k.txt", "+1 1:2 3:4\n-1 2:6\n"))
        A, b = ds.to_dense()
        assert_allclose(A, [[2.0, 0.0, 4.0], [0.0, 6.0, 0.0]])
        assert_allclose(b, [1.0, -1.0])
        A2, _ = ds.to_dense(feature_scale=0.5)
        assert_allclose(A2, 0.5 * A)

    def test_dimension_is_max_seen_index(self, tmp_path):
        ds = read_libsvm(_write(tmp_path, "l.txt", "+1 7:1\n-1 2:1\n"))
        assert ds.dim == 7
        A, _ = ds.to_dense()
        assert A.shape == (2, 7)


class TestReadReturnsCsv:
    def test_two_by_two(self, tmp_path):
        t = read_returns_csv(_write(tmp_path, "r.csv", "1.0,2.0\n3.0,4.0\n"))
        assert_allclose(t.values, [[1.0, 2.0], [3.0, 4.0]])
        assert len(t) == 2

    def test_ragged_rows_rejected(self, tmp_path):
        with pytest.raises(DataError) as err:
            read_returns_csv(_write(tmp_path, "r2.csv", "1,2\n3\n"))
        assert "row 2" in str(err.value)

    def test_non_numeric_rejected(self, tmp_path):
        with pytest.raises(DataError) as err:
            read_returns_csv(_write(tmp_path, "r3.csv", "1,2\nx,4\n"))
        assert "row 2" in str(err.value)

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(DataError):
            read_returns_csv(_write(tmp_path, "r4.csv", "1,inf\n"))

    def test_header_skip(self, tmp_path):
        t = read_returns_csv(_write(tmp_path, "r5.csv", "a,b\n1,2\n"),
                             skip_header=True)
        assert_allclose(t.values, [[1.0, 2.0]])
        with pytest.raises(DataError):
            read_returns_csv(_write(tmp_path, "r5.csv", "a,b\n1,2\n"))

    def test_empty_file(self, tmp_path):
        t = read_returns_csv(_write(tmp_path, "r6.csv", ""))
        assert len(t) == 0

    def test_crlf_endings(self, tmp_path):
        t = read_returns_csv(_write(tmp_path, "r7.csv", "1,2\r\n3,4\r\n"))
        assert_allclose(t.values, [[1.0, 2.0], [3.0, 4.0]])


class TestSubsample:
    def _dataset(self, n=10):
        rows = tuple(({1: float(i)}, 1.0 if i % 2 == 0 else -1.0) for i in range(n))
        return LabeledDataset(rows=rows, dim=1)

    def test_full_count_is_permutation(self):
        ds = self._dataset(8)
        out = subsample(ds, 8, seed=3)
        assert len(out) == 8
        assert sorted(r[0][1] for r in out.rows) == sorted(r[0][1] for r in ds.rows)

    def test_zero_count_is_empty(self):
        out = subsample(self._dataset(5), 0, seed=0)
        assert len(out) == 0

    def test_no_duplicates_and_seed_determinism(self):
        ds = self._dataset(20)
        a = subsample(ds, 12, seed=7)
        b = subsample(ds, 12, seed=7)
        assert [r[0][1] for r in a.rows] == [r[0][1] for r in b.rows]
        vals = [r[0][1] for r in a.rows]
        assert len(set(vals)) == len(vals)

    def test_count_out_of_range(self):
        with pytest.raises(DataError):
            subsample(self._dataset(4), 5, seed=0)
        with pytest.raises(DataError):
            subsample(self._dataset(4), -1, seed=0)

    def test_returns_table_subsample(self):
        t = ReturnsTable(values=np.arange(12.0).reshape(6, 2))
        out = subsample(t, 3, seed=1)
        assert out.values.shape == (3, 2)
        rows = {tuple(r) for r in out.values}
        assert rows <= {tuple(r) for r in t.values}

    def test_unsupported_type_rejected(self):
        with pytest.raises(DataError):
            subsample([1, 2, 3], 1, seed=0)
