"""Frame-sequence container and dataset validation."""

import numpy as np
import pytest

from rankpool.errors import InvalidSequence
from rankpool.types import Dataset, FrameSequence, validate_dataset


def seq_of(matrix, id="s", label=None):
    return FrameSequence.from_matrix(np.asarray(matrix, dtype=float), id=id, label=label)


class TestFrameSequence:
    def test_from_matrix_round_trip(self):
        m = np.arange(12.0).reshape(4, 3)
        seq = seq_of(m, id="clip", label=1)
        assert seq.length == 4
        assert seq.dim == 3
        assert seq.id == "clip"
        assert seq.label == 1
        np.testing.assert_array_equal(seq.matrix, m)

    def test_single_frame(self):
        seq = seq_of([[7.0, -2.0]])
        assert seq.length == 1
        np.testing.assert_array_equal(seq.matrix, [[7.0, -2.0]])

    def test_empty_rejected(self):
        seq = FrameSequence(frames=(), id="empty")
        with pytest.raises(InvalidSequence):
            _ = seq.matrix

    def test_ragged_rejected(self):
        seq = FrameSequence(frames=(np.zeros(4), np.zeros(5)), id="ragged")
        with pytest.raises(InvalidSequence):
            _ = seq.matrix

    def test_non_finite_rejected(self):
        seq = seq_of([[1.0, np.nan]])
        with pytest.raises(InvalidSequence):
            _ = seq.matrix


class TestValidateDataset:
    def test_well_formed_dataset_has_no_violations(self):
        ds = Dataset(sequences=[seq_of([[1, 2], [3, 4]], id="a", label=0),
                                seq_of([[5, 6]], id="b", label=1)],
                     class_names=["x", "y"])
        assert validate_dataset(ds) == []

    def test_mixed_frame_dims_reported_with_id(self):
        bad = FrameSequence(frames=(np.zeros(4), np.zeros(5)), id="widths", label=0)
        ds = Dataset(sequences=[bad], class_names=["x"])
        violations = validate_dataset(ds)
        assert len(violations) == 1
        assert violations[0].sequence_id == "widths"

    def test_non_finite_frame_reported(self):
        ds = Dataset(sequences=[seq_of([[1.0, np.inf]], id="inf", label=0)],
                     class_names=["x"])
        violations = validate_dataset(ds)
        assert len(violations) == 1
        assert violations[0].sequence_id == "inf"

    def test_label_out_of_range(self):
        ds = Dataset(sequences=[seq_of([[1.0]], id="a", label=5)], class_names=["x"])
        assert len(validate_dataset(ds)) == 1

    def test_missing_labels_flagged_only_for_training(self):
        ds = Dataset(sequences=[seq_of([[1.0]], id="a")], class_names=["x"])
        assert validate_dataset(ds) == []
        assert len(validate_dataset(ds, for_training=True)) == 1

    def test_idempotent(self):
        ds = Dataset(sequences=[seq_of([[1.0, np.nan]], id="a", label=0)],
                     class_names=["x"])
        first = validate_dataset(ds)
        second = validate_dataset(ds)
        assert [str(v) for v in first] == [str(v) for v in second]


class TestDataset:
    def test_labels_fill_missing_with_minus_one(self):
        ds = Dataset(sequences=[seq_of([[1.0]], id="a", label=1),
                                seq_of([[1.0]], id="b")],
                     class_names=["x", "y"])
        np.testing.assert_array_equal(ds.labels(), [1, -1])
        assert ds.n_classes == 2
