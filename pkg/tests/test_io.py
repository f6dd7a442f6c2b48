"""File format and preprocessing tests."""

import numpy as np
import pytest

from xsdecode.data import MultiSubjectDataset, SubjectDataset, fingerprint
from xsdecode.io import (EpochedTensor, apply_stats, feature_stats,
                         load_dataset, load_subject_params, load_tensor,
                         read_manifest, save_dataset, save_subject_params,
                         save_tensor, standardize, vectorize)
from xsdecode.synth import SubjectParams


def _tensor(sid=0, n=6, c=4, t=10, seed=0):
    rng = np.random.default_rng(seed)
    return EpochedTensor(sid, rng.normal(size=(n, c, t)), np.arange(n) % 2)


def _dataset(n_subjects=3, n=12, d=5, seed=0):
    subs = []
    for sid in range(n_subjects):
        rng = np.random.default_rng((seed, sid))
        subs.append(SubjectDataset(sid, rng.normal(size=(n, d)),
                                   np.arange(n) % 2))
    return MultiSubjectDataset(subs)


class TestVectorize:
    def test_full_resolution_dimensionality(self):
        """306 channels x 100 timepoints concatenate to 30600 features."""
        tensor = EpochedTensor(0, np.zeros((10, 306, 100)),
                               np.arange(10) % 2)
        sub = vectorize(tensor, decimate=1)
        assert sub.d == 30600
        assert sub.n_trials == 10

    def test_channel_major_order(self):
        """feature index = channel * t' + timepoint, checked cell by cell."""
        n, c, t = 3, 4, 5
        data = np.arange(n * c * t, dtype=float).reshape(n, c, t)
        sub = vectorize(EpochedTensor(0, data, [0, 1, 0]), decimate=1)
        for trial in range(n):
            for ch in range(c):
                for tp in range(t):
                    assert sub.features[trial, ch * t + tp] == data[trial, ch, tp]

    def test_full_collapse_gives_channel_means(self):
        tensor = _tensor(t=10)
        sub = vectorize(tensor, decimate=10)
        assert sub.d == tensor.n_channels
        np.testing.assert_allclose(sub.features, tensor.data.mean(axis=2))

    def test_constant_tensor_survives_any_decimation(self):
        tensor = EpochedTensor(0, np.full((4, 3, 12), 2.5), [0, 1, 0, 1])
        for dec in (1, 2, 3, 4, 6, 12):
            sub = vectorize(tensor, decimate=dec)
            np.testing.assert_array_equal(sub.features, 2.5)

    def test_block_mean_values(self):
        data = np.zeros((2, 1, 4))
        data[0, 0] = [1.0, 3.0, 5.0, 7.0]
        data[1, 0] = [0.0, 0.0, 2.0, 4.0]
        sub = vectorize(EpochedTensor(0, data, [0, 1]), decimate=2)
        np.testing.assert_array_equal(sub.features, [[2.0, 6.0], [0.0, 3.0]])

    def test_remainder_dropped_with_warning(self):
        tensor = _tensor(t=10)
        with pytest.warns(UserWarning, match="trailing"):
            sub = vectorize(tensor, decimate=3)
        assert sub.d == tensor.n_channels * 3

    def test_oversized_decimate_errors(self):
        with pytest.raises(ValueError):
            vectorize(_tensor(t=4), decimate=5)

    def test_label_shape_mismatch_errors(self):
        with pytest.raises(ValueError):
            EpochedTensor(0, np.zeros((4, 2, 3)), [0, 1])


class TestStandardize:
    def test_train_side_moments(self):
        train = _dataset()
        std_train, _, mean, scale = standardize(train)
        stacked = np.concatenate([std_train.subject(s).features
                                  for s in std_train.subject_ids])
        np.testing.assert_allclose(stacked.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(stacked.std(axis=0), 1.0, atol=1e-10)

    def test_constant_feature_guard(self):
        X = np.column_stack([np.ones(8), np.arange(8, dtype=float)])
        sub = SubjectDataset(0, X, np.arange(8) % 2)
        train = MultiSubjectDataset([sub])
        std_train, _, mean, scale = standardize(train)
        assert scale[0] == 1.0
        np.testing.assert_array_equal(std_train.subject(0).features[:, 0], 0.0)

    def test_parameters_ignore_apply_to(self):
        """Statistics are a pure function of the train side."""
        train = _dataset(seed=1)
        other_a = _dataset(seed=2).subject(0)
        other_b = _dataset(seed=3).subject(0)
        _, _, m1, s1 = standardize(train, [other_a])
        _, _, m2, s2 = standardize(train, [other_b])
        np.testing.assert_array_equal(m1, m2)
        np.testing.assert_array_equal(s1, s2)

    def test_test_side_not_recentred(self):
        """Applying train statistics to a shifted test set leaves its mean
        visibly nonzero, unlike refitting on the test set."""
        train = _dataset(seed=4)
        shifted = SubjectDataset(9, train.subject(0).features + 5.0,
                                 train.subject(0).labels)
        _, (std_shifted,), mean, scale = standardize(train, [shifted])
        assert np.abs(std_shifted.features.mean(axis=0)).min() > 1.0
        refit_mean, refit_scale = feature_stats(shifted.features)
        refit = apply_stats(shifted.features, refit_mean, refit_scale)
        assert not np.allclose(std_shifted.features, refit)


class TestTensorFiles:
    def test_round_trip(self, tmp_path):
        tensor = _tensor(sid=3)
        path = tmp_path / "subject_3.tensor"
        save_tensor(tensor, path)
        back = load_tensor(path)
        assert back.subject_id == 3
        np.testing.assert_array_equal(back.data, tensor.data)
        np.testing.assert_array_equal(back.labels, tensor.labels)

    def test_shape_payload_mismatch_errors(self, tmp_path):
        tensor = _tensor()
        path = tmp_path / "t.tensor"
        save_tensor(tensor, path)
        raw = path.read_bytes()
        path.write_bytes(raw.replace(b"trials=6", b"trials=7"))
        with pytest.raises(ValueError, match="payload"):
            load_tensor(path)

    def test_wrong_magic_errors(self, tmp_path):
        path = tmp_path / "t.tensor"
        path.write_bytes(b"format=not-a-tensor\n\n")
        with pytest.raises(ValueError, match="not an epoched tensor"):
            load_tensor(path)


class TestDatasetFiles:
    def test_round_trip_preserves_fingerprint(self, tmp_path):
        ds = _dataset()
        digest = save_dataset(ds, tmp_path / "ds")
        back = load_dataset(tmp_path / "ds")
        assert fingerprint(back) == digest == fingerprint(ds)

    def test_factorization_recorded(self, tmp_path):
        ds = _dataset(d=6)
        save_dataset(ds, tmp_path / "ds", channels=2, timepoints=3)
        manifest = read_manifest(tmp_path / "ds")
        assert manifest.channels == 2
        assert manifest.timepoints == 3

    def test_bad_factorization_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_dataset(_dataset(d=5), tmp_path / "ds", channels=2,
                         timepoints=3)

    def test_tampered_trial_count_names_subject(self, tmp_path):
        save_dataset(_dataset(), tmp_path / "ds")
        mpath = tmp_path / "ds" / "manifest.txt"
        mpath.write_text(mpath.read_text().replace("subject_1_trials=12",
                                                   "subject_1_trials=11"))
        with pytest.raises(ValueError, match="subject 1"):
            load_dataset(tmp_path / "ds")

    def test_missing_file_names_subject(self, tmp_path):
        save_dataset(_dataset(), tmp_path / "ds")
        (tmp_path / "ds" / "subject_2.bin").unlink()
        with pytest.raises(FileNotFoundError, match="subject 2"):
            load_dataset(tmp_path / "ds")

    def test_fingerprint_tamper_warns(self, tmp_path):
        ds = _dataset()
        digest = save_dataset(ds, tmp_path / "ds")
        mpath = tmp_path / "ds" / "manifest.txt"
        mpath.write_text(mpath.read_text().replace(digest, "0" * 64))
        with pytest.warns(UserWarning, match="fingerprint"):
            load_dataset(tmp_path / "ds")


class TestSubjectParamsFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        params = [SubjectParams(i, np.eye(3) + 0.1 * rng.normal(size=(3, 3)),
                                rng.normal(size=3)) for i in (0, 2)]
        save_subject_params(params, tmp_path / "p")
        back = load_subject_params(tmp_path / "p", [0, 2])
        for orig, got in zip(params, back):
            np.testing.assert_allclose(got.A, orig.A, rtol=1e-15)
            np.testing.assert_allclose(got.b, orig.b, rtol=1e-15)
