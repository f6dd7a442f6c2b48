"""Decoder dispatch tests: each method reduces to its building block."""

import numpy as np
import pytest

from xsdecode import glm
from xsdecode.data import MultiSubjectDataset, SubjectDataset, pool, seed_key
from xsdecode.decoders import (METHODS, DecoderSpec, fit_decoder,
                               predict_decoder)
from xsdecode.stacking import StackedModel, fit_stacked, predict_stacked


def _dataset(n_subjects, n=24, d=4, seed=0, signal=1.5):
    subs = []
    for sid in range(n_subjects):
        rng = np.random.default_rng(seed_key(seed, sid))
        y = np.arange(n) % 2
        X = rng.normal(size=(n, d))
        X[:, 0] += signal * y
        subs.append(SubjectDataset(sid, X, y))
    return MultiSubjectDataset(subs)


class TestSpecValidation:
    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            DecoderSpec("ensemble")

    def test_bad_lambda_mode(self):
        with pytest.raises(ValueError, match="lambda_mode"):
            DecoderSpec("pool", lambda_mode="auto")

    def test_bad_k(self):
        with pytest.raises(ValueError, match="k must"):
            DecoderSpec("sg", k=1)

    def test_method_list_is_fixed(self):
        assert METHODS == ("single", "pool", "sg", "sg_cs")


class TestDispatch:
    def test_pool_equals_plain_fit_on_stacked_rows(self):
        train = _dataset(3)
        dec = fit_decoder(DecoderSpec("pool"), train)
        dm, y = pool(train)
        direct = glm.fit(dm.X, y)
        np.testing.assert_array_equal(dec.model.beta, direct.beta)
        assert dec.model.intercept == direct.intercept

    def test_single_needs_exactly_one_subject(self):
        with pytest.raises(ValueError, match="exactly one"):
            fit_decoder(DecoderSpec("single"), _dataset(2))

    def test_sg_equals_fit_stacked(self):
        train = _dataset(3)
        dec = fit_decoder(DecoderSpec("sg", k=4, seed=3), train)
        assert isinstance(dec.model, StackedModel)
        direct = fit_stacked(train, k=4, seed=3)
        np.testing.assert_array_equal(dec.model.combiner.beta,
                                      direct.combiner.beta)

    def test_sg_cs_requires_target(self):
        with pytest.raises(ValueError,
                           match="SG\\+CS requires unlabeled target trials"):
            fit_decoder(DecoderSpec("sg_cs"), _dataset(3))

    def test_sg_cs_records_weight_summary(self):
        train = _dataset(3)
        target = np.random.default_rng(8).normal(size=(30, 4))
        dec = fit_decoder(DecoderSpec("sg_cs", k=4), train, target)
        assert dec.metadata["weights_summary"]["mean"] == pytest.approx(1.0)
        assert dec.metadata["lam"] == dec.model.combiner.lam

    def test_metadata_basics(self):
        train = _dataset(2)
        dec = fit_decoder(DecoderSpec("pool", seed=5), train)
        assert dec.metadata["subjects"] == [0, 1]
        assert dec.metadata["seed"] == 5
        assert dec.metadata["lambda_mode"] == "fixed"


class TestPredict:
    def test_empty_input_gives_empty_output(self):
        dec = fit_decoder(DecoderSpec("pool"), _dataset(2))
        labels, proba = predict_decoder(dec, np.empty((0, 4)))
        assert labels.shape == (0,)
        assert proba.shape == (0,)

    def test_labels_follow_probability_threshold(self):
        train = _dataset(3)
        dec = fit_decoder(DecoderSpec("sg", k=4), train)
        X = np.random.default_rng(2).normal(size=(50, 4))
        labels, proba = predict_decoder(dec, X)
        np.testing.assert_array_equal(labels, (proba >= 0.5).astype(int))

    def test_single_subject_sg_is_monotone_in_base_model(self):
        """A one-subject bank gives the combiner a single input; its
        predictions must be a monotone transform of the base probability."""
        train = _dataset(1, n=40, signal=2.0)
        dec = fit_decoder(DecoderSpec("sg", k=4), train)
        X = np.random.default_rng(4).normal(size=(60, 4))
        base = dec.model.bank.models[0].predict_proba(X)
        stacked = predict_stacked(dec.model, X)
        order = np.argsort(base)
        diffs = np.diff(stacked[order])
        assert np.all(diffs >= 0) or np.all(diffs <= 0)


class TestCvMode:
    def test_cv_mode_picks_grid_fraction(self):
        train = _dataset(2, n=40)
        dec = fit_decoder(DecoderSpec("pool", lambda_mode="cv", seed=1), train)
        dm, y = pool(train)
        fracs = [f * glm.lambda_max(dm.X, y) for f in glm.CV_GRID]
        assert any(abs(dec.metadata["lam"] - f) < 1e-12 for f in fracs)
