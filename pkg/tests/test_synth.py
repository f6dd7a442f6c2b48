"""Generator tests: determinism, balance, the Bayes oracle, shift knobs."""

import math

import numpy as np
import pytest

from xsdecode.synth import (SubjectParams, SynthConfig, bayes_accuracy,
                            generate, make_subject_params, shift_profile)


def _phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _config(**kw):
    base = dict(n_subjects=3, trials_per_subject=40, d=6, mu=2.0, sigma=1.0,
                gamma=0.2, tau=0.3, seed=0)
    base.update(kw)
    return SynthConfig(**base)


class TestConfigValidation:
    def test_odd_trials_rejected(self):
        with pytest.raises(ValueError):
            _config(trials_per_subject=41)

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            _config(sigma=-1.0)

    def test_zero_dim_rejected(self):
        with pytest.raises(ValueError):
            _config(d=0)


class TestGenerate:
    def test_bitwise_deterministic(self):
        cfg = _config()
        a, pa = generate(cfg)
        b, pb = generate(cfg)
        for sid in a.subject_ids:
            np.testing.assert_array_equal(a.subject(sid).features,
                                          b.subject(sid).features)
            np.testing.assert_array_equal(a.subject(sid).labels,
                                          b.subject(sid).labels)
        for x, y in zip(pa, pb):
            np.testing.assert_array_equal(x.A, y.A)
            np.testing.assert_array_equal(x.b, y.b)

    def test_subject_params_do_not_depend_on_roster_size(self):
        """Counter-based keying: subject 2's params are the same whether the
        roster has 3 subjects or 5."""
        small = make_subject_params(_config(n_subjects=3), 2)
        large = make_subject_params(_config(n_subjects=5), 2)
        np.testing.assert_array_equal(small.A, large.A)
        np.testing.assert_array_equal(small.b, large.b)

    def test_exact_class_balance(self):
        ds, _ = generate(_config(trials_per_subject=50))
        for sid in ds.subject_ids:
            labels = ds.subject(sid).labels
            assert int(labels.sum()) == 25

    def test_seed_changes_data(self):
        a, _ = generate(_config(seed=0))
        b, _ = generate(_config(seed=1))
        assert not np.array_equal(a.subject(0).features,
                                  b.subject(0).features)

    def test_no_shift_subjects_share_moments(self):
        """gamma = tau = 0: two subjects' empirical feature means agree to
        within 4 sigma / sqrt(n) per coordinate."""
        cfg = _config(n_subjects=2, trials_per_subject=400, gamma=0.0,
                      tau=0.0)
        ds, _ = generate(cfg)
        m0 = ds.subject(0).features.mean(axis=0)
        m1 = ds.subject(1).features.mean(axis=0)
        bound = 4.0 * cfg.sigma / math.sqrt(400 / 2)
        assert np.all(np.abs(m0 - m1) <= 2 * bound)


class TestBayesOracle:
    def test_identity_transform_known_value(self):
        """d=1, A=I, b=0, mu=2, sigma=1: accuracy is Phi(1)."""
        cfg = _config(d=1, mu=2.0, sigma=1.0, gamma=0.0, tau=0.0)
        params = SubjectParams(0, np.eye(1), np.zeros(1))
        assert bayes_accuracy(params, cfg) == pytest.approx(_phi(1.0),
                                                            abs=1e-12)

    def test_null_signal_is_half(self):
        cfg = _config(mu=0.0)
        params = make_subject_params(cfg, 0)
        assert bayes_accuracy(params, cfg) == pytest.approx(0.5, abs=1e-12)

    def test_invariant_across_gammas(self):
        """Mahalanobis distance cancels any invertible transform: the value
        equals Phi(mu / (2 sigma)) for 10 different gammas."""
        expect = _phi(2.0 / (2.0 * 1.0))
        for i, gamma in enumerate(np.linspace(0.0, 0.45, 10)):
            cfg = _config(gamma=float(gamma), seed=i)
            params = make_subject_params(cfg, 0)
            assert bayes_accuracy(params, cfg) == pytest.approx(expect,
                                                                abs=1e-9)

    def test_singular_transform_errors_with_condition(self):
        cfg = _config(d=2)
        params = SubjectParams(0, np.array([[1.0, 1.0], [1.0, 1.0]]),
                               np.zeros(2))
        with pytest.raises(ValueError, match="condition"):
            bayes_accuracy(params, cfg)


class TestShiftProfile:
    def test_matrix_shape_and_symmetry(self):
        ds, _ = generate(_config())
        prof = shift_profile(ds, seed=0)
        assert prof.shape == (3, 3)
        assert np.all(np.isnan(np.diag(prof)))
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_array_equal(prof[off], prof.T[off])

    def test_no_shift_sits_at_chance(self):
        cfg = _config(n_subjects=3, trials_per_subject=200, gamma=0.0,
                      tau=0.0)
        ds, _ = generate(cfg)
        prof = shift_profile(ds, seed=0)
        vals = prof[~np.isnan(prof)]
        assert np.all(np.abs(vals - 0.5) <= 0.07)

    def test_large_tau_separates_subjects(self):
        cfg = _config(n_subjects=3, trials_per_subject=100, tau=20.0)
        ds, _ = generate(cfg)
        prof = shift_profile(ds, seed=0)
        vals = prof[~np.isnan(prof)]
        assert np.all(vals >= 0.95)

    def test_mean_weakly_increases_with_tau(self):
        """Averaged over seeds, more mean-shift makes subjects easier to
        tell apart."""
        means = []
        for tau in (0.0, 0.5, 2.0):
            per_seed = []
            for seed in range(5):
                cfg = _config(n_subjects=3, trials_per_subject=60, d=4,
                              tau=tau, seed=seed)
                ds, _ = generate(cfg)
                per_seed.append(float(np.nanmean(shift_profile(ds, seed=0))))
            means.append(float(np.mean(per_seed)))
        assert means[0] <= means[1] + 1e-9
        assert means[1] <= means[2] + 1e-9

    def test_single_subject_errors(self):
        ds, _ = generate(_config(n_subjects=2))
        solo = ds.without([1])
        with pytest.raises(ValueError):
            shift_profile(solo)
