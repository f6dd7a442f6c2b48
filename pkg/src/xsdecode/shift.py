"""Importance weights for covariate shift via a domain classifier.

The density ratio P_target(x) / P_source(x) is estimated with the classifier
trick: train a probabilistic classifier to distinguish source trials from
target trials (label 1 = target), then convert its posterior p(x) to a ratio
with the prior correction (n_source / n_target) * p / (1 - p). Only features
ever enter; class labels are not even part of the signature, which is what
makes the procedure legal when the target subject is unlabeled.
"""

import numpy as np

from .data import DesignMatrix, stratified_folds
from . import glm

__all__ = [
    "ImportanceWeights",
    "ShiftOptions",
    "estimate_weights",
    "true_gaussian_ratio",
]


class ShiftOptions:
    """Options for the density-ratio estimate.

    clip_lo, clip_hi bound the raw ratio before normalization (variance
    control). domain_lam is the L1 strength of the domain classifier; None
    means the solver default on the domain problem. space selects where the
    domain classifier runs when weights are used inside stacking:
    "second_level" (one probability per training subject, the default) or
    "original" (raw features).
    """

    SPACES = ("second_level", "original")

    def __init__(self, clip_lo=0.1, clip_hi=10.0, domain_lam=None,
                 space="second_level", n_folds=3):
        if not (0 < clip_lo <= clip_hi):
            raise ValueError("need 0 < clip_lo <= clip_hi")
        if space not in self.SPACES:
            raise ValueError("space must be one of %r" % (self.SPACES,))
        if n_folds < 2:
            raise ValueError("n_folds must be at least 2")
        self.clip_lo = float(clip_lo)
        self.clip_hi = float(clip_hi)
        self.domain_lam = domain_lam
        self.space = space
        self.n_folds = int(n_folds)


class ImportanceWeights:
    """Per-source-trial weights approximating the density ratio.

    weights has mean exactly 1 after normalization; raw_mean records the mean
    clipped ratio that the normalization divided by.
    """

    def __init__(self, weights, clip_lo, clip_hi, raw_mean):
        w = np.asarray(weights, dtype=np.float64)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        self.weights = w
        self.clip_lo = float(clip_lo)
        self.clip_hi = float(clip_hi)
        self.raw_mean = float(raw_mean)

    def __len__(self):
        return len(self.weights)

    def summary(self):
        w = self.weights
        return {
            "min": float(w.min()),
            "mean": float(w.mean()),
            "max": float(w.max()),
            "raw_mean": self.raw_mean,
        }


def _features(X, name):
    if isinstance(X, DesignMatrix):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("%s must be a non-empty 2-D matrix" % name)
    if not np.all(np.isfinite(X)):
        raise ValueError("%s contains non-finite values" % name)
    return X


def estimate_weights(X_source, X_target, options=None, seed=0):
    """Estimate importance weights for every source trial.

    A domain classifier (the toolkit's own L1 logistic regression) is trained
    to separate source from target; source-trial posteriors are produced
    out-of-fold (stratified folds over the combined domain dataset) so no
    trial's ratio comes from a model trained on that trial. The raw ratio
    (n_S/n_T) * p/(1-p) is clipped to [clip_lo, clip_hi] and normalized to
    mean one.

    Parameters
    ----------
    X_source, X_target : DesignMatrix or ndarray
        Feature matrices with the same column count. Labels are never taken.
    options : ShiftOptions or None
    seed : int
        Keys the fold shuffle.

    Returns
    -------
    ImportanceWeights
    """
    if options is None:
        options = ShiftOptions()
    Xs = _features(X_source, "X_source")
    Xt = _features(X_target, "X_target")
    if Xs.shape[1] != Xt.shape[1]:
        raise ValueError(
            "source and target dimensionality differ: %d vs %d"
            % (Xs.shape[1], Xt.shape[1])
        )
    n_s, n_t = Xs.shape[0], Xt.shape[0]

    if options.clip_lo == options.clip_hi:
        # clipping collapses the range; no classifier needed
        w = np.ones(n_s)
        return ImportanceWeights(w, options.clip_lo, options.clip_hi,
                                 options.clip_lo)

    X = np.vstack([Xs, Xt])
    dom = np.concatenate([np.zeros(n_s, dtype=np.int64),
                          np.ones(n_t, dtype=np.int64)])
    posterior = np.empty(X.shape[0])
    folds = stratified_folds(dom, options.n_folds, [int(seed), 7919])
    all_idx = np.arange(X.shape[0])
    for f in folds:
        tr = np.setdiff1d(all_idx, f, assume_unique=True)
        opts = None
        if options.domain_lam is not None:
            opts = glm.FitOptions(lam=options.domain_lam)
        model = glm.fit(X[tr], dom[tr], opts)
        posterior[f] = model.predict_proba(X[f])

    p = np.clip(posterior[:n_s], 1e-12, 1.0 - 1e-12)
    ratio = (n_s / n_t) * p / (1.0 - p)
    ratio = np.clip(ratio, options.clip_lo, options.clip_hi)
    raw_mean = float(ratio.mean())
    return ImportanceWeights(ratio / raw_mean, options.clip_lo,
                             options.clip_hi, raw_mean)


def true_gaussian_ratio(x, mu_s, sigma_s, mu_t, sigma_t):
    """Exact target/source density ratio for two 1-D Gaussians at x.

    Test oracle: the ratio N(x; mu_t, sigma_t) / N(x; mu_s, sigma_s).
    """
    if sigma_s <= 0 or sigma_t <= 0:
        raise ValueError("sigmas must be positive")
    x = np.asarray(x, dtype=np.float64)
    log_r = (
        np.log(sigma_s / sigma_t)
        - 0.5 * ((x - mu_t) / sigma_t) ** 2
        + 0.5 * ((x - mu_s) / sigma_s) ** 2
    )
    return np.exp(log_r)
